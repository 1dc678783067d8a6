#include "tumorfab/binary_io.hpp"

#include "tumorfab/error.hpp"

namespace tumorfab {

BinaryWriter::BinaryWriter(const std::filesystem::path& path) : path_(path), out_(path, std::ios::binary) {
  if (!out_) throw IoError("cannot write " + path.string());
}

void BinaryWriter::bytes(const void* data, size_t n) {
  out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out_) throw IoError("write failed: " + path_.string());
}

void BinaryWriter::string(const std::string& s) {
  pod(static_cast<uint32_t>(s.size()));
  bytes(s.data(), s.size());
}

void BinaryWriter::tensor(const std::string& name, const torch::Tensor& t) {
  string(name);
  const auto c = t.detach().to(torch::kFloat32).contiguous();
  pod(static_cast<uint32_t>(c.dim()));
  for (int64_t s : c.sizes()) pod(s);
  bytes(c.data_ptr<float>(), static_cast<size_t>(c.numel()) * sizeof(float));
}

void BinaryWriter::close() {
  out_.close();
  if (!out_) throw IoError("write failed: " + path_.string());
}

BinaryReader::BinaryReader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
  if (!std::filesystem::exists(path)) throw IoError("no such file: " + path.string());
  if (!in_) throw IoError("cannot open " + path.string());
}

void BinaryReader::bytes(void* data, size_t n) {
  in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
  if (!in_) throw IoError("truncated file: " + path_.string());
}

std::string BinaryReader::string() {
  const auto n = pod<uint32_t>();
  if (n > (1u << 20)) throw IoError("corrupt string length in " + path_.string());
  std::string s(n, '\0');
  bytes(s.data(), n);
  return s;
}

void BinaryReader::tensor_into(const std::string& expected_name, torch::Tensor& dst) {
  const std::string name = string();
  if (name != expected_name)
    throw IoError("unexpected tensor '" + name + "' (wanted '" + expected_name + "') in " + path_.string());
  const auto ndim = pod<uint32_t>();
  if (ndim > 8) throw IoError("corrupt tensor rank in " + path_.string());
  std::vector<int64_t> shape(ndim);
  for (auto& s : shape) s = pod<int64_t>();
  if (shape != dst.sizes().vec())
    throw IoError("shape mismatch for '" + name + "' in " + path_.string());
  auto tmp = torch::empty(shape, torch::kFloat32);
  bytes(tmp.data_ptr<float>(), static_cast<size_t>(tmp.numel()) * sizeof(float));
  torch::NoGradGuard no_grad;
  dst.copy_(tmp);
}

std::vector<std::pair<std::string, torch::Tensor>> module_state(const torch::nn::Module& module) {
  std::vector<std::pair<std::string, torch::Tensor>> out;
  for (const auto& p : module.named_parameters(true)) out.emplace_back(p.key(), p.value());
  for (const auto& b : module.named_buffers(true)) out.emplace_back(b.key(), b.value());
  return out;
}

void write_module(BinaryWriter& out, const torch::nn::Module& module) {
  const auto state = module_state(module);
  out.pod(static_cast<uint64_t>(state.size()));
  for (const auto& [name, t] : state) out.tensor(name, t);
}

void read_module(BinaryReader& in, torch::nn::Module& module) {
  auto state = module_state(module);
  const auto n = in.pod<uint64_t>();
  if (n != state.size()) throw IoError("tensor count mismatch in " + in.path().string());
  for (auto& [name, t] : state) in.tensor_into(name, t);
}

uint64_t module_checksum(const torch::nn::Module& module) {
  uint64_t h = 1469598103934665603ULL;
  for (const auto& [name, t] : module_state(module)) {
    const auto c = t.detach().contiguous();
    const auto* p = static_cast<const unsigned char*>(c.data_ptr());
    const size_t n = static_cast<size_t>(c.numel()) * c.element_size();
    for (size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
  }
  return h;
}

}  // namespace tumorfab
