#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace tumorfab {

/// Little-endian record writer used by the weight and checkpoint formats.
class BinaryWriter {
 public:
  explicit BinaryWriter(const std::filesystem::path& path);

  void bytes(const void* data, size_t n);
  template <typename T>
  void pod(const T& v) {
    bytes(&v, sizeof(T));
  }
  void string(const std::string& s);
  /// name, ndim, shape..., float32 payload
  void tensor(const std::string& name, const torch::Tensor& t);
  void close();

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::filesystem::path& path);

  void bytes(void* data, size_t n);
  template <typename T>
  T pod() {
    T v{};
    bytes(&v, sizeof(T));
    return v;
  }
  std::string string();
  /// Reads a named tensor and copies it into `dst`, checking name and shape.
  void tensor_into(const std::string& expected_name, torch::Tensor& dst);
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
};

/// Parameters followed by buffers, in registration order.
std::vector<std::pair<std::string, torch::Tensor>> module_state(const torch::nn::Module& module);

void write_module(BinaryWriter& out, const torch::nn::Module& module);
void read_module(BinaryReader& in, torch::nn::Module& module);

/// FNV-1a over the raw bytes of every parameter and buffer.
uint64_t module_checksum(const torch::nn::Module& module);

}  // namespace tumorfab
