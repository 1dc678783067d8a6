#include "tumorfab/manifest.hpp"

#include <fstream>
#include <sstream>

#include "tumorfab/error.hpp"

namespace tumorfab {
namespace {

constexpr const char* kPathFields[] = {"image", "mask", "brain"};

}  // namespace

Manifest Manifest::read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read manifest " + path.string());
  Manifest m;
  m.source_ = path;
  const auto dir = std::filesystem::absolute(path).parent_path();
  std::string line;
  int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json rec = Json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.is_object())
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": not a JSON object");
    for (const char* f : kPathFields)
      if (rec.contains(f)) {
        if (!rec[f].is_string()) throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": '" + f + "' must be a path");
        std::filesystem::path p = rec[f].get<std::string>();
        rec[f] = (p.is_absolute() ? p : dir / p).lexically_normal().string();
      }
    m.records_.push_back(std::move(rec));
  }
  return m;
}

void Manifest::write(const std::filesystem::path& path) const {
  const auto dir = std::filesystem::absolute(path).parent_path();
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest " + path.string());
  for (Json rec : records_) {
    for (const char* f : kPathFields)
      if (rec.contains(f)) {
        const std::filesystem::path p = std::filesystem::absolute(rec[f].get<std::string>()).lexically_normal();
        rec[f] = p.lexically_relative(dir).generic_string();
      }
    out << rec.dump() << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

bool Manifest::has(size_t n, const std::string& field) const { return records_.at(n).contains(field); }

std::filesystem::path Manifest::path(size_t n, const std::string& field) const {
  const auto& rec = records_.at(n);
  if (!rec.contains(field))
    throw ValidationError("manifest " + source_.string() + " record " + std::to_string(n) + " has no '" + field + "'");
  return rec[field].get<std::string>();
}

std::string Manifest::id(size_t n) const {
  const auto& rec = records_.at(n);
  if (rec.contains("id") && rec["id"].is_string()) return rec["id"].get<std::string>();
  return std::to_string(n);
}

std::string file_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return hex64(fnv1a(buf.str()));
}

}  // namespace tumorfab
