#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "tumorfab/config.hpp"

namespace tumorfab {

/// Line-delimited JSON, one record per case. The fields "image", "mask" and
/// "brain" hold file paths, stored relative to the manifest's directory.
class Manifest {
 public:
  static Manifest read(const std::filesystem::path& path);
  /// Writes every record, rewriting path fields relative to `path`'s directory.
  void write(const std::filesystem::path& path) const;

  /// Records with path fields resolved to absolute paths.
  std::vector<Json>& records() { return records_; }
  const std::vector<Json>& records() const { return records_; }
  size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  void add(Json record) { records_.push_back(std::move(record)); }

  /// Path-valued field of record `n`; ValidationError if it is missing.
  std::filesystem::path path(size_t n, const std::string& field) const;
  bool has(size_t n, const std::string& field) const;
  std::string id(size_t n) const;

 private:
  std::filesystem::path source_;
  std::vector<Json> records_;
};

/// FNV-1a of a file's bytes, hex encoded.
std::string file_hash(const std::filesystem::path& path);

}  // namespace tumorfab
