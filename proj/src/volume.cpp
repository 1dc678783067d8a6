#include "tumorfab/volume.hpp"

#include <algorithm>
#include <sstream>

#include "tumorfab/error.hpp"

namespace tumorfab {

std::string to_string(const Dims3& dims) {
  std::ostringstream os;
  os << dims.h << "x" << dims.w << "x" << dims.d;
  return os.str();
}

Geometry Geometry::isotropic(float mm) {
  Geometry g;
  g.spacing = {mm, mm, mm};
  for (int a = 0; a < 3; ++a) g.affine[a][a] = mm;
  return g;
}

const char* label_name(Label label) {
  switch (label) {
    case Label::Background: return "background";
    case Label::NCR: return "NCR";
    case Label::ED: return "ED";
    case Label::ET: return "ET";
  }
  return "unknown";
}

MriVolume::MriVolume(int64_t channels, Dims3 dims, Geometry geometry, float fill)
    : channels_(channels), dims_(dims), geometry_(geometry) {
  if (channels < 1) throw ValidationError("volume needs at least one channel");
  if (dims.h < 1 || dims.w < 1 || dims.d < 1) throw ValidationError("volume dims must be positive, got " + to_string(dims));
  data_.assign(static_cast<size_t>(channels * dims.voxels()), fill);
}

std::span<float> MriVolume::channel(int64_t c) {
  return std::span<float>(data_).subspan(static_cast<size_t>(c * dims_.voxels()), static_cast<size_t>(dims_.voxels()));
}

std::span<const float> MriVolume::channel(int64_t c) const {
  return std::span<const float>(data_).subspan(static_cast<size_t>(c * dims_.voxels()),
                                               static_cast<size_t>(dims_.voxels()));
}

SegMask::SegMask(Dims3 dims, Geometry geometry, uint8_t fill) : dims_(dims), geometry_(geometry) {
  if (dims.h < 1 || dims.w < 1 || dims.d < 1) throw ValidationError("mask dims must be positive, got " + to_string(dims));
  labels_.assign(static_cast<size_t>(dims.voxels()), fill);
}

int64_t SegMask::tumor_voxels() const {
  return std::count_if(labels_.begin(), labels_.end(), [](uint8_t v) { return v != 0; });
}

int64_t SegMask::count(Label label) const {
  const auto v = static_cast<uint8_t>(label);
  return std::count(labels_.begin(), labels_.end(), v);
}

std::vector<uint8_t> SegMask::label_set() const {
  std::array<bool, 256> seen{};
  for (uint8_t v : labels_) seen[v] = true;
  std::vector<uint8_t> out;
  for (int v = 0; v < 256; ++v)
    if (seen[static_cast<size_t>(v)]) out.push_back(static_cast<uint8_t>(v));
  return out;
}

BrainMask::BrainMask(Dims3 dims, bool fill) : dims_(dims) {
  mask_.assign(static_cast<size_t>(dims.voxels()), fill ? 1 : 0);
}

int64_t BrainMask::count() const { return std::count(mask_.begin(), mask_.end(), uint8_t{1}); }

void require_same_dims(const Dims3& a, const Dims3& b, const char* what) {
  if (!(a == b)) throw ValidationError(std::string(what) + ": dimension mismatch " + to_string(a) + " vs " + to_string(b));
}

void validate_labels(const SegMask& mask) {
  for (uint8_t v : mask.labels())
    if (v >= kLabelCount) throw ValidationError("mask contains label " + std::to_string(v) + " outside {0,1,2,3}");
}

}  // namespace tumorfab
