#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace tumorfab {

/// Spatial extent (height, width, depth). Depth is the fastest-varying axis in memory.
struct Dims3 {
  int64_t h = 0;
  int64_t w = 0;
  int64_t d = 0;

  int64_t voxels() const { return h * w * d; }
  int64_t operator[](int axis) const { return axis == 0 ? h : (axis == 1 ? w : d); }
  friend bool operator==(const Dims3&, const Dims3&) = default;
};

std::string to_string(const Dims3& dims);

/// Voxel-to-world information carried alongside every grid. Stored in single
/// precision so that it survives a NIfTI header round trip unchanged.
struct Geometry {
  std::array<float, 3> spacing{1.0f, 1.0f, 1.0f};
  std::array<std::array<float, 4>, 4> affine{{{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}}};

  static Geometry isotropic(float mm);
  friend bool operator==(const Geometry&, const Geometry&) = default;
};

/// Tumor label taxonomy (BraTS 2023 codes).
enum class Label : uint8_t { Background = 0, NCR = 1, ED = 2, ET = 3 };

inline constexpr std::array<Label, 3> kTumorClasses{Label::NCR, Label::ED, Label::ET};
inline constexpr int kLabelCount = 4;

const char* label_name(Label label);

/// Multi-channel 3D scalar field, laid out (channel, h, w, d) row-major.
class MriVolume {
 public:
  MriVolume() = default;
  MriVolume(int64_t channels, Dims3 dims, Geometry geometry = {}, float fill = 0.0f);

  int64_t channels() const { return channels_; }
  const Dims3& dims() const { return dims_; }
  const Geometry& geometry() const { return geometry_; }
  Geometry& geometry() { return geometry_; }

  int64_t index(int64_t i, int64_t j, int64_t k) const { return (i * dims_.w + j) * dims_.d + k; }

  float& at(int64_t c, int64_t i, int64_t j, int64_t k) {
    return data_[static_cast<size_t>(c * dims_.voxels() + index(i, j, k))];
  }
  float at(int64_t c, int64_t i, int64_t j, int64_t k) const {
    return data_[static_cast<size_t>(c * dims_.voxels() + index(i, j, k))];
  }

  std::span<float> channel(int64_t c);
  std::span<const float> channel(int64_t c) const;

  std::vector<float>& data() { return data_; }
  const std::vector<float>& data() const { return data_; }

  bool empty() const { return data_.empty(); }

 private:
  int64_t channels_ = 0;
  Dims3 dims_{};
  Geometry geometry_{};
  std::vector<float> data_;
};

/// Integer label field over {0,1,2,3}.
class SegMask {
 public:
  SegMask() = default;
  explicit SegMask(Dims3 dims, Geometry geometry = {}, uint8_t fill = 0);

  const Dims3& dims() const { return dims_; }
  const Geometry& geometry() const { return geometry_; }
  Geometry& geometry() { return geometry_; }

  int64_t index(int64_t i, int64_t j, int64_t k) const { return (i * dims_.w + j) * dims_.d + k; }
  uint8_t& at(int64_t i, int64_t j, int64_t k) { return labels_[static_cast<size_t>(index(i, j, k))]; }
  uint8_t at(int64_t i, int64_t j, int64_t k) const { return labels_[static_cast<size_t>(index(i, j, k))]; }

  std::vector<uint8_t>& labels() { return labels_; }
  const std::vector<uint8_t>& labels() const { return labels_; }

  /// Number of non-background voxels.
  int64_t tumor_voxels() const;
  int64_t count(Label label) const;
  /// Sorted distinct label values present.
  std::vector<uint8_t> label_set() const;

  friend bool operator==(const SegMask& a, const SegMask& b) {
    return a.dims_ == b.dims_ && a.labels_ == b.labels_;
  }

 private:
  Dims3 dims_{};
  Geometry geometry_{};
  std::vector<uint8_t> labels_;
};

/// Binary brain-support mask.
class BrainMask {
 public:
  BrainMask() = default;
  explicit BrainMask(Dims3 dims, bool fill = false);

  const Dims3& dims() const { return dims_; }
  int64_t index(int64_t i, int64_t j, int64_t k) const { return (i * dims_.w + j) * dims_.d + k; }
  bool at(int64_t i, int64_t j, int64_t k) const { return mask_[static_cast<size_t>(index(i, j, k))] != 0; }
  void set(int64_t i, int64_t j, int64_t k, bool v) { mask_[static_cast<size_t>(index(i, j, k))] = v ? 1 : 0; }

  std::vector<uint8_t>& values() { return mask_; }
  const std::vector<uint8_t>& values() const { return mask_; }
  int64_t count() const;

  friend bool operator==(const BrainMask&, const BrainMask&) = default;

 private:
  Dims3 dims_{};
  std::vector<uint8_t> mask_;
};

/// An image with its label mask on the same grid.
struct LabeledVolume {
  MriVolume image;
  SegMask mask;
};

/// Throws ValidationError naming `what` when the two grids differ.
void require_same_dims(const Dims3& a, const Dims3& b, const char* what);

/// Throws ValidationError if any label is outside {0,1,2,3}.
void validate_labels(const SegMask& mask);

}  // namespace tumorfab
