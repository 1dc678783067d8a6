#pragma once

#include <array>
#include <vector>

#include "tumorfab/volume.hpp"

namespace tumorfab {

/// Default ROI blur width (voxels).
inline constexpr double kRoiBlurSigma = 2.0;
/// Gaussian support is truncated at this many standard deviations.
inline constexpr double kGaussianTruncate = 4.0;

/// Normalized 1D Gaussian taps of radius round(truncate * sigma).
std::vector<double> gaussian_kernel(double sigma, double truncate = kGaussianTruncate);

/// Separable Gaussian filter of every channel with mirror ("d c b a | a b c d") borders.
MriVolume gaussian_filter(const MriVolume& volume, double sigma);

/// Filters the whole volume, then keeps the filtered values only inside `roi`.
/// Voxels outside the ROI are copied bit for bit.
MriVolume roi_blur(const MriVolume& volume, const BrainMask& roi, double sigma = kRoiBlurSigma);

/// Binary ROI (labels > 0) of a tumor mask.
BrainMask roi_of(const SegMask& mask);

/// Per-class affine intensity map v -> gain * v + offset, indexed by label 1..3.
struct IntensityTransform {
  struct Affine1D {
    double gain = 1.0;
    double offset = 0.0;
    friend bool operator==(const Affine1D&, const Affine1D&) = default;
  };
  std::array<Affine1D, 3> classes{};  // NCR, ED, ET

  Affine1D& operator[](Label label) { return classes[static_cast<size_t>(label) - 1]; }
  const Affine1D& operator[](Label label) const { return classes[static_cast<size_t>(label) - 1]; }

  static IntensityTransform identity() { return {}; }
  static IntensityTransform uniform(double gain, double offset);
  void validate() const;
  friend bool operator==(const IntensityTransform&, const IntensityTransform&) = default;
};

/// Applies the class's affine map to every voxel labelled with a tumor class and
/// clamps to [-1, 1]. Background voxels are untouched.
MriVolume apply_intensity_transform(const MriVolume& volume, const SegMask& mask, const IntensityTransform& transform);

/// Coarse synthesis: intensity transform of the ROI-blurred healthy scan.
LabeledVolume fabricate_coarse(const MriVolume& healthy, const SegMask& mask, const IntensityTransform& transform,
                            double sigma = kRoiBlurSigma);

}  // namespace tumorfab
