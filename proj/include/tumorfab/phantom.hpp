#pragma once

#include <array>
#include <cstdint>

#include "tumorfab/coarse_synth.hpp"
#include "tumorfab/volume.hpp"

namespace tumorfab {

/// Nested-ellipsoid tumor: edema outermost, necrotic core inside it, enhancing
/// tumor innermost. Radii are semi-axes in millimetres.
struct PhantomTumorSpec {
  std::array<double, 3> center_offset_mm{6.0, -4.0, 3.0};
  std::array<double, 3> ed_radii_mm{11.0, 10.0, 9.0};
  std::array<double, 3> ncr_radii_mm{7.0, 6.5, 6.0};
  std::array<double, 3> et_radii_mm{4.0, 3.5, 3.5};
  double ncr_offset = -250.0;
  double ed_offset = 120.0;
  double et_offset = 300.0;
};

struct PhantomSpec {
  Dims3 dims{64, 64, 64};
  double spacing_mm = 1.0;
  std::array<double, 3> brain_axes_mm{26.0, 28.0, 24.0};
  double base_intensity = 600.0;
  double texture_amplitude = 120.0;
  /// Wavelength (mm) of the smooth intensity field; larger is smoother.
  double texture_scale = 16.0;
  double noise_sigma = 10.0;
  PhantomTumorSpec tumor{};
  uint64_t seed = 0;

  void validate() const;
  /// Stable hash of every field, recorded in fixture manifests.
  uint64_t hash() const;
};

/// Skull-stripped phantom: ellipsoidal brain with a smooth intensity field plus
/// Gaussian noise, exact zero background, all brain voxels >= 1.
MriVolume generate_phantom_brain(const PhantomSpec& spec);

/// Phantom brain with an implanted nested-ellipsoid tumor and its label mask.
LabeledVolume generate_phantom_tumor_case(const PhantomSpec& spec);

/// Per-case variation of a base spec (brain axes, tumor placement and size),
/// drawn deterministically from `seed`. The seed is stored in the result and
/// the tumor is kept inside the brain ellipsoid.
PhantomSpec jittered_spec(const PhantomSpec& base, uint64_t seed);

/// Analytic ellipsoid volume in voxels.
double ellipsoid_voxels(const std::array<double, 3>& radii_mm, double spacing_mm);

}  // namespace tumorfab
