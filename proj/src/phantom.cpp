#include "tumorfab/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>

#include "tumorfab/error.hpp"
#include "tumorfab/rng.hpp"

namespace tumorfab {
namespace {

constexpr int kTextureWaves = 4;

struct Wave {
  std::array<double, 3> direction;
  double phase;
};

std::array<double, 3> brain_center(const Dims3& d) {
  return {(d.h - 1) / 2.0, (d.w - 1) / 2.0, (d.d - 1) / 2.0};
}

double ellipsoid_radius2(const std::array<double, 3>& p_mm, const std::array<double, 3>& radii) {
  double s = 0.0;
  for (int a = 0; a < 3; ++a) s += (p_mm[a] / radii[a]) * (p_mm[a] / radii[a]);
  return s;
}

bool strictly_inside(const std::array<double, 3>& inner, const std::array<double, 3>& outer) {
  for (int a = 0; a < 3; ++a)
    if (!(inner[a] < outer[a])) return false;
  return true;
}

struct FnvHasher {
  uint64_t h = 1469598103934665603ULL;
  template <typename T>
  void add(const T& v) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &v, sizeof(T));
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 1099511628211ULL;
    }
  }
};

}  // namespace

void PhantomSpec::validate() const {
  if (dims.h < 32 || dims.w < 32 || dims.d < 32) throw ValidationError("phantom dims must be >= 32 per axis");
  if (!(spacing_mm > 0.0)) throw ValidationError("phantom spacing must be positive");
  for (double a : brain_axes_mm)
    if (!(a > 0.0)) throw ValidationError("phantom brain axes must be positive");
  if (!(noise_sigma >= 0.0)) throw ValidationError("phantom noise_sigma must be >= 0");
  if (!(texture_scale > 0.0)) throw ValidationError("phantom texture_scale must be positive");
  for (double r : tumor.et_radii_mm)
    if (!(r > 0.0)) throw ValidationError("phantom tumor radii must be positive");
  if (!strictly_inside(tumor.ncr_radii_mm, tumor.ed_radii_mm) || !strictly_inside(tumor.et_radii_mm, tumor.ncr_radii_mm))
    throw ValidationError("phantom tumor radii must be strictly nested: ED > NCR > ET");
}

uint64_t PhantomSpec::hash() const {
  FnvHasher f;
  f.add(dims.h);
  f.add(dims.w);
  f.add(dims.d);
  f.add(spacing_mm);
  for (double v : brain_axes_mm) f.add(v);
  f.add(base_intensity);
  f.add(texture_amplitude);
  f.add(texture_scale);
  f.add(noise_sigma);
  for (const auto* arr : {&tumor.center_offset_mm, &tumor.ed_radii_mm, &tumor.ncr_radii_mm, &tumor.et_radii_mm})
    for (double v : *arr) f.add(v);
  f.add(tumor.ncr_offset);
  f.add(tumor.ed_offset);
  f.add(tumor.et_offset);
  f.add(seed);
  return f.h;
}

double ellipsoid_voxels(const std::array<double, 3>& radii_mm, double spacing_mm) {
  const double s3 = spacing_mm * spacing_mm * spacing_mm;
  return 4.0 / 3.0 * std::numbers::pi * radii_mm[0] * radii_mm[1] * radii_mm[2] / s3;
}

MriVolume generate_phantom_brain(const PhantomSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  std::array<Wave, kTextureWaves> waves{};
  for (auto& w : waves) {
    for (double& c : w.direction) c = rng.uniform(-1.0, 1.0);
    w.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  }

  const Dims3& d = spec.dims;
  MriVolume vol(1, d, Geometry::isotropic(static_cast<float>(spec.spacing_mm)));
  const auto center = brain_center(d);
  const double two_pi_over_scale = 2.0 * std::numbers::pi / spec.texture_scale;
  for (int64_t i = 0; i < d.h; ++i)
    for (int64_t j = 0; j < d.w; ++j)
      for (int64_t k = 0; k < d.d; ++k) {
        const std::array<double, 3> p{(i - center[0]) * spec.spacing_mm, (j - center[1]) * spec.spacing_mm,
                                      (k - center[2]) * spec.spacing_mm};
        if (ellipsoid_radius2(p, spec.brain_axes_mm) > 1.0) continue;
        double field = 0.0;
        for (const auto& w : waves) {
          const double dot = w.direction[0] * p[0] + w.direction[1] * p[1] + w.direction[2] * p[2];
          field += std::cos(two_pi_over_scale * dot + w.phase);
        }
        double v = spec.base_intensity + spec.texture_amplitude * field / kTextureWaves;
        if (spec.noise_sigma > 0.0) v += spec.noise_sigma * rng.normal();
        vol.at(0, i, j, k) = static_cast<float>(std::max(v, 1.0));
      }
  return vol;
}

LabeledVolume generate_phantom_tumor_case(const PhantomSpec& spec) {
  MriVolume image = generate_phantom_brain(spec);
  const Dims3& d = spec.dims;
  SegMask mask(d, image.geometry());
  const auto center = brain_center(d);
  const auto& t = spec.tumor;
  for (int64_t i = 0; i < d.h; ++i)
    for (int64_t j = 0; j < d.w; ++j)
      for (int64_t k = 0; k < d.d; ++k) {
        const std::array<double, 3> p{(i - center[0]) * spec.spacing_mm - t.center_offset_mm[0],
                                      (j - center[1]) * spec.spacing_mm - t.center_offset_mm[1],
                                      (k - center[2]) * spec.spacing_mm - t.center_offset_mm[2]};
        Label label = Label::Background;
        double offset = 0.0;
        if (ellipsoid_radius2(p, t.et_radii_mm) <= 1.0) {
          label = Label::ET;
          offset = t.et_offset;
        } else if (ellipsoid_radius2(p, t.ncr_radii_mm) <= 1.0) {
          label = Label::NCR;
          offset = t.ncr_offset;
        } else if (ellipsoid_radius2(p, t.ed_radii_mm) <= 1.0) {
          label = Label::ED;
          offset = t.ed_offset;
        } else {
          continue;
        }
        float& v = image.at(0, i, j, k);
        if (v == 0.0f) throw ValidationError("phantom tumor is not contained in the brain ellipsoid");
        v = static_cast<float>(std::max(static_cast<double>(v) + offset, 1.0));
        mask.at(i, j, k) = static_cast<uint8_t>(label);
      }
  return {std::move(image), std::move(mask)};
}

PhantomSpec jittered_spec(const PhantomSpec& base, uint64_t seed) {
  Rng rng(derive_seed(seed, {0x7068616eULL}));
  PhantomSpec s = base;
  s.seed = seed;
  for (double& a : s.brain_axes_mm) a *= rng.uniform(0.94, 1.04);
  const double size = rng.uniform(0.85, 1.15);
  for (auto* radii : {&s.tumor.ed_radii_mm, &s.tumor.ncr_radii_mm, &s.tumor.et_radii_mm})
    for (double& r : *radii) r *= size;
  for (double& c : s.tumor.center_offset_mm) c += rng.uniform(-3.0, 3.0);

  // Keep the tumor inside the brain: in brain-normalized coordinates the tumor
  // lies within |c/A| + max(r/A), so pull the center in, then shrink if needed.
  constexpr double kMargin = 0.9;
  double centre = 0.0, reach = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double A = s.brain_axes_mm[a];
    centre += std::pow(s.tumor.center_offset_mm[a] / A, 2);
    reach = std::max(reach, s.tumor.ed_radii_mm[a] / A);
  }
  centre = std::sqrt(centre);
  if (centre + reach > kMargin) {
    const double keep = std::max(0.0, kMargin - reach) / centre;
    for (double& c : s.tumor.center_offset_mm) c *= keep;
    if (reach > kMargin)
      for (auto* radii : {&s.tumor.ed_radii_mm, &s.tumor.ncr_radii_mm, &s.tumor.et_radii_mm})
        for (double& r : *radii) r *= kMargin / reach;
  }
  return s;
}

}  // namespace tumorfab
