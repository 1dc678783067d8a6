#include "tumorfab/mask_forge.hpp"

#include <cmath>

#include "tumorfab/error.hpp"

namespace tumorfab {

void MaskAugmentConfig::validate() const {
  if (!(scale_min > 0.0) || !(scale_max >= scale_min))
    throw ValidationError("mask_augment.scale_range must satisfy 0 < min <= max");
  if (!(shift_range_mm >= 0.0)) throw ValidationError("mask_augment.shift_range_mm must be >= 0");
  if (!(combine_probability >= 0.0 && combine_probability <= 1.0))
    throw ValidationError("mask_augment.combine_probability must lie in [0, 1]");
  if (min_tumor_voxels < 1) throw ValidationError("mask_augment.min_tumor_voxels must be >= 1");
  if (max_attempts < 1) throw ValidationError("mask_augment.max_attempts must be >= 1");
}

std::array<double, 3> tumor_centroid(const SegMask& mask) {
  const Dims3& d = mask.dims();
  double si = 0, sj = 0, sk = 0;
  int64_t n = 0;
  for (int64_t i = 0; i < d.h; ++i)
    for (int64_t j = 0; j < d.w; ++j)
      for (int64_t k = 0; k < d.d; ++k)
        if (mask.at(i, j, k) != 0) {
          si += static_cast<double>(i);
          sj += static_cast<double>(j);
          sk += static_cast<double>(k);
          ++n;
        }
  if (n == 0) throw ValidationError("tumor mask is empty");
  return {si / n, sj / n, sk / n};
}

SegMask scale_mask(const SegMask& mask, double factor) {
  if (!(factor > 0.0) || !std::isfinite(factor)) throw ValidationError("scale factor must be positive");
  const auto center = tumor_centroid(mask);
  if (factor == 1.0) return mask;
  const Dims3& d = mask.dims();
  SegMask out(d, mask.geometry());
  const double inv = 1.0 / factor;
  for (int64_t i = 0; i < d.h; ++i) {
    const auto si = static_cast<int64_t>(std::floor(center[0] + (i - center[0]) * inv + 0.5));
    if (si < 0 || si >= d.h) continue;
    for (int64_t j = 0; j < d.w; ++j) {
      const auto sj = static_cast<int64_t>(std::floor(center[1] + (j - center[1]) * inv + 0.5));
      if (sj < 0 || sj >= d.w) continue;
      for (int64_t k = 0; k < d.d; ++k) {
        const auto sk = static_cast<int64_t>(std::floor(center[2] + (k - center[2]) * inv + 0.5));
        if (sk < 0 || sk >= d.d) continue;
        out.at(i, j, k) = mask.at(si, sj, sk);
      }
    }
  }
  return out;
}

SegMask shift_mask(const SegMask& mask, const std::array<int64_t, 3>& offset) {
  const Dims3& d = mask.dims();
  SegMask out(d, mask.geometry());
  for (int64_t i = 0; i < d.h; ++i) {
    const int64_t ti = i + offset[0];
    if (ti < 0 || ti >= d.h) continue;
    for (int64_t j = 0; j < d.w; ++j) {
      const int64_t tj = j + offset[1];
      if (tj < 0 || tj >= d.w) continue;
      for (int64_t k = 0; k < d.d; ++k) {
        const int64_t tk = k + offset[2];
        if (tk < 0 || tk >= d.d) continue;
        out.at(ti, tj, tk) = mask.at(i, j, k);
      }
    }
  }
  return out;
}

SegMask combine_masks(const SegMask& primary, const SegMask& secondary) {
  require_same_dims(primary.dims(), secondary.dims(), "combine_masks");
  SegMask out = primary;
  auto& dst = out.labels();
  const auto& src = secondary.labels();
  for (size_t n = 0; n < dst.size(); ++n)
    if (dst[n] == 0) dst[n] = src[n];
  return out;
}

std::optional<SegMask> clip_to_brain(const SegMask& mask, const BrainMask& brain, int64_t min_tumor_voxels) {
  require_same_dims(mask.dims(), brain.dims(), "clip_to_brain");
  SegMask out = mask;
  auto& labels = out.labels();
  const auto& inside = brain.values();
  int64_t kept = 0;
  for (size_t n = 0; n < labels.size(); ++n) {
    if (!inside[n]) labels[n] = 0;
    kept += labels[n] != 0;
  }
  if (kept < min_tumor_voxels) return std::nullopt;
  return out;
}

namespace {

struct Augmented {
  SegMask mask;
  double scale;
  std::array<int64_t, 3> shift;
};

Augmented augment_one(const SegMask& source, const MaskAugmentConfig& config, Rng& rng) {
  const double scale = config.scale_min == config.scale_max ? config.scale_min
                                                             : rng.uniform(config.scale_min, config.scale_max);
  std::array<int64_t, 3> shift{};
  for (int a = 0; a < 3; ++a) {
    const double mm = config.shift_range_mm > 0.0 ? rng.uniform(-config.shift_range_mm, config.shift_range_mm) : 0.0;
    shift[static_cast<size_t>(a)] = std::llround(mm / static_cast<double>(source.geometry().spacing[a]));
  }
  SegMask scaled = source.tumor_voxels() > 0 ? scale_mask(source, scale) : source;
  return {shift_mask(scaled, shift), scale, shift};
}

}  // namespace

SampledMask sample_synthetic_mask(std::span<const SegMask> pool, const BrainMask& brain,
                                  const MaskAugmentConfig& config, Rng& rng) {
  config.validate();
  if (pool.empty()) throw ValidationError("mask pool is empty");
  for (const auto& m : pool) require_same_dims(m.dims(), brain.dims(), "sample_synthetic_mask");

  for (int attempt = 1; attempt <= config.max_attempts; ++attempt) {
    MaskProvenance prov;
    prov.attempts = attempt;
    prov.primary_index = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(pool.size()) - 1));
    Augmented first = augment_one(pool[prov.primary_index], config, rng);
    prov.primary_scale = first.scale;
    prov.primary_shift = first.shift;
    SegMask combined = std::move(first.mask);

    if (config.combine_probability > 0.0 && rng.bernoulli(config.combine_probability)) {
      const auto idx = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(pool.size()) - 1));
      Augmented second = augment_one(pool[idx], config, rng);
      prov.secondary_index = idx;
      prov.secondary_scale = second.scale;
      prov.secondary_shift = second.shift;
      combined = combine_masks(combined, second.mask);
    }

    if (auto clipped = clip_to_brain(combined, brain, config.min_tumor_voxels)) {
      clipped->geometry() = pool[prov.primary_index].geometry();
      return {std::move(*clipped), prov};
    }
  }
  throw SamplingExhaustedError(
      "every synthetic mask draw was rejected after " + std::to_string(config.max_attempts) + " attempts",
      config.max_attempts);
}

}  // namespace tumorfab
