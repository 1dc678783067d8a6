#pragma once

#include <array>
#include <optional>
#include <span>

#include "tumorfab/rng.hpp"
#include "tumorfab/volume.hpp"

namespace tumorfab {

struct MaskAugmentConfig {
  double scale_min = 0.8;
  double scale_max = 1.2;
  double shift_range_mm = 20.0;
  double combine_probability = 0.3;
  int64_t min_tumor_voxels = 64;
  int max_attempts = 10;
  uint64_t seed = 0;

  void validate() const;
};

/// Isotropic nearest-neighbour rescale of the tumor about its centroid.
/// Output dims are unchanged; content mapped outside the grid is dropped.
SegMask scale_mask(const SegMask& mask, double factor);

/// Integer translation; voxels pushed out of bounds are dropped.
SegMask shift_mask(const SegMask& mask, const std::array<int64_t, 3>& offset);

/// Voxelwise union. Where both are nonzero the primary label is kept.
SegMask combine_masks(const SegMask& primary, const SegMask& secondary);

/// Zeroes tumor voxels outside the brain. Returns nullopt (rejection) when fewer
/// than `min_tumor_voxels` tumor voxels remain.
std::optional<SegMask> clip_to_brain(const SegMask& mask, const BrainMask& brain, int64_t min_tumor_voxels);

/// Record of how a synthetic mask was produced.
struct MaskProvenance {
  size_t primary_index = 0;
  std::optional<size_t> secondary_index;
  double primary_scale = 1.0;
  std::array<int64_t, 3> primary_shift{};
  double secondary_scale = 1.0;
  std::array<int64_t, 3> secondary_shift{};
  int attempts = 0;
};

struct SampledMask {
  SegMask mask;
  MaskProvenance provenance;
};

/// Draws a mask from the pool (and a second one with combine_probability),
/// scales then shifts each, unions them, and clips to the brain. Rejected draws
/// are retried up to config.max_attempts times; exhaustion throws
/// SamplingExhaustedError. All randomness comes from `rng`.
SampledMask sample_synthetic_mask(std::span<const SegMask> pool, const BrainMask& brain,
                                  const MaskAugmentConfig& config, Rng& rng);

/// Tumor centroid in voxel coordinates. Throws on an empty mask.
std::array<double, 3> tumor_centroid(const SegMask& mask);

}  // namespace tumorfab
