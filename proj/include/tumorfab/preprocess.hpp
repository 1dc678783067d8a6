#pragma once

#include <optional>

#include "tumorfab/volume.hpp"

namespace tumorfab {

/// Background value of normalized volumes.
inline constexpr float kNormalizedBackground = -1.0f;

/// Per channel, maps the [min, max] range over nonzero (brain) voxels linearly onto
/// [-1, 1] and sets every zero (background) voxel to -1. A constant brain maps to 0.
/// Throws DegenerateInputError for an all-zero channel.
MriVolume normalize_intensity(const MriVolume& volume);

/// Trilinear resampling onto an isotropic grid of `target_mm`. Voxel centers are
/// aligned so that a unit scale is an exact identity.
MriVolume resample_isotropic(const MriVolume& volume, double target_mm);

/// Nearest-neighbour counterpart of resample_isotropic; cannot create new labels.
SegMask resample_mask(const SegMask& mask, double target_mm);
BrainMask resample_mask(const BrainMask& mask, const Geometry& geometry, double target_mm);

/// True where the first channel differs from the background value. When not
/// given, the background is -1 for volumes whose minimum is -1 (normalized) and 0 otherwise.
BrainMask compute_brain_mask(const MriVolume& volume, std::optional<float> background = std::nullopt);

/// Output grid dims of an isotropic resample.
Dims3 resampled_dims(const Dims3& dims, const Geometry& geometry, double target_mm);

/// Heuristic skull-strip check: true if any of the eight corner voxels is nonzero.
bool has_nonzero_corners(const MriVolume& volume);

}  // namespace tumorfab
