#pragma once

#include <filesystem>

#include "tumorfab/volume.hpp"

namespace tumorfab {

/// Reads a NIfTI-1 image (.nii or .nii.gz). 3D payloads become single-channel;
/// 4D payloads map the fourth axis to channels. Scaling (scl_slope/scl_inter) is applied.
MriVolume load_volume(const std::filesystem::path& path);

/// Writes 32-bit float NIfTI-1. Single-channel volumes are stored as 3D.
/// A trailing ".gz" selects gzip compression.
void save_volume(const MriVolume& volume, const std::filesystem::path& path);

/// Reads an integer label volume and validates the label set.
SegMask load_mask(const std::filesystem::path& path);

/// Writes an 8-bit unsigned label volume.
void save_mask(const SegMask& mask, const std::filesystem::path& path);

}  // namespace tumorfab
