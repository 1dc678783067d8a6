#pragma once

#include <torch/torch.h>

#include <array>

#include "tumorfab/volume.hpp"

namespace tumorfab {

/// [C, H, W, D] float32 copy of the volume.
torch::Tensor to_tensor(const MriVolume& volume);

/// Inverse of to_tensor; accepts [C, H, W, D] or [1, C, H, W, D].
MriVolume volume_from_tensor(const torch::Tensor& tensor, const Geometry& geometry);

/// [4, H, W, D] one-hot encoding including the background channel.
torch::Tensor one_hot(const SegMask& mask);

/// [H, W, D] int64 labels.
torch::Tensor label_tensor(const SegMask& mask);

/// [H, W, D] float {0, 1} tumor indicator (labels > 0).
torch::Tensor roi_tensor(const SegMask& mask);

/// Axis-aligned sub-box copy.
MriVolume crop(const MriVolume& volume, const std::array<int64_t, 3>& origin, const Dims3& size);
SegMask crop(const SegMask& mask, const std::array<int64_t, 3>& origin, const Dims3& size);

/// Reverses the given spatial axes (0 = h, 1 = w, 2 = d).
MriVolume flip(const MriVolume& volume, const std::array<bool, 3>& axes);
SegMask flip(const SegMask& mask, const std::array<bool, 3>& axes);

}  // namespace tumorfab
