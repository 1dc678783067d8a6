#pragma once

#include <torch/torch.h>

#include <functional>
#include <optional>
#include <vector>

#include "tumorfab/volume.hpp"

namespace tumorfab {

class Refiner;

struct WindowSpec {
  Dims3 window{128, 128, 128};
  /// Fraction of the window shared by neighbouring tiles, in [0, 0.75].
  double overlap = 0.5;

  void validate() const;
};

/// Maps a [1, C, h, w, d] image tile and its [1, 4, h, w, d] one-hot mask to a refined tile.
using TileFunction = std::function<torch::Tensor(const torch::Tensor& image, const torch::Tensor& mask_onehot)>;

/// Tile origins along one axis: stride window - round(window * overlap), last tile flush with the end.
std::vector<int64_t> tile_starts(int64_t extent, int64_t window, double overlap);

/// Per-axis blend profile: 1 in the interior, sin^2 ramps across the overlap band
/// at both ends. Ramps of adjacent tiles sum to exactly 1.
std::vector<double> taper_profile(int64_t window, double overlap);

/// Tiles `fn` over the volume and blends the tiles as sum(w * y) / sum(w) with
/// separable taper weights. Volumes smaller than the window are padded with -1
/// (background) and cropped back. When `brain` is given, voxels outside it are
/// copied from the input.
MriVolume refine_volume_with(const MriVolume& coarse, const SegMask& mask, const TileFunction& fn,
                             const WindowSpec& spec, const std::optional<BrainMask>& brain = std::nullopt);

MriVolume refine_volume(const MriVolume& coarse, const SegMask& mask, const Refiner& refiner, const WindowSpec& spec,
                        const std::optional<BrainMask>& brain = std::nullopt);

}  // namespace tumorfab
