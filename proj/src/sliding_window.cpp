#include "tumorfab/sliding_window.hpp"

#include <cmath>
#include <numbers>

#include "tumorfab/error.hpp"
#include "tumorfab/refiner_nets.hpp"
#include "tumorfab/refiner_train.hpp"
#include "tumorfab/tensor_bridge.hpp"

namespace tumorfab {

void WindowSpec::validate() const {
  for (int a = 0; a < 3; ++a)
    if (window[a] < kDownsampleFactor || window[a] % kDownsampleFactor != 0)
      throw ValidationError("window dims must be positive multiples of 32, got " + to_string(window));
  if (!(overlap >= 0.0 && overlap <= 0.75)) throw ValidationError("window overlap must be in [0, 0.75]");
}

std::vector<int64_t> tile_starts(int64_t extent, int64_t window, double overlap) {
  if (extent <= window) return {0};
  const int64_t stride = std::max<int64_t>(1, window - std::llround(static_cast<double>(window) * overlap));
  std::vector<int64_t> starts;
  for (int64_t s = 0; s + window < extent; s += stride) starts.push_back(s);
  starts.push_back(extent - window);
  return starts;
}

std::vector<double> taper_profile(int64_t window, double overlap) {
  std::vector<double> w(static_cast<size_t>(window), 1.0);
  const int64_t band = std::llround(static_cast<double>(window) * overlap);
  if (band == 0) return w;
  const auto ramp = [band](int64_t x) {
    const double s = std::sin(0.5 * std::numbers::pi * (static_cast<double>(x) + 0.5) / static_cast<double>(band));
    return s * s;
  };
  for (int64_t x = 0; x < window; ++x) {
    double v = 1.0;
    if (x < band) v = std::min(v, ramp(x));
    if (x >= window - band) v = std::min(v, ramp(window - 1 - x));
    w[static_cast<size_t>(x)] = v;
  }
  return w;
}

MriVolume refine_volume_with(const MriVolume& coarse, const SegMask& mask, const TileFunction& fn,
                             const WindowSpec& spec, const std::optional<BrainMask>& brain) {
  spec.validate();
  require_same_dims(coarse.dims(), mask.dims(), "refine_volume");
  if (brain) require_same_dims(coarse.dims(), brain->dims(), "refine_volume brain mask");
  const Dims3 dims = coarse.dims();
  const int64_t C = coarse.channels();
  const Dims3 padded{std::max(dims.h, spec.window.h), std::max(dims.w, spec.window.w), std::max(dims.d, spec.window.d)};

  auto image = torch::full({1, C, padded.h, padded.w, padded.d}, -1.0f);
  auto onehot = torch::zeros({1, kMaskChannels, padded.h, padded.w, padded.d});
  onehot.select(1, 0).fill_(1.0f);
  image.slice(2, 0, dims.h).slice(3, 0, dims.w).slice(4, 0, dims.d).copy_(to_tensor(coarse).unsqueeze(0));
  onehot.slice(2, 0, dims.h).slice(3, 0, dims.w).slice(4, 0, dims.d).copy_(one_hot(mask).unsqueeze(0));

  const auto profile = [&](int a) {
    const auto p = taper_profile(spec.window[a], spec.overlap);
    return torch::tensor(p, torch::kFloat64);
  };
  const auto weight = (profile(0).view({-1, 1, 1}) * profile(1).view({1, -1, 1}) * profile(2).view({1, 1, -1}));

  auto accum = torch::zeros({C, padded.h, padded.w, padded.d}, torch::kFloat64);
  auto wsum = torch::zeros({padded.h, padded.w, padded.d}, torch::kFloat64);
  const Dims3& win = spec.window;
  for (int64_t i0 : tile_starts(padded.h, win.h, spec.overlap))
    for (int64_t j0 : tile_starts(padded.w, win.w, spec.overlap))
      for (int64_t k0 : tile_starts(padded.d, win.d, spec.overlap)) {
        const auto box = [&](const torch::Tensor& t, int first) {
          return t.slice(first, i0, i0 + win.h).slice(first + 1, j0, j0 + win.w).slice(first + 2, k0, k0 + win.d);
        };
        const auto y = fn(box(image, 2).contiguous(), box(onehot, 2).contiguous());
        if (y.dim() != 5 || y.size(0) != 1 || y.size(1) != C || y.size(2) != win.h || y.size(3) != win.w ||
            y.size(4) != win.d)
          throw ValidationError("tile function returned a tensor of the wrong shape");
        box(accum, 1).add_(y[0].to(torch::kFloat64) * weight);
        box(wsum, 0).add_(weight);
      }

  auto blended = (accum / wsum).slice(1, 0, dims.h).slice(2, 0, dims.w).slice(3, 0, dims.d);
  blended = blended.clamp(-1.0, 1.0).to(torch::kFloat32);
  MriVolume out = volume_from_tensor(blended, coarse.geometry());
  if (brain) {
    const auto& inside = brain->values();
    for (int64_t c = 0; c < C; ++c) {
      auto dst = out.channel(c);
      const auto src = coarse.channel(c);
      for (size_t n = 0; n < inside.size(); ++n)
        if (!inside[n]) dst[n] = src[n];
    }
  }
  return out;
}

MriVolume refine_volume(const MriVolume& coarse, const SegMask& mask, const Refiner& refiner, const WindowSpec& spec,
                        const std::optional<BrainMask>& brain) {
  if (coarse.channels() != refiner.config().generator.image_channels)
    throw ValidationError("checkpoint expects " + std::to_string(refiner.config().generator.image_channels) +
                          " image channels, volume has " + std::to_string(coarse.channels()));
  return refine_volume_with(
      coarse, mask, [&](const torch::Tensor& x, const torch::Tensor& m) { return refiner.generate(x, m); }, spec, brain);
}

}  // namespace tumorfab
