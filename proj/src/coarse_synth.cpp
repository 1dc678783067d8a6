#include "tumorfab/coarse_synth.hpp"

#include <algorithm>
#include <cmath>

#include "tumorfab/error.hpp"

namespace tumorfab {
namespace {

// Mirror index with the edge sample repeated, valid for any overhang.
int64_t mirror(int64_t i, int64_t n) {
  if (n == 1) return 0;
  const int64_t period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

void filter_axis(std::vector<double>& buf, const Dims3& d, int axis, const std::vector<double>& taps) {
  const auto radius = static_cast<int64_t>(taps.size() / 2);
  const int64_t n = d[axis];
  const int64_t stride = axis == 0 ? d.w * d.d : (axis == 1 ? d.d : 1);
  std::vector<double> line(static_cast<size_t>(n)), out(static_cast<size_t>(n));
  const int64_t lines = d.voxels() / n;
  for (int64_t l = 0; l < lines; ++l) {
    int64_t base = 0;
    if (axis == 0) {
      base = l;
    } else if (axis == 1) {
      base = (l / d.d) * d.w * d.d + (l % d.d);
    } else {
      base = l * d.d;
    }
    for (int64_t t = 0; t < n; ++t) line[static_cast<size_t>(t)] = buf[static_cast<size_t>(base + t * stride)];
    for (int64_t t = 0; t < n; ++t) {
      double acc = 0.0;
      for (int64_t r = -radius; r <= radius; ++r)
        acc += taps[static_cast<size_t>(r + radius)] * line[static_cast<size_t>(mirror(t + r, n))];
      out[static_cast<size_t>(t)] = acc;
    }
    for (int64_t t = 0; t < n; ++t) buf[static_cast<size_t>(base + t * stride)] = out[static_cast<size_t>(t)];
  }
}

}  // namespace

std::vector<double> gaussian_kernel(double sigma, double truncate) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ValidationError("Gaussian sigma must be positive");
  const auto radius = static_cast<int64_t>(truncate * sigma + 0.5);
  std::vector<double> taps(static_cast<size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int64_t r = -radius; r <= radius; ++r) {
    const double w = std::exp(-0.5 * static_cast<double>(r * r) / (sigma * sigma));
    taps[static_cast<size_t>(r + radius)] = w;
    sum += w;
  }
  for (double& w : taps) w /= sum;
  return taps;
}

MriVolume gaussian_filter(const MriVolume& volume, double sigma) {
  const auto taps = gaussian_kernel(sigma);
  const Dims3& d = volume.dims();
  MriVolume out = volume;
  std::vector<double> buf(static_cast<size_t>(d.voxels()));
  for (int64_t c = 0; c < volume.channels(); ++c) {
    const auto src = volume.channel(c);
    std::copy(src.begin(), src.end(), buf.begin());
    for (int axis = 0; axis < 3; ++axis) filter_axis(buf, d, axis, taps);
    auto dst = out.channel(c);
    for (size_t n = 0; n < buf.size(); ++n) dst[n] = static_cast<float>(buf[n]);
  }
  return out;
}

BrainMask roi_of(const SegMask& mask) {
  BrainMask roi(mask.dims());
  auto& v = roi.values();
  const auto& labels = mask.labels();
  for (size_t n = 0; n < labels.size(); ++n) v[n] = labels[n] != 0 ? 1 : 0;
  return roi;
}

MriVolume roi_blur(const MriVolume& volume, const BrainMask& roi, double sigma) {
  require_same_dims(volume.dims(), roi.dims(), "roi_blur");
  if (!(sigma > 0.0)) throw ValidationError("roi_blur sigma must be positive");
  MriVolume out = volume;
  if (roi.count() == 0) return out;
  const MriVolume blurred = gaussian_filter(volume, sigma);
  const auto& inside = roi.values();
  for (int64_t c = 0; c < volume.channels(); ++c) {
    auto dst = out.channel(c);
    const auto src = blurred.channel(c);
    for (size_t n = 0; n < inside.size(); ++n)
      if (inside[n]) dst[n] = src[n];
  }
  return out;
}

IntensityTransform IntensityTransform::uniform(double gain, double offset) {
  IntensityTransform t;
  for (auto& c : t.classes) c = {gain, offset};
  return t;
}

void IntensityTransform::validate() const {
  for (const auto& c : classes)
    if (!std::isfinite(c.gain) || !std::isfinite(c.offset)) throw ValidationError("intensity transform has non-finite parameters");
}

MriVolume apply_intensity_transform(const MriVolume& volume, const SegMask& mask, const IntensityTransform& transform) {
  require_same_dims(volume.dims(), mask.dims(), "apply_intensity_transform");
  transform.validate();
  MriVolume out = volume;
  const auto& labels = mask.labels();
  for (int64_t c = 0; c < volume.channels(); ++c) {
    auto dst = out.channel(c);
    for (size_t n = 0; n < labels.size(); ++n) {
      const uint8_t l = labels[n];
      if (l == 0) continue;
      if (l >= kLabelCount) throw ValidationError("mask label outside {0,1,2,3}");
      const auto& p = transform.classes[l - 1u];
      dst[n] = static_cast<float>(std::clamp(p.gain * dst[n] + p.offset, -1.0, 1.0));
    }
  }
  return out;
}

LabeledVolume fabricate_coarse(const MriVolume& healthy, const SegMask& mask, const IntensityTransform& transform,
                            double sigma) {
  require_same_dims(healthy.dims(), mask.dims(), "fabricate_coarse");
  MriVolume blurred = roi_blur(healthy, roi_of(mask), sigma);
  return {apply_intensity_transform(blurred, mask, transform), mask};
}

}  // namespace tumorfab
