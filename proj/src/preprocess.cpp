#include "tumorfab/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tumorfab/error.hpp"

namespace tumorfab {
namespace {

struct AxisMap {
  double scale = 1.0;   // source voxels per output voxel
  double offset = 0.0;  // source coordinate of output voxel 0
  double source(int64_t dst) const { return dst * scale + offset; }
};

std::array<AxisMap, 3> axis_maps(const Geometry& g, double target_mm) {
  std::array<AxisMap, 3> maps;
  for (int a = 0; a < 3; ++a) {
    const double s = target_mm / static_cast<double>(g.spacing[a]);
    maps[a] = {s, 0.5 * s - 0.5};
  }
  return maps;
}

Geometry resampled_geometry(const Geometry& g, double target_mm) {
  const auto maps = axis_maps(g, target_mm);
  Geometry out;
  const auto t = static_cast<float>(target_mm);
  out.spacing = {t, t, t};
  for (int r = 0; r < 3; ++r) {
    double translation = g.affine[r][3];
    for (int a = 0; a < 3; ++a) {
      out.affine[r][a] = static_cast<float>(g.affine[r][a] * maps[a].scale);
      translation += g.affine[r][a] * maps[a].offset;
    }
    out.affine[r][3] = static_cast<float>(translation);
  }
  out.affine[3] = {0, 0, 0, 1};
  return out;
}

void check_target(double target_mm) {
  if (!(target_mm > 0.0) || !std::isfinite(target_mm))
    throw ValidationError("resampling target must be a positive spacing, got " + std::to_string(target_mm));
}

void check_spacing(const Geometry& g) {
  for (float s : g.spacing)
    if (!(s > 0.0f)) throw ValidationError("voxel spacing must be strictly positive");
}

int64_t nearest_index(double src, int64_t n) {
  const auto i = static_cast<int64_t>(std::floor(src + 0.5));
  return std::clamp<int64_t>(i, 0, n - 1);
}

template <typename Get, typename Set>
void resample_nearest(const Dims3& in, const Dims3& out, const std::array<AxisMap, 3>& maps, Get get, Set set) {
  std::vector<int64_t> jj(static_cast<size_t>(out.w)), kk(static_cast<size_t>(out.d));
  for (int64_t j = 0; j < out.w; ++j) jj[static_cast<size_t>(j)] = nearest_index(maps[1].source(j), in.w);
  for (int64_t k = 0; k < out.d; ++k) kk[static_cast<size_t>(k)] = nearest_index(maps[2].source(k), in.d);
  for (int64_t i = 0; i < out.h; ++i) {
    const int64_t si = nearest_index(maps[0].source(i), in.h);
    for (int64_t j = 0; j < out.w; ++j)
      for (int64_t k = 0; k < out.d; ++k) set(i, j, k, get(si, jj[static_cast<size_t>(j)], kk[static_cast<size_t>(k)]));
  }
}

}  // namespace

MriVolume normalize_intensity(const MriVolume& volume) {
  MriVolume out = volume;
  for (int64_t c = 0; c < volume.channels(); ++c) {
    const auto in = volume.channel(c);
    float lo = std::numeric_limits<float>::infinity();
    float hi = -std::numeric_limits<float>::infinity();
    for (float v : in) {
      if (!std::isfinite(v)) throw ValidationError("non-finite voxel value in channel " + std::to_string(c));
      if (v == 0.0f) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (lo > hi) throw DegenerateInputError("channel " + std::to_string(c) + " has no nonzero (brain) voxels");
    auto dst = out.channel(c);
    const double range = static_cast<double>(hi) - static_cast<double>(lo);
    for (size_t n = 0; n < in.size(); ++n) {
      const float v = in[n];
      if (v == 0.0f) {
        dst[n] = kNormalizedBackground;
      } else if (range == 0.0) {
        dst[n] = 0.0f;
      } else {
        const double mapped = 2.0 * (static_cast<double>(v) - lo) / range - 1.0;
        dst[n] = static_cast<float>(std::clamp(mapped, -1.0, 1.0));
      }
    }
  }
  return out;
}

Dims3 resampled_dims(const Dims3& dims, const Geometry& g, double target_mm) {
  check_target(target_mm);
  check_spacing(g);
  auto n = [&](int64_t size, float spacing) {
    return std::max<int64_t>(1, static_cast<int64_t>(std::llround(size * static_cast<double>(spacing) / target_mm)));
  };
  return {n(dims.h, g.spacing[0]), n(dims.w, g.spacing[1]), n(dims.d, g.spacing[2])};
}

MriVolume resample_isotropic(const MriVolume& volume, double target_mm) {
  const Dims3 in = volume.dims();
  const Dims3 out_dims = resampled_dims(in, volume.geometry(), target_mm);
  const auto maps = axis_maps(volume.geometry(), target_mm);
  MriVolume out(volume.channels(), out_dims, resampled_geometry(volume.geometry(), target_mm));

  struct Tap {
    int64_t lo, hi;
    double frac;
  };
  auto taps = [](const AxisMap& m, int64_t n_out, int64_t n_in) {
    std::vector<Tap> t(static_cast<size_t>(n_out));
    for (int64_t o = 0; o < n_out; ++o) {
      const double src = std::clamp(m.source(o), 0.0, static_cast<double>(n_in - 1));
      const auto lo = static_cast<int64_t>(std::floor(src));
      const int64_t hi = std::min(lo + 1, n_in - 1);
      t[static_cast<size_t>(o)] = {lo, hi, src - static_cast<double>(lo)};
    }
    return t;
  };
  const auto ti = taps(maps[0], out_dims.h, in.h);
  const auto tj = taps(maps[1], out_dims.w, in.w);
  const auto tk = taps(maps[2], out_dims.d, in.d);

  for (int64_t c = 0; c < volume.channels(); ++c)
    for (int64_t i = 0; i < out_dims.h; ++i) {
      const Tap& a = ti[static_cast<size_t>(i)];
      for (int64_t j = 0; j < out_dims.w; ++j) {
        const Tap& b = tj[static_cast<size_t>(j)];
        for (int64_t k = 0; k < out_dims.d; ++k) {
          const Tap& e = tk[static_cast<size_t>(k)];
          auto v = [&](int64_t x, int64_t y, int64_t z) { return static_cast<double>(volume.at(c, x, y, z)); };
          if (a.frac == 0.0 && b.frac == 0.0 && e.frac == 0.0) {
            out.at(c, i, j, k) = volume.at(c, a.lo, b.lo, e.lo);
            continue;
          }
          const double c00 = v(a.lo, b.lo, e.lo) * (1 - e.frac) + v(a.lo, b.lo, e.hi) * e.frac;
          const double c01 = v(a.lo, b.hi, e.lo) * (1 - e.frac) + v(a.lo, b.hi, e.hi) * e.frac;
          const double c10 = v(a.hi, b.lo, e.lo) * (1 - e.frac) + v(a.hi, b.lo, e.hi) * e.frac;
          const double c11 = v(a.hi, b.hi, e.lo) * (1 - e.frac) + v(a.hi, b.hi, e.hi) * e.frac;
          const double c0 = c00 * (1 - b.frac) + c01 * b.frac;
          const double c1 = c10 * (1 - b.frac) + c11 * b.frac;
          out.at(c, i, j, k) = static_cast<float>(c0 * (1 - a.frac) + c1 * a.frac);
        }
      }
    }
  return out;
}

SegMask resample_mask(const SegMask& mask, double target_mm) {
  const Dims3 out_dims = resampled_dims(mask.dims(), mask.geometry(), target_mm);
  SegMask out(out_dims, resampled_geometry(mask.geometry(), target_mm));
  resample_nearest(
      mask.dims(), out_dims, axis_maps(mask.geometry(), target_mm),
      [&](int64_t i, int64_t j, int64_t k) { return mask.at(i, j, k); },
      [&](int64_t i, int64_t j, int64_t k, uint8_t v) { out.at(i, j, k) = v; });
  return out;
}

BrainMask resample_mask(const BrainMask& mask, const Geometry& geometry, double target_mm) {
  const Dims3 out_dims = resampled_dims(mask.dims(), geometry, target_mm);
  BrainMask out(out_dims);
  resample_nearest(
      mask.dims(), out_dims, axis_maps(geometry, target_mm),
      [&](int64_t i, int64_t j, int64_t k) { return mask.at(i, j, k); },
      [&](int64_t i, int64_t j, int64_t k, bool v) { out.set(i, j, k, v); });
  return out;
}

BrainMask compute_brain_mask(const MriVolume& volume, std::optional<float> background) {
  const auto first = volume.channel(0);
  float bg = 0.0f;
  if (background) {
    bg = *background;
  } else if (!first.empty() && *std::min_element(first.begin(), first.end()) == kNormalizedBackground) {
    bg = kNormalizedBackground;
  }
  BrainMask mask(volume.dims());
  auto& values = mask.values();
  for (size_t n = 0; n < first.size(); ++n) values[n] = first[n] != bg ? 1 : 0;
  return mask;
}

bool has_nonzero_corners(const MriVolume& volume) {
  const Dims3& d = volume.dims();
  for (int64_t i : {int64_t{0}, d.h - 1})
    for (int64_t j : {int64_t{0}, d.w - 1})
      for (int64_t k : {int64_t{0}, d.d - 1})
        for (int64_t c = 0; c < volume.channels(); ++c)
          if (volume.at(c, i, j, k) != 0.0f) return true;
  return false;
}

}  // namespace tumorfab
