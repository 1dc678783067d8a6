#include <doctest.h>

#include <cmath>

#include "test_support.hpp"
#include "tumorfab/coarse_synth.hpp"
#include "tumorfab/error.hpp"
#include "tumorfab/preprocess.hpp"

using namespace tumorfab;
using namespace tumorfab::testing;

namespace {

int64_t reflect(int64_t i, int64_t n) {
  while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - i - 1;
  return i;
}

// Direct 3D convolution with the product kernel.
double naive_gauss(const MriVolume& v, double sigma, int64_t i, int64_t j, int64_t k) {
  const int64_t r = std::lround(4.0 * sigma);
  std::vector<double> w;
  double sum = 0;
  for (int64_t t = -r; t <= r; ++t) {
    w.push_back(std::exp(-0.5 * t * t / (sigma * sigma)));
    sum += w.back();
  }
  for (auto& x : w) x /= sum;
  const auto& d = v.dims();
  double acc = 0;
  for (int64_t a = -r; a <= r; ++a)
    for (int64_t b = -r; b <= r; ++b)
      for (int64_t c = -r; c <= r; ++c)
        acc += w[a + r] * w[b + r] * w[c + r] * v.at(0, reflect(i + a, d.h), reflect(j + b, d.w), reflect(k + c, d.d));
  return acc;
}

}  // namespace

TEST_SUITE("coarse_synth") {
  TEST_CASE("gaussian kernel is normalized, symmetric, radius round(4 sigma)") {
    for (double s : {0.5, 1.0, 2.0, 3.3}) {
      const auto k = gaussian_kernel(s);
      CHECK(k.size() == static_cast<size_t>(2 * std::lround(4 * s) + 1));
      double sum = 0;
      for (double x : k) sum += x;
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
      for (size_t i = 0; i < k.size(); ++i) CHECK(k[i] == k[k.size() - 1 - i]);
    }
  }

  TEST_CASE("separable filter matches direct convolution with mirrored borders") {
    const auto v = random_volume({10, 9, 11}, 8);
    const auto f = gaussian_filter(v, 1.0);
    for (auto [i, j, k] : {std::array<int64_t, 3>{0, 0, 0}, {5, 4, 5}, {9, 8, 10}, {1, 7, 3}})
      CHECK(f.at(0, i, j, k) == doctest::Approx(naive_gauss(v, 1.0, i, j, k)).epsilon(1e-5));
  }

  TEST_CASE("constant volumes are fixed points of the filter") {
    const MriVolume v(1, {8, 8, 8}, {}, 0.25f);
    const auto f = gaussian_filter(v, 2.0);
    for (float x : f.data()) CHECK(x == doctest::Approx(0.25).epsilon(1e-6));
  }

  TEST_CASE("roi blur leaves non-ROI voxels bitwise unchanged") {
    const auto v = random_volume({16, 16, 16}, 2);
    const auto roi = roi_of(box_mask({16, 16, 16}, {4, 4, 4}, {9, 10, 8}, 2));
    const auto b = roi_blur(v, roi, 2.0);
    const auto f = gaussian_filter(v, 2.0);
    for (size_t n = 0; n < v.data().size(); ++n)
      REQUIRE(b.data()[n] == (roi.values()[n] ? f.data()[n] : v.data()[n]));
  }

  TEST_CASE("intensity transform acts per class, clamps, leaves background") {
    MriVolume v(1, {2, 2, 1}, {}, 0.5f);
    SegMask m({2, 2, 1});
    m.at(0, 1, 0) = 1;
    m.at(1, 0, 0) = 2;
    m.at(1, 1, 0) = 3;
    IntensityTransform t;
    t[Label::NCR] = {2.0, 0.1};
    t[Label::ED] = {0.5, -0.2};
    t[Label::ET] = {4.0, 0.0};
    const auto out = apply_intensity_transform(v, m, t);
    CHECK(out.at(0, 0, 0, 0) == 0.5f);
    CHECK(out.at(0, 0, 1, 0) == 1.0f);  // 1.1 clamped
    CHECK(out.at(0, 1, 0, 0) == doctest::Approx(0.05));
    CHECK(out.at(0, 1, 1, 0) == 1.0f);
  }

  TEST_CASE("identity transform with sigma leaves a blurred ROI") {
    const auto spec = small_spec();
    const auto healthy = normalize_intensity(generate_phantom_brain(spec));
    const auto mask = generate_phantom_tumor_case(spec).mask;
    const auto c = fabricate_coarse(healthy, mask, IntensityTransform::identity());
    const auto blurred = roi_blur(healthy, roi_of(mask));
    CHECK(c.image.data() == blurred.data());
    CHECK(c.mask == mask);
  }

  TEST_CASE("property: fabricate_coarse is local and range preserving") {
    const auto spec = small_spec();
    for (uint64_t s = 0; s < 10; ++s) {
      const auto healthy = normalize_intensity(generate_phantom_brain(jittered_spec(spec, s)));
      const auto mask = generate_phantom_tumor_case(jittered_spec(spec, 50 + s)).mask;
      Rng rng(s);
      IntensityTransform t;
      for (auto& c : t.classes) c = {rng.uniform(0.5, 2.0), rng.uniform(-0.5, 0.5)};
      const auto out = fabricate_coarse(healthy, mask, t);
      for (size_t n = 0; n < mask.labels().size(); ++n) {
        if (mask.labels()[n] == 0) REQUIRE(out.image.data()[n] == healthy.data()[n]);
        REQUIRE((out.image.data()[n] >= -1.0f && out.image.data()[n] <= 1.0f));
      }
    }
  }

  TEST_CASE("validation") {
    IntensityTransform t;
    t[Label::ET].gain = std::nan("");
    CHECK_THROWS_AS(t.validate(), ValidationError);
    CHECK_THROWS_AS(gaussian_kernel(0.0), ValidationError);
    const auto v = random_volume({8, 8, 8}, 1);
    CHECK_THROWS_AS(fabricate_coarse(v, SegMask({8, 8, 7}), IntensityTransform{}), ValidationError);
  }
}
