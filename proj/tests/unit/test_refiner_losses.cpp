#include <doctest.h>

#include <cmath>

#include "test_support.hpp"
#include "tumorfab/error.hpp"
#include "tumorfab/feature_net.hpp"
#include "tumorfab/refiner_losses.hpp"
#include "tumorfab/tensor_bridge.hpp"

using namespace tumorfab;
using namespace tumorfab::testing;

TEST_SUITE("refiner_losses") {
  TEST_CASE("hinge is zero for unchanged output, ROI-only changes, and sub-margin changes") {
    const auto c = torch::rand({1, 1, 8, 8, 8}, torch::kFloat64) * 2 - 1;
    auto roi = torch::zeros({1, 1, 8, 8, 8}, torch::kFloat64);
    roi.narrow(2, 2, 3).fill_(1.0);
    CHECK(hinge_reconstruction_loss(c, c, roi, 0.05).item<double>() == 0.0);
    CHECK(hinge_reconstruction_loss(c + 0.7 * roi, c, roi, 0.05).item<double>() == 0.0);
    CHECK(hinge_reconstruction_loss(c + 0.04, c, roi, 0.05).item<double>() == 0.0);
    CHECK(hinge_reconstruction_loss(c - 0.03, c, roi, 0.05).item<double>() == 0.0);
  }

  TEST_CASE("single voxel deviation 0.5 with margin 0.1 gives 0.4 / N") {
    const auto c = torch::zeros({1, 1, 4, 4, 4}, torch::kFloat64);
    auto r = c.clone();
    r[0][0][1][2][3] = 0.5;
    const double got = hinge_reconstruction_loss(r, c, torch::zeros_like(c), 0.1).item<double>();
    CHECK(std::abs(got - 0.4 / 64.0) < 1e-9);
  }

  TEST_CASE("bce terms match the log-sigmoid formulas") {
    const auto real = torch::tensor({0.3, -1.2, 2.0}, torch::kFloat64);
    const auto fake = torch::tensor({-0.5, 0.8, 0.0}, torch::kFloat64);
    double expect_d = 0, expect_g = 0;
    for (int i = 0; i < 3; ++i) {
      const double r = real[i].item<double>(), f = fake[i].item<double>();
      expect_d += -std::log(1 / (1 + std::exp(-r))) - std::log(1 - 1 / (1 + std::exp(-f)));
      expect_g += -std::log(1 / (1 + std::exp(-f)));
    }
    CHECK(discriminator_bce(real, fake).item<double>() == doctest::Approx(expect_d / 3).epsilon(1e-12));
    CHECK(generator_bce(fake).item<double>() == doctest::Approx(expect_g / 3).epsilon(1e-12));
  }

  TEST_CASE("adversarial losses reject non-finite logits") {
    const auto ok = torch::zeros({1, 1, 2, 2, 2});
    const auto g = torch::zeros({1, 1});
    CHECK_NOTHROW(adversarial_losses(ok, ok, g, g));
    auto bad = ok.clone();
    bad[0][0][0][0][0] = std::nanf("");
    CHECK_THROWS_AS(adversarial_losses(ok, bad, g, g), ValidationError);
  }

  TEST_CASE("lambda_c schedule: exact endpoints and linear interior") {
    const LossWeights w;
    CHECK(hinge_weight(0, 200, w) == 10.0);
    CHECK(hinge_weight(199, 200, w) == 1.0);
    for (int64_t e = 1; e < 198; ++e) {
      const double second = hinge_weight(e + 1, 200, w) - 2 * hinge_weight(e, 200, w) + hinge_weight(e - 1, 200, w);
      REQUIRE(std::abs(second) < 1e-12);
    }
    CHECK(hinge_weight(0, 1, w) == 10.0);  // a single epoch uses the start weight
    CHECK_THROWS_AS(hinge_weight(200, 200, w), ValidationError);
    CHECK(w.patch_adversarial == 10.0);
    CHECK(w.global_adversarial == 1.0);
    CHECK(w.perceptual == 1.0);
  }

  TEST_CASE("total loss weights each term") {
    const auto t = [](double v) { return torch::tensor(v, torch::kFloat64); };
    const GeneratorLossTerms terms{t(1.0), t(2.0), t(3.0), t(4.0)};
    const LossWeights w;
    CHECK(total_loss(terms, 0, w, 3).item<double>() == doctest::Approx(10 + 2 + 30 + 4));
    CHECK(total_loss(terms, 2, w, 3).item<double>() == doctest::Approx(10 + 2 + 3 + 4));
  }

  TEST_CASE("hinge + perceptual gradient w.r.t. the generator output matches central differences") {
    torch::manual_seed(0);
    const auto ex = FeatureExtractor::random(ExtractorSpec{}, 4).converted(torch::kFloat64);
    const int64_t s = 32;
    const auto mask = generate_phantom_tumor_case(small_spec()).mask;
    const auto roi = roi_tensor(mask).to(torch::kFloat64).unsqueeze(0).unsqueeze(0);
    const auto coarse = torch::rand({1, 1, s, s, s}, torch::kFloat64) * 1.6 - 0.8;
    const auto real = torch::rand({1, 1, s, s, s}, torch::kFloat64) * 1.6 - 0.8;
    const auto real_levels = ex.forward(real);
    std::vector<torch::Tensor> rl;
    for (const auto& l : real_levels) rl.push_back(l[0]);
    // Deviations of +-0.2 keep every non-ROI voxel well away from the margin kink.
    auto sign = torch::randint(0, 2, {1, 1, s, s, s}, torch::kFloat64) * 2 - 1;
    const auto y0 = coarse + 0.2 * sign;
    const auto f = [&](const torch::Tensor& y) {
      std::vector<torch::Tensor> sl;
      for (const auto& l : ex.forward(y)) sl.push_back(l[0]);
      return hinge_reconstruction_loss(y, coarse, roi, 0.05) + class_perceptual_loss(rl, sl, mask, mask).value;
    };
    auto y = y0.clone().requires_grad_(true);
    f(y).backward();
    const auto grad = y.grad();
    torch::NoGradGuard ng;
    const double h = 1e-3;
    Rng rng(1);
    int checked = 0;
    for (int n = 0; n < 12; ++n) {
      // Half the probes inside the tumor, where the perceptual term is active.
      int64_t i, j, k;
      do {
        i = rng.uniform_int(0, s - 1);
        j = rng.uniform_int(0, s - 1);
        k = rng.uniform_int(0, s - 1);
      } while ((n % 2 == 0) != (mask.at(i, j, k) != 0));
      auto yp = y0.clone(), ym = y0.clone();
      yp[0][0][i][j][k] += h;
      ym[0][0][i][j][k] -= h;
      const double fd = (f(yp).item<double>() - f(ym).item<double>()) / (2 * h);
      const double g = grad[0][0][i][j][k].item<double>();
      CHECK(std::abs(g - fd) <= 1e-2 * std::max(std::abs(fd), 1e-8));
      ++checked;
    }
    CHECK(checked == 12);
  }

  TEST_CASE("weight validation") {
    LossWeights w;
    w.margin = -0.1;
    CHECK_THROWS_AS(w.validate(), ValidationError);
    w = {};
    w.patch_adversarial = -1;
    CHECK_THROWS_AS(w.validate(), ValidationError);
  }
}
