// Runs every acceptance criterion on phantom data and prints one PASS/FAIL line each.
#include <torch/torch.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <string>

#include "test_support.hpp"
#include "tumorfab/coarse_synth.hpp"
#include "tumorfab/error.hpp"
#include "tumorfab/eval_metrics.hpp"
#include "tumorfab/feature_net.hpp"
#include "tumorfab/intensity_fit.hpp"
#include "tumorfab/manifest.hpp"
#include "tumorfab/mask_forge.hpp"
#include "tumorfab/nifti_io.hpp"
#include "tumorfab/pipeline.hpp"
#include "tumorfab/preprocess.hpp"
#include "tumorfab/refiner_losses.hpp"
#include "tumorfab/refiner_nets.hpp"
#include "tumorfab/refiner_train.hpp"
#include "tumorfab/sliding_window.hpp"
#include "tumorfab/tensor_bridge.hpp"

using namespace tumorfab;
using namespace tumorfab::testing;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and budgets.
constexpr double kDiceTol = 1e-12;
constexpr double kDiceBudgetS = 10.0;
constexpr double kHingeHandTol = 1e-9;
constexpr double kPercepLoopTol = 1e-6;
constexpr double kScheduleTol = 1e-12;
constexpr double kGradRelTol = 1e-2;
constexpr double kGradStep = 1e-6;
constexpr double kStage1AbsTol = 0.05;
constexpr double kStage1BudgetS = 300.0;
constexpr double kWindowTol = 1e-6;
constexpr double kSmokeBudgetS = 3600.0;
constexpr double kStatsTol = 1e-8;

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Check {
 public:
  void require(bool ok, const std::string& what) {
    if (!ok && out_.pass) out_.detail = what;
    out_.pass = out_.pass && ok;
  }
  void note(const std::string& s) {
    if (out_.pass) out_.detail = s;
  }
  Outcome result() const { return out_; }

 private:
  Outcome out_;
};

std::string fmt(const char* f, double v) {
  char b[128];
  std::snprintf(b, sizeof b, f, v);
  return b;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- 1 ----------------------------------------------------------------------
Outcome dice_oracle() {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0;
  for (uint64_t s = 0; s < 1000; ++s) {
    SegMask p, g;
    if (s == 0) {
      p = g = SegMask({8, 8, 8});
    } else if (s == 1) {
      p = box_mask({8, 8, 8}, {0, 0, 0}, {3, 3, 3}, 3);
      g = box_mask({8, 8, 8}, {4, 4, 4}, {8, 8, 8}, 1);
    } else {
      p = random_mask({8, 8, 8}, 2 * s, (s % 11) / 10.0);
      g = random_mask({8, 8, 8}, 2 * s + 1, ((s / 11) % 11) / 10.0);
    }
    for (Region r : kRegions) {
      int64_t a = 0, b = 0, both = 0;
      for (size_t n = 0; n < p.labels().size(); ++n) {
        const bool x = region_contains(r, p.labels()[n]), y = region_contains(r, g.labels()[n]);
        a += x;
        b += y;
        both += x && y;
      }
      const double oracle = a + b == 0 ? 1.0 : 2.0 * both / double(a + b);
      worst = std::max(worst, std::abs(dice(p, g, r) - oracle));
    }
  }
  const double t = seconds_since(t0);
  c.require(worst <= kDiceTol, fmt("max |dice - oracle| = %.3g", worst));
  c.require(t < kDiceBudgetS, fmt("runtime %.1fs", t));
  c.note(fmt("max error %.2g", worst) + fmt(", %.2fs", t));
  return c.result();
}

// ---- 2 ----------------------------------------------------------------------
Outcome hinge_invariants() {
  Check c;
  const auto coarse = torch::rand({1, 1, 8, 8, 8}, torch::kFloat64) * 2 - 1;
  auto roi = torch::zeros_like(coarse);
  roi.narrow(3, 1, 4).fill_(1);
  const double m = 0.05;
  c.require(hinge_reconstruction_loss(coarse, coarse, roi, m).item<double>() == 0.0, "(a) identical output");
  c.require(hinge_reconstruction_loss(coarse + roi * torch::randn_like(coarse), coarse, roi, m).item<double>() == 0.0,
            "(b) ROI-only deviations");
  const auto small = (torch::rand_like(coarse) * 2 - 1) * m;
  c.require(hinge_reconstruction_loss(coarse + small, coarse, roi, m).item<double>() == 0.0, "(c) sub-margin deviations");
  auto one = torch::zeros({1, 1, 8, 8, 8}, torch::kFloat64);
  auto dev = one.clone();
  dev[0][0][3][3][3] = 0.5;
  const double got = hinge_reconstruction_loss(dev, one, torch::zeros_like(one), 0.1).item<double>();
  c.require(std::abs(got - 0.4 / 512.0) <= kHingeHandTol, fmt("single voxel gave %.12g", got));
  c.note(fmt("single voxel %.12g vs 0.4/512", got));
  return c.result();
}

// 16^3 crop centred on the phantom tumor.
LabeledVolume crop16(const LabeledVolume& c) {
  const auto centroid = tumor_centroid(c.mask);
  std::array<int64_t, 3> o{};
  for (int a = 0; a < 3; ++a) o[a] = std::clamp<int64_t>(std::lround(centroid[a]) - 8, 0, 16);
  return {crop(c.image, o, {16, 16, 16}), crop(c.mask, o, {16, 16, 16})};
}

LabeledVolume normalized_case(uint64_t seed) {
  auto c = generate_phantom_tumor_case(jittered_spec(small_spec(), seed));
  c.image = normalize_intensity(c.image);
  return c;
}

// ---- 3 ----------------------------------------------------------------------
Outcome perceptual_invariants() {
  Check c;
  const auto ex = FeatureExtractor::random(ExtractorSpec{}, 1234).converted(torch::kFloat64);
  const auto a = crop16(normalized_case(1)), b = crop16(normalized_case(2));
  const auto pa = ex.extract(a.image), pb = ex.extract(b.image);
  c.require(class_perceptual_loss(pa, pa, a.mask, a.mask) == 0.0, "identical pair not zero");

  double loop = 0;
  int pairs = 0;
  for (int l = 0; l < 3; ++l) {
    const auto fa = pa.levels[l].contiguous(), fb = pb.levels[l].contiguous();
    const auto A = fa.accessor<double, 4>(), B = fb.accessor<double, 4>();
    const int64_t st = int64_t{1} << l;
    for (uint8_t cls = 1; cls <= 3; ++cls) {
      std::vector<double> va(fa.size(0)), vb(fa.size(0));
      int64_t na = 0, nb = 0;
      for (int64_t i = 0; i < fa.size(1); ++i)
        for (int64_t j = 0; j < fa.size(2); ++j)
          for (int64_t k = 0; k < fa.size(3); ++k) {
            const bool ia = a.mask.at(i * st, j * st, k * st) == cls, ib = b.mask.at(i * st, j * st, k * st) == cls;
            na += ia;
            nb += ib;
            for (int64_t ch = 0; ch < fa.size(0); ++ch) {
              if (ia) va[ch] += A[ch][i][j][k];
              if (ib) vb[ch] += B[ch][i][j][k];
            }
          }
      if (!na || !nb) continue;
      double d = 0;
      for (size_t ch = 0; ch < va.size(); ++ch) d += std::abs(va[ch] / na - vb[ch] / nb);
      loop += d / double(va.size());
      ++pairs;
    }
  }
  loop /= std::max(pairs, 1);
  const double got = class_perceptual_loss(pa, pb, a.mask, b.mask);
  c.require(pairs > 0, "no class present in both crops");
  c.require(std::abs(got - loop) <= kPercepLoopTol, fmt("loop mismatch %.3g", std::abs(got - loop)));
  double min_loss = 1e300;
  for (uint64_t s = 0; s < 100; ++s) {
    const auto x = random_volume({16, 16, 16}, 1000 + s), y = random_volume({16, 16, 16}, 2000 + s);
    const auto mx = random_mask({16, 16, 16}, 3000 + s, 0.3), my = random_mask({16, 16, 16}, 4000 + s, 0.3);
    min_loss = std::min(min_loss, class_perceptual_loss(ex.extract(x), ex.extract(y), mx, my));
  }
  c.require(min_loss >= 0.0, fmt("negative loss %.3g", min_loss));
  c.note(fmt("loop diff %.2g", std::abs(got - loop)) + fmt(", min over 100 pairs %.3g", min_loss));
  return c.result();
}

// ---- 4 ----------------------------------------------------------------------
Outcome lambda_schedule() {
  Check c;
  const LossWeights w;
  const int64_t E = 200;
  c.require(hinge_weight(0, E, w) == 10.0, "lambda_c(0) != 10");
  c.require(hinge_weight(E - 1, E, w) == 1.0, "lambda_c(final) != 1");
  double worst = 0;
  for (int64_t e = 1; e + 1 < E; ++e)
    worst = std::max(worst, std::abs(hinge_weight(e + 1, E, w) - 2 * hinge_weight(e, E, w) + hinge_weight(e - 1, E, w)));
  c.require(worst <= kScheduleTol, fmt("second difference %.3g", worst));
  c.require(w.patch_adversarial == 10.0 && w.global_adversarial == 1.0 && w.perceptual == 1.0, "constant weights");
  c.note(fmt("max second difference %.2g", worst));
  return c.result();
}

// ---- 5 ----------------------------------------------------------------------
Outcome shape_contracts() {
  Check c;
  torch::NoGradGuard ng;
  Generator g(GeneratorSpec{});
  initialize_weights(*g, 1, 0.2);
  const auto mask = random_mask({128, 128, 128}, 1, 0.05);
  const auto x = torch::rand({1, 1, 128, 128, 128}) * 2 - 1;
  const auto y = g->forward(x, one_hot(mask).unsqueeze(0));
  c.require(y.sizes() == torch::IntArrayRef{1, 1, 128, 128, 128}, "generator output shape");
  c.require(y.min().item<float>() >= -1.0f && y.max().item<float>() <= 1.0f, "generator range");
  c.require(GeneratorSpec{}.in_channels() == 5, "generator input channels");
  Discriminator d(DiscriminatorSpec{});
  initialize_weights(*d, 2, 0.2);
  const auto o128 = d->forward(x, one_hot(mask).unsqueeze(0));
  c.require(o128.patch.sizes() == torch::IntArrayRef{1, 1, 4, 4, 4}, "patch map at 128^3");
  c.require(o128.global.sizes() == torch::IntArrayRef{1, 1}, "global scalar");
  const auto m64 = random_mask({64, 64, 64}, 2, 0.05);
  const auto o64 = d->forward(torch::rand({1, 1, 64, 64, 64}), one_hot(m64).unsqueeze(0));
  c.require(o64.patch.sizes() == torch::IntArrayRef{1, 1, 2, 2, 2}, "patch map at 64^3");
  c.note("G 5x128^3 -> 1x128^3 in [-1,1]; D patch 4^3 / 2^3 + global");
  return c.result();
}

// ---- 6 ----------------------------------------------------------------------
Outcome gradient_checks() {
  Check c;
  const auto ex = FeatureExtractor::random(ExtractorSpec{}, 1234).converted(torch::kFloat64);
  // (i) Stage 1 objective w.r.t. (a_c, b_c) on 16^3 phantom crops.
  std::vector<Stage1Sample> coarse;
  std::vector<LabeledVolume> real;
  for (uint64_t k = 0; k < 2; ++k) {
    const auto h = crop16(normalized_case(10 + k));
    coarse.push_back(make_stage1_sample(h.image, h.mask));
    real.push_back(fabricate_coarse(h.image, h.mask, IntensityTransform::uniform(1.3, 0.1)));
  }
  // Gain 0.9 keeps every voxel away from the clamp at +-1.
  const auto at = IntensityTransform::uniform(0.9, 0.0);
  const auto obj = stage1_objective(coarse, real, ex, at);
  double worst1 = 0;
  for (int cl = 0; cl < 3; ++cl)
    for (int q = 0; q < 2; ++q) {
      auto p = at, m = at;
      (q ? p.classes[cl].offset : p.classes[cl].gain) += kGradStep;
      (q ? m.classes[cl].offset : m.classes[cl].gain) -= kGradStep;
      const double fd =
          (stage1_objective(coarse, real, ex, p).loss - stage1_objective(coarse, real, ex, m).loss) / (2 * kGradStep);
      worst1 = std::max(worst1, std::abs(obj.gradient[cl][q] - fd) / std::max(std::abs(fd), 1e-8));
    }
  c.require(worst1 <= kGradRelTol, fmt("stage 1 relative error %.3g", worst1));

  // (ii) hinge + perceptual w.r.t. the generator output.
  torch::manual_seed(3);
  const auto cs = crop16(normalized_case(20));
  const auto rs = crop16(normalized_case(21));
  const auto base = to_tensor(cs.image).unsqueeze(0).to(torch::kFloat64);
  const auto roi = roi_tensor(cs.mask).to(torch::kFloat64).unsqueeze(0).unsqueeze(0);
  std::vector<torch::Tensor> rl;
  for (const auto& l : ex.forward(to_tensor(rs.image).unsqueeze(0).to(torch::kFloat64))) rl.push_back(l[0].detach());
  const auto sign = torch::randint(0, 2, base.sizes(), torch::kFloat64) * 2 - 1;
  const auto y0 = base + 0.2 * sign;  // every non-ROI deviation sits 0.15 from the margin kink
  const auto f = [&](const torch::Tensor& y) {
    std::vector<torch::Tensor> sl;
    for (const auto& l : ex.forward(y)) sl.push_back(l[0]);
    return hinge_reconstruction_loss(y, base, roi, 0.05) + class_perceptual_loss(rl, sl, rs.mask, cs.mask).value;
  };
  auto y = y0.clone().requires_grad_(true);
  f(y).backward();
  const auto grad = y.grad();
  double worst2 = 0;
  {
    torch::NoGradGuard ng;
    Rng rng(4);
    for (int n = 0; n < 24; ++n) {
      const int64_t i = rng.uniform_int(0, 15), j = rng.uniform_int(0, 15), k = rng.uniform_int(0, 15);
      auto p = y0.clone(), m = y0.clone();
      p[0][0][i][j][k] += kGradStep;
      m[0][0][i][j][k] -= kGradStep;
      const double fd = (f(p).item<double>() - f(m).item<double>()) / (2 * kGradStep);
      worst2 = std::max(worst2, std::abs(grad[0][0][i][j][k].item<double>() - fd) / std::max(std::abs(fd), 1e-8));
    }
  }
  c.require(worst2 <= kGradRelTol, fmt("generator-output relative error %.3g", worst2));
  c.note(fmt("stage 1 rel err %.2g", worst1) + fmt(", hinge+percep rel err %.2g", worst2));
  return c.result();
}

// ---- 7 ----------------------------------------------------------------------
Outcome stage1_recovery() {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  const auto truth = IntensityTransform::uniform(1.3, 0.1);
  auto spec = small_spec();
  std::vector<Stage1Sample> coarse;
  std::vector<LabeledVolume> real;
  for (int k = 0; k < 8; ++k) {
    const auto healthy = normalize_intensity(generate_phantom_brain(jittered_spec(spec, 100 + k)));
    const auto mask = generate_phantom_tumor_case(jittered_spec(spec, 200 + k)).mask;
    coarse.push_back(make_stage1_sample(healthy, mask));
    real.push_back(fabricate_coarse(healthy, mask, truth));
  }
  Stage1FitConfig cfg;  // SGD, lr 1e-2, 200 epochs
  const auto r = fit_intensity_params(coarse, real, FeatureExtractor::random(ExtractorSpec{}, 7), cfg);
  double worst = 0;
  for (const auto& a : r.transform.classes)
    worst = std::max({worst, std::abs(a.gain - 1.3), std::abs(a.offset - 0.1)});
  const double t = seconds_since(t0);
  c.require(worst <= kStage1AbsTol, fmt("max abs error %.4f", worst));
  c.require(t < kStage1BudgetS, fmt("runtime %.0fs", t));
  c.note(fmt("max |param - truth| %.4f", worst) + fmt(" after %.0f epochs", double(cfg.epochs)) + fmt(", %.0fs", t));
  return c.result();
}

// ---- 8 ----------------------------------------------------------------------
Outcome tfaug_locality() {
  Check c;
  int64_t bad = 0;
  for (uint64_t s = 0; s < 100; ++s) {
    const auto healthy = normalize_intensity(generate_phantom_brain(jittered_spec(small_spec(), s)));
    const auto mask = generate_phantom_tumor_case(jittered_spec(small_spec(), 500 + s)).mask;
    Rng rng(s);
    IntensityTransform t;
    for (auto& a : t.classes) a = {rng.uniform(0.5, 2.0), rng.uniform(-0.5, 0.5)};
    const auto out = fabricate_coarse(healthy, mask, t);
    for (size_t n = 0; n < mask.labels().size(); ++n)
      if (mask.labels()[n] == 0 && std::memcmp(&out.image.data()[n], &healthy.data()[n], sizeof(float)) != 0) ++bad;
  }
  c.require(bad == 0, std::to_string(bad) + " non-ROI voxels changed");
  c.note("100 cases, all non-ROI voxels bitwise equal");
  return c.result();
}

// ---- 9 ----------------------------------------------------------------------
Outcome mask_pipeline() {
  Check c;
  const auto brain = compute_brain_mask(generate_phantom_brain(small_spec()));
  std::vector<SegMask> pool;
  for (uint64_t s = 0; s < 6; ++s) pool.push_back(generate_phantom_tumor_case(jittered_spec(small_spec(), s)).mask);
  MaskAugmentConfig cfg;
  cfg.shift_range_mm = 5.0;
  cfg.min_tumor_voxels = 32;
  int64_t ok = 0, exhausted = 0;
  bool reproducible = true;
  for (uint64_t k = 0; k < 500; ++k) {
    Rng a(derive_seed(99, {k})), b(derive_seed(99, {k}));
    SampledMask x, y;
    try {
      x = sample_synthetic_mask(pool, brain, cfg, a);
      y = sample_synthetic_mask(pool, brain, cfg, b);
    } catch (const SamplingExhaustedError&) {
      ++exhausted;
      continue;
    }
    reproducible = reproducible && x.mask == y.mask;
    bool valid = x.mask.tumor_voxels() >= cfg.min_tumor_voxels;
    for (size_t n = 0; n < x.mask.labels().size(); ++n) {
      valid = valid && x.mask.labels()[n] <= 3;
      valid = valid && (x.mask.labels()[n] == 0 || brain.values()[n]);
    }
    ok += valid;
  }
  c.require(exhausted == 0, std::to_string(exhausted) + " draws exhausted retries");
  c.require(ok == 500, std::to_string(500 - ok) + " draws violated an invariant");
  c.require(reproducible, "fixed seed did not reproduce");
  c.note("500/500 draws valid and reproducible");
  return c.result();
}

TrainConfig smoke_train_config() {
  TrainConfig t;
  t.epochs = 2;
  t.crop = {32, 32, 32};
  t.seed = 5;
  return t;
}

// ---- 10 ---------------------------------------------------------------------
Outcome frozen_extractor() {
  Check c;
  const auto ex = FeatureExtractor::random(ExtractorSpec{}, 1234);
  const uint64_t before = ex.checksum();
  std::vector<LabeledVolume> coarse, real;
  for (uint64_t k = 0; k < 2; ++k) {
    coarse.push_back(normalized_case(30 + k));
    real.push_back(normalized_case(40 + k));
  }
  Refiner r(smoke_train_config());
  train_refiner(r, coarse, real, ex);
  const uint64_t after = ex.checksum();
  c.require(before == after, "extractor checksum changed");
  c.note("checksum " + hex64(before) + " before and after 2 epochs");
  return c.result();
}

// ---- 11 ---------------------------------------------------------------------
Outcome partition_of_unity() {
  Check c;
  const TileFunction identity = [](const torch::Tensor& x, const torch::Tensor&) { return x.clone(); };
  const auto v = random_volume({160, 144, 128}, 5);
  const auto m = random_mask({160, 144, 128}, 6, 0.05);
  WindowSpec w;  // 128^3, overlap 0.5
  const auto out = refine_volume_with(v, m, identity, w);
  double worst = 0;
  for (size_t n = 0; n < v.data().size(); ++n) worst = std::max(worst, double(std::abs(out.data()[n] - v.data()[n])));
  c.require(worst <= kWindowTol, fmt("identity blend error %.3g", worst));

  TrainConfig t;
  t.generator.base_channels = 4;
  t.crop = {32, 32, 32};
  const Refiner r(t);
  const auto sv = random_volume({64, 64, 64}, 7);
  const auto sm = random_mask({64, 64, 64}, 8, 0.05);
  WindowSpec single;
  single.window = {64, 64, 64};
  const auto refined = refine_volume(sv, sm, r, single);
  const auto direct = volume_from_tensor(r.generate(to_tensor(sv).unsqueeze(0), one_hot(sm).unsqueeze(0)), sv.geometry());
  c.require(refined.data() == direct.data(), "single window differs from direct forward");
  c.note(fmt("identity error %.2g; single window bitwise equal", worst));
  return c.result();
}

// ---- 12 ---------------------------------------------------------------------
bool all_finite_logs(const fs::path& log, size_t& lines) {
  std::ifstream in(log);
  std::string line;
  lines = 0;
  while (std::getline(in, line)) {
    ++lines;
    const auto j = Json::parse(line);
    for (const char* k : {"d_patch", "d_global", "g_patch", "g_global", "hinge", "percep"})
      if (!j[k].is_number() || !std::isfinite(j[k].get<double>())) return false;
  }
  return lines > 0;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

struct SmokeRun {
  fs::path log;
  fs::path refined;
  fs::path coarse;
  Json report;
  size_t checkpoints = 0;
};

SmokeRun run_pipeline(const fs::path& root) {
  auto base = load_config("", {"phantom.healthy_count=8", "phantom.tumor_count=8", "stage1.epochs=10",
                               "stage2.epochs=2", "stage2.crop_size=[32,32,32]", "stage2.window.size=[64,64,64]"},
                          11, (root / "phantom").string());
  const auto at = [&](const char* sub) {
    auto c = base;
    c.out_dir = (root / sub).string();
    return c;
  };
  cmd_phantom(base);
  cmd_preprocess(at("pre_healthy"), root / "phantom" / "healthy");
  cmd_preprocess(at("pre_tumor"), root / "phantom" / "tumor");
  const auto healthy = root / "pre_healthy" / "manifest.jsonl", tumor = root / "pre_tumor" / "manifest.jsonl";
  cmd_fabricate(at("fabricate"), healthy, tumor, 8, std::nullopt);
  const auto coarse = root / "fabricate" / "manifest.jsonl";
  const auto tr = cmd_train_refiner(at("train"), coarse, tumor, std::nullopt);
  const fs::path ckpt = tr.summary["final_checkpoint"].get<std::string>();
  cmd_refine(at("refine"), ckpt, coarse);
  const auto ev = cmd_evaluate(at("evaluate"), {root / "refine" / "manifest.jsonl"}, coarse, {});
  return {root / "train" / "train_log.jsonl", root / "refine" / "manifest.jsonl", coarse, ev.summary,
          tr.summary["checkpoints"].size()};
}

Outcome end_to_end() {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  const auto root = temp_dir("acceptance_e2e");
  const auto a = run_pipeline(root / "run_a");
  const auto b = run_pipeline(root / "run_b");
  size_t lines = 0;
  c.require(all_finite_logs(a.log, lines), "non-finite or missing loss log entries");
  c.require(a.checkpoints == 2, "expected 2 checkpoints");
  c.require(slurp(a.log) == slurp(b.log), "loss logs differ across same-seed runs");
  const auto refined = Manifest::read(a.refined);
  c.require(refined.size() == 8, "expected 8 refined volumes");
  for (size_t n = 0; n < refined.size(); ++n) {
    const auto v = load_volume(refined.path(n, "image"));
    for (float x : v.data())
      if (!(x >= -1.0f && x <= 1.0f)) {
        c.require(false, "refined voxel outside [-1, 1]");
        break;
      }
  }
  c.require(a.report["table"][0]["Mean"]["mean"].get<double>() == 1.0, "evaluate on the coarse masks should give Dice 1");
  const double t = seconds_since(t0);
  c.require(t < kSmokeBudgetS, fmt("runtime %.0fs", t));
  c.note(std::to_string(lines) + " logged steps, identical logs, " + fmt("%.0fs for two runs", t));
  fs::remove_all(root);
  return c.result();
}

// ---- 13 ---------------------------------------------------------------------
Outcome statistics() {
  Check c;
  const std::vector<double> a{0.62, 0.65, 0.61, 0.66}, b{0.70, 0.68, 0.71};
  c.require(two_tailed_t_test(a, a).p_value == 1.0, "identical samples p != 1");
  c.require(two_tailed_t_test(a, b).p_value == two_tailed_t_test(b, a).p_value, "p changes under swap");
  // scipy.stats.ttest_ind(x, y, equal_var=False)
  struct Ref {
    std::vector<double> x, y;
    double t, p;
  };
  const Ref refs[] = {{{1, 2, 3}, {2, 4, 7}, -1.4924050144892727, 0.24511271234626572},
                      {{0.5, 0.9, 0.1}, {0.45, 0.2, 0.3}, 0.7572712299036656, 0.5164317599409554},
                      {{66.1, 66.8, 66.8}, {67.7, 67.7, 67.9}, -4.944980302152793, 0.028194544209000652}};
  double worst = 0;
  for (const auto& r : refs) {
    const auto got = two_tailed_t_test(r.x, r.y);
    worst = std::max({worst, std::abs(got.p_value - r.p) / r.p, std::abs(got.t_statistic - r.t) / std::abs(r.t)});
  }
  c.require(worst <= kStatsTol, fmt("relative deviation from reference %.3g", worst));
  c.note(fmt("max relative deviation from reference %.2g", worst));
  return c.result();
}

}  // namespace

int main() {
  torch::set_num_threads(1);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"1 dice oracle equivalence", dice_oracle},
      {"2 hinge loss invariants", hinge_invariants},
      {"3 class-wise perceptual loss invariants", perceptual_invariants},
      {"4 lambda schedule", lambda_schedule},
      {"5 architecture shape contracts", shape_contracts},
      {"6 gradient checks", gradient_checks},
      {"7 intensity-fit self-consistency", stage1_recovery},
      {"8 coarse synthesis locality", tfaug_locality},
      {"9 mask pipeline invariants", mask_pipeline},
      {"10 frozen extractor immutability", frozen_extractor},
      {"11 sliding-window partition of unity", partition_of_unity},
      {"12 end-to-end smoke", end_to_end},
      {"13 statistics", statistics},
  };
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s  criterion %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
