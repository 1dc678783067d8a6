#include "tumorfab/intensity_fit.hpp"

#include <cmath>
#include <numeric>

#include "tumorfab/error.hpp"
#include "tumorfab/rng.hpp"
#include "tumorfab/tensor_bridge.hpp"

namespace tumorfab {

void Stage1FitConfig::validate() const {
  if (epochs < 1) throw ValidationError("stage1.epochs must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ValidationError("stage1.learning_rate must be > 0");
  if (optimizer != "sgd" && optimizer != "adam")
    throw ValidationError("stage1.optimizer must be \"sgd\" or \"adam\", got \"" + optimizer + "\"");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ValidationError("stage1.momentum must be in [0, 1)");
  if (batch_size < 1) throw ValidationError("stage1.batch_size must be >= 1");
  if (pooling != "class" && pooling != "global")
    throw ValidationError("stage1.pooling must be \"class\" or \"global\", got \"" + pooling + "\"");
  if (pooling == "class") {
    if (class_layers.empty()) throw ValidationError("stage1.class_layers must not be empty");
    for (int l : class_layers)
      if (l < 0 || l >= kPerceptualLayerLimit)
        throw ValidationError("stage1.class_layers entries must be in [0, " + std::to_string(kPerceptualLayerLimit) + ")");
  }
}

Stage1Sample make_stage1_sample(const MriVolume& healthy, const SegMask& mask, double sigma) {
  require_same_dims(healthy.dims(), mask.dims(), "make_stage1_sample");
  return {roi_blur(healthy, roi_of(mask), sigma), mask};
}

torch::Tensor transform_to_tensor(const IntensityTransform& t, torch::Dtype dtype) {
  auto out = torch::empty({3, 2}, torch::kFloat64);
  auto acc = out.accessor<double, 2>();
  for (int c = 0; c < 3; ++c) {
    acc[c][0] = t.classes[c].gain;
    acc[c][1] = t.classes[c].offset;
  }
  return out.to(dtype);
}

IntensityTransform transform_from_tensor(const torch::Tensor& params) {
  if (params.sizes() != torch::IntArrayRef{3, 2}) throw ValidationError("intensity parameters must be [3, 2]");
  const auto p = params.detach().to(torch::kFloat64).contiguous();
  const auto acc = p.accessor<double, 2>();
  IntensityTransform t;
  for (int c = 0; c < 3; ++c) t.classes[c] = {acc[c][0], acc[c][1]};
  return t;
}

torch::Tensor apply_transform_tensor(const torch::Tensor& blurred, const SegMask& mask, const torch::Tensor& params) {
  if (blurred.dim() != 5 || blurred.size(0) != 1) throw ValidationError("expected a [1, C, H, W, D] volume");
  const auto labels = label_tensor(mask).view({1, 1, mask.dims().h, mask.dims().w, mask.dims().d});
  if (blurred.size(2) != labels.size(2) || blurred.size(3) != labels.size(3) || blurred.size(4) != labels.size(4))
    throw ValidationError("apply_transform_tensor: mask and volume dims differ");
  const auto x = blurred.to(params.scalar_type());
  torch::Tensor out = x;
  for (int c = 0; c < 3; ++c) {
    const auto inside = labels == static_cast<int64_t>(kTumorClasses[c]);
    out = torch::where(inside, torch::clamp(params[c][0] * x + params[c][1], -1.0, 1.0), out);
  }
  return out;
}

torch::Tensor pooled_embedding(const FeatureExtractor& extractor, const torch::Tensor& x, int feature_level) {
  const auto levels = extractor.forward(x);
  const int n = static_cast<int>(levels.size());
  const int level = feature_level < 0 ? n + feature_level : feature_level;
  if (level < 0 || level >= n)
    throw ValidationError("stage1 feature level " + std::to_string(feature_level) + " outside the " +
                          std::to_string(n) + "-level pyramid");
  return levels[static_cast<size_t>(level)].mean({2, 3, 4});
}

namespace {

struct PreparedData {
  std::vector<torch::Tensor> blurred;
  // Global pooling: [1, channels] embeddings. Class pooling: squeezed pyramids.
  std::vector<torch::Tensor> real_embeddings;
  std::vector<std::vector<torch::Tensor>> real_levels;
};

std::vector<torch::Tensor> squeezed_levels(const FeatureExtractor& extractor, const torch::Tensor& x) {
  auto levels = extractor.forward(x);
  for (auto& l : levels) l = l.squeeze(0);
  return levels;
}

PreparedData prepare(const std::vector<Stage1Sample>& coarse, const std::vector<LabeledVolume>& real,
                     const FeatureExtractor& extractor, const Stage1LossSpec& loss) {
  if (coarse.empty()) throw ValidationError("intensity fitting needs at least one coarse sample");
  if (real.empty()) throw ValidationError("intensity fitting needs at least one real volume");
  PreparedData data;
  for (const auto& s : coarse) {
    require_same_dims(s.blurred.dims(), s.mask.dims(), "stage1 sample");
    data.blurred.push_back(to_tensor(s.blurred).unsqueeze(0).to(extractor.dtype()));
  }
  torch::NoGradGuard no_grad;
  for (const auto& r : real) {
    const auto x = to_tensor(r.image).unsqueeze(0);
    if (loss.pooling == "global") {
      data.real_embeddings.push_back(pooled_embedding(extractor, x, loss.feature_level));
    } else {
      require_same_dims(r.image.dims(), r.mask.dims(), "stage1 real volume");
      data.real_levels.push_back(squeezed_levels(extractor, x));
    }
  }
  return data;
}

torch::Tensor sample_loss(const PreparedData& data, const std::vector<Stage1Sample>& coarse,
                          const std::vector<LabeledVolume>& real, size_t k, const FeatureExtractor& extractor,
                          const torch::Tensor& params, const Stage1LossSpec& loss) {
  const auto x = apply_transform_tensor(data.blurred[k], coarse[k].mask, params);
  const size_t r = k % real.size();
  if (loss.pooling == "global") {
    const auto e = pooled_embedding(extractor, x, loss.feature_level);
    return (e - data.real_embeddings[r]).abs().mean();
  }
  return class_perceptual_loss(data.real_levels[r], squeezed_levels(extractor, x), real[r].mask, coarse[k].mask,
                               loss.class_layers)
      .value;
}

}  // namespace

Stage1Objective stage1_objective(const std::vector<Stage1Sample>& coarse, const std::vector<LabeledVolume>& real,
                                 const FeatureExtractor& extractor, const IntensityTransform& transform,
                                 const Stage1LossSpec& loss) {
  const auto data = prepare(coarse, real, extractor, loss);
  auto params = transform_to_tensor(transform, extractor.dtype()).requires_grad_(true);
  torch::Tensor total;
  for (size_t k = 0; k < coarse.size(); ++k) {
    const auto l = sample_loss(data, coarse, real, k, extractor, params, loss);
    total = total.defined() ? total + l : l;
  }
  total = total / static_cast<double>(coarse.size());
  total.backward();
  Stage1Objective out;
  out.loss = total.item<double>();
  const auto g = params.grad().to(torch::kFloat64).contiguous();
  const auto acc = g.accessor<double, 2>();
  for (int c = 0; c < 3; ++c) out.gradient[c] = {acc[c][0], acc[c][1]};
  return out;
}

Stage1FitResult fit_intensity_params(const std::vector<Stage1Sample>& coarse, const std::vector<LabeledVolume>& real,
                                     const FeatureExtractor& extractor, const Stage1FitConfig& config,
                                     const Stage1Progress& progress) {
  config.validate();
  const auto spec = Stage1LossSpec::from(config);
  const auto data = prepare(coarse, real, extractor, spec);
  auto params = transform_to_tensor(IntensityTransform::identity(), extractor.dtype()).requires_grad_(true);

  std::unique_ptr<torch::optim::Optimizer> opt;
  if (config.optimizer == "sgd")
    opt = std::make_unique<torch::optim::SGD>(std::vector<torch::Tensor>{params},
                                              torch::optim::SGDOptions(config.learning_rate).momentum(config.momentum));
  else
    opt = std::make_unique<torch::optim::Adam>(std::vector<torch::Tensor>{params},
                                               torch::optim::AdamOptions(config.learning_rate));

  Stage1FitResult result;
  std::vector<size_t> order(coarse.size());
  const auto batch = static_cast<size_t>(config.batch_size);
  for (int64_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), size_t{0});
    Rng rng(derive_seed(config.seed, {static_cast<uint64_t>(epoch)}));
    for (size_t n = order.size(); n > 1; --n)
      std::swap(order[n - 1], order[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(n) - 1))]);

    double epoch_loss = 0.0;
    size_t steps = 0;
    for (size_t start = 0; start < order.size(); start += batch) {
      const size_t stop = std::min(order.size(), start + batch);
      opt->zero_grad();
      torch::Tensor loss;
      for (size_t n = start; n < stop; ++n) {
        const auto l = sample_loss(data, coarse, real, order[n], extractor, params, spec);
        loss = loss.defined() ? loss + l : l;
      }
      loss = loss / static_cast<double>(stop - start);
      const double value = loss.item<double>();
      if (!std::isfinite(value))
        throw NonFiniteLossError("intensity fitting diverged at epoch " + std::to_string(epoch), epoch);
      loss.backward();
      opt->step();
      epoch_loss += value;
      ++steps;
    }
    result.loss_history.push_back(epoch_loss / static_cast<double>(steps));
    if (progress) progress(epoch, result.loss_history.back(), transform_from_tensor(params));
  }
  result.transform = transform_from_tensor(params);
  return result;
}

}  // namespace tumorfab
