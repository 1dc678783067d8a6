#pragma once

#include <torch/torch.h>

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "tumorfab/coarse_synth.hpp"
#include "tumorfab/feature_net.hpp"

namespace tumorfab {

struct Stage1FitConfig {
  int64_t epochs = 200;
  double learning_rate = 1e-2;
  /// "sgd" or "adam".
  std::string optimizer = "sgd";
  double momentum = 0.9;
  /// Samples per gradient step; every epoch visits each coarse sample once.
  int64_t batch_size = 1;
  /// "class": class-wise masked pooling over `class_layers`, compared per tumor class
  /// against the real volume's own mask. "global": spatial average of one level.
  std::string pooling = "class";
  std::vector<int> class_layers{0};
  /// Level used by "global" pooling; negative counts from the deepest.
  int feature_level = -1;
  uint64_t seed = 0;

  void validate() const;
};

/// A coarse sample before the intensity transform: the ROI-blurred healthy scan
/// and its synthetic mask. The transform is applied differentiably inside the loss.
struct Stage1Sample {
  MriVolume blurred;
  SegMask mask;
};

Stage1Sample make_stage1_sample(const MriVolume& healthy, const SegMask& mask, double sigma = kRoiBlurSigma);

/// [3, 2] tensor of (gain, offset) rows for NCR, ED, ET, and back.
torch::Tensor transform_to_tensor(const IntensityTransform& t, torch::Dtype dtype = torch::kFloat64);
IntensityTransform transform_from_tensor(const torch::Tensor& params);

/// Differentiable apply_intensity_transform on [1, C, H, W, D]; gradients flow to `params`.
torch::Tensor apply_transform_tensor(const torch::Tensor& blurred, const SegMask& mask, const torch::Tensor& params);

/// Spatially averaged embedding [N, channels] of the chosen pyramid level.
torch::Tensor pooled_embedding(const FeatureExtractor& extractor, const torch::Tensor& x, int feature_level);

struct Stage1LossSpec {
  std::string pooling = "class";
  std::vector<int> class_layers{0};
  int feature_level = -1;

  static Stage1LossSpec from(const Stage1FitConfig& config) {
    return {config.pooling, config.class_layers, config.feature_level};
  }
};

struct Stage1Objective {
  double loss = 0.0;
  /// d loss / d (gain, offset) per class, rows NCR, ED, ET.
  std::array<std::array<double, 2>, 3> gradient{};
};

/// Mean over samples k of the L1 embedding distance between coarse_k and
/// real_{k mod M}, with its autograd gradient.
Stage1Objective stage1_objective(const std::vector<Stage1Sample>& coarse, const std::vector<LabeledVolume>& real,
                                 const FeatureExtractor& extractor, const IntensityTransform& transform,
                                 const Stage1LossSpec& loss = {});

struct Stage1FitResult {
  IntensityTransform transform;
  /// Mean loss over each epoch's steps, evaluated before the step's update.
  std::vector<double> loss_history;
};

using Stage1Progress = std::function<void(int64_t epoch, double loss, const IntensityTransform&)>;

/// Fits a single global transform starting from the identity. Coarse sample k is
/// compared against real volume k mod M; the visiting order is reshuffled every epoch.
Stage1FitResult fit_intensity_params(const std::vector<Stage1Sample>& coarse, const std::vector<LabeledVolume>& real,
                                     const FeatureExtractor& extractor, const Stage1FitConfig& config,
                                     const Stage1Progress& progress = {});

}  // namespace tumorfab
