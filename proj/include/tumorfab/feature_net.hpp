#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <memory>
#include <optional>
#include <vector>

#include "tumorfab/volume.hpp"

namespace tumorfab {

/// Number of high-resolution pyramid levels the class-wise perceptual loss may use.
inline constexpr int kPerceptualLayerLimit = 3;

struct ExtractorSpec {
  /// Image channels, plus 4 when the encoder is conditioned on a one-hot mask.
  int64_t in_channels = 1;
  /// Output width of each stage; the stage count is widths.size().
  std::vector<int64_t> widths{8, 16, 32, 64, 64, 64};

  int64_t level_count() const { return static_cast<int64_t>(widths.size()); }
  void validate() const;
};

/// Encoder stages: (3x3x3 conv, norm, LeakyReLU) x 2, the first conv of every
/// stage after the first has stride 2. Normalization uses stored per-channel
/// statistics (inference-mode batch norm), so each feature depends only on its
/// receptive field.
class ExtractorNetImpl : public torch::nn::Module {
 public:
  explicit ExtractorNetImpl(const ExtractorSpec& spec);
  std::vector<torch::Tensor> forward(torch::Tensor x);

 private:
  std::vector<torch::nn::Sequential> stages_;
};
TORCH_MODULE(ExtractorNet);

/// Ordered feature maps [channels, h, w, d], level 0 at full resolution.
struct FeaturePyramid {
  std::vector<torch::Tensor> levels;
};

struct ClassFeature {
  std::vector<float> vector;
  int layer = 0;
  Label class_id = Label::Background;
};

/// Frozen multi-scale feature extractor. Copies share the same immutable weights.
class FeatureExtractor {
 public:
  /// Fixed-seed randomly initialized weights (He-normal convolutions, identity norm statistics).
  static FeatureExtractor random(const ExtractorSpec& spec, uint64_t seed);
  static FeatureExtractor load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  const ExtractorSpec& spec() const { return spec_; }
  torch::Dtype dtype() const;

  /// Differentiable w.r.t. `x` ([N, C, H, W, D]); the weights never receive gradients.
  std::vector<torch::Tensor> forward(const torch::Tensor& x) const;

  /// Pyramid of a single volume, optionally conditioned on a one-hot mask.
  FeaturePyramid extract(const MriVolume& volume, const SegMask* mask = nullptr) const;

  uint64_t checksum() const;

  /// Independent copy with weights cast to `dtype` (used for double-precision checks).
  FeatureExtractor converted(torch::Dtype dtype) const;

 private:
  FeatureExtractor(ExtractorSpec spec, ExtractorNet net);
  ExtractorSpec spec_;
  mutable ExtractorNet net_{nullptr};
};

/// Nearest-neighbour label downsampling to a pyramid level: output voxel j takes
/// input voxel j * 2^level, matching the stride-2 sampling grid of the encoder.
SegMask downsample_labels(const SegMask& mask, int level, const Dims3& level_dims);

/// Masked global average of a [C, h, w, d] feature map over `indicator` ([h, w, d], {0, 1}).
torch::Tensor masked_average(const torch::Tensor& features, const torch::Tensor& indicator);

/// Mean feature vector over voxels of class `class_id` at `layer`; nullopt when the
/// class is absent at that resolution. `layer` must be below kPerceptualLayerLimit.
std::optional<ClassFeature> masked_class_pool(const FeaturePyramid& pyramid, const SegMask& mask, Label class_id,
                                              int layer);

struct PerceptualLoss {
  torch::Tensor value;  // scalar, differentiable w.r.t. the synthetic pyramid
  int pairs_used = 0;
  /// No (layer, class) pair was present in both masks; value is 0.
  bool all_empty = false;
};

/// Mean over present (layer, tumor class) pairs of the mean absolute difference
/// between real and synthetic class features.
PerceptualLoss class_perceptual_loss(const std::vector<torch::Tensor>& real_levels,
                                     const std::vector<torch::Tensor>& syn_levels, const SegMask& mask_real,
                                     const SegMask& mask_syn, const std::vector<int>& layers = {0, 1, 2});

double class_perceptual_loss(const FeaturePyramid& real, const FeaturePyramid& syn, const SegMask& mask_real,
                             const SegMask& mask_syn, const std::vector<int>& layers = {0, 1, 2});

}  // namespace tumorfab
