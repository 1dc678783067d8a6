#pragma once

#include <torch/torch.h>

#include <cstdint>

namespace tumorfab {

/// Channels of the one-hot mask concatenated to every network input (background included).
inline constexpr int64_t kMaskChannels = 4;
/// Spatial reduction of the discriminator's patch head, and the divisibility
/// required of every network input.
inline constexpr int64_t kDownsampleFactor = 32;

/// 3D U-Net with six resolution levels. Decoder upsampling is nearest-neighbour
/// interpolation followed by a convolution; the output passes through tanh.
struct GeneratorSpec {
  static constexpr int kLevels = 6;
  int64_t image_channels = 1;
  int64_t base_channels = 16;
  int64_t max_channels = 256;

  int64_t in_channels() const { return image_channels + kMaskChannels; }
  int64_t width(int level) const;
  void validate() const;
};

/// Shared five-stage strided encoder feeding a PatchGAN head and a pooled
/// fully-connected global head. Both heads emit logits.
struct DiscriminatorSpec {
  static constexpr int kStages = 5;
  int64_t image_channels = 1;
  int64_t base_channels = 16;
  int64_t max_channels = 256;

  int64_t in_channels() const { return image_channels + kMaskChannels; }
  int64_t width(int stage) const;
  void validate() const;
};

class GeneratorImpl : public torch::nn::Module {
 public:
  explicit GeneratorImpl(const GeneratorSpec& spec);
  /// image [N, C, H, W, D], mask_onehot [N, 4, H, W, D] -> [N, C, H, W, D] in [-1, 1].
  torch::Tensor forward(const torch::Tensor& image, const torch::Tensor& mask_onehot);
  const GeneratorSpec& spec() const { return spec_; }

 private:
  GeneratorSpec spec_;
  std::vector<torch::nn::Sequential> encoder_;
  std::vector<torch::nn::Sequential> up_;
  std::vector<torch::nn::Sequential> decoder_;
  torch::nn::Conv3d head_{nullptr};
};
TORCH_MODULE(Generator);

struct DiscriminatorOutput {
  torch::Tensor patch;   // [N, 1, H/32, W/32, D/32]
  torch::Tensor global;  // [N, 1]
};

class DiscriminatorImpl : public torch::nn::Module {
 public:
  explicit DiscriminatorImpl(const DiscriminatorSpec& spec);
  DiscriminatorOutput forward(const torch::Tensor& image, const torch::Tensor& mask_onehot);
  const DiscriminatorSpec& spec() const { return spec_; }

 private:
  DiscriminatorSpec spec_;
  torch::nn::Sequential encoder_{nullptr};
  torch::nn::Conv3d patch_head_{nullptr};
  torch::nn::Linear global_head_{nullptr};
};
TORCH_MODULE(Discriminator);

/// He-normal initialization of every convolution / linear weight, zero biases,
/// unit norm scales, drawn from a private generator seeded with `seed`.
void initialize_weights(torch::nn::Module& module, uint64_t seed, double negative_slope);

/// Throws ValidationError unless every spatial dim of [N, C, H, W, D] is a positive multiple of 32.
void check_network_input(const torch::Tensor& image, const torch::Tensor& mask_onehot, int64_t image_channels,
                         const char* who);

}  // namespace tumorfab
