#include "tumorfab/refiner_nets.hpp"

#include <algorithm>
#include <cmath>

#include "tumorfab/error.hpp"

namespace tumorfab {
namespace nn = torch::nn;
namespace {

constexpr double kGeneratorSlope = 0.01;
constexpr double kDiscriminatorSlope = 0.2;

int64_t groups_for(int64_t channels) { return std::max<int64_t>(1, channels / 4); }

void append_conv_norm_act(nn::Sequential& s, int64_t in, int64_t out, int64_t stride) {
  s->push_back(nn::Conv3d(nn::Conv3dOptions(in, out, 3).stride(stride).padding(1)));
  s->push_back(nn::GroupNorm(nn::GroupNormOptions(groups_for(out), out)));
  s->push_back(nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(kGeneratorSlope)));
}

nn::Sequential conv_norm_act(int64_t in, int64_t out, int64_t stride) {
  nn::Sequential s;
  append_conv_norm_act(s, in, out, stride);
  return s;
}

nn::Sequential double_conv(int64_t in, int64_t out, int64_t stride) {
  nn::Sequential s;
  append_conv_norm_act(s, in, out, stride);
  append_conv_norm_act(s, out, out, 1);
  return s;
}

}  // namespace

int64_t GeneratorSpec::width(int level) const { return std::min(max_channels, base_channels << level); }

void GeneratorSpec::validate() const {
  if (image_channels < 1 || base_channels < 1 || max_channels < base_channels)
    throw ValidationError("generator channel settings must satisfy 1 <= base <= max");
}

int64_t DiscriminatorSpec::width(int stage) const { return std::min(max_channels, base_channels << stage); }

void DiscriminatorSpec::validate() const {
  if (image_channels < 1 || base_channels < 1 || max_channels < base_channels)
    throw ValidationError("discriminator channel settings must satisfy 1 <= base <= max");
}

void check_network_input(const torch::Tensor& image, const torch::Tensor& mask_onehot, int64_t image_channels,
                         const char* who) {
  if (image.dim() != 5 || mask_onehot.dim() != 5)
    throw ValidationError(std::string(who) + ": inputs must be [N, C, H, W, D]");
  if (image.size(1) != image_channels)
    throw ValidationError(std::string(who) + ": expected " + std::to_string(image_channels) + " image channels");
  if (mask_onehot.size(1) != kMaskChannels)
    throw ValidationError(std::string(who) + ": expected a 4-channel one-hot mask");
  if (image.size(0) != mask_onehot.size(0))
    throw ValidationError(std::string(who) + ": batch size mismatch between image and mask");
  for (int a = 2; a < 5; ++a) {
    if (image.size(a) != mask_onehot.size(a))
      throw ValidationError(std::string(who) + ": image and mask spatial dims differ");
    if (image.size(a) < kDownsampleFactor || image.size(a) % kDownsampleFactor != 0)
      throw ValidationError(std::string(who) + ": spatial dims must be positive multiples of 32, got " +
                            std::to_string(image.size(a)));
  }
}

void initialize_weights(torch::nn::Module& module, uint64_t seed, double negative_slope) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  torch::NoGradGuard no_grad;
  const double gain = std::sqrt(2.0 / (1.0 + negative_slope * negative_slope));
  for (auto& item : module.named_parameters(true)) {
    auto& p = item.value();
    if (p.dim() >= 2) {
      const double fan_in = static_cast<double>(p[0].numel());
      p.normal_(0.0, gain / std::sqrt(fan_in), gen);
    } else if (item.key().ends_with("bias")) {
      p.zero_();
    } else {
      p.fill_(1.0);
    }
  }
}

GeneratorImpl::GeneratorImpl(const GeneratorSpec& spec) : spec_(spec) {
  spec.validate();
  constexpr int L = GeneratorSpec::kLevels;
  int64_t in = spec.in_channels();
  for (int l = 0; l < L; ++l) {
    encoder_.push_back(register_module("enc" + std::to_string(l), double_conv(in, spec.width(l), l == 0 ? 1 : 2)));
    in = spec.width(l);
  }
  for (int l = L - 2; l >= 0; --l) {
    up_.push_back(register_module("up" + std::to_string(l), conv_norm_act(spec.width(l + 1), spec.width(l), 1)));
    decoder_.push_back(register_module("dec" + std::to_string(l), double_conv(2 * spec.width(l), spec.width(l), 1)));
  }
  head_ = register_module("head", nn::Conv3d(nn::Conv3dOptions(spec.width(0), spec.image_channels, 1)));
}

torch::Tensor GeneratorImpl::forward(const torch::Tensor& image, const torch::Tensor& mask_onehot) {
  check_network_input(image, mask_onehot, spec_.image_channels, "generator");
  torch::Tensor x = torch::cat({image, mask_onehot.to(image.scalar_type())}, 1);
  std::vector<torch::Tensor> skips;
  for (auto& stage : encoder_) {
    x = stage->forward(x);
    skips.push_back(x);
  }
  for (size_t u = 0; u < up_.size(); ++u) {
    const auto& skip = skips[skips.size() - 2 - u];
    x = nn::functional::interpolate(
        x, nn::functional::InterpolateFuncOptions()
               .size(std::vector<int64_t>{skip.size(2), skip.size(3), skip.size(4)})
               .mode(torch::kNearest));
    x = up_[u]->forward(x);
    x = decoder_[u]->forward(torch::cat({x, skip}, 1));
  }
  return torch::tanh(head_->forward(x));
}

DiscriminatorImpl::DiscriminatorImpl(const DiscriminatorSpec& spec) : spec_(spec) {
  spec.validate();
  const auto act = [] { return nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(kDiscriminatorSlope)); };
  nn::Sequential enc;
  enc->push_back(nn::Conv3d(nn::Conv3dOptions(spec.in_channels(), spec.width(0), 3).padding(1)));
  enc->push_back(act());
  for (int s = 1; s <= DiscriminatorSpec::kStages; ++s) {
    enc->push_back(nn::Conv3d(nn::Conv3dOptions(spec.width(s - 1), spec.width(s), 4).stride(2).padding(1)));
    enc->push_back(act());
  }
  encoder_ = register_module("encoder", enc);
  const int64_t top = spec.width(DiscriminatorSpec::kStages);
  patch_head_ = register_module("patch_head", nn::Conv3d(nn::Conv3dOptions(top, 1, 3).padding(1)));
  global_head_ = register_module("global_head", nn::Linear(top, 1));
}

DiscriminatorOutput DiscriminatorImpl::forward(const torch::Tensor& image, const torch::Tensor& mask_onehot) {
  check_network_input(image, mask_onehot, spec_.image_channels, "discriminator");
  const auto features = encoder_->forward(torch::cat({image, mask_onehot.to(image.scalar_type())}, 1));
  DiscriminatorOutput out;
  out.patch = patch_head_->forward(features);
  out.global = global_head_->forward(nn::functional::adaptive_avg_pool3d(features, nn::functional::AdaptiveAvgPool3dFuncOptions(1)).flatten(1));
  return out;
}

}  // namespace tumorfab
