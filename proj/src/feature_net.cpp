#include "tumorfab/feature_net.hpp"

#include <cmath>

#include "tumorfab/binary_io.hpp"
#include "tumorfab/error.hpp"
#include "tumorfab/tensor_bridge.hpp"

namespace tumorfab {
namespace {

constexpr char kWeightMagic[8] = {'T', 'F', 'E', 'X', 'T', 'R', 'W', '\0'};
constexpr uint32_t kWeightVersion = 1;
constexpr double kLeakySlope = 0.01;

torch::nn::Sequential make_stage(int64_t in, int64_t out, int64_t stride) {
  namespace nn = torch::nn;
  return nn::Sequential(
      nn::Conv3d(nn::Conv3dOptions(in, out, 3).stride(stride).padding(1)),
      nn::BatchNorm3d(nn::BatchNormOptions(out)),
      nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(kLeakySlope)),
      nn::Conv3d(nn::Conv3dOptions(out, out, 3).padding(1)),
      nn::BatchNorm3d(nn::BatchNormOptions(out)),
      nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(kLeakySlope)));
}

void freeze(torch::nn::Module& module) {
  module.eval();
  for (auto& p : module.parameters()) p.set_requires_grad(false);
}

}  // namespace

void ExtractorSpec::validate() const {
  if (in_channels < 1) throw ValidationError("extractor in_channels must be >= 1");
  if (widths.empty()) throw ValidationError("extractor needs at least one stage");
  for (int64_t w : widths)
    if (w < 1) throw ValidationError("extractor widths must be positive");
}

ExtractorNetImpl::ExtractorNetImpl(const ExtractorSpec& spec) {
  int64_t in = spec.in_channels;
  for (size_t s = 0; s < spec.widths.size(); ++s) {
    stages_.push_back(register_module("stage" + std::to_string(s), make_stage(in, spec.widths[s], s == 0 ? 1 : 2)));
    in = spec.widths[s];
  }
}

std::vector<torch::Tensor> ExtractorNetImpl::forward(torch::Tensor x) {
  std::vector<torch::Tensor> levels;
  levels.reserve(stages_.size());
  for (auto& stage : stages_) {
    x = stage->forward(x);
    levels.push_back(x);
  }
  return levels;
}

FeatureExtractor::FeatureExtractor(ExtractorSpec spec, ExtractorNet net) : spec_(std::move(spec)), net_(std::move(net)) {
  freeze(*net_);
}

FeatureExtractor FeatureExtractor::random(const ExtractorSpec& spec, uint64_t seed) {
  spec.validate();
  ExtractorNet net(spec);
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  torch::NoGradGuard no_grad;
  const double gain = std::sqrt(2.0 / (1.0 + kLeakySlope * kLeakySlope));
  for (auto& item : net->named_parameters(true)) {
    auto& p = item.value();
    if (p.dim() == 5) {
      const double fan_in = static_cast<double>(p.size(1) * p.size(2) * p.size(3) * p.size(4));
      p.normal_(0.0, gain / std::sqrt(fan_in), gen);
    } else if (item.key().ends_with("weight")) {
      p.fill_(1.0);
    } else {
      p.zero_();
    }
  }
  return FeatureExtractor(spec, net);
}

void FeatureExtractor::save(const std::filesystem::path& path) const {
  BinaryWriter out(path);
  out.bytes(kWeightMagic, sizeof(kWeightMagic));
  out.pod(kWeightVersion);
  out.pod(static_cast<uint32_t>(spec_.in_channels));
  out.pod(static_cast<uint32_t>(spec_.widths.size()));
  for (int64_t w : spec_.widths) out.pod(static_cast<uint32_t>(w));
  write_module(out, *net_);
  out.close();
}

FeatureExtractor FeatureExtractor::load(const std::filesystem::path& path) {
  BinaryReader in(path);
  char magic[8];
  in.bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kWeightMagic, sizeof(magic)) != 0)
    throw IoError("not an extractor weight file: " + path.string());
  const auto version = in.pod<uint32_t>();
  if (version != kWeightVersion)
    throw IoError("unsupported extractor weight version " + std::to_string(version) + ": " + path.string());
  ExtractorSpec spec;
  spec.in_channels = in.pod<uint32_t>();
  const auto stages = in.pod<uint32_t>();
  if (stages == 0 || stages > 16) throw IoError("corrupt stage count in " + path.string());
  spec.widths.resize(stages);
  for (auto& w : spec.widths) w = in.pod<uint32_t>();
  spec.validate();
  ExtractorNet net(spec);
  read_module(in, *net);
  return FeatureExtractor(spec, net);
}

torch::Dtype FeatureExtractor::dtype() const { return net_->parameters().front().scalar_type(); }

std::vector<torch::Tensor> FeatureExtractor::forward(const torch::Tensor& x) const {
  if (x.dim() != 5 || x.size(1) != spec_.in_channels)
    throw ValidationError("extractor expects [N, " + std::to_string(spec_.in_channels) + ", H, W, D] input");
  return net_->forward(x.to(dtype()));
}

FeaturePyramid FeatureExtractor::extract(const MriVolume& volume, const SegMask* mask) const {
  torch::NoGradGuard no_grad;
  torch::Tensor x = to_tensor(volume);
  if (mask) {
    require_same_dims(volume.dims(), mask->dims(), "extract_features");
    x = torch::cat({x, one_hot(*mask)}, 0);
  }
  if (x.size(0) != spec_.in_channels)
    throw ValidationError("extractor expects " + std::to_string(spec_.in_channels) + " input channels, got " +
                          std::to_string(x.size(0)));
  FeaturePyramid pyr;
  for (auto& level : forward(x.unsqueeze(0))) pyr.levels.push_back(level.squeeze(0));
  return pyr;
}

uint64_t FeatureExtractor::checksum() const { return module_checksum(*net_); }

FeatureExtractor FeatureExtractor::converted(torch::Dtype dtype) const {
  ExtractorNet net(spec_);
  {
    torch::NoGradGuard no_grad;
    auto dst = module_state(*net);
    const auto src = module_state(*net_);
    for (size_t n = 0; n < dst.size(); ++n) dst[n].second.copy_(src[n].second);
  }
  net->to(dtype);
  return FeatureExtractor(spec_, net);
}

SegMask downsample_labels(const SegMask& mask, int level, const Dims3& level_dims) {
  if (level == 0 && level_dims == mask.dims()) return mask;
  SegMask out(level_dims, mask.geometry());
  const int64_t step = int64_t{1} << level;
  const Dims3& in = mask.dims();
  for (int64_t i = 0; i < level_dims.h; ++i)
    for (int64_t j = 0; j < level_dims.w; ++j)
      for (int64_t k = 0; k < level_dims.d; ++k)
        out.at(i, j, k) = mask.at(std::min(i * step, in.h - 1), std::min(j * step, in.w - 1), std::min(k * step, in.d - 1));
  return out;
}

torch::Tensor masked_average(const torch::Tensor& features, const torch::Tensor& indicator) {
  const auto w = indicator.to(features.scalar_type());
  return (features * w.unsqueeze(0)).sum({1, 2, 3}) / w.sum();
}

namespace {

Dims3 level_dims(const torch::Tensor& level) { return {level.size(1), level.size(2), level.size(3)}; }

void check_layer(int layer, size_t available) {
  if (layer < 0 || layer >= kPerceptualLayerLimit || static_cast<size_t>(layer) >= available)
    throw ValidationError("perceptual layer index " + std::to_string(layer) + " outside [0, " +
                          std::to_string(std::min<size_t>(kPerceptualLayerLimit, available)) + ")");
}

}  // namespace

std::optional<ClassFeature> masked_class_pool(const FeaturePyramid& pyramid, const SegMask& mask, Label class_id,
                                              int layer) {
  check_layer(layer, pyramid.levels.size());
  const auto& features = pyramid.levels[static_cast<size_t>(layer)];
  const SegMask small = downsample_labels(mask, layer, level_dims(features));
  const auto indicator = label_tensor(small) == static_cast<int64_t>(class_id);
  if (indicator.sum().item<int64_t>() == 0) return std::nullopt;
  torch::NoGradGuard no_grad;
  const auto pooled = masked_average(features, indicator).to(torch::kFloat32).contiguous();
  ClassFeature out;
  out.vector.assign(pooled.data_ptr<float>(), pooled.data_ptr<float>() + pooled.numel());
  out.layer = layer;
  out.class_id = class_id;
  return out;
}

PerceptualLoss class_perceptual_loss(const std::vector<torch::Tensor>& real_levels,
                                     const std::vector<torch::Tensor>& syn_levels, const SegMask& mask_real,
                                     const SegMask& mask_syn, const std::vector<int>& layers) {
  PerceptualLoss out;
  torch::Tensor total;
  for (int layer : layers) {
    check_layer(layer, std::min(real_levels.size(), syn_levels.size()));
    const auto& fr = real_levels[static_cast<size_t>(layer)];
    const auto& fs = syn_levels[static_cast<size_t>(layer)];
    if (fr.size(0) != fs.size(0))
      throw ValidationError("pyramids come from different extractors (channel mismatch at layer " +
                            std::to_string(layer) + ")");
    const auto real_small = label_tensor(downsample_labels(mask_real, layer, level_dims(fr)));
    const auto syn_small = label_tensor(downsample_labels(mask_syn, layer, level_dims(fs)));
    for (Label c : kTumorClasses) {
      const auto ir = real_small == static_cast<int64_t>(c);
      const auto is = syn_small == static_cast<int64_t>(c);
      if (ir.sum().item<int64_t>() == 0 || is.sum().item<int64_t>() == 0) continue;
      const auto term = (masked_average(fr, ir) - masked_average(fs, is)).abs().mean();
      total = total.defined() ? total + term : term;
      ++out.pairs_used;
    }
  }
  if (out.pairs_used == 0) {
    out.all_empty = true;
    const auto& like = syn_levels.empty() ? torch::zeros({}) : syn_levels.front();
    out.value = (like.sum() * 0.0);
    return out;
  }
  out.value = total / static_cast<double>(out.pairs_used);
  return out;
}

double class_perceptual_loss(const FeaturePyramid& real, const FeaturePyramid& syn, const SegMask& mask_real,
                             const SegMask& mask_syn, const std::vector<int>& layers) {
  torch::NoGradGuard no_grad;
  return class_perceptual_loss(real.levels, syn.levels, mask_real, mask_syn, layers).value.item<double>();
}

}  // namespace tumorfab
