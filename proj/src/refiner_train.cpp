#include "tumorfab/refiner_train.hpp"

#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

#include "tumorfab/config.hpp"
#include "tumorfab/error.hpp"
#include "tumorfab/tensor_bridge.hpp"

namespace tumorfab {
namespace {

constexpr char kCheckpointMagic[8] = {'T', 'F', 'R', 'E', 'F', 'C', 'K', '\0'};
constexpr uint32_t kCheckpointVersion = 1;

// Stream tags keep the derived RNG streams of different purposes apart.
enum StreamTag : uint64_t { kInitGenerator = 10, kInitDiscriminator = 11, kShuffle = 20, kCoarseCrop = 21,
                            kRealForD = 22, kRealForPercep = 23 };

constexpr double kGeneratorInitSlope = 0.01;
constexpr double kDiscriminatorInitSlope = 0.2;

std::vector<torch::Tensor> params_of(torch::nn::Module& m) { return m.parameters(true); }

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw ValidationError("stage2.epochs must be >= 1");
  if (!(lr_generator > 0.0) || !(lr_discriminator > 0.0)) throw ValidationError("stage2 learning rates must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ValidationError("stage2.adam_betas must lie in [0, 1)");
  if (!(adam_eps > 0.0)) throw ValidationError("stage2.adam_eps must be > 0");
  for (int a = 0; a < 3; ++a)
    if (crop[a] < kDownsampleFactor || crop[a] % kDownsampleFactor != 0)
      throw ValidationError("stage2.crop_size must be positive multiples of 32, got " + to_string(crop));
  if (batch_size < 1) throw ValidationError("stage2.batch_size must be >= 1");
  if (percep_layers.empty()) throw ValidationError("perceptual layers must not be empty");
  for (int l : percep_layers)
    if (l < 0 || l >= kPerceptualLayerLimit)
      throw ValidationError("perceptual layers must be in [0, " + std::to_string(kPerceptualLayerLimit) + ")");
  generator.validate();
  discriminator.validate();
  if (generator.image_channels != discriminator.image_channels)
    throw ValidationError("generator and discriminator image channel counts differ");
  weights.validate();
}

uint64_t TrainConfig::fingerprint() const { return fnv1a(train_config_to_json(*this).dump()); }

Adam::Adam(std::vector<torch::Tensor> params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params_) {
    m_.push_back(torch::zeros_like(p));
    v_.push_back(torch::zeros_like(p));
  }
}

void Adam::zero_grad() {
  for (auto& p : params_)
    if (p.grad().defined()) p.mutable_grad().zero_();
}

void Adam::step(double lr) {
  torch::NoGradGuard no_grad;
  ++steps_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  for (size_t n = 0; n < params_.size(); ++n) {
    const auto& g = params_[n].grad();
    if (!g.defined()) continue;
    m_[n].mul_(beta1_).add_(g, 1.0 - beta1_);
    v_[n].mul_(beta2_).addcmul_(g, g, 1.0 - beta2_);
    const auto denom = (v_[n] / c2).sqrt_().add_(eps_);
    params_[n].addcdiv_(m_[n], denom, -lr / c1);
  }
}

void Adam::save(BinaryWriter& out, const std::string& prefix) const {
  out.pod(steps_);
  out.pod(static_cast<uint32_t>(params_.size()));
  for (size_t n = 0; n < params_.size(); ++n) {
    out.tensor(prefix + ".m." + std::to_string(n), m_[n]);
    out.tensor(prefix + ".v." + std::to_string(n), v_[n]);
  }
}

void Adam::load(BinaryReader& in, const std::string& prefix) {
  steps_ = in.pod<int64_t>();
  const auto count = in.pod<uint32_t>();
  if (count != params_.size()) throw IoError("optimizer state size mismatch in " + in.path().string());
  torch::NoGradGuard no_grad;
  for (size_t n = 0; n < params_.size(); ++n) {
    in.tensor_into(prefix + ".m." + std::to_string(n), m_[n]);
    in.tensor_into(prefix + ".v." + std::to_string(n), v_[n]);
  }
}

Refiner::Refiner(const TrainConfig& config)
    : config_((config.validate(), config)),
      fingerprint_(config.fingerprint()),
      generator_(config.generator),
      discriminator_(config.discriminator),
      adam_g_((initialize_weights(*generator_, derive_seed(config.seed, {kInitGenerator}), kGeneratorInitSlope),
               params_of(*generator_)),
              config.beta1, config.beta2, config.adam_eps),
      adam_d_((initialize_weights(*discriminator_, derive_seed(config.seed, {kInitDiscriminator}),
                                  kDiscriminatorInitSlope),
               params_of(*discriminator_)),
              config.beta1, config.beta2, config.adam_eps) {}

void Refiner::save(const std::filesystem::path& path) const {
  BinaryWriter out(path);
  out.bytes(kCheckpointMagic, sizeof(kCheckpointMagic));
  out.pod(kCheckpointVersion);
  out.string(train_config_to_json(config_).dump());
  out.pod(fingerprint_);
  out.pod(epochs_completed_);
  out.pod(steps_completed_);
  out.pod(steps_per_epoch_);
  write_module(out, *generator_);
  write_module(out, *discriminator_);
  adam_g_.save(out, "adam_g");
  adam_d_.save(out, "adam_d");
  out.close();
}

Refiner Refiner::load(const std::filesystem::path& path) {
  BinaryReader in(path);
  char magic[8];
  in.bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) throw IoError("not a refiner checkpoint: " + path.string());
  const auto version = in.pod<uint32_t>();
  if (version != kCheckpointVersion)
    throw IoError("unsupported checkpoint version " + std::to_string(version) + ": " + path.string());
  const Json cfg = Json::parse(in.string(), nullptr, false);
  if (cfg.is_discarded()) throw IoError("corrupt checkpoint config in " + path.string());
  Refiner r(train_config_from_json(cfg));
  const auto stored = in.pod<uint64_t>();
  if (stored != r.fingerprint_) throw IoError("checkpoint fingerprint does not match its config: " + path.string());
  r.epochs_completed_ = in.pod<int64_t>();
  r.steps_completed_ = in.pod<int64_t>();
  r.steps_per_epoch_ = in.pod<int64_t>();
  read_module(in, *r.generator_);
  read_module(in, *r.discriminator_);
  r.adam_g_.load(in, "adam_g");
  r.adam_d_.load(in, "adam_d");
  return r;
}

torch::Tensor Refiner::generate(const torch::Tensor& image, const torch::Tensor& mask_onehot) const {
  torch::NoGradGuard no_grad;
  return generator_->forward(image, mask_onehot);
}

uint64_t Refiner::checksum() const {
  return module_checksum(*generator_) ^ (module_checksum(*discriminator_) * 0x9e3779b97f4a7c15ull);
}

double decayed_lr(double lr0, int64_t step, int64_t total_steps) {
  if (total_steps <= 0) return lr0;
  return lr0 * (1.0 - static_cast<double>(step) / static_cast<double>(total_steps));
}

LabeledVolume sample_training_crop(const LabeledVolume& source, const Dims3& crop_size, bool flip_axes, Rng& rng) {
  const Dims3& d = source.image.dims();
  require_same_dims(d, source.mask.dims(), "training pair");
  for (int a = 0; a < 3; ++a)
    if (d[a] < crop_size[a])
      throw ValidationError("volume " + to_string(d) + " is smaller than the crop " + to_string(crop_size));

  std::array<int64_t, 3> origin{};
  const auto& labels = source.mask.labels();
  const int64_t tumor = source.mask.tumor_voxels();
  if (tumor > 0) {
    int64_t pick = rng.uniform_int(0, tumor - 1);
    size_t idx = 0;
    for (; idx < labels.size(); ++idx)
      if (labels[idx] != 0 && pick-- == 0) break;
    const int64_t flat = static_cast<int64_t>(idx);
    const std::array<int64_t, 3> voxel{flat / (d.w * d.d), (flat / d.d) % d.w, flat % d.d};
    for (int a = 0; a < 3; ++a) {
      const int64_t lo = std::max<int64_t>(0, voxel[a] - crop_size[a] + 1);
      const int64_t hi = std::min(d[a] - crop_size[a], voxel[a]);
      origin[a] = rng.uniform_int(lo, hi);
    }
  } else {
    for (int a = 0; a < 3; ++a) origin[a] = rng.uniform_int(0, d[a] - crop_size[a]);
  }
  LabeledVolume out{crop(source.image, origin, crop_size), crop(source.mask, origin, crop_size)};
  if (flip_axes) {
    std::array<bool, 3> axes{};
    for (auto& a : axes) a = rng.bernoulli(0.5);
    out.image = flip(out.image, axes);
    out.mask = flip(out.mask, axes);
  }
  return out;
}

namespace {

struct Batch {
  torch::Tensor image;   // [B, C, ...]
  torch::Tensor onehot;  // [B, 4, ...]
  torch::Tensor roi;     // [B, 1, ...]
  std::vector<SegMask> masks;
};

Batch stack(const std::vector<LabeledVolume>& crops) {
  Batch b;
  std::vector<torch::Tensor> images, onehots, rois;
  for (const auto& c : crops) {
    images.push_back(to_tensor(c.image));
    onehots.push_back(one_hot(c.mask));
    rois.push_back(roi_tensor(c.mask).unsqueeze(0));
    b.masks.push_back(c.mask);
  }
  b.image = torch::stack(images);
  b.onehot = torch::stack(onehots);
  b.roi = torch::stack(rois);
  return b;
}

Batch draw_real(const std::vector<LabeledVolume>& pool, const TrainConfig& cfg, int64_t epoch, int64_t step,
                int64_t batch, StreamTag tag) {
  std::vector<LabeledVolume> crops;
  for (int64_t b = 0; b < batch; ++b) {
    Rng rng(derive_seed(cfg.seed, {tag, static_cast<uint64_t>(epoch), static_cast<uint64_t>(step),
                                   static_cast<uint64_t>(b)}));
    const auto& src = pool[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(pool.size()) - 1))];
    crops.push_back(sample_training_crop(src, cfg.crop, cfg.flip_augment, rng));
  }
  return stack(crops);
}

void check_dataset(const std::vector<LabeledVolume>& set, const char* what, const TrainConfig& cfg) {
  if (set.empty()) throw ValidationError(std::string(what) + " dataset is empty");
  for (const auto& s : set) {
    require_same_dims(s.image.dims(), s.mask.dims(), what);
    if (s.image.channels() != cfg.generator.image_channels)
      throw ValidationError(std::string(what) + " volume has " + std::to_string(s.image.channels()) +
                            " channels, the generator expects " + std::to_string(cfg.generator.image_channels));
    for (int a = 0; a < 3; ++a)
      if (s.image.dims()[a] < cfg.crop[a])
        throw ValidationError(std::string(what) + " volume " + to_string(s.image.dims()) +
                              " is smaller than the crop " + to_string(cfg.crop));
  }
}

std::vector<torch::Tensor> sample_levels(const std::vector<torch::Tensor>& levels, int64_t b) {
  std::vector<torch::Tensor> out;
  out.reserve(levels.size());
  for (const auto& l : levels) out.push_back(l[b]);
  return out;
}

std::string breakdown(const StepLog& s) {
  std::ostringstream o;
  o << "d_patch=" << s.d_patch << " d_global=" << s.d_global << " g_patch=" << s.g_patch
    << " g_global=" << s.g_global << " hinge=" << s.hinge << " percep=" << s.percep;
  return o.str();
}

}  // namespace

void train_refiner(Refiner& refiner, const std::vector<LabeledVolume>& coarse, const std::vector<LabeledVolume>& real,
                   const FeatureExtractor& extractor, const TrainCallbacks& callbacks) {
  const TrainConfig& cfg = refiner.config_;
  check_dataset(coarse, "coarse", cfg);
  check_dataset(real, "real", cfg);
  if (extractor.spec().in_channels != cfg.generator.image_channels)
    throw ValidationError("extractor input channels differ from the image channels");

  const int64_t n = static_cast<int64_t>(coarse.size());
  const int64_t steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  if (refiner.epochs_completed_ > 0 && refiner.steps_per_epoch_ != steps_per_epoch)
    throw ValidationError("resumed run has " + std::to_string(steps_per_epoch) + " steps per epoch, checkpoint has " +
                          std::to_string(refiner.steps_per_epoch_) + " (dataset size changed)");
  refiner.steps_per_epoch_ = steps_per_epoch;
  const int64_t total_steps = cfg.epochs * steps_per_epoch;

  auto& G = refiner.generator_;
  auto& D = refiner.discriminator_;
  G->train();
  D->train();

  for (int64_t epoch = refiner.epochs_completed_; epoch < cfg.epochs; ++epoch) {
    std::vector<int64_t> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), int64_t{0});
    Rng shuffle(derive_seed(cfg.seed, {kShuffle, static_cast<uint64_t>(epoch)}));
    for (size_t k = order.size(); k > 1; --k)
      std::swap(order[k - 1], order[static_cast<size_t>(shuffle.uniform_int(0, static_cast<int64_t>(k) - 1))]);

    const double lambda_c = hinge_weight(epoch, cfg.epochs, cfg.weights);
    for (int64_t s = 0; s < steps_per_epoch; ++s) {
      const int64_t step = epoch * steps_per_epoch + s;
      std::vector<LabeledVolume> crops;
      for (int64_t k = s * cfg.batch_size; k < std::min(n, (s + 1) * cfg.batch_size); ++k) {
        Rng rng(derive_seed(cfg.seed, {kCoarseCrop, static_cast<uint64_t>(epoch), static_cast<uint64_t>(k)}));
        crops.push_back(sample_training_crop(coarse[static_cast<size_t>(order[static_cast<size_t>(k)])], cfg.crop,
                                             cfg.flip_augment, rng));
      }
      const int64_t B = static_cast<int64_t>(crops.size());
      const Batch syn = stack(crops);
      const Batch real_d = draw_real(real, cfg, epoch, s, B, kRealForD);
      const Batch real_p = draw_real(real, cfg, epoch, s, B, kRealForPercep);

      StepLog log;
      log.step = step;
      log.epoch = epoch;
      log.lambda_c = lambda_c;
      log.lr_g = decayed_lr(cfg.lr_generator, step, total_steps);
      log.lr_d = decayed_lr(cfg.lr_discriminator, step, total_steps);

      const auto fake = G->forward(syn.image, syn.onehot);

      // Discriminator update.
      for (auto& p : D->parameters()) p.set_requires_grad(true);
      refiner.adam_d_.zero_grad();
      const auto out_real = D->forward(real_d.image, real_d.onehot);
      const auto out_fake = D->forward(fake.detach(), syn.onehot);
      const auto d_patch = discriminator_bce(out_real.patch, out_fake.patch);
      const auto d_global = discriminator_bce(out_real.global, out_fake.global);
      log.d_patch = d_patch.item<double>();
      log.d_global = d_global.item<double>();
      if (!std::isfinite(log.d_patch) || !std::isfinite(log.d_global))
        throw NonFiniteLossError("non-finite discriminator loss at step " + std::to_string(step) + ": " +
                                     breakdown(log),
                                 step);
      (d_patch + d_global).backward();
      refiner.adam_d_.step(log.lr_d);

      // Generator update; the discriminator is held fixed.
      for (auto& p : D->parameters()) p.set_requires_grad(false);
      refiner.adam_g_.zero_grad();
      const auto judged = D->forward(fake, syn.onehot);
      GeneratorLossTerms terms;
      terms.patch_adversarial = generator_bce(judged.patch);
      terms.global_adversarial = generator_bce(judged.global);
      terms.hinge = hinge_reconstruction_loss(fake, syn.image, syn.roi, cfg.weights.margin);
      {
        std::vector<torch::Tensor> real_levels;
        {
          torch::NoGradGuard no_grad;
          real_levels = extractor.forward(real_p.image);
        }
        const auto syn_levels = extractor.forward(fake);
        torch::Tensor percep;
        for (int64_t b = 0; b < B; ++b) {
          const auto term = class_perceptual_loss(sample_levels(real_levels, b), sample_levels(syn_levels, b),
                                                  real_p.masks[static_cast<size_t>(b)],
                                                  syn.masks[static_cast<size_t>(b)], cfg.percep_layers)
                                .value;
          percep = percep.defined() ? percep + term : term;
        }
        terms.perceptual = percep / static_cast<double>(B);
      }
      const auto total = total_loss(terms, epoch, cfg.weights, cfg.epochs);
      log.g_patch = terms.patch_adversarial.item<double>();
      log.g_global = terms.global_adversarial.item<double>();
      log.hinge = terms.hinge.item<double>();
      log.percep = terms.perceptual.item<double>();
      if (!std::isfinite(total.item<double>()))
        throw NonFiniteLossError("non-finite generator loss at step " + std::to_string(step) + ": " + breakdown(log),
                                 step);
      total.backward();
      refiner.adam_g_.step(log.lr_g);
      for (auto& p : D->parameters()) p.set_requires_grad(true);

      refiner.steps_completed_ = step + 1;
      if (callbacks.on_step) callbacks.on_step(log);
    }
    refiner.epochs_completed_ = epoch + 1;
    if (callbacks.on_epoch) callbacks.on_epoch(refiner);
  }
}

}  // namespace tumorfab
