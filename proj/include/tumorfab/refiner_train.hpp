#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <functional>
#include <vector>

#include "tumorfab/binary_io.hpp"
#include "tumorfab/feature_net.hpp"
#include "tumorfab/refiner_losses.hpp"
#include "tumorfab/refiner_nets.hpp"
#include "tumorfab/rng.hpp"
#include "tumorfab/volume.hpp"

namespace tumorfab {

struct TrainConfig {
  int64_t epochs = 200;
  double lr_generator = 2e-4;
  double lr_discriminator = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  Dims3 crop{128, 128, 128};
  int64_t batch_size = 2;
  /// Random flips along each spatial axis (the only augmentation).
  bool flip_augment = true;
  uint64_t seed = 0;
  std::vector<int> percep_layers{0, 1, 2};
  GeneratorSpec generator{};
  DiscriminatorSpec discriminator{};
  LossWeights weights{};

  void validate() const;
  /// Hash of every field; stored in checkpoints and checked on resume.
  uint64_t fingerprint() const;
};

/// Adam with bias correction. The learning rate is supplied per step so the
/// caller owns the schedule; moments are serializable.
class Adam {
 public:
  Adam(std::vector<torch::Tensor> params, double beta1, double beta2, double eps);

  void zero_grad();
  void step(double lr);
  int64_t steps() const { return steps_; }

  void save(BinaryWriter& out, const std::string& prefix) const;
  void load(BinaryReader& in, const std::string& prefix);

 private:
  std::vector<torch::Tensor> params_;
  std::vector<torch::Tensor> m_;
  std::vector<torch::Tensor> v_;
  double beta1_, beta2_, eps_;
  int64_t steps_ = 0;
};

class Refiner;

struct StepLog {
  int64_t step = 0;
  int64_t epoch = 0;
  double d_patch = 0, d_global = 0, g_patch = 0, g_global = 0;
  double hinge = 0, percep = 0;
  double lambda_c = 0;
  double lr_g = 0, lr_d = 0;
};

struct TrainCallbacks {
  std::function<void(const StepLog&)> on_step;
  /// Called after every completed epoch (epochs_completed already advanced).
  std::function<void(const Refiner&)> on_epoch;
};

/// Generator, discriminator, optimizer state and schedule position.
class Refiner {
 public:
  explicit Refiner(const TrainConfig& config);

  static Refiner load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  const TrainConfig& config() const { return config_; }
  Generator& generator() { return generator_; }
  Discriminator& discriminator() { return discriminator_; }
  Adam& generator_optimizer() { return adam_g_; }
  Adam& discriminator_optimizer() { return adam_d_; }

  int64_t epochs_completed() const { return epochs_completed_; }
  int64_t steps_completed() const { return steps_completed_; }
  int64_t steps_per_epoch() const { return steps_per_epoch_; }
  uint64_t config_fingerprint() const { return fingerprint_; }

  /// Inference without gradient tracking: [N, C, ...] image, [N, 4, ...] one-hot.
  torch::Tensor generate(const torch::Tensor& image, const torch::Tensor& mask_onehot) const;

  uint64_t checksum() const;

 private:
  friend void train_refiner(Refiner&, const std::vector<LabeledVolume>&, const std::vector<LabeledVolume>&,
                            const FeatureExtractor&, const TrainCallbacks&);
  TrainConfig config_;
  uint64_t fingerprint_;
  mutable Generator generator_;
  Discriminator discriminator_;
  Adam adam_g_;
  Adam adam_d_;
  int64_t epochs_completed_ = 0;
  int64_t steps_completed_ = 0;
  int64_t steps_per_epoch_ = 0;
};

/// lr0 * (1 - step / total_steps).
double decayed_lr(double lr0, int64_t step, int64_t total_steps);

/// Random crop containing a randomly chosen tumor voxel (any position when the
/// mask is empty), followed by random axis flips when `flip` is set.
LabeledVolume sample_training_crop(const LabeledVolume& source, const Dims3& crop, bool flip, Rng& rng);

/// Alternating discriminator / generator updates from the refiner's current epoch
/// up to config.epochs. Every random choice derives from (seed, epoch, index), so
/// an interrupted run resumed from a checkpoint reproduces the uninterrupted one.
void train_refiner(Refiner& refiner, const std::vector<LabeledVolume>& coarse, const std::vector<LabeledVolume>& real,
                   const FeatureExtractor& extractor, const TrainCallbacks& callbacks = {});

}  // namespace tumorfab
