#pragma once

#include <torch/torch.h>

#include <cstdint>

namespace tumorfab {

struct LossWeights {
  double patch_adversarial = 10.0;   // lambda_a
  double global_adversarial = 1.0;   // lambda_b
  double hinge_start = 10.0;         // lambda_c at the first epoch
  double hinge_end = 1.0;            // lambda_c at the last epoch
  double perceptual = 1.0;           // lambda_d
  double margin = 0.05;              // hinge margin, normalized intensity units

  void validate() const;
};

/// mean( max(0, (1 - roi) * |refined - coarse| - margin) ) over every voxel.
/// `roi` is broadcast over channels; shapes [N, C, ...] / [N, 1, ...] or matching.
torch::Tensor hinge_reconstruction_loss(const torch::Tensor& refined, const torch::Tensor& coarse,
                                        const torch::Tensor& roi, double margin);

struct AdversarialLosses {
  torch::Tensor d_patch;
  torch::Tensor d_global;
  torch::Tensor g_patch;
  torch::Tensor g_global;
};

/// Binary cross-entropy on logits. Discriminator terms sum the real (target 1)
/// and fake (target 0) expectations; generator terms are non-saturating,
/// -log sigmoid(fake). Patch maps are averaged over all positions.
AdversarialLosses adversarial_losses(const torch::Tensor& patch_real, const torch::Tensor& patch_fake,
                                     const torch::Tensor& global_real, const torch::Tensor& global_fake);

/// Discriminator-only half (real vs fake), used when generator terms are not needed.
torch::Tensor discriminator_bce(const torch::Tensor& real_logits, const torch::Tensor& fake_logits);

/// Non-saturating generator term.
torch::Tensor generator_bce(const torch::Tensor& fake_logits);

/// lambda_c(epoch) = start + (end - start) * epoch / (total_epochs - 1).
double hinge_weight(int64_t epoch, int64_t total_epochs, const LossWeights& weights);

struct GeneratorLossTerms {
  torch::Tensor patch_adversarial;
  torch::Tensor global_adversarial;
  torch::Tensor hinge;
  torch::Tensor perceptual;
};

/// lambda_a * patch + lambda_b * global + lambda_c(epoch) * hinge + lambda_d * perceptual.
torch::Tensor total_loss(const GeneratorLossTerms& terms, int64_t epoch, const LossWeights& weights,
                         int64_t total_epochs);

}  // namespace tumorfab
