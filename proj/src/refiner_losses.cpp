#include "tumorfab/refiner_losses.hpp"

#include <cmath>

#include "tumorfab/error.hpp"

namespace tumorfab {
namespace {

void require_finite(const torch::Tensor& t, const char* what) {
  if (!torch::isfinite(t.detach()).all().item<bool>())
    throw ValidationError(std::string("non-finite ") + what + " logits");
}

}  // namespace

void LossWeights::validate() const {
  for (double w : {patch_adversarial, global_adversarial, hinge_start, hinge_end, perceptual, margin})
    if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("loss weights and margin must be finite and >= 0");
  if (hinge_end > hinge_start) throw ValidationError("hinge weight schedule must be non-increasing");
}

torch::Tensor hinge_reconstruction_loss(const torch::Tensor& refined, const torch::Tensor& coarse,
                                        const torch::Tensor& roi, double margin) {
  if (!(margin >= 0.0)) throw ValidationError("hinge margin must be >= 0");
  if (refined.sizes() != coarse.sizes()) throw ValidationError("hinge loss: refined/coarse shape mismatch");
  torch::Tensor outside;
  try {
    outside = 1.0 - roi.to(refined.scalar_type());
    outside = outside.expand_as(refined);
  } catch (const c10::Error&) {
    throw ValidationError("hinge loss: ROI mask does not match the image shape");
  }
  return torch::relu(outside * (refined - coarse).abs() - margin).mean();
}

torch::Tensor discriminator_bce(const torch::Tensor& real_logits, const torch::Tensor& fake_logits) {
  // -log sigmoid(x) = softplus(-x);  -log(1 - sigmoid(x)) = softplus(x)
  return torch::softplus(-real_logits).mean() + torch::softplus(fake_logits).mean();
}

torch::Tensor generator_bce(const torch::Tensor& fake_logits) { return torch::softplus(-fake_logits).mean(); }

AdversarialLosses adversarial_losses(const torch::Tensor& patch_real, const torch::Tensor& patch_fake,
                                     const torch::Tensor& global_real, const torch::Tensor& global_fake) {
  require_finite(patch_real, "patch real");
  require_finite(patch_fake, "patch fake");
  require_finite(global_real, "global real");
  require_finite(global_fake, "global fake");
  AdversarialLosses out;
  out.d_patch = discriminator_bce(patch_real, patch_fake);
  out.d_global = discriminator_bce(global_real, global_fake);
  out.g_patch = generator_bce(patch_fake);
  out.g_global = generator_bce(global_fake);
  return out;
}

double hinge_weight(int64_t epoch, int64_t total_epochs, const LossWeights& weights) {
  if (total_epochs < 1 || epoch < 0 || epoch >= total_epochs)
    throw ValidationError("epoch " + std::to_string(epoch) + " outside [0, " + std::to_string(total_epochs) + ")");
  if (total_epochs == 1) return weights.hinge_start;
  if (epoch == total_epochs - 1) return weights.hinge_end;
  const double t = static_cast<double>(epoch) / static_cast<double>(total_epochs - 1);
  return weights.hinge_start + (weights.hinge_end - weights.hinge_start) * t;
}

torch::Tensor total_loss(const GeneratorLossTerms& terms, int64_t epoch, const LossWeights& weights,
                         int64_t total_epochs) {
  const double lambda_c = hinge_weight(epoch, total_epochs, weights);
  return weights.patch_adversarial * terms.patch_adversarial + weights.global_adversarial * terms.global_adversarial +
         lambda_c * terms.hinge + weights.perceptual * terms.perceptual;
}

}  // namespace tumorfab
