#pragma once

#include <cstdint>
#include <string>

#include "rblb/param_store.hpp"
#include "rblb/tensor.hpp"

namespace rblb {

struct LossWeights {
  float alpha = 0.005f;  // content weight
  float beta = 0.01f;    // adversarial weight

  void validate() const;
};

enum class LossStage { Bgan, DbganG, DUpdate };

std::string loss_stage_name(LossStage stage);

/// Per-term values of one update; total always equals the documented
/// weighted fusion of its parts.
struct LossReport {
  LossStage stage = LossStage::Bgan;
  float perceptual = 0.0f;
  float content = 0.0f;
  float adversarial = 0.0f;
  float total = 0.0f;
};

/// Fixed random conv stack used by the perceptual loss: `stages` stride-2
/// convolutions with ReLU between them, so the compared features are the
/// pre-activation maps of the last stage. Frozen (never updated).
ParamStore make_feature_extractor(std::uint64_t seed, int base_channels = 16, int stages = 4);

/// Mean squared distance between pre-activation feature maps of both images.
Tensor perceptual_loss(Tape& tape, const Tensor& generated, const Tensor& reference,
                       const ParamStore& feat);

enum class ContentMode { Mse, L1 };

Tensor content_loss(Tape& tape, const Tensor& generated, const Tensor& target, ContentMode mode);

enum class AdvRole { Generator, Discriminator };

/// Traditional GAN objective. Discriminator: -[mean log s(real) +
/// mean log(1 - s(fake))]; generator (non-saturating): -mean log s(fake),
/// real logits unused and may be undefined. Logs are clamped at 1e-12.
Tensor standard_adv_loss(Tape& tape, const Tensor& real_logits, const Tensor& fake_logits,
                         AdvRole role);

/// Relativistic average objective on logit differences:
///   -[mean log s(real - E[fake]) + mean log(1 - s(fake - E[real]))]
/// The generator role applies the formula to (real, fake) as given; the
/// discriminator role swaps the two arguments (mirrored form).
Tensor relativistic_loss(Tape& tape, const Tensor& real_logits, const Tensor& fake_logits,
                         AdvRole role);

/// total = perceptual + beta * rbl.
LossReport combined_bgan_loss(float perceptual, float rbl, const LossWeights& weights);

/// total = perceptual + alpha * content + beta * rdbl.
LossReport combined_dbgan_loss(float perceptual, float content, float rdbl,
                               const LossWeights& weights);

}  // namespace rblb
