#include "rblb/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rblb/ops.hpp"
#include "rblb/random.hpp"

namespace rblb {

namespace {

constexpr float kLogFloor = 1e-12f;

void check_same_shape(const Tensor& a, const Tensor& b, const char* who) {
  if (!(a.shape() == b.shape())) {
    throw std::invalid_argument(std::string(who) + ": shape mismatch " + a.shape().str() +
                                " vs " + b.shape().str());
  }
}

void check_logits(const Tensor& t, const char* who) {
  if (!t.defined() || t.numel() == 0) {
    throw std::invalid_argument(std::string(who) + ": empty logit vector");
  }
}

// mean over items of log s(x)
Tensor mean_log_sigmoid(Tape& tape, const Tensor& x) {
  return reduce_mean(tape, log_clamped(tape, sigmoid(tape, x), kLogFloor), MeanOver::All);
}

// mean over items of log(1 - s(x))
Tensor mean_log_one_minus_sigmoid(Tape& tape, const Tensor& x) {
  Tensor one_minus = add_scalar(tape, mul_scalar(tape, sigmoid(tape, x), -1.0f), 1.0f);
  return reduce_mean(tape, log_clamped(tape, one_minus, kLogFloor), MeanOver::All);
}

}  // namespace

void LossWeights::validate() const {
  if (alpha < 0.0f || beta < 0.0f) {
    throw std::invalid_argument("LossWeights: alpha and beta must be >= 0");
  }
}

std::string loss_stage_name(LossStage stage) {
  switch (stage) {
    case LossStage::Bgan: return "bgan";
    case LossStage::DbganG: return "dbgan_g";
    case LossStage::DUpdate: return "d_update";
  }
  throw std::logic_error("unknown LossStage");
}

ParamStore make_feature_extractor(std::uint64_t seed, int base_channels, int stages) {
  if (base_channels < 1 || stages < 1) {
    throw std::invalid_argument("make_feature_extractor: invalid configuration");
  }
  ParamStore store;
  store.creation_seed = seed;
  auto eng = rng::engine(seed);
  int cin = 3;
  for (int i = 0; i < stages; ++i) {
    const int cout = std::min(base_channels << i, base_channels * 4);
    const std::string path = "feat" + std::to_string(i);
    store.insert(path + ".weight",
                 Tensor::from_data(Shape{cout, cin, 3, 3},
                                   rng::normal(eng, static_cast<std::size_t>(cout) * cin * 9,
                                               0.0f, 0.05f),
                                   false));
    store.insert(path + ".bias", Tensor::zeros(Shape{1, cout, 1, 1}, false));
    cin = cout;
  }
  return store;
}

namespace {

Tensor extract_features(Tape& tape, const Tensor& image, const ParamStore& feat) {
  Tensor h = image;
  int stage = 0;
  while (feat.contains("feat" + std::to_string(stage) + ".weight")) {
    if (stage > 0) h = relu(tape, h);
    const std::string base = "feat" + std::to_string(stage);
    h = conv2d(tape, h, feat.at(base + ".weight"), feat.at(base + ".bias"),
               Conv2dOpts{Padding::ReflectSame, 2});
    ++stage;
  }
  return h;  // pre-activation maps of the last stage
}

}  // namespace

Tensor perceptual_loss(Tape& tape, const Tensor& generated, const Tensor& reference,
                       const ParamStore& feat) {
  check_same_shape(generated, reference, "perceptual_loss");
  Tensor fg = extract_features(tape, generated, feat);
  Tensor fr = extract_features(tape, reference, feat);
  Tensor diff = sub(tape, fg, fr);
  return reduce_mean(tape, mul(tape, diff, diff), MeanOver::All);
}

Tensor content_loss(Tape& tape, const Tensor& generated, const Tensor& target, ContentMode mode) {
  check_same_shape(generated, target, "content_loss");
  Tensor diff = sub(tape, generated, target);
  Tensor per_element = mode == ContentMode::Mse ? mul(tape, diff, diff) : abs(tape, diff);
  return reduce_mean(tape, per_element, MeanOver::All);
}

Tensor standard_adv_loss(Tape& tape, const Tensor& real_logits, const Tensor& fake_logits,
                         AdvRole role) {
  check_logits(fake_logits, "standard_adv_loss");
  if (role == AdvRole::Generator) {
    return mul_scalar(tape, mean_log_sigmoid(tape, fake_logits), -1.0f);
  }
  check_logits(real_logits, "standard_adv_loss");
  Tensor term_real = mean_log_sigmoid(tape, real_logits);
  Tensor term_fake = mean_log_one_minus_sigmoid(tape, fake_logits);
  return mul_scalar(tape, add(tape, term_real, term_fake), -1.0f);
}

Tensor relativistic_loss(Tape& tape, const Tensor& real_logits, const Tensor& fake_logits,
                         AdvRole role) {
  check_logits(real_logits, "relativistic_loss");
  check_logits(fake_logits, "relativistic_loss");
  const Tensor& a = role == AdvRole::Generator ? real_logits : fake_logits;
  const Tensor& b = role == AdvRole::Generator ? fake_logits : real_logits;
  Tensor mean_b = reduce_mean(tape, b, MeanOver::All);
  Tensor mean_a = reduce_mean(tape, a, MeanOver::All);
  Tensor term_a = mean_log_sigmoid(tape, sub(tape, a, mean_b));
  Tensor term_b = mean_log_one_minus_sigmoid(tape, sub(tape, b, mean_a));
  return mul_scalar(tape, add(tape, term_a, term_b), -1.0f);
}

namespace {

void check_finite(float v, const char* who) {
  if (!std::isfinite(v)) {
    throw std::invalid_argument(std::string(who) + ": non-finite loss term");
  }
}

}  // namespace

LossReport combined_bgan_loss(float perceptual, float rbl, const LossWeights& weights) {
  weights.validate();
  check_finite(perceptual, "combined_bgan_loss");
  check_finite(rbl, "combined_bgan_loss");
  LossReport report;
  report.stage = LossStage::Bgan;
  report.perceptual = perceptual;
  report.adversarial = rbl;
  report.total = perceptual + weights.beta * rbl;
  return report;
}

LossReport combined_dbgan_loss(float perceptual, float content, float rdbl,
                               const LossWeights& weights) {
  weights.validate();
  check_finite(perceptual, "combined_dbgan_loss");
  check_finite(content, "combined_dbgan_loss");
  check_finite(rdbl, "combined_dbgan_loss");
  LossReport report;
  report.stage = LossStage::DbganG;
  report.perceptual = perceptual;
  report.content = content;
  report.adversarial = rdbl;
  report.total = perceptual + weights.alpha * content + weights.beta * rdbl;
  return report;
}

}  // namespace rblb
