#include <cmath>
#include <stdexcept>

#include <doctest.h>

#include "rblb/optimizer.hpp"
#include "rblb/param_store.hpp"

using namespace rblb;

namespace {

ParamStore one_param(float value) {
  ParamStore store;
  store.insert("w", Tensor::from_data(Shape{1, 1, 1, 1}, {value}, true));
  return store;
}

}  // namespace

TEST_CASE("sgd single step by hand") {
  ParamStore params = one_param(1.0f);
  params.at("w").accumulate_grad(std::vector<float>{2.0f});
  OptimizerState state;
  state.method = OptMethod::Sgd;
  optimizer_step(params, state, 0.1f);
  CHECK(params.at("w").item() == doctest::Approx(0.8).epsilon(1e-7));
  CHECK(state.step_count == 1);
}

TEST_CASE("sgd leaves parameters unchanged on zero gradient") {
  ParamStore params = one_param(0.37f);
  params.at("w").accumulate_grad(std::vector<float>{0.0f});
  OptimizerState state;
  state.method = OptMethod::Sgd;
  optimizer_step(params, state, 0.5f);
  CHECK(params.at("w").item() == 0.37f);
}

TEST_CASE("adam first step moves by approximately lr") {
  ParamStore params = one_param(1.0f);
  params.at("w").accumulate_grad(std::vector<float>{1.0f});
  OptimizerState state;
  const float lr = 0.05f;
  optimizer_step(params, state, lr);
  // Bias correction makes m_hat = v_hat = 1, so the update is lr/(1 + eps).
  CHECK(std::fabs((1.0f - params.at("w").item()) - lr) <= 1e-6f);
}

TEST_CASE("adam matches a hand-evaluated three-step recurrence") {
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8, lr = 0.01;
  const double grads[3] = {1.0, -0.5, 0.25};

  // Oracle: the recurrences evaluated directly in double precision.
  double w = 0.2, m = 0.0, v = 0.0;
  for (int t = 1; t <= 3; ++t) {
    const double g = grads[t - 1];
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double m_hat = m / (1 - std::pow(b1, t));
    const double v_hat = v / (1 - std::pow(b2, t));
    w -= lr * m_hat / (std::sqrt(v_hat) + eps);
  }

  ParamStore params = one_param(0.2f);
  OptimizerState state;
  for (int t = 0; t < 3; ++t) {
    params.at("w").zero_grad();
    params.at("w").accumulate_grad(std::vector<float>{static_cast<float>(grads[t])});
    optimizer_step(params, state, static_cast<float>(lr));
  }
  CHECK(params.at("w").item() == doctest::Approx(w).epsilon(1e-5));
  CHECK(state.step_count == 3);
}

TEST_CASE("missing gradient is rejected") {
  ParamStore params = one_param(1.0f);
  OptimizerState state;
  CHECK_THROWS_AS(optimizer_step(params, state, 0.1f), std::invalid_argument);
}
