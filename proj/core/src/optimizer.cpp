#include "rblb/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace rblb {

void optimizer_step(ParamStore& params, OptimizerState& state, float lr) {
  for (const auto& [path, t] : params) {
    if (!t.has_grad()) {
      throw std::invalid_argument("optimizer_step: parameter " + path + " has no gradient");
    }
  }
  state.step_count += 1;

  if (state.method == OptMethod::Sgd) {
    for (auto& [path, t] : params) {
      auto w = t.values_mut();
      const auto g = t.grad();
      for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * g[i];
    }
    return;
  }

  const float b1 = state.adam.beta1;
  const float b2 = state.adam.beta2;
  const float eps = state.adam.eps;
  const double bias1 = 1.0 - std::pow(static_cast<double>(b1), state.step_count);
  const double bias2 = 1.0 - std::pow(static_cast<double>(b2), state.step_count);

  for (auto& [path, t] : params) {
    auto w = t.values_mut();
    const auto g = t.grad();
    auto& m = state.first_moment[path];
    auto& v = state.second_moment[path];
    if (m.empty()) m.assign(w.size(), 0.0f);
    if (v.empty()) v.assign(w.size(), 0.0f);
    if (m.size() != w.size() || v.size() != w.size()) {
      throw std::invalid_argument("optimizer_step: stale moment buffers for " + path);
    }
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = b1 * m[i] + (1.0f - b1) * g[i];
      v[i] = b2 * v[i] + (1.0f - b2) * g[i] * g[i];
      const float m_hat = static_cast<float>(m[i] / bias1);
      const float v_hat = static_cast<float>(v[i] / bias2);
      w[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

}  // namespace rblb
