#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rblb/param_store.hpp"

namespace rblb {

enum class OptMethod { Sgd, Adam };

struct AdamConfig {
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

/// Per-parameter first/second moments plus the shared step counter.
/// Moment buffers are created lazily on the first step and are serialized
/// into checkpoints so resumed runs continue bit-exactly.
struct OptimizerState {
  OptMethod method = OptMethod::Adam;
  AdamConfig adam;
  std::int64_t step_count = 0;
  std::map<std::string, std::vector<float>> first_moment;
  std::map<std::string, std::vector<float>> second_moment;
};

/// One in-place update of every parameter from its accumulated gradient.
/// Throws if any parameter is missing a gradient.
void optimizer_step(ParamStore& params, OptimizerState& state, float lr);

}  // namespace rblb
