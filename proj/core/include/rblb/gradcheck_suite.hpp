#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace rblb {

struct SuiteCase {
  std::string name;
  float worst = 0.0f;  // max rel err across instances
  float tolerance = 0.0f;
  bool passed = false;
};

/// Finite-difference checks for every differentiable operation plus the
/// composite training losses (bgan, dbgan, and the dbgan_minus variant),
/// each over `instances` random instances. Primitives are held to 1e-3,
/// deep composites to 1e-2.
std::vector<SuiteCase> run_gradcheck_suite(std::uint64_t seed, int instances = 20);

bool all_passed(const std::vector<SuiteCase>& cases);

}  // namespace rblb
