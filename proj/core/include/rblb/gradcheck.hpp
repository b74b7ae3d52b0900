#pragma once

#include <functional>

#include "rblb/tensor.hpp"

namespace rblb {

/// A scalar-valued differentiable function of one tensor. The callable must
/// build its computation on the tape it is given and return a scalar tensor.
using ScalarFn = std::function<Tensor(Tape&, const Tensor&)>;

/// Central-difference gradient check: perturbs every element of x by +-eps,
/// re-evaluates f, and compares the quotient against the autodiff gradient.
/// Returns max_i |fd_i - ad_i| / max(1, ||fd||_inf, ||ad||_inf), i.e. the
/// worst deviation relative to the largest gradient entry (floored at 1 so
/// near-zero gradients are compared absolutely).
float finite_diff_check(const ScalarFn& f, const Tensor& x, float eps = 1e-2f);

}  // namespace rblb
