#pragma once

#include "rblb/tensor.hpp"

namespace rblb {

// All operations compute eagerly and record a backward rule on the tape
// whenever at least one input requires a gradient. Binary elementwise ops
// accept a 1x1x1x1 tensor as the right operand (scalar broadcast).

enum class EwKind { Add, Sub, Mul };

Tensor elementwise(Tape& tape, EwKind kind, const Tensor& a, const Tensor& b);
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);

Tensor add_scalar(Tape& tape, const Tensor& a, float c);
Tensor mul_scalar(Tape& tape, const Tensor& a, float c);

/// out = a^exponent. Non-integer exponents require a >= 0 elementwise.
/// The backward factor exponent*a^(exponent-1) is clamped to +-grad_cap
/// where it would otherwise diverge (a == 0, exponent < 1).
Tensor pow_scalar(Tape& tape, const Tensor& a, float exponent, float grad_cap = 1e6f);

Tensor relu(Tape& tape, const Tensor& a);
Tensor sigmoid(Tape& tape, const Tensor& a);
Tensor abs(Tape& tape, const Tensor& a);

/// log(max(a, floor)); zero gradient where the clamp is active.
Tensor log_clamped(Tape& tape, const Tensor& a, float floor = 1e-12f);

enum class MeanOver { All, Batch };

/// MeanOver::All -> 1x1x1x1; MeanOver::Batch -> 1xCxHxW (mean across N).
/// The reduction accumulates in double before rounding to float storage.
Tensor reduce_mean(Tape& tape, const Tensor& a, MeanOver over);

/// Per-channel spatial mean: NxCxHxW -> NxCx1x1.
Tensor mean_spatial(Tape& tape, const Tensor& a);

Tensor concat_channels(Tape& tape, const Tensor& a, const Tensor& b);

enum class Padding { ReflectSame, ZeroSame };

struct Conv2dOpts {
  Padding padding = Padding::ReflectSame;
  int stride = 1;
};

/// input NxCinxHxW, weight CoutxCinxkxk (k odd), bias 1xCoutx1x1 or an
/// undefined tensor for none. Same padding: output is NxCoutxceil(H/s)xceil(W/s).
Tensor conv2d(Tape& tape, const Tensor& input, const Tensor& weight, const Tensor& bias,
              const Conv2dOpts& opts = {});

/// Leaf copy disconnected from any tape.
Tensor detach(const Tensor& a);

}  // namespace rblb
