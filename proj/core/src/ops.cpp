#include "rblb/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace rblb {

namespace {

using detail::TensorNode;
using NodePtr = std::shared_ptr<TensorNode>;

void accum(const NodePtr& node, const std::vector<float>& g) {
  if (node->grad.empty()) node->grad.assign(node->values.size(), 0.0f);
  for (std::size_t i = 0; i < g.size(); ++i) node->grad[i] += g[i];
}

bool is_scalar(const Tensor& t) { return t.numel() == 1; }

[[noreturn]] void throw_shape_mismatch(const char* op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " +
                              b.shape().str());
}

}  // namespace

Tensor elementwise(Tape& tape, EwKind kind, const Tensor& a, const Tensor& b) {
  switch (kind) {
    case EwKind::Add: return add(tape, a, b);
    case EwKind::Sub: return sub(tape, a, b);
    case EwKind::Mul: return mul(tape, a, b);
  }
  throw std::logic_error("elementwise: unknown kind");
}

namespace {

// Shared skeleton for add/sub/mul with optional scalar broadcast of b.
template <typename Fwd, typename BwdA, typename BwdB>
Tensor binary_op(Tape& tape, const char* name, const Tensor& a, const Tensor& b, Fwd fwd,
                 BwdA bwd_a, BwdB bwd_b) {
  const bool scalar_b = is_scalar(b) && !(a.shape() == b.shape());
  if (!scalar_b && !(a.shape() == b.shape())) throw_shape_mismatch(name, a, b);

  const auto av = a.values();
  const auto bv = b.values();
  std::vector<float> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) {
    out[i] = fwd(av[i], scalar_b ? bv[0] : bv[i]);
  }
  const bool rg = a.requires_grad() || b.requires_grad();
  Tensor result = Tensor::from_data(a.shape(), std::move(out), rg);
  if (rg) {
    NodePtr an = a.node(), bn = b.node(), on = result.node();
    tape.record(on, [an, bn, on, scalar_b, bwd_a, bwd_b]() {
      if (on->grad.empty()) return;  // no gradient reached this op
      const auto& og = on->grad;
      if (an->requires_grad) {
        std::vector<float> ga(an->values.size());
        for (std::size_t i = 0; i < ga.size(); ++i) {
          ga[i] = bwd_a(og[i], an->values[i], scalar_b ? bn->values[0] : bn->values[i]);
        }
        accum(an, ga);
      }
      if (bn->requires_grad) {
        if (scalar_b) {
          double s = 0.0;
          for (std::size_t i = 0; i < og.size(); ++i) {
            s += bwd_b(og[i], an->values[i], bn->values[0]);
          }
          accum(bn, {static_cast<float>(s)});
        } else {
          std::vector<float> gb(bn->values.size());
          for (std::size_t i = 0; i < gb.size(); ++i) {
            gb[i] = bwd_b(og[i], an->values[i], bn->values[i]);
          }
          accum(bn, gb);
        }
      }
    });
  }
  return result;
}

}  // namespace

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  return binary_op(
      tape, "add", a, b, [](float x, float y) { return x + y; },
      [](float g, float, float) { return g; }, [](float g, float, float) { return g; });
}

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
  return binary_op(
      tape, "sub", a, b, [](float x, float y) { return x - y; },
      [](float g, float, float) { return g; }, [](float g, float, float) { return -g; });
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  return binary_op(
      tape, "mul", a, b, [](float x, float y) { return x * y; },
      [](float g, float, float y) { return g * y; },
      [](float g, float x, float) { return g * x; });
}

namespace {

template <typename Fwd, typename Bwd>
Tensor unary_op(Tape& tape, const Tensor& a, Fwd fwd, Bwd bwd) {
  const auto av = a.values();
  std::vector<float> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
  const bool rg = a.requires_grad();
  Tensor result = Tensor::from_data(a.shape(), std::move(out), rg);
  if (rg) {
    NodePtr an = a.node(), on = result.node();
    tape.record(on, [an, on, bwd]() {
      if (on->grad.empty()) return;
      std::vector<float> ga(an->values.size());
      for (std::size_t i = 0; i < ga.size(); ++i) {
        ga[i] = bwd(on->grad[i], an->values[i], on->values[i]);
      }
      accum(an, ga);
    });
  }
  return result;
}

}  // namespace

Tensor add_scalar(Tape& tape, const Tensor& a, float c) {
  return unary_op(
      tape, a, [c](float x) { return x + c; }, [](float g, float, float) { return g; });
}

Tensor mul_scalar(Tape& tape, const Tensor& a, float c) {
  return unary_op(
      tape, a, [c](float x) { return x * c; }, [c](float g, float, float) { return g * c; });
}

Tensor pow_scalar(Tape& tape, const Tensor& a, float exponent, float grad_cap) {
  const bool integer_exp = exponent == std::floor(exponent);
  if (!integer_exp) {
    for (float v : a.values()) {
      if (v < 0.0f) {
        throw std::invalid_argument("pow_scalar: negative base " + std::to_string(v) +
                                    " with fractional exponent " + std::to_string(exponent));
      }
    }
  }
  return unary_op(
      tape, a, [exponent](float x) { return std::pow(x, exponent); },
      [exponent, grad_cap](float g, float x, float) {
        float factor = exponent * std::pow(x, exponent - 1.0f);
        if (!std::isfinite(factor)) factor = factor > 0 ? grad_cap : -grad_cap;
        factor = std::clamp(factor, -grad_cap, grad_cap);
        return g * factor;
      });
}

Tensor relu(Tape& tape, const Tensor& a) {
  return unary_op(
      tape, a, [](float x) { return x > 0.0f ? x : 0.0f; },
      [](float g, float x, float) { return x > 0.0f ? g : 0.0f; });
}

Tensor sigmoid(Tape& tape, const Tensor& a) {
  return unary_op(
      tape, a, [](float x) { return 1.0f / (1.0f + std::exp(-x)); },
      [](float g, float, float y) { return g * y * (1.0f - y); });
}

Tensor abs(Tape& tape, const Tensor& a) {
  return unary_op(
      tape, a, [](float x) { return std::fabs(x); },
      [](float g, float x, float) { return x > 0.0f ? g : (x < 0.0f ? -g : 0.0f); });
}

Tensor log_clamped(Tape& tape, const Tensor& a, float floor) {
  return unary_op(
      tape, a, [floor](float x) { return std::log(x > floor ? x : floor); },
      [floor](float g, float x, float) { return x > floor ? g / x : 0.0f; });
}

Tensor reduce_mean(Tape& tape, const Tensor& a, MeanOver over) {
  if (a.numel() == 0) throw std::invalid_argument("reduce_mean: empty tensor");
  const Shape s = a.shape();
  const auto av = a.values();

  if (over == MeanOver::All) {
    double acc = 0.0;
    for (float v : av) acc += v;
    const double inv = 1.0 / static_cast<double>(av.size());
    Tensor result = Tensor::scalar(static_cast<float>(acc * inv), a.requires_grad());
    if (a.requires_grad()) {
      NodePtr an = a.node(), on = result.node();
      const float share = static_cast<float>(inv);
      tape.record(on, [an, on, share]() {
        if (on->grad.empty()) return;
        std::vector<float> ga(an->values.size(), on->grad[0] * share);
        accum(an, ga);
      });
    }
    return result;
  }

  // MeanOver::Batch: mean across N, keeping CxHxW.
  const std::size_t per = static_cast<std::size_t>(s.numel() / s.n);
  std::vector<float> out(per, 0.0f);
  const double inv_n = 1.0 / static_cast<double>(s.n);
  for (std::size_t i = 0; i < per; ++i) {
    double acc = 0.0;
    for (int n = 0; n < s.n; ++n) acc += av[static_cast<std::size_t>(n) * per + i];
    out[i] = static_cast<float>(acc * inv_n);
  }
  Tensor result = Tensor::from_data(Shape{1, s.c, s.h, s.w}, std::move(out), a.requires_grad());
  if (a.requires_grad()) {
    NodePtr an = a.node(), on = result.node();
    const float share = static_cast<float>(inv_n);
    const int batch = s.n;
    tape.record(on, [an, on, share, batch, per]() {
      if (on->grad.empty()) return;
      std::vector<float> ga(an->values.size());
      for (int n = 0; n < batch; ++n) {
        for (std::size_t i = 0; i < per; ++i) {
          ga[static_cast<std::size_t>(n) * per + i] = on->grad[i] * share;
        }
      }
      accum(an, ga);
    });
  }
  return result;
}

Tensor mean_spatial(Tape& tape, const Tensor& a) {
  const Shape s = a.shape();
  if (s.h * s.w == 0) throw std::invalid_argument("mean_spatial: empty spatial extent");
  const auto av = a.values();
  const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
  const std::size_t nc = static_cast<std::size_t>(s.n) * s.c;
  std::vector<float> out(nc);
  const double inv = 1.0 / static_cast<double>(plane);
  for (std::size_t p = 0; p < nc; ++p) {
    double acc = 0.0;
    const float* src = av.data() + p * plane;
    for (std::size_t i = 0; i < plane; ++i) acc += src[i];
    out[p] = static_cast<float>(acc * inv);
  }
  Tensor result = Tensor::from_data(Shape{s.n, s.c, 1, 1}, std::move(out), a.requires_grad());
  if (a.requires_grad()) {
    NodePtr an = a.node(), on = result.node();
    const float share = static_cast<float>(inv);
    tape.record(on, [an, on, share, plane, nc]() {
      if (on->grad.empty()) return;
      std::vector<float> ga(an->values.size());
      for (std::size_t p = 0; p < nc; ++p) {
        const float g = on->grad[p] * share;
        float* dst = ga.data() + p * plane;
        for (std::size_t i = 0; i < plane; ++i) dst[i] = g;
      }
      accum(an, ga);
    });
  }
  return result;
}

Tensor concat_channels(Tape& tape, const Tensor& a, const Tensor& b) {
  const Shape sa = a.shape(), sb = b.shape();
  if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w) {
    throw_shape_mismatch("concat_channels", a, b);
  }
  const std::size_t plane = static_cast<std::size_t>(sa.h) * sa.w;
  const std::size_t a_block = static_cast<std::size_t>(sa.c) * plane;
  const std::size_t b_block = static_cast<std::size_t>(sb.c) * plane;
  const Shape so{sa.n, sa.c + sb.c, sa.h, sa.w};
  std::vector<float> out(static_cast<std::size_t>(so.numel()));
  const auto av = a.values(), bv = b.values();
  for (int n = 0; n < sa.n; ++n) {
    float* dst = out.data() + static_cast<std::size_t>(n) * (a_block + b_block);
    std::copy_n(av.data() + static_cast<std::size_t>(n) * a_block, a_block, dst);
    std::copy_n(bv.data() + static_cast<std::size_t>(n) * b_block, b_block, dst + a_block);
  }
  const bool rg = a.requires_grad() || b.requires_grad();
  Tensor result = Tensor::from_data(so, std::move(out), rg);
  if (rg) {
    NodePtr an = a.node(), bn = b.node(), on = result.node();
    const int batch = sa.n;
    tape.record(on, [an, bn, on, batch, a_block, b_block]() {
      if (on->grad.empty()) return;
      if (an->requires_grad) {
        std::vector<float> ga(an->values.size());
        for (int n = 0; n < batch; ++n) {
          const float* src = on->grad.data() + static_cast<std::size_t>(n) * (a_block + b_block);
          std::copy_n(src, a_block, ga.data() + static_cast<std::size_t>(n) * a_block);
        }
        accum(an, ga);
      }
      if (bn->requires_grad && b_block > 0) {
        std::vector<float> gb(bn->values.size());
        for (int n = 0; n < batch; ++n) {
          const float* src =
              on->grad.data() + static_cast<std::size_t>(n) * (a_block + b_block) + a_block;
          std::copy_n(src, b_block, gb.data() + static_cast<std::size_t>(n) * b_block);
        }
        accum(bn, gb);
      }
    });
  }
  return result;
}

Tensor detach(const Tensor& a) { return a.detached(false); }

}  // namespace rblb
