#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

#include "rblb/ops.hpp"

namespace rblb {

namespace {

using detail::TensorNode;
using NodePtr = std::shared_ptr<TensorNode>;

void accum(const NodePtr& node, const std::vector<float>& g) {
  if (node->grad.empty()) node->grad.assign(node->values.size(), 0.0f);
  for (std::size_t i = 0; i < g.size(); ++i) node->grad[i] += g[i];
}

// Padded-to-source index map; -1 marks zero padding.
std::vector<int> pad_index_map(int extent, int pad, Padding padding) {
  std::vector<int> map(static_cast<std::size_t>(extent) + 2 * pad);
  for (int i = 0; i < static_cast<int>(map.size()); ++i) {
    int src = i - pad;
    if (src < 0) src = padding == Padding::ReflectSame ? -src : -1;
    else if (src >= extent) src = padding == Padding::ReflectSame ? 2 * extent - 2 - src : -1;
    if (src >= extent) {
      throw std::invalid_argument("conv2d: reflect padding needs extent > kernel/2, got extent " +
                                  std::to_string(extent));
    }
    map[static_cast<std::size_t>(i)] = src;
  }
  return map;
}

struct ConvDims {
  int batch, cin, h, w, cout, k, pad, hp, wp, h_out, w_out, stride;
};

// Copies one image (all channels) into a zero/reflect padded buffer.
void fill_padded(const float* src, float* padded, const ConvDims& d, const std::vector<int>& mh,
                 const std::vector<int>& mw) {
  for (int ci = 0; ci < d.cin; ++ci) {
    const float* plane = src + static_cast<std::size_t>(ci) * d.h * d.w;
    float* out_plane = padded + static_cast<std::size_t>(ci) * d.hp * d.wp;
    for (int hp = 0; hp < d.hp; ++hp) {
      float* row = out_plane + static_cast<std::size_t>(hp) * d.wp;
      const int sh = mh[static_cast<std::size_t>(hp)];
      if (sh < 0) {
        std::fill_n(row, d.wp, 0.0f);
        continue;
      }
      const float* src_row = plane + static_cast<std::size_t>(sh) * d.w;
      for (int wp = 0; wp < d.pad; ++wp) {
        const int sw = mw[static_cast<std::size_t>(wp)];
        row[wp] = sw < 0 ? 0.0f : src_row[sw];
      }
      std::copy_n(src_row, d.w, row + d.pad);
      for (int wp = d.pad + d.w; wp < d.wp; ++wp) {
        const int sw = mw[static_cast<std::size_t>(wp)];
        row[wp] = sw < 0 ? 0.0f : src_row[sw];
      }
    }
  }
}

void conv_forward_one(const float* padded, const float* weights, const float* bias, float* out,
                      const ConvDims& d) {
  for (int co = 0; co < d.cout; ++co) {
    float* out_plane = out + static_cast<std::size_t>(co) * d.h_out * d.w_out;
    std::fill_n(out_plane, static_cast<std::size_t>(d.h_out) * d.w_out,
                bias ? bias[co] : 0.0f);
    for (int ci = 0; ci < d.cin; ++ci) {
      const float* in_plane = padded + static_cast<std::size_t>(ci) * d.hp * d.wp;
      const float* w_block =
          weights + (static_cast<std::size_t>(co) * d.cin + ci) * d.k * d.k;
      for (int kh = 0; kh < d.k; ++kh) {
        for (int kw = 0; kw < d.k; ++kw) {
          const float wv = w_block[kh * d.k + kw];
          if (d.stride == 1) {
            for (int ho = 0; ho < d.h_out; ++ho) {
              const float* src = in_plane + static_cast<std::size_t>(ho + kh) * d.wp + kw;
              float* dst = out_plane + static_cast<std::size_t>(ho) * d.w_out;
              for (int wo = 0; wo < d.w_out; ++wo) dst[wo] += wv * src[wo];
            }
          } else {
            for (int ho = 0; ho < d.h_out; ++ho) {
              const float* src =
                  in_plane + static_cast<std::size_t>(ho * d.stride + kh) * d.wp + kw;
              float* dst = out_plane + static_cast<std::size_t>(ho) * d.w_out;
              for (int wo = 0; wo < d.w_out; ++wo) dst[wo] += wv * src[wo * d.stride];
            }
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(Tape& tape, const Tensor& input, const Tensor& weight, const Tensor& bias,
              const Conv2dOpts& opts) {
  const Shape si = input.shape();
  const Shape sw = weight.shape();  // (cout, cin, k, k)
  if (sw.h != sw.w) {
    throw std::invalid_argument("conv2d: non-square kernel " + sw.str());
  }
  if (sw.h % 2 == 0) {
    throw std::invalid_argument("conv2d: kernel size must be odd, got " + std::to_string(sw.h));
  }
  if (si.c != sw.c) {
    throw std::invalid_argument("conv2d: input channels " + std::to_string(si.c) +
                                " do not match weight channels " + std::to_string(sw.c) +
                                " (input " + si.str() + ", weight " + sw.str() + ")");
  }
  if (opts.stride < 1) {
    throw std::invalid_argument("conv2d: stride must be >= 1");
  }
  if (bias.defined() && !(bias.shape() == Shape{1, sw.n, 1, 1})) {
    throw std::invalid_argument("conv2d: bias shape " + bias.shape().str() +
                                " does not match out channels " + std::to_string(sw.n));
  }

  ConvDims d;
  d.batch = si.n;
  d.cin = si.c;
  d.h = si.h;
  d.w = si.w;
  d.cout = sw.n;
  d.k = sw.h;
  d.pad = sw.h / 2;
  d.hp = si.h + 2 * d.pad;
  d.wp = si.w + 2 * d.pad;
  d.stride = opts.stride;
  d.h_out = (si.h - 1) / opts.stride + 1;
  d.w_out = (si.w - 1) / opts.stride + 1;

  const auto mh = pad_index_map(d.h, d.pad, opts.padding);
  const auto mw = pad_index_map(d.w, d.pad, opts.padding);

  const Shape so{d.batch, d.cout, d.h_out, d.w_out};
  std::vector<float> out(static_cast<std::size_t>(so.numel()));
  std::vector<float> padded(static_cast<std::size_t>(d.cin) * d.hp * d.wp);

  const float* in_data = input.values().data();
  const float* w_data = weight.values().data();
  const float* b_data = bias.defined() ? bias.values().data() : nullptr;
  const std::size_t in_stride = static_cast<std::size_t>(d.cin) * d.h * d.w;
  const std::size_t out_stride = static_cast<std::size_t>(d.cout) * d.h_out * d.w_out;

  for (int n = 0; n < d.batch; ++n) {
    fill_padded(in_data + n * in_stride, padded.data(), d, mh, mw);
    conv_forward_one(padded.data(), w_data, b_data, out.data() + n * out_stride, d);
  }

  const bool rg =
      input.requires_grad() || weight.requires_grad() || (bias.defined() && bias.requires_grad());
  Tensor result = Tensor::from_data(so, std::move(out), rg);
  if (!rg) return result;

  NodePtr in_node = input.node(), w_node = weight.node(), out_node = result.node();
  NodePtr b_node = bias.defined() ? bias.node() : nullptr;

  tape.record(out_node, [in_node, w_node, b_node, out_node, d, mh, mw]() {
    if (out_node->grad.empty()) return;
    const float* in_data = in_node->values.data();
    const float* w_data = w_node->values.data();
    const std::vector<float>& og = out_node->grad;
    const std::size_t in_stride = static_cast<std::size_t>(d.cin) * d.h * d.w;
    const std::size_t out_stride = static_cast<std::size_t>(d.cout) * d.h_out * d.w_out;
    const std::size_t plane_p = static_cast<std::size_t>(d.hp) * d.wp;

    if (b_node && b_node->requires_grad) {
      std::vector<float> gb(static_cast<std::size_t>(d.cout), 0.0f);
      for (int n = 0; n < d.batch; ++n) {
        for (int co = 0; co < d.cout; ++co) {
          const float* src = og.data() + n * out_stride +
                             static_cast<std::size_t>(co) * d.h_out * d.w_out;
          double acc = 0.0;
          for (int i = 0; i < d.h_out * d.w_out; ++i) acc += src[i];
          gb[static_cast<std::size_t>(co)] += static_cast<float>(acc);
        }
      }
      accum(b_node, gb);
    }

    const bool need_dw = w_node->requires_grad;
    const bool need_dx = in_node->requires_grad;
    std::vector<float> gw(need_dw ? w_node->values.size() : 0, 0.0f);
    std::vector<float> gx(need_dx ? in_node->values.size() : 0, 0.0f);
    std::vector<float> padded(static_cast<std::size_t>(d.cin) * plane_p);
    std::vector<float> dpadded(need_dx ? padded.size() : 0);

    for (int n = 0; n < d.batch; ++n) {
      if (need_dw) fill_padded(in_data + n * in_stride, padded.data(), d, mh, mw);
      if (need_dx) std::fill(dpadded.begin(), dpadded.end(), 0.0f);

      for (int co = 0; co < d.cout; ++co) {
        const float* og_plane =
            og.data() + n * out_stride + static_cast<std::size_t>(co) * d.h_out * d.w_out;
        for (int ci = 0; ci < d.cin; ++ci) {
          const std::size_t w_base = (static_cast<std::size_t>(co) * d.cin + ci) * d.k * d.k;
          const float* in_plane = padded.data() + ci * plane_p;
          float* dp_plane = need_dx ? dpadded.data() + ci * plane_p : nullptr;
          for (int kh = 0; kh < d.k; ++kh) {
            for (int kw = 0; kw < d.k; ++kw) {
              if (need_dw) {
                double acc = 0.0;
                for (int ho = 0; ho < d.h_out; ++ho) {
                  const float* src =
                      in_plane + static_cast<std::size_t>(ho * d.stride + kh) * d.wp + kw;
                  const float* g = og_plane + static_cast<std::size_t>(ho) * d.w_out;
                  if (d.stride == 1) {
                    for (int wo = 0; wo < d.w_out; ++wo) acc += g[wo] * src[wo];
                  } else {
                    for (int wo = 0; wo < d.w_out; ++wo) acc += g[wo] * src[wo * d.stride];
                  }
                }
                gw[w_base + static_cast<std::size_t>(kh) * d.k + kw] += static_cast<float>(acc);
              }
              if (need_dx) {
                const float wv = w_node->values[w_base + static_cast<std::size_t>(kh) * d.k + kw];
                for (int ho = 0; ho < d.h_out; ++ho) {
                  float* dst =
                      dp_plane + static_cast<std::size_t>(ho * d.stride + kh) * d.wp + kw;
                  const float* g = og_plane + static_cast<std::size_t>(ho) * d.w_out;
                  if (d.stride == 1) {
                    for (int wo = 0; wo < d.w_out; ++wo) dst[wo] += wv * g[wo];
                  } else {
                    for (int wo = 0; wo < d.w_out; ++wo) dst[wo * d.stride] += wv * g[wo];
                  }
                }
              }
            }
          }
        }
      }

      if (need_dx) {
        // Scatter padded gradients back through the padding index maps.
        float* gx_img = gx.data() + n * in_stride;
        for (int ci = 0; ci < d.cin; ++ci) {
          const float* dp_plane = dpadded.data() + ci * plane_p;
          float* gx_plane = gx_img + static_cast<std::size_t>(ci) * d.h * d.w;
          for (int hp = 0; hp < d.hp; ++hp) {
            const int sh = mh[static_cast<std::size_t>(hp)];
            if (sh < 0) continue;
            const float* src_row = dp_plane + static_cast<std::size_t>(hp) * d.wp;
            float* dst_row = gx_plane + static_cast<std::size_t>(sh) * d.w;
            for (int wp = 0; wp < d.wp; ++wp) {
              const int sw = mw[static_cast<std::size_t>(wp)];
              if (sw >= 0) dst_row[sw] += src_row[wp];
            }
          }
        }
      }
    }

    if (need_dw) accum(w_node, gw);
    if (need_dx) accum(in_node, gx);
  });
  return result;
}

}  // namespace rblb
