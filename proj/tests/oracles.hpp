#pragma once

// Independent reference implementations used as test oracles. Everything
// here is plain nested-loop double arithmetic, deliberately sharing no code
// with the library paths it checks.

#include <cmath>
#include <cstddef>
#include <vector>

#include "rblb/tensor.hpp"

namespace oracles {

inline int reflect_index(int i, int extent) {
  while (i < 0 || i >= extent) {
    if (i < 0) i = -i;
    if (i >= extent) i = 2 * extent - 2 - i;
  }
  return i;
}

enum class Pad { Reflect, Zero };

// Direct cross-correlation with same padding, like the library's conv2d.
inline std::vector<float> conv2d_reference(const std::vector<float>& input,
                                           const rblb::Shape& in_shape,
                                           const std::vector<float>& weight,
                                           const rblb::Shape& w_shape,
                                           const std::vector<float>& bias, Pad pad,
                                           int stride = 1) {
  const int pad_amt = w_shape.h / 2;
  const int h_out = (in_shape.h - 1) / stride + 1;
  const int w_out = (in_shape.w - 1) / stride + 1;
  std::vector<float> out(static_cast<std::size_t>(in_shape.n) * w_shape.n * h_out * w_out);
  for (int n = 0; n < in_shape.n; ++n) {
    for (int co = 0; co < w_shape.n; ++co) {
      for (int ho = 0; ho < h_out; ++ho) {
        for (int wo = 0; wo < w_out; ++wo) {
          double acc = bias.empty() ? 0.0 : bias[static_cast<std::size_t>(co)];
          for (int ci = 0; ci < in_shape.c; ++ci) {
            for (int kh = 0; kh < w_shape.h; ++kh) {
              for (int kw = 0; kw < w_shape.w; ++kw) {
                const int hi = ho * stride + kh - pad_amt;
                const int wi = wo * stride + kw - pad_amt;
                double in_val = 0.0;
                if (pad == Pad::Reflect) {
                  const int rh = reflect_index(hi, in_shape.h);
                  const int rw = reflect_index(wi, in_shape.w);
                  in_val = input[((static_cast<std::size_t>(n) * in_shape.c + ci) * in_shape.h +
                                  rh) *
                                     in_shape.w +
                                 rw];
                } else if (hi >= 0 && hi < in_shape.h && wi >= 0 && wi < in_shape.w) {
                  in_val = input[((static_cast<std::size_t>(n) * in_shape.c + ci) * in_shape.h +
                                  hi) *
                                     in_shape.w +
                                 wi];
                }
                acc += in_val *
                       weight[((static_cast<std::size_t>(co) * w_shape.c + ci) * w_shape.h + kh) *
                                  w_shape.w +
                              kw];
              }
            }
          }
          out[((static_cast<std::size_t>(n) * w_shape.n + co) * h_out + ho) * w_out + wo] =
              static_cast<float>(acc);
        }
      }
    }
  }
  return out;
}

// True per-channel convolution (kernel flipped), reflect padding, no noise:
// the reference for kernel_blur before its clamp.
inline std::vector<float> kernel_blur_reference(const std::vector<float>& image,
                                                const rblb::Shape& shape,
                                                const std::vector<float>& kernel, int k) {
  const int pad = k / 2;
  std::vector<float> out(image.size());
  for (int n = 0; n < shape.n; ++n) {
    for (int c = 0; c < shape.c; ++c) {
      const std::size_t base = (static_cast<std::size_t>(n) * shape.c + c) *
                               static_cast<std::size_t>(shape.h) * shape.w;
      for (int y = 0; y < shape.h; ++y) {
        for (int x = 0; x < shape.w; ++x) {
          double acc = 0.0;
          for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
              const int sy = reflect_index(y - (ky - pad), shape.h);
              const int sx = reflect_index(x - (kx - pad), shape.w);
              acc += static_cast<double>(kernel[static_cast<std::size_t>(ky) * k + kx]) *
                     image[base + static_cast<std::size_t>(sy) * shape.w + sx];
            }
          }
          double v = acc;
          if (v < 0.0) v = 0.0;
          if (v > 1.0) v = 1.0;
          out[base + static_cast<std::size_t>(y) * shape.w + x] = static_cast<float>(v);
        }
      }
    }
  }
  return out;
}

}  // namespace oracles
