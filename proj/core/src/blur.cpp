#include "rblb/blur.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "rblb/random.hpp"

namespace rblb {

namespace {

constexpr float kRangeTol = 1e-6f;

void check_unit_range(const Tensor& t, const char* who) {
  for (float v : t.values()) {
    if (v < -kRangeTol || v > 1.0f + kRangeTol) {
      throw std::invalid_argument(std::string(who) + ": value " + std::to_string(v) +
                                  " outside [0, 1]");
    }
  }
}

float clamp01(float v) { return std::clamp(v, 0.0f, 1.0f); }

}  // namespace

void CrfParams::validate() const {
  if (!(gamma >= 1.0f && gamma <= 4.0f)) {
    throw std::invalid_argument("CrfParams: gamma " + std::to_string(gamma) +
                                " outside [1, 4]");
  }
}

void BlurKernelSpec::validate() const {
  if (size < 1 || size % 2 == 0) {
    throw std::invalid_argument("BlurKernelSpec: kernel size must be odd and >= 1, got " +
                                std::to_string(size));
  }
  if (kernel.size() != static_cast<std::size_t>(size) * size) {
    throw std::invalid_argument("BlurKernelSpec: kernel has " + std::to_string(kernel.size()) +
                                " entries, expected " + std::to_string(size * size));
  }
  double sum = 0.0;
  for (float v : kernel) {
    if (v < 0.0f) throw std::invalid_argument("BlurKernelSpec: negative kernel entry");
    sum += v;
  }
  if (std::fabs(sum - 1.0) > 1e-6) {
    throw std::invalid_argument("BlurKernelSpec: kernel sums to " + std::to_string(sum) +
                                ", expected 1");
  }
  if (noise_std < 0.0f) throw std::invalid_argument("BlurKernelSpec: negative noise_std");
}

Tensor NoiseMap::to_tensor() const { return Tensor::from_data(Shape{1, channels, height, width}, values); }

Tensor apply_crf(const Tensor& linear, const CrfParams& crf) {
  crf.validate();
  check_unit_range(linear, "apply_crf");
  const float e = 1.0f / crf.gamma;
  std::vector<float> out(linear.values().begin(), linear.values().end());
  for (auto& v : out) v = std::pow(clamp01(v), e);
  return Tensor::from_data(linear.shape(), std::move(out));
}

Tensor invert_crf(const Tensor& observed, const CrfParams& crf) {
  crf.validate();
  check_unit_range(observed, "invert_crf");
  std::vector<float> out(observed.values().begin(), observed.values().end());
  for (auto& v : out) v = std::pow(clamp01(v), crf.gamma);
  return Tensor::from_data(observed.shape(), std::move(out));
}

Tensor average_blur(const std::vector<Tensor>& frames, const CrfParams& crf) {
  if (frames.empty()) throw std::invalid_argument("average_blur: no frames");
  const Shape s = frames.front().shape();
  for (const auto& f : frames) {
    if (!(f.shape() == s)) {
      throw std::invalid_argument("average_blur: frame shape " + f.shape().str() +
                                  " does not match " + s.str());
    }
  }
  std::vector<Tensor> linear;
  linear.reserve(frames.size());
  for (const auto& f : frames) linear.push_back(invert_crf(f, crf));

  const std::size_t count = static_cast<std::size_t>(s.numel());
  const double inv_m = 1.0 / static_cast<double>(frames.size());
  std::vector<float> mean(count);
  std::vector<float> samples(frames.size());
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t t = 0; t < linear.size(); ++t) samples[t] = linear[t].values()[i];
    std::sort(samples.begin(), samples.end());
    double acc = 0.0;
    for (float v : samples) acc += v;
    mean[i] = static_cast<float>(acc * inv_m);
  }
  return apply_crf(Tensor::from_data(s, std::move(mean)), crf);
}

Tensor kernel_blur(const Tensor& image, const BlurKernelSpec& spec, std::uint64_t rng_seed) {
  spec.validate();
  check_unit_range(image, "kernel_blur");
  const Shape s = image.shape();
  const int k = spec.size;
  const int pad = k / 2;
  if (s.h <= pad || s.w <= pad) {
    throw std::invalid_argument("kernel_blur: image " + s.str() + " too small for kernel " +
                                std::to_string(k));
  }

  auto reflect = [](int i, int extent) {
    if (i < 0) i = -i;
    if (i >= extent) i = 2 * extent - 2 - i;
    return i;
  };

  const auto in = image.values();
  std::vector<float> out(in.size(), 0.0f);
  const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const float* src = in.data() + (static_cast<std::size_t>(n) * s.c + c) * plane;
      float* dst = out.data() + (static_cast<std::size_t>(n) * s.c + c) * plane;
      for (int y = 0; y < s.h; ++y) {
        for (int x = 0; x < s.w; ++x) {
          double acc = 0.0;
          for (int ky = 0; ky < k; ++ky) {
            // True convolution: the kernel is flipped relative to the image.
            const int sy = reflect(y + pad - ky, s.h);
            for (int kx = 0; kx < k; ++kx) {
              const int sx = reflect(x + pad - kx, s.w);
              acc += static_cast<double>(spec.kernel[static_cast<std::size_t>(ky) * k + kx]) *
                     src[static_cast<std::size_t>(sy) * s.w + sx];
            }
          }
          dst[static_cast<std::size_t>(y) * s.w + x] = static_cast<float>(acc);
        }
      }
    }
  }

  if (spec.noise_std > 0.0f) {
    auto eng = rng::engine(rng_seed);
    std::normal_distribution<float> dist(0.0f, spec.noise_std);
    for (auto& v : out) v += dist(eng);
  }
  for (auto& v : out) v = clamp01(v);
  return Tensor::from_data(s, std::move(out));
}

BlurKernelSpec gen_linear_kernel(int length, float angle_deg, float noise_std) {
  if (length < 1 || length % 2 == 0) {
    throw std::invalid_argument("gen_linear_kernel: length must be odd and >= 1, got " +
                                std::to_string(length));
  }
  BlurKernelSpec spec;
  spec.size = length;
  spec.noise_std = noise_std;
  spec.kernel.assign(static_cast<std::size_t>(length) * length, 0.0f);

  if (length == 1) {
    spec.kernel[0] = 1.0f;
    return spec;
  }

  // Coverage rasterization: midpoint-supersample the segment (full extent
  // length, through the kernel center) and deposit each sample into its
  // nearest cell. The sample count is a multiple of length so axis-aligned
  // segments split into exactly equal cell weights.
  const double theta = angle_deg * 3.14159265358979323846 / 180.0;
  const double dx = std::cos(theta);
  const double dy = std::sin(theta);
  const double half = length / 2.0;
  const double center = (length - 1) / 2.0;
  const int substeps = 192 * length;
  double total = 0.0;
  std::vector<double> acc(spec.kernel.size(), 0.0);
  for (int i = 0; i < substeps; ++i) {
    const double t = -half + (2.0 * half) * (i + 0.5) / substeps;
    const int x = static_cast<int>(std::lround(center + t * dx));
    const int y = static_cast<int>(std::lround(center + t * dy));
    if (x < 0 || x >= length || y < 0 || y >= length) continue;
    acc[static_cast<std::size_t>(y) * length + x] += 1.0;
    total += 1.0;
  }
  // Exact renormalization so the energy-preserving invariant holds.
  double sum = 0.0;
  for (std::size_t i = 0; i < acc.size(); ++i) {
    spec.kernel[i] = static_cast<float>(acc[i] / total);
    sum += spec.kernel[i];
  }
  spec.kernel[spec.kernel.size() / 2] += static_cast<float>(1.0 - sum);
  return spec;
}

NoiseMap make_noise_map(std::uint64_t seed, int channels, int h, int w) {
  if (channels < 1) throw std::invalid_argument("make_noise_map: channels must be >= 1");
  if (h < 1 || w < 1) throw std::invalid_argument("make_noise_map: zero spatial dimensions");
  NoiseMap map;
  map.channels = channels;
  map.height = h;
  map.width = w;
  map.seed = seed;
  auto eng = rng::engine(seed);
  map.source_vector = rng::normal(eng, static_cast<std::size_t>(channels), 0.0f, 1.0f);
  map.values.resize(static_cast<std::size_t>(channels) * h * w);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int c = 0; c < channels; ++c) {
    std::fill_n(map.values.begin() + static_cast<std::size_t>(c) * plane, plane,
                map.source_vector[static_cast<std::size_t>(c)]);
  }
  return map;
}

Tensor stack_noise_maps(const std::vector<NoiseMap>& maps) {
  if (maps.empty()) throw std::invalid_argument("stack_noise_maps: no maps");
  const auto& first = maps.front();
  std::vector<float> out;
  out.reserve(maps.size() * first.values.size());
  for (const auto& m : maps) {
    if (m.channels != first.channels || m.height != first.height || m.width != first.width) {
      throw std::invalid_argument("stack_noise_maps: inconsistent map shapes");
    }
    out.insert(out.end(), m.values.begin(), m.values.end());
  }
  return Tensor::from_data(
      Shape{static_cast<int>(maps.size()), first.channels, first.height, first.width},
      std::move(out));
}

}  // namespace rblb
