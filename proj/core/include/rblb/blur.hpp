#pragma once

#include <cstdint>
#include <vector>

#include "rblb/tensor.hpp"

namespace rblb {

/// Camera response modeled as a gamma power law: observed = linear^(1/gamma).
struct CrfParams {
  float gamma = 2.2f;

  void validate() const;  // gamma in [1, 4]
};

/// Energy-preserving 2-D blur kernel plus additive-noise level.
struct BlurKernelSpec {
  int size = 1;                // k, odd
  std::vector<float> kernel;   // k*k, non-negative, sums to 1 within 1e-6
  float noise_std = 0.0f;

  void validate() const;
};

/// A per-sample noise vector duplicated across every spatial position.
struct NoiseMap {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> source_vector;  // length channels
  std::vector<float> values;         // channels * height * width
  std::uint64_t seed = 0;

  Tensor to_tensor() const;  // 1 x channels x height x width
};

// All operations below are pure: deterministic given their arguments and
// seeds, no tape involvement. Image tensors must lie in [0, 1] (checked to a
// 1e-6 tolerance).

/// linear -> observed: out = in^(1/gamma).
Tensor apply_crf(const Tensor& linear, const CrfParams& crf);

/// observed -> latent linear: out = in^gamma.
Tensor invert_crf(const Tensor& observed, const CrfParams& crf);

/// Multi-frame blur: linearize every frame, average, re-apply the response.
/// Per-pixel sums run in value-sorted order so frame permutations are
/// bit-exact no-ops.
Tensor average_blur(const std::vector<Tensor>& frames, const CrfParams& crf);

/// Per-channel convolution with the kernel (reflect padding), additive
/// Gaussian noise of spec.noise_std, clamp to [0, 1].
Tensor kernel_blur(const Tensor& image, const BlurKernelSpec& spec, std::uint64_t rng_seed);

/// Normalized line-segment point spread function of the given length
/// (odd; 1 yields the delta kernel) rasterized at angle_deg.
BlurKernelSpec gen_linear_kernel(int length, float angle_deg, float noise_std = 0.0f);

NoiseMap make_noise_map(std::uint64_t seed, int channels, int h, int w);
inline NoiseMap make_noise_map(std::uint64_t seed) { return make_noise_map(seed, 4, 128, 128); }

/// Stacks per-item noise maps into an N x C x H x W tensor.
Tensor stack_noise_maps(const std::vector<NoiseMap>& maps);

}  // namespace rblb
