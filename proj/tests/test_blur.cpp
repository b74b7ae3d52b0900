#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include <doctest.h>

#include "oracles.hpp"
#include "rblb/blur.hpp"

using namespace rblb;

namespace {

Tensor random_image(std::uint64_t seed, const Shape& s) {
  std::mt19937_64 eng(seed);
  std::uniform_real_distribution<float> dist(0.0f, 1.0f);
  std::vector<float> values(static_cast<std::size_t>(s.numel()));
  for (auto& v : values) v = dist(eng);
  return Tensor::from_data(s, std::move(values));
}

}  // namespace

TEST_CASE("crf with gamma 1 is the identity") {
  const Tensor x = random_image(1, Shape{1, 3, 4, 4});
  const CrfParams crf{1.0f};
  const Tensor applied = apply_crf(x, crf);
  const Tensor inverted = invert_crf(x, crf);
  for (std::size_t i = 0; i < x.values().size(); ++i) {
    CHECK(applied.values()[i] == doctest::Approx(x.values()[i]).epsilon(1e-7));
    CHECK(inverted.values()[i] == doctest::Approx(x.values()[i]).epsilon(1e-7));
  }
}

TEST_CASE("crf round trip within 1e-6") {
  for (float gamma : {1.0f, 1.8f, 2.2f, 4.0f}) {
    const CrfParams crf{gamma};
    const Tensor x = random_image(2 + static_cast<std::uint64_t>(gamma * 10), Shape{1, 3, 8, 8});
    const Tensor round1 = invert_crf(apply_crf(x, crf), crf);
    const Tensor round2 = apply_crf(invert_crf(x, crf), crf);
    for (std::size_t i = 0; i < x.values().size(); ++i) {
      CHECK(std::fabs(round1.values()[i] - x.values()[i]) <= 1e-6f);
      CHECK(std::fabs(round2.values()[i] - x.values()[i]) <= 1e-6f);
    }
  }
}

TEST_CASE("apply_crf matches the scalar oracle") {
  const CrfParams crf{2.2f};
  const Tensor x = Tensor::full(Shape{1, 1, 1, 1}, 0.25f);
  const double expected = std::pow(0.25, 1.0 / 2.2);
  CHECK(apply_crf(x, crf).item() == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("crf rejects out-of-range inputs and gammas") {
  const CrfParams crf{2.2f};
  CHECK_THROWS_AS(apply_crf(Tensor::full(Shape{1, 1, 1, 1}, 1.5f), crf), std::invalid_argument);
  CHECK_THROWS_AS(invert_crf(Tensor::full(Shape{1, 1, 1, 1}, -0.5f), crf), std::invalid_argument);
  CHECK_THROWS_AS(apply_crf(Tensor::full(Shape{1, 1, 1, 1}, 0.5f), CrfParams{0.5f}),
                  std::invalid_argument);
  CHECK_THROWS_AS(apply_crf(Tensor::full(Shape{1, 1, 1, 1}, 0.5f), CrfParams{4.5f}),
                  std::invalid_argument);
}

TEST_CASE("average_blur of identical frames returns that frame") {
  const Tensor frame = random_image(3, Shape{1, 3, 5, 5});
  const Tensor out = average_blur({frame, frame, frame}, CrfParams{2.2f});
  for (std::size_t i = 0; i < frame.values().size(); ++i) {
    CHECK(std::fabs(out.values()[i] - frame.values()[i]) <= 1e-6f);
  }
}

TEST_CASE("average_blur constant-frame examples match the scalar oracle") {
  const Tensor zeros = Tensor::zeros(Shape{1, 3, 4, 4});
  const Tensor ones = Tensor::full(Shape{1, 3, 4, 4}, 1.0f);
  const Tensor mid = average_blur({zeros, ones}, CrfParams{1.0f});
  for (float v : mid.values()) CHECK(v == doctest::Approx(0.5).epsilon(1e-7));

  const Tensor low = Tensor::full(Shape{1, 3, 4, 4}, 0.2f);
  const Tensor high = Tensor::full(Shape{1, 3, 4, 4}, 0.8f);
  const Tensor blended = average_blur({low, high}, CrfParams{2.2f});
  const double expected = std::pow((std::pow(0.2, 2.2) + std::pow(0.8, 2.2)) / 2.0, 1.0 / 2.2);
  for (float v : blended.values()) CHECK(std::fabs(v - expected) <= 1e-6);
}

TEST_CASE("average_blur input validation") {
  CHECK_THROWS_AS(average_blur({}, CrfParams{2.2f}), std::invalid_argument);
  CHECK_THROWS_AS(average_blur({Tensor::zeros(Shape{1, 3, 4, 4}),
                                Tensor::zeros(Shape{1, 3, 5, 5})},
                               CrfParams{2.2f}),
                  std::invalid_argument);
}

TEST_CASE("average_blur stays in range and is permutation invariant") {
  std::vector<Tensor> frames;
  for (int t = 0; t < 5; ++t) frames.push_back(random_image(10 + t, Shape{1, 3, 6, 6}));
  const CrfParams crf{2.2f};
  const Tensor forward = average_blur(frames, crf);
  for (float v : forward.values()) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
  std::vector<Tensor> shuffled = {frames[3], frames[0], frames[4], frames[2], frames[1]};
  const Tensor permuted = average_blur(shuffled, crf);
  for (std::size_t i = 0; i < forward.values().size(); ++i) {
    CHECK(forward.values()[i] == permuted.values()[i]);  // bit-exact
  }
}

TEST_CASE("kernel_blur with a delta kernel is the identity") {
  const Tensor x = random_image(20, Shape{1, 3, 6, 6});
  BlurKernelSpec delta;
  delta.size = 3;
  delta.kernel = {0, 0, 0, 0, 1, 0, 0, 0, 0};
  const Tensor out = kernel_blur(x, delta, 0);
  for (std::size_t i = 0; i < x.values().size(); ++i) {
    CHECK(out.values()[i] == doctest::Approx(x.values()[i]).epsilon(1e-7));
  }
}

TEST_CASE("kernel_blur preserves constant images") {
  const Tensor c = Tensor::full(Shape{1, 3, 6, 6}, 0.42f);
  const BlurKernelSpec spec = gen_linear_kernel(5, 30.0f);
  const Tensor out = kernel_blur(c, spec, 0);
  double out_mean = 0.0;
  for (float v : out.values()) {
    CHECK(std::fabs(v - 0.42f) <= 1e-6f);
    out_mean += v;
  }
  out_mean /= static_cast<double>(out.values().size());
  CHECK(std::fabs(out_mean - 0.42) <= 1e-6);
}

TEST_CASE("kernel_blur matches the naive convolution oracle") {
  // 3x1 horizontal box on a one-hot image.
  std::vector<float> onehot(static_cast<std::size_t>(3) * 5 * 5, 0.0f);
  onehot[2 * 5 + 2] = 1.0f;  // channel 0, center
  const Tensor x = Tensor::from_data(Shape{1, 3, 5, 5}, onehot);
  const BlurKernelSpec box = gen_linear_kernel(3, 0.0f);
  const Tensor out = kernel_blur(x, box, 0);
  const auto expected = oracles::kernel_blur_reference(
      std::vector<float>(x.values().begin(), x.values().end()), x.shape(), box.kernel, box.size);
  for (std::size_t i = 0; i < expected.size(); ++i) {
    CHECK(std::fabs(out.values()[i] - expected[i]) <= 1e-5f);
  }
  CHECK(out.values()[2 * 5 + 1] == doctest::Approx(1.0 / 3.0).epsilon(1e-5));
  CHECK(out.values()[2 * 5 + 2] == doctest::Approx(1.0 / 3.0).epsilon(1e-5));
  CHECK(out.values()[2 * 5 + 3] == doctest::Approx(1.0 / 3.0).epsilon(1e-5));

  // Random image, angled kernel.
  const Tensor y = random_image(21, Shape{1, 3, 7, 7});
  const BlurKernelSpec angled = gen_linear_kernel(5, 62.0f);
  const Tensor out2 = kernel_blur(y, angled, 0);
  const auto expected2 = oracles::kernel_blur_reference(
      std::vector<float>(y.values().begin(), y.values().end()), y.shape(), angled.kernel,
      angled.size);
  for (std::size_t i = 0; i < expected2.size(); ++i) {
    CHECK(std::fabs(out2.values()[i] - expected2[i]) <= 1e-5f);
  }
}

TEST_CASE("kernel_blur noise is deterministic per seed and clamped") {
  const Tensor x = random_image(22, Shape{1, 3, 6, 6});
  BlurKernelSpec spec = gen_linear_kernel(3, 45.0f);
  spec.noise_std = 0.1f;
  const Tensor a = kernel_blur(x, spec, 99);
  const Tensor b = kernel_blur(x, spec, 99);
  const Tensor c = kernel_blur(x, spec, 100);
  bool differs = false;
  for (std::size_t i = 0; i < a.values().size(); ++i) {
    CHECK(a.values()[i] == b.values()[i]);
    CHECK(a.values()[i] >= 0.0f);
    CHECK(a.values()[i] <= 1.0f);
    differs = differs || a.values()[i] != c.values()[i];
  }
  CHECK(differs);
}

TEST_CASE("kernel_blur rejects unnormalized kernels") {
  const Tensor x = random_image(23, Shape{1, 3, 6, 6});
  BlurKernelSpec bad;
  bad.size = 3;
  bad.kernel.assign(9, 0.2f);  // sums to 1.8
  CHECK_THROWS_AS(kernel_blur(x, bad, 0), std::invalid_argument);
}

TEST_CASE("gen_linear_kernel shapes and weights") {
  const BlurKernelSpec delta = gen_linear_kernel(1, 123.0f);
  CHECK(delta.size == 1);
  CHECK(delta.kernel[0] == doctest::Approx(1.0));

  const BlurKernelSpec box = gen_linear_kernel(3, 0.0f);
  for (int x = 0; x < 3; ++x) {
    CHECK(box.kernel[1 * 3 + x] == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
  }
  for (int x = 0; x < 3; ++x) {
    CHECK(box.kernel[0 * 3 + x] == 0.0f);
    CHECK(box.kernel[2 * 3 + x] == 0.0f);
  }

  const BlurKernelSpec diag = gen_linear_kernel(5, 45.0f);
  double sum = 0.0;
  for (float v : diag.kernel) sum += v;
  CHECK(std::fabs(sum - 1.0) <= 1e-6);
  CHECK(diag.kernel[2 * 5 + 2] > 0.0f);  // center always covered

  CHECK_THROWS_AS(gen_linear_kernel(4, 0.0f), std::invalid_argument);
  CHECK_THROWS_AS(gen_linear_kernel(0, 0.0f), std::invalid_argument);
}

TEST_CASE("make_noise_map duplicates the source vector spatially") {
  const NoiseMap map = make_noise_map(42);
  CHECK(map.channels == 4);
  CHECK(map.height == 128);
  CHECK(map.width == 128);
  CHECK(map.source_vector.size() == 4);
  CHECK(map.values.size() == static_cast<std::size_t>(4) * 128 * 128);
  for (int c = 0; c < 4; ++c) {
    const std::size_t plane = static_cast<std::size_t>(128) * 128;
    for (std::size_t i = 0; i < plane; i += 977) {
      CHECK(map.values[c * plane + i] == map.source_vector[static_cast<std::size_t>(c)]);
    }
  }

  const NoiseMap again = make_noise_map(42);
  CHECK(map.values == again.values);  // bit-identical per seed

  const NoiseMap other = make_noise_map(43);
  bool differs = false;
  for (std::size_t c = 0; c < 4; ++c) {
    differs = differs || map.source_vector[c] != other.source_vector[c];
  }
  CHECK(differs);

  CHECK_THROWS_AS(make_noise_map(1, 0, 8, 8), std::invalid_argument);
  CHECK_THROWS_AS(make_noise_map(1, 4, 0, 8), std::invalid_argument);
}

TEST_CASE("stack_noise_maps builds an N-item tensor") {
  const std::vector<NoiseMap> maps = {make_noise_map(1, 4, 8, 8), make_noise_map(2, 4, 8, 8)};
  const Tensor stacked = stack_noise_maps(maps);
  CHECK(stacked.shape() == Shape{2, 4, 8, 8});
  CHECK(stacked.values()[0] == maps[0].source_vector[0]);
  CHECK(stacked.values()[static_cast<std::size_t>(4) * 64] == maps[1].source_vector[0]);
}
