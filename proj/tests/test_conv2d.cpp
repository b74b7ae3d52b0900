#include <random>
#include <stdexcept>
#include <vector>

#include <doctest.h>

#include "oracles.hpp"
#include "rblb/ops.hpp"
#include "rblb/tensor.hpp"

using namespace rblb;

namespace {

Tensor random_tensor(std::mt19937_64& eng, const Shape& s, float lo = -1.0f, float hi = 1.0f) {
  std::uniform_real_distribution<float> dist(lo, hi);
  std::vector<float> values(static_cast<std::size_t>(s.numel()));
  for (auto& v : values) v = dist(eng);
  return Tensor::from_data(s, std::move(values));
}

}  // namespace

TEST_CASE("delta kernel is the identity") {
  Tape tape;
  std::mt19937_64 eng(11);
  Tensor x = random_tensor(eng, Shape{2, 3, 6, 6});
  std::vector<float> w(static_cast<std::size_t>(3) * 3 * 3 * 3, 0.0f);
  for (int c = 0; c < 3; ++c) {
    w[(static_cast<std::size_t>(c) * 3 + c) * 9 + 4] = 1.0f;  // center tap, own channel
  }
  Tensor weight = Tensor::from_data(Shape{3, 3, 3, 3}, std::move(w));
  Tensor bias = Tensor::zeros(Shape{1, 3, 1, 1});
  for (Padding pad : {Padding::ReflectSame, Padding::ZeroSame}) {
    Tensor out = conv2d(tape, x, weight, bias, Conv2dOpts{pad, 1});
    REQUIRE(out.shape() == x.shape());
    for (std::size_t i = 0; i < out.values().size(); ++i) {
      CHECK(out.values()[i] == x.values()[i]);
    }
  }
}

TEST_CASE("1x1 kernel of value 2 doubles every element") {
  Tape tape;
  std::mt19937_64 eng(12);
  Tensor x = random_tensor(eng, Shape{1, 1, 4, 5});
  Tensor weight = Tensor::from_data(Shape{1, 1, 1, 1}, {2.0f});
  Tensor out = conv2d(tape, x, weight, Tensor{});
  for (std::size_t i = 0; i < out.values().size(); ++i) {
    CHECK(out.values()[i] == doctest::Approx(2.0f * x.values()[i]).epsilon(1e-6));
  }
}

TEST_CASE("conv2d matches the nested-loop oracle") {
  std::mt19937_64 eng(13);
  Tensor x = random_tensor(eng, Shape{1, 2, 4, 4});
  Tensor w = random_tensor(eng, Shape{3, 2, 3, 3});
  Tensor b = random_tensor(eng, Shape{1, 3, 1, 1});
  const std::vector<float> xin(x.values().begin(), x.values().end());
  const std::vector<float> win(w.values().begin(), w.values().end());
  const std::vector<float> bin(b.values().begin(), b.values().end());

  for (const auto& [pad, oracle_pad] :
       {std::pair{Padding::ReflectSame, oracles::Pad::Reflect},
        std::pair{Padding::ZeroSame, oracles::Pad::Zero}}) {
    Tape tape;
    Tensor out = conv2d(tape, x, w, b, Conv2dOpts{pad, 1});
    const auto expected =
        oracles::conv2d_reference(xin, x.shape(), win, w.shape(), bin, oracle_pad, 1);
    REQUIRE(out.values().size() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) {
      CHECK(out.values()[i] == doctest::Approx(expected[i]).epsilon(1e-5));
    }
  }
}

TEST_CASE("conv2d stride 2 matches the oracle and halves the extent") {
  std::mt19937_64 eng(14);
  for (int extent : {4, 5, 8}) {
    Tape tape;
    Tensor x = random_tensor(eng, Shape{2, 2, extent, extent});
    Tensor w = random_tensor(eng, Shape{1, 2, 3, 3});
    Tensor b = random_tensor(eng, Shape{1, 1, 1, 1});
    Tensor out = conv2d(tape, x, w, b, Conv2dOpts{Padding::ReflectSame, 2});
    const int expected_extent = (extent + 1) / 2;
    CHECK(out.shape() == Shape{2, 1, expected_extent, expected_extent});
    const auto expected = oracles::conv2d_reference(
        std::vector<float>(x.values().begin(), x.values().end()), x.shape(),
        std::vector<float>(w.values().begin(), w.values().end()), w.shape(),
        std::vector<float>(b.values().begin(), b.values().end()), oracles::Pad::Reflect, 2);
    for (std::size_t i = 0; i < expected.size(); ++i) {
      CHECK(out.values()[i] == doctest::Approx(expected[i]).epsilon(1e-5));
    }
  }
}

TEST_CASE("same padding preserves spatial size for every odd kernel") {
  Tape tape;
  std::mt19937_64 eng(15);
  Tensor x = random_tensor(eng, Shape{1, 1, 9, 7});
  for (int k : {1, 3, 5, 7}) {
    Tensor w = random_tensor(eng, Shape{2, 1, k, k});
    Tensor out = conv2d(tape, x, w, Tensor{}, Conv2dOpts{Padding::ReflectSame, 1});
    CHECK(out.shape() == Shape{1, 2, 9, 7});
  }
}

TEST_CASE("conv2d is linear in its input") {
  Tape tape;
  std::mt19937_64 eng(16);
  Tensor a = random_tensor(eng, Shape{1, 2, 5, 5});
  Tensor b = random_tensor(eng, Shape{1, 2, 5, 5});
  Tensor w = random_tensor(eng, Shape{2, 2, 3, 3});
  Tensor sum = add(tape, a, b);
  Tensor lhs = conv2d(tape, sum, w, Tensor{});
  Tensor rhs = add(tape, conv2d(tape, a, w, Tensor{}), conv2d(tape, b, w, Tensor{}));
  for (std::size_t i = 0; i < lhs.values().size(); ++i) {
    CHECK(lhs.values()[i] == doctest::Approx(rhs.values()[i]).epsilon(1e-5));
  }
}

TEST_CASE("conv2d input validation") {
  Tape tape;
  Tensor x = Tensor::zeros(Shape{1, 2, 4, 4});
  CHECK_THROWS_AS(conv2d(tape, x, Tensor::zeros(Shape{1, 3, 3, 3}), Tensor{}),
                  std::invalid_argument);  // channel mismatch
  CHECK_THROWS_AS(conv2d(tape, x, Tensor::zeros(Shape{1, 2, 2, 2}), Tensor{}),
                  std::invalid_argument);  // even kernel
  CHECK_THROWS_AS(conv2d(tape, x, Tensor::zeros(Shape{1, 2, 3, 5}), Tensor{}),
                  std::invalid_argument);  // non-square
  CHECK_THROWS_AS(
      conv2d(tape, x, Tensor::zeros(Shape{1, 2, 3, 3}), Tensor::zeros(Shape{1, 2, 1, 1})),
      std::invalid_argument);  // bias size
  CHECK_THROWS_AS(conv2d(tape, Tensor::zeros(Shape{1, 2, 1, 4}),
                         Tensor::zeros(Shape{1, 2, 3, 3}), Tensor{}),
                  std::invalid_argument);  // reflect needs extent > pad
}
