#include <cmath>
#include <stdexcept>
#include <vector>

#include <doctest.h>

#include "rblb/ops.hpp"
#include "rblb/tensor.hpp"

using namespace rblb;

namespace {

Tensor row(std::vector<float> values) {
  return Tensor::from_data(Shape{1, 1, 1, static_cast<int>(values.size())}, std::move(values));
}

}  // namespace

TEST_CASE("elementwise add/sub/mul values") {
  Tape tape;
  Tensor a = row({1.0f, 2.0f});
  Tensor b = row({3.0f, 4.0f});
  Tensor sum = add(tape, a, b);
  CHECK(sum.values()[0] == 4.0f);
  CHECK(sum.values()[1] == 6.0f);
  Tensor diff = sub(tape, b, a);
  CHECK(diff.values()[0] == 2.0f);
  CHECK(diff.values()[1] == 2.0f);
  Tensor prod = elementwise(tape, EwKind::Mul, a, b);
  CHECK(prod.values()[0] == 3.0f);
  CHECK(prod.values()[1] == 8.0f);
}

TEST_CASE("mul by zero annihilates values and gradients") {
  Tape tape;
  Tensor x = Tensor::from_data(Shape{1, 1, 2, 2}, {0.5f, -1.0f, 2.0f, 3.0f}, true);
  Tensor zero = Tensor::zeros(Shape{1, 1, 2, 2});
  Tensor out = mul(tape, x, zero);
  for (float v : out.values()) CHECK(v == 0.0f);
  Tensor loss = reduce_mean(tape, out, MeanOver::All);
  tape.backward(loss);
  for (float g : x.grad()) CHECK(g == 0.0f);
}

TEST_CASE("scalar broadcast on the right operand") {
  Tape tape;
  Tensor a = row({1.0f, 2.0f, 3.0f});
  Tensor c = Tensor::scalar(10.0f);
  Tensor out = add(tape, a, c);
  CHECK(out.values()[2] == 13.0f);
  CHECK_THROWS_AS(add(tape, c, a), std::invalid_argument);  // only b broadcasts
}

TEST_CASE("shape mismatch reports both shapes") {
  Tape tape;
  Tensor a = Tensor::zeros(Shape{1, 2, 3, 3});
  Tensor b = Tensor::zeros(Shape{1, 3, 3, 3});
  try {
    add(tape, a, b);
    FAIL("expected shape mismatch");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("1x2x3x3") != std::string::npos);
    CHECK(msg.find("1x3x3x3") != std::string::npos);
  }
}

TEST_CASE("pow_scalar values") {
  Tape tape;
  Tensor x = row({0.25f});
  CHECK(pow_scalar(tape, x, 0.5f).item() == doctest::Approx(0.5).epsilon(1e-6));

  // Independent double-precision oracle for a fractional exponent.
  const double expected = std::pow(0.8, 2.2);
  Tensor y = row({0.8f});
  CHECK(pow_scalar(tape, y, 2.2f).item() == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("pow_scalar identity exponent has unit gradient") {
  Tape tape;
  Tensor x = Tensor::from_data(Shape{1, 1, 1, 3}, {0.2f, 0.5f, 0.9f}, true);
  Tensor out = pow_scalar(tape, x, 1.0f);
  for (std::size_t i = 0; i < 3; ++i) CHECK(out.values()[i] == x.values()[i]);
  Tensor loss = mul_scalar(tape, reduce_mean(tape, out, MeanOver::All), 3.0f);  // sum
  tape.backward(loss);
  for (float g : x.grad()) CHECK(g == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("pow_scalar rejects negative base with fractional exponent") {
  Tape tape;
  Tensor x = row({-0.5f});
  CHECK_THROWS_AS(pow_scalar(tape, x, 0.5f), std::invalid_argument);
  CHECK_NOTHROW(pow_scalar(tape, x, 2.0f));
}

TEST_CASE("pow_scalar gradient cap at zero base") {
  Tape tape;
  Tensor x = Tensor::from_data(Shape{1, 1, 1, 1}, {0.0f}, true);
  Tensor loss = reduce_mean(tape, pow_scalar(tape, x, 0.5f), MeanOver::All);
  tape.backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(1e6).epsilon(1e-6));
  CHECK(std::isfinite(x.grad()[0]));
}

TEST_CASE("relu and sigmoid values") {
  Tape tape;
  Tensor x = row({-1.0f, 0.0f, 2.0f});
  Tensor r = relu(tape, x);
  CHECK(r.values()[0] == 0.0f);
  CHECK(r.values()[1] == 0.0f);
  CHECK(r.values()[2] == 2.0f);
  CHECK(sigmoid(tape, row({0.0f})).item() == doctest::Approx(0.5).epsilon(1e-7));
}

TEST_CASE("reduce_mean over all and batch") {
  Tape tape;
  Tensor fives = Tensor::full(Shape{2, 1, 2, 2}, 5.0f);
  CHECK(reduce_mean(tape, fives, MeanOver::All).item() == doctest::Approx(5.0));

  // Batch of one is the identity over that sample.
  Tensor single = Tensor::from_data(Shape{1, 1, 1, 3}, {1.0f, 2.0f, 3.0f});
  Tensor batch_mean = reduce_mean(tape, single, MeanOver::Batch);
  CHECK(batch_mean.shape() == Shape{1, 1, 1, 3});
  for (std::size_t i = 0; i < 3; ++i) CHECK(batch_mean.values()[i] == single.values()[i]);

  // Four random logits against the hand sum.
  Tensor logits = Tensor::from_data(Shape{4, 1, 1, 1}, {0.3f, -1.2f, 2.0f, 0.5f});
  const double hand = (0.3 - 1.2 + 2.0 + 0.5) / 4.0;
  CHECK(reduce_mean(tape, logits, MeanOver::All).item() ==
        doctest::Approx(hand).epsilon(1e-6));

  CHECK_THROWS_AS(reduce_mean(tape, Tensor::zeros(Shape{0, 3, 2, 2}), MeanOver::All),
                  std::invalid_argument);
}

TEST_CASE("concat_channels shapes and zero-channel identity") {
  Tape tape;
  Tensor img = Tensor::full(Shape{2, 3, 5, 5}, 0.5f);
  Tensor noise = Tensor::full(Shape{2, 4, 5, 5}, 1.0f);
  Tensor cat = concat_channels(tape, img, noise);
  CHECK(cat.shape() == Shape{2, 7, 5, 5});
  CHECK(cat.values()[0] == 0.5f);
  CHECK(cat.values()[3 * 25] == 1.0f);  // first noise channel of item 0

  Tensor empty = Tensor::zeros(Shape{2, 0, 5, 5});
  Tensor same = concat_channels(tape, img, empty);
  CHECK(same.shape() == img.shape());
  for (std::size_t i = 0; i < same.values().size(); ++i) {
    CHECK(same.values()[i] == img.values()[i]);
  }

  CHECK_THROWS_AS(concat_channels(tape, img, Tensor::zeros(Shape{2, 1, 4, 5})),
                  std::invalid_argument);
}

TEST_CASE("backward distributes mean gradient and accumulates") {
  Tape tape;
  Tensor x = Tensor::from_data(Shape{1, 1, 2, 2}, {1.0f, 2.0f, 3.0f, 4.0f}, true);
  Tensor loss = reduce_mean(tape, x, MeanOver::All);
  tape.backward(loss);
  for (float g : x.grad()) CHECK(g == doctest::Approx(0.25).epsilon(1e-7));

  tape.backward(loss);  // repeated call accumulates: gradient doubles
  for (float g : x.grad()) CHECK(g == doctest::Approx(0.5).epsilon(1e-7));
}

TEST_CASE("backward rejects non-scalar loss and empty tape") {
  Tape tape;
  Tensor x = Tensor::from_data(Shape{1, 1, 1, 2}, {1.0f, 2.0f}, true);
  Tensor doubled = mul_scalar(tape, x, 2.0f);
  CHECK_THROWS_AS(tape.backward(doubled), std::invalid_argument);

  Tape empty;
  CHECK_THROWS_AS(empty.backward(Tensor::scalar(1.0f, true)), std::invalid_argument);
}

TEST_CASE("ops do not record when nothing requires grad") {
  Tape tape;
  Tensor a = row({1.0f, 2.0f});
  Tensor b = row({3.0f, 4.0f});
  add(tape, a, b);
  relu(tape, a);
  CHECK(tape.empty());
}
