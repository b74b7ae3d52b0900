#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace rblb {

// N x C x H x W, row-major, 32-bit floats. Convolution weights reuse the
// same layout as (out_channels, in_channels, kh, kw).
struct Shape {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  std::int64_t numel() const { return std::int64_t{1} * n * c * h * w; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

namespace detail {

struct TensorNode {
  Shape shape;
  std::vector<float> values;
  std::vector<float> grad;  // empty until first accumulation
  bool requires_grad = false;
};

}  // namespace detail

/// Shared-payload handle over a 4-D float array; cheap to copy.
/// Values are immutable once the tensor participates in a tape; gradient
/// accumulation and optimizer updates are the only mutations, under a
/// single-writer contract.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(const Shape& s, bool requires_grad = false);
  static Tensor full(const Shape& s, float value, bool requires_grad = false);
  static Tensor from_data(const Shape& s, std::vector<float> values, bool requires_grad = false);
  static Tensor scalar(float value, bool requires_grad = false);  // 1x1x1x1

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::int64_t numel() const { return shape().numel(); }
  bool requires_grad() const;
  void set_requires_grad(bool rg);

  std::span<const float> values() const;
  std::span<float> values_mut();
  float item() const;  // numel == 1 only

  bool has_grad() const;
  std::span<const float> grad() const;
  std::span<float> grad_mut();
  void zero_grad();
  void accumulate_grad(std::span<const float> g);

  /// Leaf copy of the values, disconnected from any tape.
  Tensor detached(bool requires_grad = false) const;

  std::shared_ptr<detail::TensorNode> node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorNode> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::TensorNode> node_;
};

/// Linear record of differentiable operations. backward() replays the
/// records in exact reverse order of recording. Leaf gradients accumulate
/// across backward() calls; gradients of recorded outputs are rebuilt from
/// scratch on every call.
class Tape {
 public:
  void record(std::shared_ptr<detail::TensorNode> output, std::function<void()> backward_fn);

  /// loss must be a scalar produced on this tape (or a scalar leaf when the
  /// tape is non-empty). Repeated calls accumulate into leaf gradients.
  void backward(const Tensor& loss);

  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  void clear() { records_.clear(); }

 private:
  struct Record {
    std::shared_ptr<detail::TensorNode> output;
    std::function<void()> fn;
  };
  std::vector<Record> records_;
};

}  // namespace rblb
