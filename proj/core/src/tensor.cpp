#include "rblb/tensor.hpp"

#include <algorithm>
#include <stdexcept>

namespace rblb {

std::string Shape::str() const {
  return std::to_string(n) + "x" + std::to_string(c) + "x" + std::to_string(h) + "x" +
         std::to_string(w);
}

namespace {

std::shared_ptr<detail::TensorNode> make_node(const Shape& s, std::vector<float> values,
                                              bool requires_grad) {
  if (s.n < 0 || s.c < 0 || s.h < 0 || s.w < 0) {
    throw std::invalid_argument("tensor shape has negative extent: " + s.str());
  }
  if (static_cast<std::int64_t>(values.size()) != s.numel()) {
    throw std::invalid_argument("tensor data size " + std::to_string(values.size()) +
                                " does not match shape " + s.str());
  }
  auto node = std::make_shared<detail::TensorNode>();
  node->shape = s;
  node->values = std::move(values);
  node->requires_grad = requires_grad;
  return node;
}

}  // namespace

Tensor Tensor::zeros(const Shape& s, bool requires_grad) {
  return from_data(s, std::vector<float>(static_cast<std::size_t>(s.numel()), 0.0f),
                   requires_grad);
}

Tensor Tensor::full(const Shape& s, float value, bool requires_grad) {
  return from_data(s, std::vector<float>(static_cast<std::size_t>(s.numel()), value),
                   requires_grad);
}

Tensor Tensor::from_data(const Shape& s, std::vector<float> values, bool requires_grad) {
  return Tensor(make_node(s, std::move(values), requires_grad));
}

Tensor Tensor::scalar(float value, bool requires_grad) {
  return from_data(Shape{1, 1, 1, 1}, {value}, requires_grad);
}

const Shape& Tensor::shape() const {
  if (!node_) throw std::logic_error("shape() on undefined tensor");
  return node_->shape;
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool rg) {
  if (!node_) throw std::logic_error("set_requires_grad() on undefined tensor");
  node_->requires_grad = rg;
  if (!rg) node_->grad.clear();
}

std::span<const float> Tensor::values() const {
  if (!node_) throw std::logic_error("values() on undefined tensor");
  return node_->values;
}

std::span<float> Tensor::values_mut() {
  if (!node_) throw std::logic_error("values_mut() on undefined tensor");
  return node_->values;
}

float Tensor::item() const {
  if (numel() != 1) {
    throw std::invalid_argument("item() requires a scalar tensor, got shape " + shape().str());
  }
  return node_->values[0];
}

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::span<const float> Tensor::grad() const {
  if (!has_grad()) throw std::logic_error("grad() on tensor without gradient");
  return node_->grad;
}

std::span<float> Tensor::grad_mut() {
  if (!node_) throw std::logic_error("grad_mut() on undefined tensor");
  if (node_->grad.empty()) {
    node_->grad.assign(node_->values.size(), 0.0f);
  }
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_ && !node_->grad.empty()) {
    std::fill(node_->grad.begin(), node_->grad.end(), 0.0f);
  }
}

void Tensor::accumulate_grad(std::span<const float> g) {
  if (!node_) throw std::logic_error("accumulate_grad() on undefined tensor");
  if (g.size() != node_->values.size()) {
    throw std::invalid_argument("gradient size mismatch: " + std::to_string(g.size()) + " vs " +
                                std::to_string(node_->values.size()));
  }
  if (node_->grad.empty()) node_->grad.assign(node_->values.size(), 0.0f);
  for (std::size_t i = 0; i < g.size(); ++i) node_->grad[i] += g[i];
}

Tensor Tensor::detached(bool requires_grad) const {
  if (!node_) throw std::logic_error("detached() on undefined tensor");
  return from_data(node_->shape, node_->values, requires_grad);
}

void Tape::record(std::shared_ptr<detail::TensorNode> output, std::function<void()> backward_fn) {
  records_.push_back({std::move(output), std::move(backward_fn)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw std::invalid_argument("backward() requires a scalar loss");
  }
  if (records_.empty()) {
    throw std::invalid_argument("backward() on an empty tape");
  }
  if (!loss.requires_grad()) {
    return;  // nothing reaches a differentiable leaf
  }
  // Rebuild intermediate gradients; leaves keep accumulating.
  for (auto& rec : records_) {
    if (!rec.output->grad.empty()) {
      std::fill(rec.output->grad.begin(), rec.output->grad.end(), 0.0f);
    }
  }
  const float one = 1.0f;
  loss.node()->grad.assign(1, 0.0f);
  loss.node()->grad[0] = one;
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    it->fn();
  }
}

}  // namespace rblb
