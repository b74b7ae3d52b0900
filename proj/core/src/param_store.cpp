#include "rblb/param_store.hpp"

#include <cmath>
#include <stdexcept>

namespace rblb {

void ParamStore::insert(const std::string& path, Tensor t) {
  if (!t.defined()) throw std::invalid_argument("ParamStore: undefined tensor for " + path);
  auto [it, inserted] = params_.emplace(path, std::move(t));
  if (!inserted) throw std::invalid_argument("ParamStore: duplicate parameter " + path);
}

Tensor& ParamStore::at(const std::string& path) {
  auto it = params_.find(path);
  if (it == params_.end()) throw std::out_of_range("ParamStore: no parameter " + path);
  return it->second;
}

const Tensor& ParamStore::at(const std::string& path) const {
  auto it = params_.find(path);
  if (it == params_.end()) throw std::out_of_range("ParamStore: no parameter " + path);
  return it->second;
}

void ParamStore::zero_grads() {
  for (auto& [path, t] : params_) t.zero_grad();
}

void ParamStore::set_requires_grad(bool rg) {
  for (auto& [path, t] : params_) t.set_requires_grad(rg);
}

bool ParamStore::all_finite() const {
  for (const auto& [path, t] : params_) {
    for (float v : t.values()) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

std::int64_t ParamStore::total_elements() const {
  std::int64_t total = 0;
  for (const auto& [path, t] : params_) total += t.numel();
  return total;
}

}  // namespace rblb
