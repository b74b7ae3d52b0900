#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "rblb/tensor.hpp"

namespace rblb {

/// Named learnable tensors of one network. Iteration order is the sorted
/// layer path, which keeps optimizer sweeps and serialization deterministic.
class ParamStore {
 public:
  using Map = std::map<std::string, Tensor>;

  void insert(const std::string& path, Tensor t);
  Tensor& at(const std::string& path);
  const Tensor& at(const std::string& path) const;
  bool contains(const std::string& path) const { return params_.count(path) > 0; }

  Map::iterator begin() { return params_.begin(); }
  Map::iterator end() { return params_.end(); }
  Map::const_iterator begin() const { return params_.begin(); }
  Map::const_iterator end() const { return params_.end(); }
  std::size_t size() const { return params_.size(); }

  void zero_grads();
  void set_requires_grad(bool rg);
  bool all_finite() const;
  std::int64_t total_elements() const;

  std::uint64_t creation_seed = 0;
  std::uint64_t spec_hash = 0;

 private:
  Map params_;
};

}  // namespace rblb
