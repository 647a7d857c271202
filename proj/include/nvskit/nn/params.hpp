#pragma once

#include <cmath>
#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "nvskit/rng.hpp"

namespace nvskit::nn {

template <typename T>
struct Param {
  std::string name;
  std::vector<int> shape;
  std::vector<T> value;
  std::vector<T> grad;
};

/// Owns every trainable tensor of a model. Layers refer to entries by index
/// so the set can be copied, saved and optimized as one unit.
template <typename T>
class ParamSet {
 public:
  std::size_t add(std::string name, std::vector<int> shape) {
    std::size_t count = 1;
    for (int d : shape) count *= static_cast<std::size_t>(d);
    params_.push_back({std::move(name), std::move(shape), std::vector<T>(count, T{}), std::vector<T>(count, T{})});
    return params_.size() - 1;
  }

  Param<T>& operator[](std::size_t i) { return params_[i]; }
  const Param<T>& operator[](std::size_t i) const { return params_[i]; }
  std::size_t size() const noexcept { return params_.size(); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  std::size_t count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) std::fill(p.grad.begin(), p.grad.end(), T{});
  }

  const Param<T>& find(const std::string& name) const {
    for (const auto& p : params_)
      if (p.name == name) return p;
    throw std::out_of_range("no parameter named " + name);
  }
  Param<T>& find(const std::string& name) {
    return const_cast<Param<T>&>(static_cast<const ParamSet&>(*this).find(name));
  }

  friend bool operator==(const ParamSet& a, const ParamSet& b) {
    if (a.params_.size() != b.params_.size()) return false;
    for (std::size_t i = 0; i < a.params_.size(); ++i)
      if (a.params_[i].name != b.params_[i].name || a.params_[i].value != b.params_[i].value) return false;
    return true;
  }

 private:
  std::vector<Param<T>> params_;
};

/// U(-1/sqrt(fan_in), 1/sqrt(fan_in)), the usual default for conv/linear layers.
template <typename T>
void init_uniform_fan_in(std::vector<T>& v, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (auto& x : v) x = static_cast<T>(rng.uniform(-bound, bound));
}

}  // namespace nvskit::nn
