#pragma once

#include <cmath>
#include <vector>

#include "nvskit/nn/params.hpp"

namespace nvskit::nn {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First-order adaptive-moment optimizer with bias correction.
template <typename T>
class Adam {
 public:
  Adam() = default;
  Adam(const ParamSet<T>& ps, AdamConfig cfg) : cfg_(cfg) {
    for (const auto& p : ps) {
      m_.emplace_back(p.value.size(), T{});
      v_.emplace_back(p.value.size(), T{});
    }
  }

  void step(ParamSet<T>& ps) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    const double lr = cfg_.learning_rate;
    for (std::size_t i = 0; i < ps.size(); ++i) {
      auto& p = ps[i];
      auto& m = m_[i];
      auto& v = v_[i];
      for (std::size_t k = 0; k < p.value.size(); ++k) {
        const double g = p.grad[k];
        m[k] = static_cast<T>(cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * g);
        v[k] = static_cast<T>(cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * g * g);
        if (lr == 0.0) continue;
        const double mh = m[k] / c1, vh = v[k] / c2;
        p.value[k] = static_cast<T>(p.value[k] - lr * mh / (std::sqrt(vh) + cfg_.epsilon));
      }
    }
  }

  long steps() const noexcept { return t_; }
  const AdamConfig& config() const noexcept { return cfg_; }
  void set_learning_rate(double lr) { cfg_.learning_rate = lr; }

 private:
  AdamConfig cfg_;
  std::vector<std::vector<T>> m_, v_;
  long t_ = 0;
};

}  // namespace nvskit::nn
