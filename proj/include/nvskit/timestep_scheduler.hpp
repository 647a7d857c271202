#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nvskit/rng.hpp"

namespace nvskit {

enum class SchedulerVariant { Uniform, Ldc, Lind, Kms };

inline constexpr std::string_view variant_name(SchedulerVariant v) {
  switch (v) {
    case SchedulerVariant::Uniform: return "uniform";
    case SchedulerVariant::Ldc: return "ldc";
    case SchedulerVariant::Lind: return "lind";
    case SchedulerVariant::Kms: return "kms";
  }
  return "?";
}

inline SchedulerVariant parse_variant(std::string_view s) {
  for (auto v : {SchedulerVariant::Uniform, SchedulerVariant::Ldc, SchedulerVariant::Lind, SchedulerVariant::Kms})
    if (variant_name(v) == s) return v;
  throw std::invalid_argument("unknown scheduler variant: " + std::string(s));
}

/// Training-time timestep distribution. Phase boundaries are in optimizer
/// steps: hold the global mean until `warmup_steps`, move to the local mean
/// by `decay_end`, then hold until `total_steps`.
struct SchedulerConfig {
  SchedulerVariant variant = SchedulerVariant::Ldc;
  int mu_global = 1000;
  int mu_local = 500;
  double sigma = 200.0;
  int warmup_steps = 4000;
  int decay_end = 6000;
  int total_steps = 8000;
  int t_min = 1;
  int t_max = 1000;

  void validate() const {
    if (!(0 <= warmup_steps && warmup_steps <= decay_end && decay_end <= total_steps))
      throw std::invalid_argument("scheduler: need warmup_steps <= decay_end <= total_steps");
    if (!(t_min < t_max)) throw std::invalid_argument("scheduler: need t_min < t_max");
    if (!(sigma > 0.0)) throw std::invalid_argument("scheduler: sigma must be positive");
  }

  /// Same phase proportions as the default 4000/6000/8000 layout, for a
  /// different training budget.
  SchedulerConfig scaled_to(int steps) const {
    SchedulerConfig c = *this;
    const double f = static_cast<double>(steps) / total_steps;
    c.total_steps = steps;
    c.warmup_steps = static_cast<int>(std::lround(warmup_steps * f));
    c.decay_end = std::max(c.warmup_steps, static_cast<int>(std::lround(decay_end * f)));
    c.decay_end = std::min(c.decay_end, steps);
    return c;
  }
};

/// Mean of the timestep Gaussian at training step s.
inline double mu_at(int s, const SchedulerConfig& c) {
  if (s < 0 || s > c.total_steps) throw std::out_of_range("mu_at: training step outside [0, total_steps]");
  const double g = c.mu_global, l = c.mu_local;
  switch (c.variant) {
    case SchedulerVariant::Kms:
      return g;
    case SchedulerVariant::Ldc:
      if (s < c.warmup_steps) return g;
      if (s >= c.decay_end) return l;
      return g + (l - g) * static_cast<double>(s - c.warmup_steps) / (c.decay_end - c.warmup_steps);
    case SchedulerVariant::Lind:
      if (s < c.warmup_steps) return g;
      if (c.total_steps == c.warmup_steps) return l;
      return l + (g - l) * static_cast<double>(s - c.warmup_steps) / (c.total_steps - c.warmup_steps);
    case SchedulerVariant::Uniform:
      break;
  }
  throw std::logic_error("mu_at: the uniform sampler has no mean schedule");
}

/// Draws t in [t_min, t_max]: uniform for UNIFORM, otherwise a rounded and
/// clamped Gaussian around mu_at(s).
inline int sample_timestep(int s, Rng& rng, const SchedulerConfig& c) {
  if (s < 0 || s > c.total_steps) throw std::out_of_range("sample_timestep: training step out of range");
  if (c.variant == SchedulerVariant::Uniform) return static_cast<int>(rng.uniform_int(c.t_min, c.t_max));
  const double draw = rng.normal(mu_at(s, c), c.sigma);
  const double r = std::round(draw);
  return static_cast<int>(std::clamp(r, static_cast<double>(c.t_min), static_cast<double>(c.t_max)));
}

struct TracePoint {
  int step;
  double mu;
};

inline std::vector<TracePoint> trace(const SchedulerConfig& c, int stride) {
  if (stride < 1) throw std::invalid_argument("trace: stride must be >= 1");
  std::vector<TracePoint> out;
  const auto mean_of = [&](int s) {
    return c.variant == SchedulerVariant::Uniform ? 0.5 * (c.t_min + c.t_max) : mu_at(s, c);
  };
  for (int s = 0; s <= c.total_steps; s += stride) out.push_back({s, mean_of(s)});
  if (out.back().step != c.total_steps) out.push_back({c.total_steps, mean_of(c.total_steps)});
  return out;
}

}  // namespace nvskit
