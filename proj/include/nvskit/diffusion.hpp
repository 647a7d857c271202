#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nvskit/rng.hpp"

namespace nvskit {

/// Cumulative noise schedule over T steps. alpha_bar[0] = 1 is the clean
/// endpoint; the Gaussian-perturbation coefficients are
/// signal(t) = sqrt(alpha_bar[t]) and noise(t) = sqrt(1 - alpha_bar[t]).
struct DiffusionSchedule {
  int T = 0;
  std::vector<double> beta;       ///< beta[s-1] for s = 1..T
  std::vector<double> alpha_bar;  ///< size T + 1

  double signal(int t) const { return std::sqrt(alpha_bar[static_cast<std::size_t>(t)]); }
  double noise(int t) const { return std::sqrt(1.0 - alpha_bar[static_cast<std::size_t>(t)]); }

  void check_t(int t, const char* what) const {
    if (t < 1 || t > T) throw std::out_of_range(std::string(what) + ": timestep outside [1, T]");
  }
};

/// Builds alpha_bar from an explicit beta list.
inline DiffusionSchedule schedule_from_betas(std::vector<double> betas) {
  if (betas.empty()) throw std::invalid_argument("schedule needs at least one step");
  DiffusionSchedule s;
  s.T = static_cast<int>(betas.size());
  s.alpha_bar.assign(betas.size() + 1, 1.0);
  for (std::size_t i = 0; i < betas.size(); ++i) {
    if (!(betas[i] > 0.0 && betas[i] < 1.0)) throw std::invalid_argument("schedule: betas must lie in (0, 1)");
    s.alpha_bar[i + 1] = s.alpha_bar[i] * (1.0 - betas[i]);
  }
  s.beta = std::move(betas);
  return s;
}

/// Scaled-linear schedule: sqrt(beta) is linear between the endpoints.
inline DiffusionSchedule make_schedule(int T = 1000, double beta_start = 0.00085, double beta_end = 0.012) {
  if (T < 1) throw std::invalid_argument("make_schedule: T must be positive");
  if (!(0.0 < beta_start && beta_start < beta_end && beta_end < 1.0))
    throw std::invalid_argument("make_schedule: need 0 < beta_start < beta_end < 1");
  std::vector<double> betas(static_cast<std::size_t>(T));
  const double a = std::sqrt(beta_start), b = std::sqrt(beta_end);
  for (int i = 0; i < T; ++i) {
    const double f = T == 1 ? 0.0 : static_cast<double>(i) / (T - 1);
    const double r = a + (b - a) * f;
    betas[static_cast<std::size_t>(i)] = r * r;
  }
  return schedule_from_betas(std::move(betas));
}

namespace detail {
template <typename T>
void require_same_size(std::span<const T> a, std::span<const T> b, const char* what) {
  if (a.size() != b.size()) throw std::invalid_argument(std::string(what) + ": shape mismatch");
}
}  // namespace detail

template <typename T>
std::vector<T> forward_noise(std::span<const T> x0, int t, std::span<const T> eps, const DiffusionSchedule& s) {
  s.check_t(t, "forward_noise");
  detail::require_same_size(x0, eps, "forward_noise");
  const double a = s.signal(t), n = s.noise(t);
  std::vector<T> out(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) out[i] = static_cast<T>(a * x0[i] + n * eps[i]);
  return out;
}

/// Clean-image estimate implied by a noise prediction.
template <typename T>
std::vector<T> predict_x0(std::span<const T> x_t, std::span<const T> eps_hat, int t, const DiffusionSchedule& s) {
  s.check_t(t, "predict_x0");
  detail::require_same_size(x_t, eps_hat, "predict_x0");
  const double a = s.signal(t), n = s.noise(t);
  std::vector<T> out(x_t.size());
  for (std::size_t i = 0; i < x_t.size(); ++i) out[i] = static_cast<T>((x_t[i] - n * eps_hat[i]) / a);
  return out;
}

/// Per-step DDIM noise scale.
inline double ddim_sigma(double eta, int t, int t_prev, const DiffusionSchedule& s) {
  const double ab_t = s.alpha_bar[static_cast<std::size_t>(t)];
  const double ab_p = s.alpha_bar[static_cast<std::size_t>(t_prev)];
  return eta * std::sqrt((1.0 - ab_p) / (1.0 - ab_t)) * std::sqrt(1.0 - ab_t / ab_p);
}

/// One DDIM update from t to t_prev. With eta == 0 no random numbers are drawn.
template <typename T>
std::vector<T> ddim_step(std::span<const T> x_t, std::span<const T> eps_hat, int t, int t_prev, double eta,
                         Rng& rng, const DiffusionSchedule& s) {
  if (!(0 <= t_prev && t_prev < t && t <= s.T)) throw std::out_of_range("ddim_step: need 0 <= t_prev < t <= T");
  const auto x0 = predict_x0(x_t, eps_hat, t, s);
  const double sigma = ddim_sigma(eta, t, t_prev, s);
  const double ab_p = s.alpha_bar[static_cast<std::size_t>(t_prev)];
  const double radicand = 1.0 - ab_p - sigma * sigma;
  if (radicand < -1e-15) throw std::domain_error("ddim_step: negative direction radicand (eta too large?)");
  const double dir = std::sqrt(std::max(radicand, 0.0));
  const double sig = std::sqrt(ab_p);
  std::vector<T> out(x_t.size());
  for (std::size_t i = 0; i < x_t.size(); ++i) {
    double v = sig * x0[i] + dir * eps_hat[i];
    if (sigma > 0.0) v += sigma * rng.normal();
    out[i] = static_cast<T>(v);
  }
  return out;
}

/// Classifier-free guidance: uncond + g * (cond - uncond).
template <typename T>
std::vector<T> cfg_combine(std::span<const T> eps_uncond, std::span<const T> eps_cond, double g) {
  detail::require_same_size(eps_uncond, eps_cond, "cfg_combine");
  std::vector<T> out(eps_cond.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<T>(eps_uncond[i] + g * (eps_cond[i] - eps_uncond[i]));
  return out;
}

struct SamplerConfig {
  int steps = 50;
  double guidance_scale = 3.0;
  double eta = 0.0;
};

/// Uniformly spaced, strictly decreasing timesteps from T; the final update
/// of the chain goes to t = 0.
inline std::vector<int> ddim_timesteps(int T, int steps) {
  if (steps < 1 || steps > T) throw std::invalid_argument("ddim_timesteps: need 1 <= steps <= T");
  std::vector<int> ts;
  ts.reserve(static_cast<std::size_t>(steps));
  for (int i = 0; i < steps; ++i)
    ts.push_back(static_cast<int>(std::lround(static_cast<double>(T) * (steps - i) / steps)));
  return ts;
}

template <typename T>
struct DenoiserPrediction {
  std::vector<T> eps;
  std::vector<T> mask;  ///< empty when the model has no mask head
};

template <typename T>
struct SampleResult {
  std::vector<T> image;
  std::vector<int> timesteps;
  std::vector<std::vector<T>> x0_trajectory;
  std::vector<std::vector<T>> mask_trajectory;
};

/// Denoiser callback: (x_t, t, use_null_conditioning) -> prediction.
template <typename T>
using DenoiseFn = std::function<DenoiserPrediction<T>(std::span<const T>, int, bool)>;

/// DDIM sampling with classifier-free guidance. The mask trajectory records
/// the conditional pass's mask prediction at every step. Guidance scale 1
/// skips the unconditional pass.
template <typename T>
SampleResult<T> sample(const DenoiseFn<T>& denoiser, std::size_t numel, const SamplerConfig& cfg,
                       const DiffusionSchedule& s, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<T> x(numel);
  for (auto& v : x) v = static_cast<T>(rng.normal());
  SampleResult<T> out;
  out.timesteps = ddim_timesteps(s.T, cfg.steps);
  for (std::size_t k = 0; k < out.timesteps.size(); ++k) {
    const int t = out.timesteps[k];
    const int t_prev = k + 1 < out.timesteps.size() ? out.timesteps[k + 1] : 0;
    auto cond = denoiser(x, t, false);
    std::vector<T> eps = std::move(cond.eps);
    if (cfg.guidance_scale != 1.0) {
      const auto uncond = denoiser(x, t, true);
      eps = cfg_combine<T>(uncond.eps, eps, cfg.guidance_scale);
    }
    out.x0_trajectory.push_back(predict_x0<T>(x, eps, t, s));
    out.mask_trajectory.push_back(std::move(cond.mask));
    x = ddim_step<T>(x, eps, t, t_prev, cfg.eta, rng, s);
  }
  out.image = std::move(x);
  return out;
}

}  // namespace nvskit
