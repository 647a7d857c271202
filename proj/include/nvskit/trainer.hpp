#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "nvskit/camera.hpp"
#include "nvskit/dataset.hpp"
#include "nvskit/denoiser.hpp"
#include "nvskit/diffusion.hpp"
#include "nvskit/nn/adam.hpp"
#include "nvskit/timestep_scheduler.hpp"

namespace nvskit {

struct TrainConfig {
  int batch_size = 16;
  double learning_rate = 1e-4;
  int total_steps = 8000;
  double gamma = 0.1;  ///< weight of the auxiliary mask loss
  double cond_dropout_p = 0.1;
  std::uint64_t seed = 0;
  SchedulerConfig scheduler;

  void validate() const {
    if (batch_size < 1) throw std::invalid_argument("train: batch_size must be positive");
    if (gamma < 0.0) throw std::invalid_argument("train: gamma must be non-negative");
    if (!(cond_dropout_p >= 0.0 && cond_dropout_p < 1.0))
      throw std::invalid_argument("train: cond_dropout_p must lie in [0, 1)");
    if (total_steps < 1) throw std::invalid_argument("train: total_steps must be positive");
    scheduler.validate();
  }
};

/// One supervised pair: noise-free target view, input-view conditioning and
/// target-view instance mask (normalized).
struct TrainExample {
  std::vector<float> target;   ///< 3 x H x W in [-1, 1]
  ConditioningBundle<float> cond;
  std::vector<float> mask_gt;  ///< H x W in [-1, 1]
};

inline TrainExample make_example(const SceneRecord& rec, int input_view, int target_view) {
  const auto& in = rec.views.at(static_cast<std::size_t>(input_view));
  const auto& tg = rec.views.at(static_cast<std::size_t>(target_view));
  TrainExample ex;
  ex.target = tg.rgb_planar;
  ex.mask_gt = tg.mask_planar;
  ex.cond.rgb = in.rgb_planar;
  ex.cond.depth = in.depth_planar;
  ex.cond.mask = in.mask_planar;
  const auto rel = relative_pose(in.camera.extrinsic, tg.camera.extrinsic);
  for (std::size_t k = 0; k < 16; ++k) ex.cond.pose[k] = static_cast<float>(rel.flat[k]);
  return ex;
}

struct StepLog {
  int step = 0;
  double t_mean = 0.0;
  LossTerms loss;
};

/// Packs per-example planar buffers into one channel-major tensor.
inline nn::Tensor<float> stack_planar(const std::vector<const std::vector<float>*>& items, int channels, int h, int w) {
  nn::Tensor<float> t(channels, static_cast<int>(items.size()), h, w);
  const std::size_t hw = t.spatial();
  for (std::size_t n = 0; n < items.size(); ++n) {
    if (items[n]->size() != hw * static_cast<std::size_t>(channels))
      throw std::invalid_argument("stack_planar: example shape mismatch");
    for (int c = 0; c < channels; ++c)
      std::copy_n(items[n]->begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(c) * hw), hw,
                  &t.at(c, static_cast<int>(n), 0, 0));
  }
  return t;
}

/// Network, optimizer and RNG stream of a training run.
struct TrainState {
  Denoiser<float> net;
  nn::Adam<float> opt;
  Rng rng;
  DiffusionSchedule schedule;
  TrainConfig config;

  TrainState(const ArchConfig& arch, const TrainConfig& cfg, DiffusionSchedule sched = make_schedule())
      : net(arch), rng(derive_seed(cfg.seed, 1)), schedule(std::move(sched)), config(cfg) {
    cfg.validate();
    net.init(derive_seed(cfg.seed, 0));
    opt = nn::Adam<float>(net.params(), nn::AdamConfig{cfg.learning_rate});
  }
};

/// One optimizer update with explicit timesteps, noise and dropout choices.
inline LossTerms train_step_explicit(TrainState& st, const std::vector<TrainExample>& batch, const std::vector<int>& t,
                                     const nn::Tensor<float>& eps, const std::vector<bool>& drop_cond) {
  const auto& arch = st.net.config();
  const int h = arch.height, w = arch.width;
  std::vector<const std::vector<float>*> targets, masks;
  std::vector<ConditioningBundle<float>> cond;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    targets.push_back(&batch[i].target);
    masks.push_back(&batch[i].mask_gt);
    cond.push_back(drop_cond[i] ? ConditioningBundle<float>::null(h, w) : batch[i].cond);
  }
  const auto x0 = stack_planar(targets, 3, h, w);
  const auto mask_gt = stack_planar(masks, 1, h, w);

  nn::Tensor<float> x_t = x0;
  for (int c = 0; c < 3; ++c)
    for (int n = 0; n < x0.n; ++n) {
      const double a = st.schedule.signal(t[static_cast<std::size_t>(n)]);
      const double s = st.schedule.noise(t[static_cast<std::size_t>(n)]);
      float* dst = &x_t.at(c, n, 0, 0);
      const float* e = &eps.at(c, n, 0, 0);
      for (std::size_t i = 0; i < x0.spatial(); ++i) dst[i] = static_cast<float>(a * dst[i] + s * e[i]);
    }

  st.net.params().zero_grad();
  const auto out = st.net.forward(x_t, t, cond);
  nn::Tensor<float> d_eps, d_mask;
  const LossTerms loss = denoiser_loss(out, eps, mask_gt, st.config.gamma, &d_eps, &d_mask);
  if (!std::isfinite(loss.total)) {
    std::ostringstream msg;
    msg << "non-finite training loss (diffusion=" << loss.diffusion << ", mask=" << loss.mask
        << ", lr=" << st.opt.config().learning_rate << ", step=" << st.opt.steps() << ")";
    throw std::runtime_error(msg.str());
  }
  st.net.backward(d_eps, d_mask);
  st.opt.step(st.net.params());
  return loss;
}

/// Samples timesteps from the scheduler at training step s, fresh noise and
/// per-example condition dropout, then applies one update.
inline StepLog train_step(TrainState& st, const std::vector<TrainExample>& batch, int s) {
  const auto& arch = st.net.config();
  const int n = static_cast<int>(batch.size());
  std::vector<int> t(static_cast<std::size_t>(n));
  std::vector<bool> drop(static_cast<std::size_t>(n));
  double t_sum = 0.0;
  for (int i = 0; i < n; ++i) {
    t[static_cast<std::size_t>(i)] = sample_timestep(s, st.rng, st.config.scheduler);
    t_sum += t[static_cast<std::size_t>(i)];
    drop[static_cast<std::size_t>(i)] = st.rng.uniform() < st.config.cond_dropout_p;
  }
  nn::Tensor<float> eps(3, n, arch.height, arch.width);
  for (auto& v : eps.v) v = static_cast<float>(st.rng.normal());
  StepLog log;
  log.step = s;
  log.t_mean = t_sum / n;
  log.loss = train_step_explicit(st, batch, t, eps, drop);
  return log;
}

/// Draws a batch of (scene, input view, target view) triples with distinct views.
inline std::vector<TrainExample> sample_batch(const Dataset& ds, int batch_size, Rng& rng) {
  std::vector<TrainExample> out;
  out.reserve(static_cast<std::size_t>(batch_size));
  for (int b = 0; b < batch_size; ++b) {
    const auto k = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(ds.scenes.size()) - 1));
    const auto& rec = ds.scenes[k];
    const int nv = static_cast<int>(rec.views.size());
    const int i = static_cast<int>(rng.uniform_int(0, nv - 1));
    int j = static_cast<int>(rng.uniform_int(0, nv - 2));
    if (j >= i) ++j;
    out.push_back(make_example(rec, i, j));
  }
  return out;
}

struct TrainResult {
  std::vector<StepLog> log;
};

using StepCallback = std::function<void(const StepLog&, const TrainState&)>;

/// Runs total_steps updates. Batches come from their own stream so the
/// scheduler variant does not change which examples are visited.
inline TrainResult train(TrainState& st, const Dataset& ds, const StepCallback& on_step = {}) {
  if (ds.scenes.empty()) throw std::invalid_argument("train: empty dataset");
  Rng batch_rng(derive_seed(st.config.seed, 2));
  TrainResult res;
  res.log.reserve(static_cast<std::size_t>(st.config.total_steps));
  for (int s = 0; s < st.config.total_steps; ++s) {
    const auto batch = sample_batch(ds, st.config.batch_size, batch_rng);
    res.log.push_back(train_step(st, batch, s));
    if (on_step) on_step(res.log.back(), st);
  }
  return res;
}

/// Unconditional prior fitting: every example's conditioning is replaced by
/// the null bundle and t is uniform on [t_min, t_max] of the configured
/// scheduler. Batches come from their own stream, as in train().
inline TrainResult pretrain_unconditional(TrainState& st, const Dataset& ds, int steps,
                                          const StepCallback& on_step = {}) {
  if (ds.scenes.empty()) throw std::invalid_argument("pretrain: empty dataset");
  if (steps < 0) throw std::invalid_argument("pretrain: steps must be non-negative");
  const auto& arch = st.net.config();
  const auto& sc = st.config.scheduler;
  Rng batch_rng(derive_seed(st.config.seed, 3));
  TrainResult res;
  res.log.reserve(static_cast<std::size_t>(steps));
  for (int s = 0; s < steps; ++s) {
    const auto batch = sample_batch(ds, st.config.batch_size, batch_rng);
    const int n = static_cast<int>(batch.size());
    std::vector<int> t(static_cast<std::size_t>(n));
    double t_sum = 0.0;
    for (auto& v : t) t_sum += v = static_cast<int>(st.rng.uniform_int(sc.t_min, sc.t_max));
    nn::Tensor<float> eps(3, n, arch.height, arch.width);
    for (auto& v : eps.v) v = static_cast<float>(st.rng.normal());
    StepLog log;
    log.step = s;
    log.t_mean = t_sum / n;
    log.loss = train_step_explicit(st, batch, t, eps, std::vector<bool>(batch.size(), true));
    res.log.push_back(log);
    if (on_step) on_step(res.log.back(), st);
  }
  return res;
}

/// Batched DDIM generation for a set of conditioning bundles. Returns
/// channel-major tensors of the final image and per-step trajectories.
struct Generation {
  nn::Tensor<float> image;  ///< 3 x N x H x W in [-1, 1] (unclamped)
  nn::Tensor<float> mask;   ///< final-step mask prediction, 1 x N x H x W
  SampleResult<float> raw;
};

inline Generation generate(Denoiser<float>& net, const std::vector<ConditioningBundle<float>>& cond,
                           const SamplerConfig& cfg, const DiffusionSchedule& sched, std::uint64_t seed) {
  const auto& arch = net.config();
  const int n = static_cast<int>(cond.size());
  const int h = arch.height, w = arch.width;
  const std::vector<ConditioningBundle<float>> null(cond.size(), ConditioningBundle<float>::null(h, w));
  DenoiseFn<float> fn = [&](std::span<const float> x, int t, bool use_null) {
    nn::Tensor<float> xt(3, n, h, w);
    std::copy(x.begin(), x.end(), xt.v.begin());
    auto out = net.forward(xt, std::vector<int>(static_cast<std::size_t>(n), t), use_null ? null : cond);
    return DenoiserPrediction<float>{std::move(out.eps.v), std::move(out.mask.v)};
  };
  Generation g;
  g.raw = sample<float>(fn, static_cast<std::size_t>(3 * n * h * w), cfg, sched, seed);
  g.image = nn::Tensor<float>(3, n, h, w);
  g.image.v = g.raw.image;
  g.mask = nn::Tensor<float>(1, n, h, w);
  if (!g.raw.mask_trajectory.empty()) g.mask.v = g.raw.mask_trajectory.back();
  return g;
}

/// Example n of a channel-major [-1,1] tensor as an interleaved [0,1] image.
inline ImageF tensor_to_image(const nn::Tensor<float>& t, int n) {
  ImageF img(t.w, t.h, t.c);
  for (int y = 0; y < t.h; ++y)
    for (int x = 0; x < t.w; ++x)
      for (int c = 0; c < t.c; ++c) img.at(x, y, c) = std::clamp(0.5f * (t.at(c, n, y, x) + 1.0f), 0.0f, 1.0f);
  return img;
}

}  // namespace nvskit
