#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "nvskit/benchmark.hpp"
#include "nvskit/trainer.hpp"

namespace nvskit {

/// One configuration of a comparative training study.
struct AblationArm {
  std::string name;
  ArchConfig arch;
  TrainConfig train;
};

struct ArmResult {
  std::string name;
  ModelScore score;
  std::vector<StepLog> log;
};

/// The component ablations: full model, no depth input, no mask head
/// (gamma = 0) and no scheduler (uniform timesteps).
inline std::vector<AblationArm> component_arms(const ArchConfig& arch, const TrainConfig& train) {
  std::vector<AblationArm> arms;
  arms.push_back({"full", arch, train});
  AblationArm no_depth{"no_depth", arch, train};
  no_depth.arch.depth_input = false;
  arms.push_back(no_depth);
  AblationArm no_mask{"no_mask", arch, train};
  no_mask.train.gamma = 0.0;
  arms.push_back(no_mask);
  AblationArm no_sch{"no_scheduler", arch, train};
  no_sch.train.scheduler.variant = SchedulerVariant::Uniform;
  arms.push_back(no_sch);
  return arms;
}

/// Trains one arm from scratch and scores it on the held-out pairs.
inline ArmResult run_arm(const AblationArm& arm, const Dataset& train_set, const Dataset& test_set,
                         const std::vector<EvalPair>& pairs, const SamplerConfig& sampler, std::uint64_t sample_seed,
                         const StepCallback& on_step = {}) {
  TrainState st(arm.arch, arm.train);
  ArmResult r;
  r.name = arm.name;
  r.log = train(st, train_set, on_step).log;
  r.score = score_model(st.net, test_set, pairs, sampler, sample_seed);
  return r;
}

/// Timestep-sampler comparison. Each seed first fits a shared unconditional
/// prior (uniform t, null conditioning), then every variant is fine-tuned
/// from those weights with a fresh optimizer and its phases scaled to the
/// fine-tuning budget.
struct SchedulerStudyConfig {
  ArchConfig arch;
  TrainConfig train;  ///< total_steps is the fine-tuning budget
  int pretrain_steps = 4000;
  std::vector<SchedulerVariant> variants = {SchedulerVariant::Ldc, SchedulerVariant::Uniform};
  SamplerConfig sampler;
  std::uint64_t sample_seed = 5;
};

struct SchedulerStudyResult {
  std::uint64_t seed = 0;
  std::vector<StepLog> pretrain_log;
  std::vector<ArmResult> arms;  ///< in config.variants order
};

/// `on_step(phase, log)` sees every update; phase is "pretrain" or the
/// variant name.
using StudyCallback = std::function<void(std::string_view, const StepLog&)>;

inline SchedulerStudyResult run_scheduler_study(const SchedulerStudyConfig& cfg, std::uint64_t seed,
                                                const Dataset& train_set, const Dataset& test_set,
                                                const std::vector<EvalPair>& pairs, const StudyCallback& on_step = {}) {
  SchedulerStudyResult out;
  out.seed = seed;
  TrainConfig base_cfg = cfg.train;
  base_cfg.seed = seed;
  base_cfg.scheduler.variant = SchedulerVariant::Uniform;
  TrainState base(cfg.arch, base_cfg);
  out.pretrain_log = pretrain_unconditional(base, train_set, cfg.pretrain_steps, [&](const StepLog& l, const TrainState&) {
                       if (on_step) on_step("pretrain", l);
                     }).log;
  for (const auto v : cfg.variants) {
    TrainConfig tc = base_cfg;
    tc.scheduler.variant = v;
    tc.scheduler = tc.scheduler.scaled_to(tc.total_steps);
    TrainState st(cfg.arch, tc);
    st.net.params() = base.net.params();
    ArmResult r;
    r.name = std::string(variant_name(v));
    r.log = train(st, train_set, [&](const StepLog& l, const TrainState&) {
              if (on_step) on_step(r.name, l);
            }).log;
    r.score = score_model(st.net, test_set, pairs, cfg.sampler, cfg.sample_seed);
    out.arms.push_back(std::move(r));
  }
  return out;
}

}  // namespace nvskit
