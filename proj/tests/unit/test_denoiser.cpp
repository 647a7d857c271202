#include <gtest/gtest.h>

#include <map>

#include "nvskit/ablation.hpp"
#include "nvskit/trainer.hpp"

using namespace nvskit;

namespace {

ArchConfig small_arch() {
  ArchConfig a;
  a.base_width = 8;
  a.time_dim = 16;
  a.embed_dim = 16;
  return a;
}

TrainExample fixed_example(std::uint64_t seed) {
  const auto scene = compose_scene(default_catalog(), seed);
  const auto cams = sample_view_set(2, seed);
  const auto rec = render_scene_record(scene, cams);
  return make_example(rec, 0, 1);
}

}  // namespace

TEST(Denoiser, OutputShapes) {
  Denoiser<float> net(small_arch());
  net.init(1);
  nn::Tensor<float> x(3, 2, 32, 32);
  const std::vector<ConditioningBundle<float>> cond(2, ConditioningBundle<float>::null(32, 32));
  const auto out = net.forward(x, {1, 1000}, cond);
  EXPECT_EQ(out.eps.c, 3);
  EXPECT_EQ(out.eps.n, 2);
  EXPECT_EQ(out.mask.c, 1);
  EXPECT_EQ(out.mask.h, 32);
}

TEST(Denoiser, RejectsMismatchedInputs) {
  Denoiser<float> net(small_arch());
  nn::Tensor<float> x(3, 2, 32, 32);
  const std::vector<ConditioningBundle<float>> one(1, ConditioningBundle<float>::null(32, 32));
  EXPECT_THROW(net.forward(x, {1, 2}, one), std::invalid_argument);
  const std::vector<ConditioningBundle<float>> two(2, ConditioningBundle<float>::null(32, 32));
  EXPECT_THROW(net.forward(x, {1}, two), std::invalid_argument);
  EXPECT_THROW(net.forward(nn::Tensor<float>(3, 2, 16, 16), {1, 2}, two), std::invalid_argument);
  ArchConfig bad;
  bad.height = 30;
  EXPECT_THROW(Denoiser<float>{bad}, std::invalid_argument);
}

TEST(Denoiser, AblatedChannelsAreZeroed) {
  ArchConfig a = small_arch();
  a.depth_input = false;
  Denoiser<float> net(a);
  auto b = ConditioningBundle<float>::null(32, 32);
  std::fill(b.depth.begin(), b.depth.end(), 0.7f);
  std::fill(b.mask.begin(), b.mask.end(), 0.3f);
  const auto x = net.assemble_input(nn::Tensor<float>(3, 1, 32, 32), {b});
  EXPECT_EQ(x.at(6, 0, 5, 5), 0.0f);
  EXPECT_EQ(x.at(7, 0, 5, 5), 0.3f);
}

TEST(Denoiser, ZeroHeadsGiveZeroOutput) {
  Denoiser<float> net(small_arch());
  net.init(3);
  net.zero_heads();
  nn::Tensor<float> x(3, 1, 32, 32, 0.5f);
  const auto out = net.forward(x, {10}, {ConditioningBundle<float>::null(32, 32)});
  for (float v : out.eps.v) ASSERT_EQ(v, 0.0f);
  for (float v : out.mask.v) ASSERT_EQ(v, 0.0f);
}

TEST(Bundle, MapsRgbToSignedRange) {
  ImageF rgb(32, 32, 3, 1.0f);
  rgb.at(0, 0, 1) = 0.0f;
  const ImageD zeros(32, 32, 1, 0.0);
  const auto b = make_bundle<float>(rgb, zeros, zeros, relative_pose(Mat4::Identity(), Mat4::Identity()));
  EXPECT_EQ(b.rgb[0], 1.0f);
  EXPECT_EQ(b.rgb[32 * 32], -1.0f);
  EXPECT_EQ(b.pose[0], 1.0f);
  EXPECT_EQ(b.pose[1], 0.0f);
  EXPECT_THROW(make_bundle<float>(rgb, ImageD(16, 16, 1), zeros, {}), std::invalid_argument);
}

TEST(TimestepEmbedding, SinCosLayout) {
  const auto e = timestep_embedding<double>({0, 1}, 4);
  EXPECT_DOUBLE_EQ(e(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(e(2, 0), 1.0);
  EXPECT_DOUBLE_EQ(e(0, 1), std::sin(1.0));
  EXPECT_DOUBLE_EQ(e(1, 1), std::sin(0.01));
}

TEST(Loss, WeightsMaskTerm) {
  DenoiserOutput<float> out{nn::Tensor<float>(3, 1, 2, 2, 1.0f), nn::Tensor<float>(1, 1, 2, 2, 0.0f)};
  const nn::Tensor<float> eps(3, 1, 2, 2, 0.0f), mask(1, 1, 2, 2, 2.0f);
  const auto l = denoiser_loss(out, eps, mask, 0.1);
  EXPECT_DOUBLE_EQ(l.diffusion, 1.0);
  EXPECT_DOUBLE_EQ(l.mask, 4.0);
  EXPECT_NEAR(l.total, 1.4, 1e-12);
  EXPECT_THROW(denoiser_loss(out, mask, mask, 0.1), std::invalid_argument);
}

TEST(Training, OverfitsSingleExample) {
  // Full-width network; the narrow test config cannot memorize 3k noise
  // values in 500 updates.
  TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.batch_size = 1;
  TrainState st(ArchConfig{}, cfg);
  const std::vector<TrainExample> batch = {fixed_example(2)};
  Rng rng(9);
  nn::Tensor<float> eps(3, 1, 32, 32);
  for (auto& v : eps.v) v = static_cast<float>(rng.normal());
  LossTerms first, last;
  for (int s = 0; s < 500; ++s) {
    last = train_step_explicit(st, batch, {400}, eps, {false});
    if (s == 0) first = last;
  }
  EXPECT_GT(first.diffusion, 0.1);
  // Score the weights after the final update.
  const auto ex = batch[0];
  nn::Tensor<float> x_t(3, 1, 32, 32);
  const double a = st.schedule.signal(400), s = st.schedule.noise(400);
  for (std::size_t i = 0; i < x_t.v.size(); ++i) x_t.v[i] = static_cast<float>(a * ex.target[i] + s * eps.v[i]);
  const auto out = st.net.forward(x_t, {400}, {ex.cond});
  const nn::Tensor<float> mask(1, 1, 32, 32);
  EXPECT_LT(denoiser_loss(out, eps, mask, 0.0).diffusion, 1e-3);
}

TEST(Training, DeterministicForSeed) {
  TrainConfig cfg;
  cfg.batch_size = 2;
  cfg.total_steps = 5;
  cfg.seed = 4;
  DatasetSpec spec;
  spec.scenes = 2;
  spec.views = 3;
  const auto ds = build_dataset(default_catalog(), spec);
  TrainState a(small_arch(), cfg), b(small_arch(), cfg);
  const auto ra = train(a, ds), rb = train(b, ds);
  EXPECT_TRUE(a.net.params() == b.net.params());
  for (std::size_t i = 0; i < ra.log.size(); ++i) EXPECT_EQ(ra.log[i].loss.total, rb.log[i].loss.total);
  cfg.seed = 5;
  TrainState c(small_arch(), cfg);
  train(c, ds);
  EXPECT_FALSE(a.net.params() == c.net.params());
}

TEST(Training, LogsSchedulerTimesteps) {
  TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.total_steps = 3;
  DatasetSpec spec;
  spec.scenes = 1;
  spec.views = 2;
  const auto ds = build_dataset(default_catalog(), spec);
  TrainState st(small_arch(), cfg);
  const auto res = train(st, ds);
  ASSERT_EQ(res.log.size(), 3u);
  for (const auto& l : res.log) {
    EXPECT_GE(l.t_mean, 1.0);
    EXPECT_LE(l.t_mean, 1000.0);
    EXPECT_TRUE(std::isfinite(l.loss.total));
  }
}

TEST(Training, PretrainIsDeterministicAndUniform) {
  TrainConfig cfg;
  cfg.batch_size = 4;
  DatasetSpec spec;
  spec.scenes = 2;
  spec.views = 3;
  const auto ds = build_dataset(default_catalog(), spec);
  TrainState a(small_arch(), cfg), b(small_arch(), cfg);
  const auto ra = pretrain_unconditional(a, ds, 4), rb = pretrain_unconditional(b, ds, 4);
  ASSERT_EQ(ra.log.size(), 4u);
  EXPECT_TRUE(a.net.params() == b.net.params());
  for (const auto& l : ra.log) {
    EXPECT_GE(l.t_mean, 1.0);
    EXPECT_LE(l.t_mean, 1000.0);
  }
  EXPECT_EQ(pretrain_unconditional(a, ds, 0).log.size(), 0u);
  EXPECT_THROW(pretrain_unconditional(a, ds, -1), std::invalid_argument);
}

TEST(SchedulerStudy, ArmsShareThePretrainedStart) {
  DatasetSpec spec;
  spec.scenes = 2;
  spec.views = 3;
  const auto ds = build_dataset(default_catalog(), spec);
  SchedulerStudyConfig cfg;
  cfg.arch = small_arch();
  cfg.train.batch_size = 2;
  cfg.train.total_steps = 3;
  cfg.pretrain_steps = 2;
  cfg.sampler.steps = 2;
  std::map<std::string, int> seen;
  const auto r = run_scheduler_study(cfg, 7, ds, ds, default_eval_pairs(ds),
                                     [&](std::string_view phase, const StepLog&) { ++seen[std::string(phase)]; });
  ASSERT_EQ(r.arms.size(), 2u);
  EXPECT_EQ(r.arms[0].name, "ldc");
  EXPECT_EQ(r.arms[1].name, "uniform");
  EXPECT_EQ(seen["pretrain"], 2);
  EXPECT_EQ(seen["ldc"], 3);
  EXPECT_EQ(seen["uniform"], 3);
  // Same starting weights and batches; the timestep draws differ.
  EXPECT_NE(r.arms[0].log[0].loss.total, r.arms[1].log[0].loss.total);
  for (const auto& a : r.arms) EXPECT_TRUE(std::isfinite(a.score.mean_iou));
  const auto again = run_scheduler_study(cfg, 7, ds, ds, default_eval_pairs(ds));
  EXPECT_EQ(again.arms[0].score.mean_iou, r.arms[0].score.mean_iou);
}

TEST(Training, InvalidConfigRejected) {
  TrainConfig cfg;
  cfg.cond_dropout_p = 1.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(Generate, ShapesAndDeterminism) {
  Denoiser<float> net(small_arch());
  net.init(0);
  const auto ex = fixed_example(1);
  SamplerConfig sc;
  sc.steps = 4;
  const auto sched = make_schedule();
  const auto a = generate(net, {ex.cond, ex.cond}, sc, sched, 3);
  const auto b = generate(net, {ex.cond, ex.cond}, sc, sched, 3);
  EXPECT_EQ(a.image.n, 2);
  EXPECT_EQ(a.image.v, b.image.v);
  EXPECT_EQ(a.mask.c, 1);
  const auto img = tensor_to_image(a.image, 0);
  for (float v : img.data) {
    ASSERT_GE(v, 0.0f);
    ASSERT_LE(v, 1.0f);
  }
}
