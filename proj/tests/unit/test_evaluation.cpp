#include <gtest/gtest.h>

#include <fstream>

#include "nvskit/correspondence.hpp"
#include "nvskit/evaluation.hpp"
#include "tmpdir.hpp"

using namespace nvskit;

namespace {

/// Writes gt entries and self-predictions for `count` pairs.
void write_self_run(const TempDir& dir, int count) {
  DatasetSpec spec;
  spec.scenes = count;
  spec.views = 2;
  spec.master_seed = 3;
  const auto ds = build_dataset(default_catalog(), spec);
  for (int k = 0; k < count; ++k) {
    const auto& rec = ds.scenes[static_cast<std::size_t>(k)];
    const std::string name = "p" + std::to_string(k);
    write_gt_entry(dir / ("gt/" + name), rec.views[0], rec.views[1], rec.scene.size());
    io::write_png(dir / ("pred/" + name + ".png"), rec.views[1].rgb);
    const auto pairs = geometric_correspondences(rec.views[0].depth_raw, rec.views[0].instance_map, rec.views[0].camera,
                                                 rec.views[1].depth_raw, rec.views[1].instance_map, rec.views[1].camera);
    io::write_pairs(dir / ("pairs/" + name + ".gt.jsonl"), pairs);
    io::write_pairs(dir / ("pairs/" + name + ".pred.jsonl"), pairs);
  }
}

}  // namespace

TEST(Evaluation, SelfEvaluationIsPerfect) {
  TempDir dir("evalself");
  write_self_run(dir, 3);
  const auto rep = evaluate_run(dir / "pred", dir / "gt", dir / "pairs");
  const auto j = report_to_json(rep);
  EXPECT_EQ(j["kind"], "eval_report");
  EXPECT_EQ(j["aggregate"]["count"], 3);
  EXPECT_TRUE(j["aggregate"]["psnr"].is_null());
  EXPECT_TRUE(j["aggregate"]["psnr_infinite"].get<bool>());
  EXPECT_DOUBLE_EQ(j["aggregate"]["ssim"].get<double>(), 1.0);
  EXPECT_DOUBLE_EQ(j["aggregate"]["iou"].get<double>(), 1.0);
  for (const auto& e : rep.images) {
    ASSERT_FALSE(e.error) << *e.error;
    if (e.gt_pairs > 0) {
      EXPECT_DOUBLE_EQ(*e.hit_rate, 1.0);
      EXPECT_DOUBLE_EQ(*e.dist, 0.0);
    }
  }
  EXPECT_GT(j["aggregate"]["hit_rate_count"].get<int>(), 0);
  EXPECT_DOUBLE_EQ(j["aggregate"]["dist"].get<double>(), 0.0);
  EXPECT_FALSE(rep.regions.empty());
  EXPECT_EQ(j["omitted_metrics"][0], "lpips");
}

TEST(Evaluation, CorruptPredictionBecomesPerImageError) {
  TempDir dir("evalbad");
  write_self_run(dir, 10);
  std::ofstream(dir / "pred/p4.png", std::ios::trunc) << "broken";
  const auto j = report_to_json(evaluate_run(dir / "pred", dir / "gt", dir / "pairs"));
  EXPECT_EQ(j["aggregate"]["count"], 9);
  EXPECT_EQ(j["aggregate"]["error_count"], 1);
  int errors = 0;
  for (const auto& e : j["per_image"]) errors += e["status"] == "error";
  EXPECT_EQ(errors, 1);
}

TEST(Evaluation, NoMatchingPredictionsIsFatal) {
  TempDir dir("evalnone");
  write_self_run(dir, 1);
  std::filesystem::remove(dir / "pred/p0.png");
  EXPECT_THROW(evaluate_run(dir / "pred", dir / "gt", dir / "pairs"), std::runtime_error);
  EXPECT_THROW(evaluate_run(dir / "nope", dir / "gt", dir / "pairs"), std::runtime_error);
}

TEST(Evaluation, PsnrMeanConventions) {
  const auto all_inf = psnr_mean({kPsnrInfinite, kPsnrInfinite});
  EXPECT_EQ(all_inf.finite, 0u);
  EXPECT_TRUE(psnr_json(all_inf)["psnr"].is_null());
  EXPECT_TRUE(psnr_json(all_inf)["psnr_infinite"].get<bool>());
  const auto m = psnr_mean({10.0, kPsnrInfinite, 20.0});
  EXPECT_DOUBLE_EQ(m.mean, 15.0);
  EXPECT_EQ(m.infinite, 1u);
}

TEST(Correspondence, ProjectionInvertsUnprojection) {
  Rng rng(4);
  const auto cam = sample_camera(rng);
  const Vec3 w = unproject(cam, 10.3, 20.7, 1.4);
  const Vec3 q = project_point(cam, w);
  EXPECT_NEAR(q.x(), 10.3, 1e-9);
  EXPECT_NEAR(q.y(), 20.7, 1e-9);
  EXPECT_NEAR(q.z(), 1.4, 1e-9);
}

TEST(Correspondence, SameViewPairsAreIdentity) {
  const auto scene = compose_scene(default_catalog(), 6);
  const auto cam = sample_view_set(2, 6)[0];
  const auto v = render_view(scene, cam);
  const auto pairs = geometric_correspondences(v, cam, v, cam);
  ASSERT_FALSE(pairs.empty());
  for (const auto& p : pairs) {
    EXPECT_NEAR(p.x0, p.x1, 1e-9);
    EXPECT_NEAR(p.y0, p.y1, 1e-9);
  }
}

TEST(Correspondence, PairsLandOnSameInstance) {
  const auto scene = compose_scene(default_catalog(), 8);
  const auto cams = sample_view_set(2, 8);
  const auto a = render_view(scene, cams[0]), b = render_view(scene, cams[1]);
  for (const auto& p : geometric_correspondences(a, cams[0], b, cams[1]))
    EXPECT_EQ(a.instance_map.at(static_cast<int>(p.x0), static_cast<int>(p.y0)),
              b.instance_map.at(static_cast<int>(p.x1), static_cast<int>(p.y1)));
}

TEST(BlockMatch, FindsShiftedPatch) {
  ImageF a(32, 32, 3, 1.0f), b(32, 32, 3, 1.0f);
  for (int y = 10; y < 14; ++y)
    for (int x = 8; x < 12; ++x)
      for (int c = 0; c < 3; ++c) {
        a.at(x, y, c) = 0.1f * static_cast<float>(c + x - 8);
        b.at(x + 5, y + 3, c) = 0.1f * static_cast<float>(c + x - 8);
      }
  const auto pairs = block_match(a, b);
  ASSERT_FALSE(pairs.empty());
  for (const auto& p : pairs) {
    EXPECT_DOUBLE_EQ(p.x1 - p.x0, 5.0);
    EXPECT_DOUBLE_EQ(p.y1 - p.y0, 3.0);
  }
}
