#include <gtest/gtest.h>

#include <cmath>

#include "nvskit/rasterizer.hpp"
#include "oracles.hpp"

using namespace nvskit;

namespace {

SceneComposite one_box(Vec3 half) {
  SceneComposite s;
  PlacedObject o;
  o.half_extents = half;
  o.aabb = {-half, half};
  s.objects.push_back(o);
  return s;
}

}  // namespace

TEST(Rasterizer, MatchesRayCastOnRandomScenes) {
  const auto cat = default_catalog();
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto scene = compose_scene(cat, seed);
    for (const auto& cam : sample_view_set(3, seed + 1000)) {
      const auto view = render_view(scene, cam);
      const auto ref = oracle::ray_cast(scene, cam);
      for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
          ASSERT_EQ(view.instance_map.at(x, y), ref.ids.at(x, y)) << seed << " " << x << "," << y;
          if (ref.ids.at(x, y) != 0) {
            ASSERT_NEAR(view.depth_raw.at(x, y), ref.depth.at(x, y), 1e-9 * ref.depth.at(x, y));
          } else {
            ASSERT_TRUE(std::isinf(view.depth_raw.at(x, y)));
          }
        }
    }
  }
}

TEST(Rasterizer, VisibleInsideAmodal) {
  const auto cat = default_catalog();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto scene = compose_scene(cat, seed);
    const auto cam = sample_view_set(2, seed)[0];
    const auto view = render_view(scene, cam);
    ASSERT_EQ(static_cast<int>(view.amodal_masks.size()), scene.size());
    for (int id = 1; id <= scene.size(); ++id) {
      const Mask vis = view.visible_mask(id);
      const Mask& am = view.amodal_masks[static_cast<std::size_t>(id - 1)];
      for (std::size_t i = 0; i < vis.data.size(); ++i) ASSERT_LE(vis.data[i], am.data[i]);
    }
  }
}

TEST(Rasterizer, BackgroundIsWhiteAndForegroundShaded) {
  const auto scene = one_box({0.2, 0.2, 0.2});
  const auto cam = make_camera({0, 0, 2}, {0, 0, 0}, Intrinsics{});
  const auto view = render_view(scene, cam);
  EXPECT_EQ(view.instance_map.at(0, 0), 0);
  EXPECT_EQ(view.rgb.at(0, 0, 0), 1.0f);
  EXPECT_EQ(view.instance_map.at(16, 16), 1);
  EXPECT_LT(view.rgb.at(16, 16, 0), 1.0f);
  // Front face at z = 0.2, seen from z = 2.
  EXPECT_NEAR(view.depth_raw.at(16, 16), 1.8, 1e-12);
  EXPECT_FALSE(view.camera_inside_object);
}

TEST(Rasterizer, CameraInsideObjectIsFlagged) {
  const auto scene = one_box({1, 1, 1});
  const auto view = render_view(scene, make_camera({0, 0, 0.5}, {0, 0, 0}, Intrinsics{}));
  EXPECT_TRUE(view.camera_inside_object);
}

TEST(Rasterizer, ResolutionBounds) {
  const auto scene = one_box({0.2, 0.2, 0.2});
  Intrinsics small{deg2rad(50), 16, 16};
  EXPECT_THROW(render_view(scene, make_camera({0, 0, 2}, {0, 0, 0}, small)), std::invalid_argument);
}

TEST(Depth, NormalizationWithBackground) {
  ImageD d(3, 1, 1);
  d.data = {1.0, 3.0, kInfDepth};
  const auto n = normalize_depth(d);
  // Background sits at 2 * 3 = 6; [1, 6] -> [-1, 1].
  EXPECT_DOUBLE_EQ(n.values.data[0], -1.0);
  EXPECT_DOUBLE_EQ(n.values.data[1], -0.2);
  EXPECT_DOUBLE_EQ(n.values.data[2], 1.0);
  EXPECT_TRUE(n.has_background);
  const auto back = denormalize_depth(n.values, n.min_finite, n.max_finite, n.has_background);
  EXPECT_DOUBLE_EQ(back.data[0], 1.0);
  EXPECT_NEAR(back.data[1], 3.0, 1e-12);
  EXPECT_TRUE(std::isinf(back.data[2]));
}

TEST(Depth, NoBackgroundUsesFiniteRange) {
  ImageD d(2, 1, 1);
  d.data = {2.0, 4.0};
  const auto n = normalize_depth(d);
  EXPECT_DOUBLE_EQ(n.values.data[0], -1.0);
  EXPECT_DOUBLE_EQ(n.values.data[1], 1.0);
  EXPECT_FALSE(n.has_background);
}

TEST(Depth, ConstantAndEmptyMaps) {
  ImageD c(2, 2, 1, 5.0);
  const auto n = normalize_depth(c);
  for (double v : n.values.data) EXPECT_EQ(v, -1.0);
  ImageD e(2, 2, 1, kInfDepth);
  const auto m = normalize_depth(e);
  EXPECT_TRUE(m.degenerate);
  for (double v : m.values.data) EXPECT_EQ(v, 1.0);
}

TEST(Depth, RangeIsBounded) {
  const auto scene = compose_scene(default_catalog(), 4);
  const auto view = render_view(scene, sample_view_set(2, 4)[0]);
  const auto n = normalize_depth(view.depth_raw);
  for (double v : n.values.data) {
    ASSERT_GE(v, -1.0);
    ASSERT_LE(v, 1.0);
  }
}

TEST(Instance, NormalizationExample) {
  LabelMap m(3, 1, 1);
  m.data = {0, 2, 4};
  const auto n = normalize_instance_mask(m, 4);
  EXPECT_DOUBLE_EQ(n.data[0], -1.0);
  EXPECT_DOUBLE_EQ(n.data[1], 0.0);
  EXPECT_DOUBLE_EQ(n.data[2], 1.0);
  EXPECT_DOUBLE_EQ(denormalize_instance_value(0.0, 4), 2.0);
  m.data[0] = 5;
  EXPECT_THROW(normalize_instance_mask(m, 4), std::invalid_argument);
  EXPECT_THROW(normalize_instance_mask(m, 0), std::invalid_argument);
}
