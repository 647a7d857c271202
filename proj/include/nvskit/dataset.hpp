#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "nvskit/camera.hpp"
#include "nvskit/rasterizer.hpp"
#include "nvskit/rng.hpp"
#include "nvskit/scene_composer.hpp"

namespace nvskit {

/// One rendered view kept in training form: planar channels, images in
/// [-1, 1], plus the original buffers the evaluator needs.
struct ViewRecord {
  CameraPose camera;
  ImageF rgb;               ///< [0,1] interleaved
  LabelMap instance_map;
  ImageD depth_raw;         ///< camera depth, +inf on background
  std::vector<Mask> amodal_masks;
  std::vector<float> rgb_planar;    ///< 3 x H x W in [-1, 1]
  std::vector<float> depth_planar;  ///< H x W normalized depth
  std::vector<float> mask_planar;   ///< H x W normalized instance ids
};

struct SceneRecord {
  SceneComposite scene;
  std::vector<ViewRecord> views;
};

struct Dataset {
  int width = 32;
  int height = 32;
  std::vector<SceneRecord> scenes;
};

inline ViewRecord make_view_record(const RenderedView& v, const CameraPose& cam, int n_objects) {
  ViewRecord r;
  r.camera = cam;
  r.rgb = v.rgb;
  r.instance_map = v.instance_map;
  r.depth_raw = v.depth_raw;
  r.amodal_masks = v.amodal_masks;
  const std::size_t hw = v.rgb.pixel_count();
  r.rgb_planar.resize(3 * hw);
  r.depth_planar.resize(hw);
  r.mask_planar.resize(hw);
  const auto depth = normalize_depth(v.depth_raw);
  const auto mask = normalize_instance_mask(v.instance_map, n_objects);
  for (std::size_t i = 0; i < hw; ++i) {
    for (std::size_t c = 0; c < 3; ++c) r.rgb_planar[c * hw + i] = 2.0f * v.rgb.data[i * 3 + c] - 1.0f;
    r.depth_planar[i] = static_cast<float>(depth.values.data[i]);
    r.mask_planar[i] = static_cast<float>(mask.data[i]);
  }
  return r;
}

struct DatasetSpec {
  int scenes = 200;
  int views = 12;
  int resolution = 32;
  std::uint64_t master_seed = 0;
  ComposeOptions compose;
  CameraParams camera;
};

/// Scene k uses seed derive_seed(master, k) for composition and an
/// independent stream for its cameras.
inline std::uint64_t scene_seed(std::uint64_t master, std::uint64_t k) { return derive_seed(master, k); }
inline std::uint64_t camera_seed(std::uint64_t master, std::uint64_t k) {
  return derive_seed(master ^ 0xC0FFEE1234ULL, k);
}

inline SceneRecord render_scene_record(const SceneComposite& scene, const std::vector<CameraPose>& cams) {
  SceneRecord rec;
  rec.scene = scene;
  for (const auto& cam : cams) rec.views.push_back(make_view_record(render_view(scene, cam), cam, scene.size()));
  return rec;
}

inline Dataset build_dataset(const std::vector<ObjectTemplate>& catalog, const DatasetSpec& spec) {
  Dataset ds;
  ds.width = ds.height = spec.resolution;
  CameraParams cp = spec.camera;
  cp.intrinsic.width = cp.intrinsic.height = spec.resolution;
  for (int k = 0; k < spec.scenes; ++k) {
    const auto scene = compose_scene(catalog, scene_seed(spec.master_seed, static_cast<std::uint64_t>(k)), spec.compose);
    const auto cams = sample_view_set(spec.views, camera_seed(spec.master_seed, static_cast<std::uint64_t>(k)), cp);
    ds.scenes.push_back(render_scene_record(scene, cams));
  }
  return ds;
}

}  // namespace nvskit
