#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "nvskit/camera.hpp"
#include "nvskit/image.hpp"
#include "nvskit/metrics.hpp"
#include "nvskit/rasterizer.hpp"

namespace nvskit {

/// Camera-space point for the pixel coordinate (px, py) at the given depth.
inline Vec3 unproject(const CameraPose& cam, double px, double py, double depth) {
  const double fy = 1.0 / std::tan(0.5 * cam.intrinsic.vertical_fov);
  const double fx = fy / cam.intrinsic.aspect();
  const double nx = 2.0 * px / cam.intrinsic.width - 1.0;
  const double ny = 1.0 - 2.0 * py / cam.intrinsic.height;
  const Vec3 pc(nx * depth / fx, ny * depth / fy, -depth);
  return cam.rotation().transpose() * (pc - cam.translation());
}

/// Pixel coordinate and depth of a world point; depth <= 0 means behind.
inline Vec3 project_point(const CameraPose& cam, const Vec3& world) {
  const double fy = 1.0 / std::tan(0.5 * cam.intrinsic.vertical_fov);
  const double fx = fy / cam.intrinsic.aspect();
  const Vec3 pc = cam.to_camera(world);
  const double depth = -pc.z();
  return {(pc.x() / depth * fx + 1.0) * 0.5 * cam.intrinsic.width,
          (1.0 - pc.y() / depth * fy) * 0.5 * cam.intrinsic.height, depth};
}

struct CorrespondenceOptions {
  int stride = 2;                  ///< sample every stride-th input pixel
  double relative_depth_tol = 0.03;
};

/// Ground-truth pairs from geometry: foreground input pixels are lifted with
/// their depth, reprojected into the target view and kept when the target
/// pixel shows the same instance at a consistent depth.
inline std::vector<MatchPair> geometric_correspondences(const ImageD& input_depth, const LabelMap& input_ids,
                                                        const CameraPose& input_cam, const ImageD& target_depth,
                                                        const LabelMap& target_ids, const CameraPose& target_cam,
                                                        const CorrespondenceOptions& opt = {}) {
  std::vector<MatchPair> out;
  const int tw = target_ids.width, th = target_ids.height;
  for (int y = 0; y < input_ids.height; y += opt.stride) {
    for (int x = 0; x < input_ids.width; x += opt.stride) {
      const int id = input_ids.at(x, y);
      if (id == 0) continue;
      const double px = x + 0.5, py = y + 0.5;
      const Vec3 world = unproject(input_cam, px, py, input_depth.at(x, y));
      const Vec3 q = project_point(target_cam, world);
      if (!(q.z() > 0.0) || q.x() < 0.0 || q.y() < 0.0 || q.x() >= tw || q.y() >= th) continue;
      const int qx = static_cast<int>(q.x()), qy = static_cast<int>(q.y());
      if (target_ids.at(qx, qy) != id) continue;
      const double seen = target_depth.at(qx, qy);
      if (std::abs(seen - q.z()) > opt.relative_depth_tol * q.z()) continue;
      out.push_back({px, py, q.x(), q.y()});
    }
  }
  return out;
}

inline std::vector<MatchPair> geometric_correspondences(const RenderedView& input, const CameraPose& input_cam,
                                                        const RenderedView& target, const CameraPose& target_cam,
                                                        const CorrespondenceOptions& opt = {}) {
  return geometric_correspondences(input.depth_raw, input.instance_map, input_cam, target.depth_raw,
                                   target.instance_map, target_cam, opt);
}

struct BlockMatchOptions {
  int stride = 2;
  int radius = 2;  ///< patch is (2r+1)^2
  /// Queries whose input patch is nearly flat are skipped.
  double min_patch_variance = 1e-4;
};

/// Minimal patch matcher between two RGB images: for input foreground
/// pixels (luminance below the foreground threshold) returns the pixel of
/// `other` with the smallest patch SSD, first in scan order on ties.
inline std::vector<MatchPair> block_match(const ImageF& input, const ImageF& other, const BlockMatchOptions& opt = {}) {
  require_same_shape(input, other, "block_match");
  const int w = input.width, h = input.height, r = opt.radius;
  const auto fg = foreground_mask(quantize(input));
  auto sample = [&](const ImageF& img, int x, int y, int c) {
    x = std::clamp(x, 0, w - 1);
    y = std::clamp(y, 0, h - 1);
    return img.at(x, y, c);
  };
  std::vector<MatchPair> out;
  std::vector<float> patch(static_cast<std::size_t>((2 * r + 1) * (2 * r + 1) * 3));
  for (int y = 0; y < h; y += opt.stride) {
    for (int x = 0; x < w; x += opt.stride) {
      if (!fg.at(x, y)) continue;
      std::size_t k = 0;
      double mean = 0.0;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx)
          for (int c = 0; c < 3; ++c) mean += patch[k++] = sample(input, x + dx, y + dy, c);
      mean /= static_cast<double>(patch.size());
      double var = 0.0;
      for (float v : patch) var += (v - mean) * (v - mean);
      if (var / static_cast<double>(patch.size()) < opt.min_patch_variance) continue;
      double best = std::numeric_limits<double>::infinity();
      int bx = 0, by = 0;
      for (int qy = 0; qy < h; ++qy) {
        for (int qx = 0; qx < w; ++qx) {
          double ssd = 0.0;
          k = 0;
          for (int dy = -r; dy <= r && ssd < best; ++dy)
            for (int dx = -r; dx <= r; ++dx)
              for (int c = 0; c < 3; ++c) {
                const double d = sample(other, qx + dx, qy + dy, c) - patch[k++];
                ssd += d * d;
              }
          if (ssd < best) {
            best = ssd;
            bx = qx;
            by = qy;
          }
        }
      }
      out.push_back({x + 0.5, y + 0.5, bx + 0.5, by + 0.5});
    }
  }
  return out;
}

}  // namespace nvskit
