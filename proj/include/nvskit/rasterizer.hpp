#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "nvskit/camera.hpp"
#include "nvskit/geometry.hpp"
#include "nvskit/image.hpp"
#include "nvskit/scene_composer.hpp"

namespace nvskit {

inline constexpr double kInfDepth = std::numeric_limits<double>::infinity();

struct RenderedView {
  ImageF rgb;             ///< H x W x 3 in [0,1], white background
  ImageD depth_raw;       ///< camera-space depth, +inf on background
  LabelMap instance_map;  ///< 0 = background, else instance id
  std::vector<Mask> amodal_masks;  ///< one per object, indexed by instance_id - 1
  bool camera_inside_object = false;

  int width() const { return rgb.width; }
  int height() const { return rgb.height; }

  /// Visible pixels of one instance.
  Mask visible_mask(int instance_id) const {
    Mask m(instance_map.width, instance_map.height, 1, 0);
    for (std::size_t i = 0; i < m.data.size(); ++i)
      m.data[i] = instance_map.data[i] == instance_id ? 1 : 0;
    return m;
  }
};

struct RenderOptions {
  double near_plane = 1e-3;
  Vec3 light_direction = Vec3(0.5, -1.0, 0.3).normalized();
  double ambient = 0.35;
  Vec3 background = Vec3::Ones();
};

namespace detail {

struct ScreenVertex {
  double x, y;   // pixel coordinates, pixel (i,j) has its center at (i+0.5, j+0.5)
  double inv_z;  // 1 / camera depth
};

struct Face {
  std::array<int, 4> corners;  // into OrientedBox::corners(), counter-clockwise from outside
  Vec3 local_normal;
};

// Corner index bits: 1 -> +x, 2 -> +y, 4 -> +z.
inline const std::array<Face, 6>& cuboid_faces() {
  static const std::array<Face, 6> faces = {{
      {{1, 3, 7, 5}, Vec3::UnitX()},
      {{0, 4, 6, 2}, -Vec3::UnitX()},
      {{2, 6, 7, 3}, Vec3::UnitY()},
      {{0, 1, 5, 4}, -Vec3::UnitY()},
      {{4, 5, 7, 6}, Vec3::UnitZ()},
      {{0, 2, 3, 1}, -Vec3::UnitZ()},
  }};
  return faces;
}

// Sutherland-Hodgman against the plane z_cam = -near (keep z <= -near).
inline std::vector<Vec3> clip_near(const std::array<Vec3, 3>& tri, double near_plane) {
  std::vector<Vec3> out;
  for (std::size_t i = 0; i < 3; ++i) {
    const Vec3& a = tri[i];
    const Vec3& b = tri[(i + 1) % 3];
    const double da = -a.z() - near_plane;
    const double db = -b.z() - near_plane;
    if (da >= 0) out.push_back(a);
    if ((da >= 0) != (db >= 0)) out.push_back(a + (b - a) * (da / (da - db)));
  }
  return out;
}

class Target {
 public:
  Target(const Intrinsics& intr, double near_plane)
      : w_(intr.width), h_(intr.height), near_(near_plane),
        fy_(1.0 / std::tan(0.5 * intr.vertical_fov)), fx_(fy_ / intr.aspect()) {}

  ScreenVertex project(const Vec3& pc) const {
    const double depth = -pc.z();
    return {(pc.x() / depth * fx_ + 1.0) * 0.5 * w_, (1.0 - pc.y() / depth * fy_) * 0.5 * h_, 1.0 / depth};
  }

  // Calls fn(x, y, depth) for every pixel center covered by the triangle.
  template <typename Fn>
  void raster_triangle(const std::array<Vec3, 3>& cam_tri, Fn&& fn) const {
    const auto poly = clip_near(cam_tri, near_);
    if (poly.size() < 3) return;
    std::vector<ScreenVertex> sv;
    sv.reserve(poly.size());
    for (const auto& p : poly) sv.push_back(project(p));
    for (std::size_t k = 1; k + 1 < sv.size(); ++k) raster_screen(sv[0], sv[k], sv[k + 1], fn);
  }

 private:
  template <typename Fn>
  void raster_screen(const ScreenVertex& a, const ScreenVertex& b, const ScreenVertex& c, Fn& fn) const {
    const double area = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    if (std::abs(area) < 1e-14) return;
    const int x0 = std::max(0, static_cast<int>(std::floor(std::min({a.x, b.x, c.x}) - 0.5)));
    const int x1 = std::min(w_ - 1, static_cast<int>(std::ceil(std::max({a.x, b.x, c.x}) - 0.5)));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min({a.y, b.y, c.y}) - 0.5)));
    const int y1 = std::min(h_ - 1, static_cast<int>(std::ceil(std::max({a.y, b.y, c.y}) - 0.5)));
    const double inv_area = 1.0 / area;
    for (int y = y0; y <= y1; ++y) {
      const double py = y + 0.5;
      for (int x = x0; x <= x1; ++x) {
        const double px = x + 0.5;
        const double w0 = ((b.x - px) * (c.y - py) - (b.y - py) * (c.x - px)) * inv_area;
        const double w1 = ((c.x - px) * (a.y - py) - (c.y - py) * (a.x - px)) * inv_area;
        const double w2 = 1.0 - w0 - w1;
        if (w0 < 0 || w1 < 0 || w2 < 0) continue;
        const double inv_z = w0 * a.inv_z + w1 * b.inv_z + w2 * c.inv_z;
        if (inv_z <= 0) continue;
        fn(x, y, 1.0 / inv_z);
      }
    }
  }

  int w_, h_;
  double near_, fy_, fx_;
};

}  // namespace detail

/// Rasterizes every face of one box, calling fn(x, y, depth, face_index).
template <typename Fn>
void rasterize_box(const OrientedBox& box, const CameraPose& cam, const RenderOptions& opts, Fn&& fn) {
  const detail::Target target(cam.intrinsic, opts.near_plane);
  const auto corners = box.corners();
  std::array<Vec3, 8> cc;
  for (std::size_t i = 0; i < 8; ++i) cc[i] = cam.to_camera(corners[i]);
  const auto& faces = detail::cuboid_faces();
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const auto& q = faces[f].corners;
    const auto ci = [&](int k) { return cc[static_cast<std::size_t>(q[static_cast<std::size_t>(k)])]; };
    auto emit = [&](int x, int y, double d) { fn(x, y, d, static_cast<int>(f)); };
    target.raster_triangle({ci(0), ci(1), ci(2)}, emit);
    target.raster_triangle({ci(0), ci(2), ci(3)}, emit);
  }
}

inline bool point_in_box(const OrientedBox& box, const Vec3& p) {
  const Vec3 local = box.rotation.transpose() * (p - box.center);
  return (local.cwiseAbs().array() < box.half.array()).all();
}

/// Z-buffered render of the full scene plus one isolated render per object
/// for the amodal masks.
inline RenderedView render_view(const SceneComposite& scene, const CameraPose& cam,
                                const RenderOptions& opts = {}) {
  const int w = cam.intrinsic.width, h = cam.intrinsic.height;
  if (w < 32 || w > 1024 || h < 32 || h > 1024)
    throw std::invalid_argument("render_view: resolution must lie in [32, 1024]");

  RenderedView view;
  view.rgb = ImageF(w, h, 3);
  view.depth_raw = ImageD(w, h, 1, kInfDepth);
  view.instance_map = LabelMap(w, h, 1, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) view.rgb.at(x, y, c) = static_cast<float>(opts.background[c]);

  const auto& faces = detail::cuboid_faces();
  for (const auto& obj : scene.objects) {
    const OrientedBox box = scene.world_box(obj);
    if (point_in_box(box, cam.eye)) view.camera_inside_object = true;

    std::array<Vec3, 6> shade;
    for (std::size_t f = 0; f < faces.size(); ++f) {
      const Vec3 n = box.rotation * faces[f].local_normal;
      const double lambert = std::max(0.0, -n.dot(opts.light_direction));
      shade[f] = obj.color * (opts.ambient + (1.0 - opts.ambient) * lambert);
    }

    Mask amodal(w, h, 1, 0);
    rasterize_box(box, cam, opts, [&](int x, int y, double depth, int face) {
      amodal.at(x, y) = 1;
      if (depth < view.depth_raw.at(x, y)) {
        view.depth_raw.at(x, y) = depth;
        view.instance_map.at(x, y) = obj.instance_id;
        for (int c = 0; c < 3; ++c)
          view.rgb.at(x, y, c) = static_cast<float>(std::clamp(shade[static_cast<std::size_t>(face)][c], 0.0, 1.0));
      }
    });
    view.amodal_masks.push_back(std::move(amodal));
  }
  return view;
}

struct NormalizedDepth {
  ImageD values;  ///< in [-1, 1]
  double min_finite = 0.0;
  double max_finite = 0.0;
  bool has_background = false;
  bool degenerate = false;  ///< no finite pixel at all
};

/// Background becomes twice the largest finite depth; then [min, bg] -> [-1, 1].
/// Without background pixels the finite range maps to [-1, 1] directly. An
/// all-background map is all +1.
inline NormalizedDepth normalize_depth(const ImageD& depth_raw) {
  NormalizedDepth out;
  out.values = ImageD(depth_raw.width, depth_raw.height, 1, 1.0);
  double lo = kInfDepth, hi = -kInfDepth;
  for (double d : depth_raw.data) {
    if (std::isfinite(d)) {
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    } else {
      out.has_background = true;
    }
  }
  if (!std::isfinite(lo)) {
    out.degenerate = true;
    return out;
  }
  out.min_finite = lo;
  out.max_finite = hi;
  const double top = out.has_background ? 2.0 * hi : hi;
  const double span = top - lo;
  for (std::size_t i = 0; i < depth_raw.data.size(); ++i) {
    const double d = std::isfinite(depth_raw.data[i]) ? depth_raw.data[i] : top;
    out.values.data[i] = span > 0 ? std::clamp(2.0 * (d - lo) / span - 1.0, -1.0, 1.0) : -1.0;
  }
  return out;
}

/// Inverse of normalize_depth for the foreground; background comes back as +inf.
inline ImageD denormalize_depth(const ImageD& norm, double min_finite, double max_finite,
                                bool has_background) {
  ImageD out(norm.width, norm.height, 1);
  const double top = has_background ? 2.0 * max_finite : max_finite;
  for (std::size_t i = 0; i < norm.data.size(); ++i) {
    const double v = norm.data[i];
    out.data[i] = (has_background && v >= 1.0) ? kInfDepth : min_finite + (v + 1.0) * 0.5 * (top - min_finite);
  }
  return out;
}

inline double normalize_instance_value(double id, int n_objects) {
  return 2.0 * id / n_objects - 1.0;
}
inline double denormalize_instance_value(double v, int n_objects) {
  return (v + 1.0) * 0.5 * n_objects;
}

/// Instance ids [0, n] -> [-1, 1] (0 is background).
inline ImageD normalize_instance_mask(const LabelMap& instance_map, int n_objects) {
  if (n_objects < 1) throw std::invalid_argument("normalize_instance_mask: need at least one object");
  ImageD out(instance_map.width, instance_map.height, 1);
  for (std::size_t i = 0; i < instance_map.data.size(); ++i) {
    const int v = instance_map.data[i];
    if (v < 0 || v > n_objects)
      throw std::invalid_argument("normalize_instance_mask: id " + std::to_string(v) + " outside [0, " +
                                  std::to_string(n_objects) + "]");
    out.data[i] = normalize_instance_value(v, n_objects);
  }
  return out;
}

}  // namespace nvskit
