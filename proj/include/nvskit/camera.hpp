#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "nvskit/geometry.hpp"
#include "nvskit/rng.hpp"

namespace nvskit {

inline constexpr double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
inline constexpr double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

struct Intrinsics {
  double vertical_fov = deg2rad(50.0);
  int width = 32;
  int height = 32;

  double aspect() const { return static_cast<double>(width) / height; }
};

/// World-to-camera extrinsic plus the look-at parameters that produced it.
/// Camera frame: x right, y up, looking down -z.
struct CameraPose {
  Mat4 extrinsic = Mat4::Identity();
  Intrinsics intrinsic;
  Vec3 eye = Vec3::Zero();
  Vec3 target = Vec3::Zero();

  Mat3 rotation() const { return extrinsic.topLeftCorner<3, 3>(); }
  Vec3 translation() const { return extrinsic.topRightCorner<3, 1>(); }
  Vec3 to_camera(const Vec3& p) const { return rotation() * p + translation(); }
};

struct RelativePose {
  std::array<double, 16> flat{};

  Mat4 matrix() const { return unflatten_row_major(flat); }
};

struct CameraParams {
  double radius_min = 1.3, radius_max = 1.7;
  double elevation_min = deg2rad(2.0), elevation_max = deg2rad(40.0);
  double azimuth_min = 0.0, azimuth_max = 2.0 * std::numbers::pi;
  double target_radius_min = 0.01, target_radius_max = 0.2;
  Intrinsics intrinsic;
  Vec3 up = Vec3::UnitY();
  int max_retries = 16;

  void validate() const {
    if (radius_min > radius_max || elevation_min > elevation_max || azimuth_min > azimuth_max ||
        target_radius_min > target_radius_max)
      throw std::invalid_argument("camera params: every range needs min <= max");
    if (radius_min <= 0.0 || target_radius_min < 0.0)
      throw std::invalid_argument("camera params: radii must be non-negative");
  }
};

/// y-up spherical coordinates; elevation is measured from the ground plane and
/// azimuth 0 points along +x.
inline Vec3 spherical_to_cartesian(double radius, double elevation, double azimuth) {
  return {radius * std::cos(elevation) * std::cos(azimuth), radius * std::sin(elevation),
          radius * std::cos(elevation) * std::sin(azimuth)};
}

/// Right-handed look-at. Rows of the rotation block are (right, up, -forward).
inline Mat4 look_at_extrinsic(const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 fwd_raw = target - eye;
  if (fwd_raw.norm() < 1e-12) throw std::invalid_argument("look_at: eye and target coincide");
  const Vec3 f = fwd_raw.normalized();
  const Vec3 r_raw = f.cross(up);
  if (r_raw.norm() < 1e-9 * up.norm()) throw std::invalid_argument("look_at: up is parallel to the view direction");
  const Vec3 r = r_raw.normalized();
  const Vec3 u = r.cross(f);
  Mat4 e = Mat4::Identity();
  e.block<1, 3>(0, 0) = r.transpose();
  e.block<1, 3>(1, 0) = u.transpose();
  e.block<1, 3>(2, 0) = -f.transpose();
  e.topRightCorner<3, 1>() = -(e.topLeftCorner<3, 3>() * eye);
  return e;
}

inline CameraPose make_camera(const Vec3& eye, const Vec3& target, const Intrinsics& intr,
                              const Vec3& up = Vec3::UnitY()) {
  return {look_at_extrinsic(eye, target, up), intr, eye, target};
}

/// Eye from spherical ranges around the origin; look-at point on a thin shell
/// around the origin.
inline CameraPose sample_camera(Rng& rng, const CameraParams& p = {}) {
  p.validate();
  for (int attempt = 0; attempt <= p.max_retries; ++attempt) {
    const double radius = rng.uniform(p.radius_min, p.radius_max);
    const double elev = rng.uniform(p.elevation_min, p.elevation_max);
    const double azim = rng.uniform(p.azimuth_min, p.azimuth_max);
    const Vec3 eye = spherical_to_cartesian(radius, elev, azim);

    Vec3 dir(rng.normal(), rng.normal(), rng.normal());
    if (dir.norm() < 1e-12) continue;
    dir.normalize();
    const Vec3 target = dir * rng.uniform(p.target_radius_min, p.target_radius_max);

    const Vec3 f = target - eye;
    if (f.norm() < 1e-9 || f.normalized().cross(p.up).norm() < 1e-6) continue;
    return make_camera(eye, target, p.intrinsic, p.up);
  }
  throw std::runtime_error("sample_camera: degenerate eye/target after bounded retries");
}

inline RelativePose relative_pose(const Mat4& e_i, const Mat4& e_j) {
  Eigen::FullPivLU<Mat4> lu(e_i);
  if (!lu.isInvertible()) throw std::invalid_argument("relative_pose: input extrinsic is singular");
  return {flatten_row_major(lu.inverse() * e_j)};
}

/// `n_views` independent cameras for one scene, reproducible from `seed`.
inline std::vector<CameraPose> sample_view_set(int n_views, std::uint64_t seed,
                                               const CameraParams& p = {}) {
  if (n_views < 2) throw std::invalid_argument("sample_view_set: need at least two views");
  Rng rng(seed);
  std::vector<CameraPose> out;
  out.reserve(static_cast<std::size_t>(n_views));
  for (int i = 0; i < n_views; ++i) out.push_back(sample_camera(rng, p));
  return out;
}

}  // namespace nvskit
