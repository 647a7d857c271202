#pragma once

#include <array>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace nvskit {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

/// Axis-aligned box. Well-formed iff min <= max on every axis.
struct Aabb {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();

  bool well_formed() const noexcept {
    return (min.array() <= max.array()).all() && min.allFinite() && max.allFinite();
  }
  Vec3 center() const { return 0.5 * (min + max); }
  Vec3 extent() const { return max - min; }
  Aabb translated(const Vec3& d) const { return {min + d, max + d}; }
  Aabb scaled(double s) const { return {min * s, max * s}; }

  void expand(const Aabb& o) {
    min = min.cwiseMin(o.min);
    max = max.cwiseMax(o.max);
  }

  friend bool operator==(const Aabb&, const Aabb&) = default;
};

/// True iff the boxes overlap with positive volume. Touching faces do not count.
inline bool aabb_intersects(const Aabb& a, const Aabb& b) {
  if (!a.well_formed() || !b.well_formed()) {
    throw std::invalid_argument("aabb_intersects: malformed box (min > max or non-finite)");
  }
  for (int k = 0; k < 3; ++k) {
    if (!(a.min[k] < b.max[k] && b.min[k] < a.max[k])) return false;
  }
  return true;
}

/// Rotation about +y by `yaw` radians (right-handed, y-up).
inline Mat3 yaw_rotation(double yaw) {
  const double c = std::cos(yaw), s = std::sin(yaw);
  Mat3 r;
  r << c, 0, s,
       0, 1, 0,
      -s, 0, c;
  return r;
}

/// An oriented cuboid: center, rotation (columns are the local axes), half sizes.
struct OrientedBox {
  Vec3 center = Vec3::Zero();
  Mat3 rotation = Mat3::Identity();
  Vec3 half = Vec3::Ones();

  std::array<Vec3, 8> corners() const {
    std::array<Vec3, 8> out;
    for (int i = 0; i < 8; ++i) {
      const Vec3 sgn((i & 1) ? 1.0 : -1.0, (i & 2) ? 1.0 : -1.0, (i & 4) ? 1.0 : -1.0);
      out[static_cast<std::size_t>(i)] = center + rotation * sgn.cwiseProduct(half);
    }
    return out;
  }

  Aabb hull() const {
    const Vec3 r = rotation.cwiseAbs() * half;
    return {center - r, center + r};
  }
};

/// Row-major flattening of a 4x4 matrix.
inline std::array<double, 16> flatten_row_major(const Mat4& m) {
  std::array<double, 16> out{};
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) out[static_cast<std::size_t>(r * 4 + c)] = m(r, c);
  return out;
}

inline Mat4 unflatten_row_major(const std::array<double, 16>& flat) {
  Mat4 m;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m(r, c) = flat[static_cast<std::size_t>(r * 4 + c)];
  return m;
}

}  // namespace nvskit
