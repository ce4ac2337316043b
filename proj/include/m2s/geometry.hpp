#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>

#include "m2s/point_cloud.hpp"

namespace m2s {

// SE(3) element stored as a rotation matrix and translation.
struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static RigidTransform identity() { return {}; }

  static RigidTransform from_translation(const Eigen::Vector3d& t) {
    RigidTransform out;
    out.translation = t;
    return out;
  }

  static RigidTransform from_yaw(double yaw, const Eigen::Vector3d& t = Eigen::Vector3d::Zero()) {
    RigidTransform out;
    const double c = std::cos(yaw), s = std::sin(yaw);
    out.rotation << c, -s, 0, s, c, 0, 0, 0, 1;
    out.translation = t;
    return out;
  }

  // Row-major 3x4 [R | t].
  static RigidTransform from_3x4(std::span<const double, 12> m) {
    RigidTransform out;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) out.rotation(r, c) = m[r * 4 + c];
      out.translation[r] = m[r * 4 + 3];
    }
    return out;
  }

  Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation;
    m.topRightCorner<3, 1>() = translation;
    return m;
  }

  Point3 apply(const Point3& p) const { return rotation * p + translation; }

  // Max deviation of R^T R from identity and of det(R) from +1.
  double orthonormality_error() const {
    const double ortho = (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    return std::max(ortho, std::abs(rotation.determinant() - 1.0));
  }

  bool is_valid(double tol = 1e-9) const {
    return rotation.allFinite() && translation.allFinite() && orthonormality_error() <= tol;
  }

  bool operator==(const RigidTransform&) const = default;
};

// (a * b)(p) = a(b(p)).
inline RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  RigidTransform out;
  out.rotation = a.rotation * b.rotation;
  out.translation = a.rotation * b.translation + a.translation;
  return out;
}

inline RigidTransform operator*(const RigidTransform& a, const RigidTransform& b) { return compose(a, b); }

inline RigidTransform invert(const RigidTransform& t) {
  RigidTransform out;
  out.rotation = t.rotation.transpose();
  out.translation = -(out.rotation * t.translation);
  return out;
}

// Remission is carried through unchanged; the caller owns frame_tag semantics.
inline PointCloud apply_transform(const RigidTransform& t, const PointCloud& cloud) {
  PointCloud out = cloud;
  for (auto& p : out.points) p = t.apply(p);
  return out;
}

inline std::vector<Point3> apply_transform(const RigidTransform& t, std::span<const Point3> points) {
  std::vector<Point3> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(t.apply(p));
  return out;
}

// Rotation angle of R in radians.
inline double rotation_angle(const Eigen::Matrix3d& r) {
  const double c = std::clamp((r.trace() - 1.0) * 0.5, -1.0, 1.0);
  return std::acos(c);
}

// Rodrigues formula; axis need not be normalized (zero axis gives identity).
inline Eigen::Matrix3d axis_angle(const Eigen::Vector3d& axis, double angle) {
  const double n = axis.norm();
  if (n == 0.0) return Eigen::Matrix3d::Identity();
  const Eigen::Vector3d k = axis / n;
  Eigen::Matrix3d kx;
  kx << 0, -k.z(), k.y(), k.z(), 0, -k.x(), -k.y(), k.x(), 0;
  return Eigen::Matrix3d::Identity() + std::sin(angle) * kx + (1.0 - std::cos(angle)) * kx * kx;
}

}  // namespace m2s
