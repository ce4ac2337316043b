#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SVD>

#include "m2s/error.hpp"
#include "m2s/geometry.hpp"
#include "m2s/nearest_neighbor.hpp"
#include "m2s/point_cloud.hpp"

namespace m2s {

struct RegistrationConfig {
  std::size_t max_iterations = 50;
  double convergence_tol = 1e-4;           // meters of RMS change
  double max_correspondence_dist = 1.0;    // meters
  std::size_t grid_search_threshold = 2000;  // source size at which the grid index takes over

  void validate() const {
    if (max_iterations == 0 || !(convergence_tol > 0.0) || !(max_correspondence_dist > 0.0))
      throw Error(ErrorKind::InvalidConfig, "registration parameters must be positive");
  }
};

struct RegistrationResult {
  RigidTransform transform;
  double rms_error = 0.0;
  std::size_t iterations_used = 0;
  bool converged = false;
  // RMS after the initial guess followed by each accepted iteration.
  std::vector<double> rms_history;
};

inline RigidTransform centroid_align(std::span<const Point3> source, std::span<const Point3> target) {
  if (source.empty() || target.empty()) throw Error(ErrorKind::EmptyInput, "centroid_align on empty input");
  return RigidTransform::from_translation(centroid(target) - centroid(source));
}

// Least-squares rigid fit mapping src[i] onto dst[i] via the SVD of the
// cross-covariance. A reflection solution is corrected by flipping the
// singular vector of the smallest singular value.
inline RigidTransform fit_rigid(std::span<const Point3> src, std::span<const Point3> dst) {
  if (src.size() != dst.size() || src.empty()) throw Error(ErrorKind::ShapeError, "fit_rigid needs matched non-empty sets");
  const Point3 cs = centroid(src), cd = centroid(dst);
  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) h += (src[i] - cs) * (dst[i] - cd).transpose();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Matrix3d& u = svd.matrixU();
  const Eigen::Matrix3d& v = svd.matrixV();
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  if ((v * u.transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  RigidTransform out;
  out.rotation = v * d * u.transpose();
  out.translation = cd - out.rotation * cs;
  return out;
}

namespace detail {

// Rank test on the spread of the source: fewer than two significant
// singular values means a point or a line.
inline bool is_degenerate(std::span<const Point3> pts) {
  if (pts.size() < 3) return true;
  const Point3 c = centroid(pts);
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : pts) cov += (p - c) * (p - c).transpose();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov);
  const auto s = svd.singularValues();
  return s[0] <= 0.0 || s[1] <= 1e-12 * s[0];
}

struct Matches {
  std::vector<Point3> src;
  std::vector<Point3> dst;
  double rms = 0.0;
};

inline Matches correspond(std::span<const Point3> source, const RigidTransform& t, const RadiusSearch& search,
                          std::span<const Point3> target) {
  Matches m;
  double sum = 0.0;
  for (const auto& p : source) {
    if (auto nn = search.nearest(t.apply(p))) {
      m.src.push_back(p);
      m.dst.push_back(target[nn->index]);
      sum += nn->distance2;
    }
  }
  if (!m.src.empty()) m.rms = std::sqrt(sum / static_cast<double>(m.src.size()));
  return m;
}

}  // namespace detail

// Point-to-point ICP. An iteration is accepted only if it does not raise the
// RMS over matched pairs, so rms_history is non-increasing.
inline RegistrationResult icp_register(std::span<const Point3> source, std::span<const Point3> target,
                                       const RigidTransform& init, const RegistrationConfig& config = {}) {
  config.validate();
  if (detail::is_degenerate(source))
    throw Error(ErrorKind::DegenerateSource, "source needs at least 3 non-collinear points");
  if (target.empty()) throw Error(ErrorKind::EmptyInput, "empty registration target");

  std::unique_ptr<RadiusSearch> search;
  if (source.size() < config.grid_search_threshold)
    search = std::make_unique<BruteForceSearch>(target, config.max_correspondence_dist);
  else
    search = std::make_unique<GridHashSearch>(target, config.max_correspondence_dist);

  RegistrationResult result;
  result.transform = init;
  auto matches = detail::correspond(source, init, *search, target);
  if (matches.src.empty()) throw Error(ErrorKind::NoOverlap, "no correspondences within max_correspondence_dist");
  result.rms_error = matches.rms;
  result.rms_history.push_back(matches.rms);

  for (std::size_t it = 1; it <= config.max_iterations; ++it) {
    result.iterations_used = it;
    RigidTransform candidate = fit_rigid(matches.src, matches.dst);
    auto next = detail::correspond(source, candidate, *search, target);
    if (next.src.empty() || next.rms > result.rms_error) {
      // A rise below the tolerance is numerical noise at a fixed point.
      result.converged = !next.src.empty() && next.rms - result.rms_error < config.convergence_tol;
      break;
    }
    const double improvement = result.rms_error - next.rms;
    result.transform = candidate;
    result.rms_error = next.rms;
    result.rms_history.push_back(next.rms);
    matches = std::move(next);
    if (improvement < config.convergence_tol) {
      result.converged = true;
      break;
    }
  }
  return result;
}

}  // namespace m2s
