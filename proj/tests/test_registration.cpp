#include <gtest/gtest.h>

#include <numbers>

#include "m2s/nearest_neighbor.hpp"
#include "m2s/random.hpp"
#include "m2s/registration.hpp"

using namespace m2s;

namespace {

std::vector<Point3> random_object(Rng& rng, std::size_t n) {
  std::vector<Point3> pts;
  for (std::size_t i = 0; i < n; ++i) pts.emplace_back(rng.uniform(-1.0, 1.0), rng.uniform(-0.5, 0.5), rng.uniform(-0.25, 0.25));
  return pts;
}

}  // namespace

TEST(CentroidAlign, Cases) {
  Rng rng(1);
  const auto src = random_object(rng, 50);
  const auto same = centroid_align(src, src);
  EXPECT_EQ(same.rotation, Eigen::Matrix3d::Identity());
  EXPECT_LT(same.translation.norm(), 1e-15);

  const std::vector<Point3> target{{1, 1, 1}, {2, 0, 1}, {0, 3, 1}};
  std::vector<Point3> shifted;
  for (const auto& p : target) shifted.push_back(p + Point3(-1, 2, 0));
  EXPECT_LT((centroid_align(shifted, target).translation - Point3(1, -2, 0)).norm(), 1e-12);

  EXPECT_THROW(centroid_align(std::vector<Point3>{}, target), Error);
}

TEST(CentroidAlign, MatchesCentroidsOnRandomClouds) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = random_object(rng, 1 + rng.below(40));
    auto b = random_object(rng, 1 + rng.below(40));
    for (auto& p : b) p += Point3(rng.normal(0, 3), rng.normal(0, 3), 0);
    const auto t = centroid_align(a, b);
    EXPECT_LT((centroid(apply_transform(t, a)) - centroid(b)).norm(), 1e-12);
  }
}

TEST(FitRigid, RecoversExactTransformAndHandlesReflection) {
  Rng rng(3);
  const auto src = random_object(rng, 30);
  RigidTransform truth;
  truth.rotation = axis_angle({0.3, -0.2, 1.0}, 0.7);
  truth.translation = {1, 2, 3};
  const auto dst = apply_transform(truth, src);
  const auto fit = fit_rigid(src, dst);
  EXPECT_LT((fit.matrix() - truth.matrix()).cwiseAbs().maxCoeff(), 1e-12);
  // A mirrored planar target forces the reflection branch; the result must stay proper.
  std::vector<Point3> planar, mirrored;
  for (int i = 0; i < 10; ++i) {
    planar.emplace_back(rng.normal(), rng.normal(), 0.0);
    mirrored.emplace_back(planar.back().x(), -planar.back().y(), 0.0);
  }
  EXPECT_TRUE(fit_rigid(planar, mirrored).is_valid(1e-9));
}

TEST(IcpRegister, RecoversKnownTransform) {
  Rng rng(4);
  const auto src = random_object(rng, 200);
  RigidTransform truth = RigidTransform::from_yaw(15.0 * std::numbers::pi / 180.0, {0.5, -0.3, 0.1});
  const auto dst = apply_transform(truth, src);
  const auto res = icp_register(src, dst, centroid_align(src, dst));
  EXPECT_LT(rotation_angle(res.transform.rotation.transpose() * truth.rotation), 1e-6);
  EXPECT_LT((res.transform.translation - truth.translation).norm(), 1e-6);
  EXPECT_TRUE(res.transform.is_valid(1e-9));
  for (std::size_t i = 1; i < res.rms_history.size(); ++i) EXPECT_LE(res.rms_history[i], res.rms_history[i - 1]);
}

TEST(IcpRegister, IdenticalCloudsConvergeImmediately) {
  Rng rng(5);
  const auto src = random_object(rng, 100);
  const auto res = icp_register(src, src, RigidTransform::identity());
  EXPECT_LT((res.transform.matrix() - Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT(res.rms_error, 1e-12);
  EXPECT_TRUE(res.converged);
  EXPECT_EQ(res.iterations_used, 1u);
}

TEST(IcpRegister, Errors) {
  const std::vector<Point3> line{{0, 0, 0}, {1, 0, 0}};
  const std::vector<Point3> target{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  auto kind_of = [&](std::span<const Point3> src, std::span<const Point3> dst) {
    try {
      icp_register(src, dst, RigidTransform::identity());
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::IoError;
  };
  EXPECT_EQ(kind_of(line, target), ErrorKind::DegenerateSource);
  const std::vector<Point3> collinear{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}};
  EXPECT_EQ(kind_of(collinear, target), ErrorKind::DegenerateSource);
  std::vector<Point3> far;
  for (const auto& p : target) far.push_back(p + Point3(100, 0, 0));
  EXPECT_EQ(kind_of(target, far), ErrorKind::NoOverlap);
}

TEST(IcpRegister, ValidatesConfig) {
  Rng rng(6);
  const auto src = random_object(rng, 20);
  RegistrationConfig cfg;
  cfg.max_iterations = 0;
  EXPECT_THROW(icp_register(src, src, RigidTransform::identity(), cfg), Error);
}

TEST(NearestNeighbor, GridMatchesBruteForce) {
  Rng rng(7);
  std::vector<Point3> pts;
  for (int i = 0; i < 3000; ++i) pts.emplace_back(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-1, 1));
  BruteForceSearch brute(pts, 0.4);
  GridHashSearch grid(pts, 0.4);
  for (int q = 0; q < 500; ++q) {
    const Point3 query(rng.uniform(-6, 6), rng.uniform(-6, 6), rng.uniform(-1.5, 1.5));
    const auto a = brute.nearest(query), b = grid.nearest(query);
    ASSERT_EQ(a.has_value(), b.has_value());
    if (a) {
      EXPECT_EQ(a->index, b->index);
      EXPECT_EQ(a->distance2, b->distance2);
    }
  }
}

TEST(IcpRegister, GridPathAgreesWithBruteForce) {
  Rng rng(8);
  const auto src = random_object(rng, 2500);
  const auto truth = RigidTransform::from_yaw(0.1, {0.05, 0.02, 0});
  const auto dst = apply_transform(truth, src);
  RegistrationConfig brute_cfg;
  brute_cfg.grid_search_threshold = 1000000;
  const auto a = icp_register(src, dst, centroid_align(src, dst), brute_cfg);
  const auto b = icp_register(src, dst, centroid_align(src, dst));
  EXPECT_EQ(a.transform, b.transform);
  EXPECT_EQ(a.rms_history, b.rms_history);
}
