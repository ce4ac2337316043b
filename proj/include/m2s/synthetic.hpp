#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <vector>

#include "m2s/error.hpp"
#include "m2s/fusion.hpp"
#include "m2s/geometry.hpp"
#include "m2s/kitti_io.hpp"
#include "m2s/point_cloud.hpp"
#include "m2s/random.hpp"

namespace m2s {

enum class Shape { Box, Cylinder };

struct SyntheticObject {
  std::uint16_t semantic = 0;
  std::uint16_t instance = 0;
  Shape shape = Shape::Box;
  Eigen::Vector3d size{1.0, 1.0, 1.0};  // box: extents; cylinder: (radius, unused, height)
  double elevation = 0.0;               // height of the body origin above ground
  Eigen::Vector2d start{0.0, 0.0};      // world xy at scan 0
  Eigen::Vector2d velocity{0.0, 0.0};   // world xy displacement per scan
  double yaw0 = 0.0;
  double yaw_rate = 0.0;  // rad per scan
  std::size_t num_points = 100;
  double remission = 0.5;
};

// Objects on a ground plane observed by a sensor driving along +x. Every scan
// sees the same body-frame surface samples of each object, so object geometry
// is exactly known across scans.
struct SyntheticConfig {
  std::size_t num_scans = 5;
  double ego_speed = 1.0;      // meters per scan
  double ego_yaw_rate = 0.02;  // rad per scan
  double sensor_height = 1.73;
  std::size_t ground_points = 1500;
  double ground_extent = 25.0;
  std::uint16_t ground_class = 40;  // road
  double ground_remission = 0.25;
  double noise_sigma = 0.0;
  std::vector<SyntheticObject> objects;

  // Moving truck, static traffic sign, static person, static car, building.
  static SyntheticConfig default_scene() {
    SyntheticConfig c;
    auto add = [&](std::uint16_t sem, std::uint16_t inst, Shape shape, Eigen::Vector3d size, double elev,
                   Eigen::Vector2d start, Eigen::Vector2d vel, std::size_t n, double rem) {
      SyntheticObject o;
      o.semantic = sem;
      o.instance = inst;
      o.shape = shape;
      o.size = size;
      o.elevation = elev;
      o.start = start;
      o.velocity = vel;
      o.num_points = n;
      o.remission = rem;
      c.objects.push_back(o);
    };
    add(18, 1, Shape::Box, {4.0, 2.0, 2.5}, 0.0, {8.0, 3.5}, {0.5, 0.0}, 300, 0.55);
    add(81, 2, Shape::Box, {0.1, 0.8, 0.8}, 2.0, {12.0, -4.0}, {0.0, 0.0}, 60, 0.9);
    add(30, 3, Shape::Cylinder, {0.3, 0.0, 1.7}, 0.0, {6.0, -2.5}, {0.0, 0.0}, 80, 0.45);
    add(10, 4, Shape::Box, {4.0, 1.8, 1.5}, 0.0, {15.0, 6.0}, {0.0, 0.0}, 300, 0.35);
    add(50, 0, Shape::Box, {10.0, 6.0, 5.0}, 0.0, {20.0, -13.0}, {0.0, 0.0}, 600, 0.4);
    return c;
  }

  void validate() const {
    if (num_scans == 0) throw Error(ErrorKind::InvalidConfig, "num_scans must be positive");
    if (objects.empty()) throw Error(ErrorKind::InvalidConfig, "scene needs at least one object");
    for (const auto& o : objects)
      if (o.num_points == 0) throw Error(ErrorKind::InvalidConfig, "objects need a positive point count");
  }
};

struct ObjectTruth {
  std::uint16_t semantic = 0;
  std::uint16_t instance = 0;
  std::vector<Point3> body_points;
  std::vector<RigidTransform> body_to_world;             // per scan
  std::vector<std::vector<std::size_t>> scan_indices;  // per scan, parallel to body_points

  Point3 world_centroid(std::size_t scan) const { return centroid(apply_transform(body_to_world.at(scan), body_points)); }
};

struct SyntheticSequence {
  Sequence sequence;
  std::vector<ObjectTruth> objects;
};

// KITTI-style velodyne-to-camera extrinsics.
inline RigidTransform synthetic_calib() {
  RigidTransform c;
  c.rotation << 0, -1, 0, 0, 0, -1, 1, 0, 0;
  c.translation = Eigen::Vector3d(-0.004, -0.076, -0.27);
  return c;
}

namespace detail {

inline std::vector<Point3> sample_surface(const SyntheticObject& o, Rng& rng) {
  std::vector<Point3> pts;
  pts.reserve(o.num_points);
  for (std::size_t i = 0; i < o.num_points; ++i) {
    Point3 p;
    if (o.shape == Shape::Box) {
      const double sx = o.size.x(), sy = o.size.y(), sz = o.size.z();
      // Five faces (no bottom), chosen proportionally to area.
      const double a_top = sx * sy, a_x = sy * sz, a_y = sx * sz;
      const double total = a_top + 2 * a_x + 2 * a_y;
      const double pick = rng.uniform(0.0, total);
      const double u = rng.uniform(-0.5, 0.5), v = rng.uniform(0.0, 1.0);
      if (pick < a_top)
        p = Point3(u * sx, rng.uniform(-0.5, 0.5) * sy, sz);
      else if (pick < a_top + a_x)
        p = Point3(0.5 * sx, u * sy, v * sz);
      else if (pick < a_top + 2 * a_x)
        p = Point3(-0.5 * sx, u * sy, v * sz);
      else if (pick < a_top + 2 * a_x + a_y)
        p = Point3(u * sx, 0.5 * sy, v * sz);
      else
        p = Point3(u * sx, -0.5 * sy, v * sz);
    } else {
      const double r = o.size.x(), h = o.size.z();
      const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
      p = Point3(r * std::cos(theta), r * std::sin(theta), rng.uniform(0.0, h));
    }
    p.z() += o.elevation;
    pts.push_back(p);
  }
  return pts;
}

}  // namespace detail

inline SyntheticSequence make_synthetic_sequence(const SyntheticConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  SyntheticSequence out;
  Sequence& seq = out.sequence;
  seq.calib_velo_to_cam = synthetic_calib();

  std::vector<std::vector<double>> body_remission;
  for (const auto& o : config.objects) {
    ObjectTruth truth;
    truth.semantic = o.semantic;
    truth.instance = o.instance;
    truth.body_points = detail::sample_surface(o, rng);
    std::vector<double> rem;
    for (std::size_t i = 0; i < o.num_points; ++i) rem.push_back(std::clamp(o.remission + rng.uniform(-0.05, 0.05), 0.0, 1.0));
    body_remission.push_back(std::move(rem));
    out.objects.push_back(std::move(truth));
  }

  for (std::size_t s = 0; s < config.num_scans; ++s) {
    const double ds = static_cast<double>(s);
    const RigidTransform pose =
        RigidTransform::from_yaw(config.ego_yaw_rate * ds, Point3(config.ego_speed * ds, 0.0, config.sensor_height));
    const RigidTransform world_to_sensor = invert(pose);
    seq.poses.push_back(pose);

    PointCloud cloud;
    LabelSet labels;
    for (std::size_t g = 0; g < config.ground_points; ++g) {
      const Point3 local(rng.uniform(-config.ground_extent, config.ground_extent),
                         rng.uniform(-config.ground_extent, config.ground_extent), 0.0);
      Point3 world(pose.translation.x() + local.x(), pose.translation.y() + local.y(), 0.0);
      cloud.push_back(world_to_sensor.apply(world),
                      std::clamp(config.ground_remission + rng.uniform(-0.05, 0.05), 0.0, 1.0));
      labels.push_back(config.ground_class, 0);
    }
    for (std::size_t k = 0; k < config.objects.size(); ++k) {
      const auto& o = config.objects[k];
      auto& truth = out.objects[k];
      const RigidTransform body_to_world =
          RigidTransform::from_yaw(o.yaw0 + o.yaw_rate * ds, Point3(o.start.x() + o.velocity.x() * ds,
                                                                    o.start.y() + o.velocity.y() * ds, 0.0));
      truth.body_to_world.push_back(body_to_world);
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < truth.body_points.size(); ++i) {
        Point3 p = world_to_sensor.apply(body_to_world.apply(truth.body_points[i]));
        if (config.noise_sigma > 0.0)
          for (int a = 0; a < 3; ++a) p[a] += rng.normal(0.0, config.noise_sigma);
        idx.push_back(cloud.size());
        cloud.push_back(p, body_remission[k][i]);
        labels.push_back(o.semantic, o.instance);
      }
      truth.scan_indices.push_back(std::move(idx));
    }
    seq.scans.push_back(std::move(cloud));
    seq.labels.emplace_back(std::move(labels));
  }
  return out;
}

// ---- single-scan scenes ----------------------------------------------------

struct BlobScene {
  PointCloud cloud;
  LabelSet labels;
  std::vector<int> object_of_point;  // blob index for target-class points, -1 otherwise
  std::size_t num_objects = 0;
};

// Ball-shaped blobs of `target_class` whose centers are at least
// diameter + gap apart, mixed with labeled background clutter. The
// background carries instance ids up to `existing_instances`.
inline BlobScene make_blob_scene(std::uint64_t seed, std::size_t num_objects, std::uint16_t target_class,
                                 double diameter = 0.8, double gap = 3.0, std::uint16_t existing_instances = 7) {
  if (num_objects == 0) throw Error(ErrorKind::InvalidConfig, "num_objects must be positive");
  Rng rng(seed);
  BlobScene scene;
  scene.num_objects = num_objects;
  std::vector<Point3> centers;
  while (centers.size() < num_objects) {
    Point3 c(rng.uniform(-20, 20), rng.uniform(-20, 20), rng.uniform(0.5, 3.0));
    bool ok = true;
    for (const auto& o : centers) ok = ok && (o - c).norm() >= diameter + gap;
    if (ok) centers.push_back(c);
  }
  const double radius = 0.5 * diameter;
  for (std::size_t k = 0; k < num_objects; ++k) {
    const std::size_t n = 20 + rng.below(41);
    for (std::size_t i = 0; i < n; ++i) {
      Point3 d;
      do {
        d = Point3(rng.uniform(-radius, radius), rng.uniform(-radius, radius), rng.uniform(-radius, radius));
      } while (d.norm() > radius);
      scene.cloud.push_back(centers[k] + d, rng.uniform(0.6, 1.0));
      scene.labels.push_back(target_class, 0);
      scene.object_of_point.push_back(static_cast<int>(k));
    }
  }
  for (std::size_t i = 0; i < 400; ++i) {
    scene.cloud.push_back(Point3(rng.uniform(-25, 25), rng.uniform(-25, 25), 0.0), rng.uniform(0.1, 0.3));
    const bool is_car = i % 4 == 0;
    scene.labels.push_back(is_car ? 10 : 40,
                           is_car ? static_cast<std::uint16_t>(1 + (i / 4) % existing_instances) : 0);
    scene.object_of_point.push_back(-1);
  }
  return scene;
}

// Training and evaluation scans for the sparse-hard-instance study: the hard
// instance has few points in the single scan and many in the fused scan.
struct SparseHardScene {
  FusedScan train;
  PointCloud eval_cloud;
  LabelSet eval_labels;
  std::uint16_t hard_class = 30;
};

inline SparseHardScene make_sparse_hard_scene(std::uint64_t seed, std::size_t sparse_points = 5,
                                              std::size_t dense_points = 50) {
  Rng rng(seed);
  SparseHardScene scene;
  SyntheticObject person;
  person.semantic = 30;
  person.instance = 1;
  person.shape = Shape::Cylinder;
  person.size = {0.3, 0.0, 1.7};
  person.num_points = dense_points;
  SyntheticObject building;
  building.semantic = 50;
  building.shape = Shape::Box;
  building.size = {4.0, 8.0, 4.0};
  building.num_points = 120;

  const Point3 person_at(3.0, 2.0, -1.73);
  const Point3 building_at(7.0, -3.0, -1.73);
  auto emit = [&](PointCloud& cloud, LabelSet& labels, bool sparse, std::vector<Point3>* extra,
                  std::vector<double>* extra_rem) {
    for (std::size_t g = 0; g < 200; ++g) {
      cloud.push_back(Point3(rng.uniform(-10, 10), rng.uniform(-10, 10), -1.73), rng.uniform(0.15, 0.3));
      labels.push_back(40, 0);
    }
    for (const auto& p : detail::sample_surface(building, rng)) {
      cloud.push_back(p + building_at, rng.uniform(0.35, 0.5));
      labels.push_back(50, 0);
    }
    const auto body = detail::sample_surface(person, rng);
    for (std::size_t i = 0; i < body.size(); ++i) {
      const double r = rng.uniform(0.4, 0.55);
      if (!sparse || i < sparse_points) {
        cloud.push_back(body[i] + person_at, r);
        labels.push_back(30, 1);
      } else {
        extra->push_back(body[i] + person_at);
        extra_rem->push_back(r);
      }
    }
  };

  PointCloud train_cloud;
  LabelSet train_labels;
  std::vector<Point3> extra;
  std::vector<double> extra_rem;
  emit(train_cloud, train_labels, true, &extra, &extra_rem);
  scene.train = FusedScan::from_single(train_cloud, train_labels);
  for (std::size_t i = 0; i < extra.size(); ++i) {
    scene.train.cloud.push_back(extra[i], extra_rem[i]);
    scene.train.labels.push_back(30, 1);
    scene.train.origin_index.push_back(-1 - static_cast<int>(i % 4));
  }
  emit(scene.eval_cloud, scene.eval_labels, false, nullptr, nullptr);
  return scene;
}

}  // namespace m2s
