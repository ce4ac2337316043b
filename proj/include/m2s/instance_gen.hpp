#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "m2s/error.hpp"
#include "m2s/point_cloud.hpp"

namespace m2s {

struct InstanceGenConfig {
  std::uint16_t target_class = 81;  // traffic-sign
  double stop_distance = 2.0;       // meters; also the implicit clustering scale
  std::size_t min_cluster_points = 5;

  void validate() const {
    if (!(stop_distance > 0.0)) throw Error(ErrorKind::InvalidConfig, "stop_distance must be positive");
    if (min_cluster_points < 1) throw Error(ErrorKind::InvalidConfig, "min_cluster_points must be >= 1");
  }
};

inline std::vector<std::size_t> filter_by_class(const PointCloud& cloud, const LabelSet& labels, std::uint16_t class_id) {
  if (cloud.size() != labels.size()) throw Error(ErrorKind::ShapeError, "cloud and labels lengths differ");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels.semantic[i] == class_id) out.push_back(i);
  return out;
}

// Greedy farthest point sampling. The seed is the point farthest from the
// centroid; sampling stops once the best remaining min-distance falls below
// stop_distance. Ties resolve to the lowest index.
inline std::vector<std::size_t> farthest_point_sample(std::span<const Point3> points, double stop_distance) {
  if (points.empty()) throw Error(ErrorKind::EmptyInput, "farthest_point_sample on empty input");
  const Point3 c = centroid(points);
  std::size_t first = 0;
  double best = -1.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double d = (points[i] - c).squaredNorm();
    if (d > best) {
      best = d;
      first = i;
    }
  }
  std::vector<std::size_t> keys{first};
  // Squared min-distance of every point to the chosen set.
  std::vector<double> min_d2(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) min_d2[i] = (points[i] - points[first]).squaredNorm();
  const double stop2 = stop_distance * stop_distance;
  while (keys.size() < points.size()) {
    std::size_t next = 0;
    double far = -1.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (min_d2[i] > far) {
        far = min_d2[i];
        next = i;
      }
    }
    if (far < stop2) break;
    keys.push_back(next);
    for (std::size_t i = 0; i < points.size(); ++i)
      min_d2[i] = std::min(min_d2[i], (points[i] - points[next]).squaredNorm());
  }
  return keys;
}

// Position in `keypoints` of each point's nearest keypoint (lowest position on ties).
inline std::vector<std::size_t> cluster_by_keypoints(std::span<const Point3> points, std::span<const std::size_t> keypoints) {
  if (keypoints.empty()) throw Error(ErrorKind::EmptyInput, "cluster_by_keypoints without keypoints");
  for (auto k : keypoints)
    if (k >= points.size()) throw Error(ErrorKind::ShapeError, "keypoint index out of range");
  std::vector<std::size_t> assign(points.size(), 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < keypoints.size(); ++k) {
      const double d = (points[i] - points[keypoints[k]]).squaredNorm();
      if (d < best) {
        best = d;
        assign[i] = k;
      }
    }
  }
  return assign;
}

// Assigns fresh instance ids to target-class clusters. Ids start at one past
// the largest id already present and follow keypoint order; clusters smaller
// than min_cluster_points get instance 0.
inline LabelSet generate_instance_ids(const PointCloud& cloud, const LabelSet& labels, const InstanceGenConfig& config) {
  config.validate();
  LabelSet out = labels;
  const auto idx = filter_by_class(cloud, labels, config.target_class);
  if (idx.empty()) return out;

  const auto pts = gather_points(cloud, idx);
  const auto keys = farthest_point_sample(pts, config.stop_distance);
  const auto assign = cluster_by_keypoints(pts, keys);

  std::vector<std::size_t> counts(keys.size(), 0);
  for (auto a : assign) ++counts[a];

  std::uint32_t next_id = static_cast<std::uint32_t>(labels.max_instance()) + 1;
  std::vector<std::uint16_t> ids(keys.size(), 0);
  for (std::size_t k = 0; k < keys.size(); ++k) {
    if (counts[k] < config.min_cluster_points) continue;
    if (next_id > 0xFFFF) throw Error(ErrorKind::NumericError, "instance id space exhausted");
    ids[k] = static_cast<std::uint16_t>(next_id++);
  }
  for (std::size_t i = 0; i < idx.size(); ++i) out.instance[idx[i]] = ids[assign[i]];
  return out;
}

}  // namespace m2s
