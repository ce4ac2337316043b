#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "m2s/error.hpp"

namespace m2s {

using Point3 = Eigen::Vector3d;

enum class FrameTag { Sensor, World };

// Ordered points with per-point remission. Coordinates are held in double
// precision; scans read from disk are exactly representable as float32.
struct PointCloud {
  std::vector<Point3> points;
  std::vector<double> remission;
  FrameTag frame_tag = FrameTag::Sensor;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }

  void push_back(const Point3& p, double r) {
    points.push_back(p);
    remission.push_back(r);
  }

  void append(const PointCloud& other) {
    points.insert(points.end(), other.points.begin(), other.points.end());
    remission.insert(remission.end(), other.remission.begin(), other.remission.end());
  }

  void validate() const {
    if (points.size() != remission.size())
      throw Error(ErrorKind::ShapeError, "points and remission lengths differ");
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (!points[i].allFinite() || !std::isfinite(remission[i]))
        throw Error(ErrorKind::NumericError, "non-finite value at point " + std::to_string(i));
    }
  }

  bool operator==(const PointCloud&) const = default;
};

// Per-point semantic class and instance id, parallel to a PointCloud.
struct LabelSet {
  std::vector<std::uint16_t> semantic;
  std::vector<std::uint16_t> instance;

  std::size_t size() const { return semantic.size(); }

  void push_back(std::uint16_t sem, std::uint16_t inst) {
    semantic.push_back(sem);
    instance.push_back(inst);
  }

  void append(const LabelSet& other) {
    semantic.insert(semantic.end(), other.semantic.begin(), other.semantic.end());
    instance.insert(instance.end(), other.instance.begin(), other.instance.end());
  }

  std::uint32_t packed(std::size_t i) const {
    return (static_cast<std::uint32_t>(instance[i]) << 16) | semantic[i];
  }

  static LabelSet from_packed(std::span<const std::uint32_t> values) {
    LabelSet out;
    out.semantic.reserve(values.size());
    out.instance.reserve(values.size());
    for (std::uint32_t v : values)
      out.push_back(static_cast<std::uint16_t>(v & 0xFFFFu), static_cast<std::uint16_t>(v >> 16));
    return out;
  }

  std::uint16_t max_instance() const {
    std::uint16_t m = 0;
    for (auto v : instance) m = v > m ? v : m;
    return m;
  }

  bool operator==(const LabelSet&) const = default;
};

inline std::vector<Point3> gather_points(const PointCloud& cloud, std::span<const std::size_t> indices) {
  std::vector<Point3> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(cloud.points.at(i));
  return out;
}

inline Point3 centroid(std::span<const Point3> points) {
  if (points.empty()) throw Error(ErrorKind::EmptyInput, "centroid of empty point set");
  Point3 c = Point3::Zero();
  for (const auto& p : points) c += p;
  return c / static_cast<double>(points.size());
}

// Rounds every coordinate and remission value to the nearest float32, the
// precision of the on-disk format.
inline PointCloud quantize_to_float(PointCloud cloud) {
  for (auto& p : cloud.points)
    for (int k = 0; k < 3; ++k) p[k] = static_cast<double>(static_cast<float>(p[k]));
  for (auto& r : cloud.remission) r = static_cast<double>(static_cast<float>(r));
  return cloud;
}

}  // namespace m2s
