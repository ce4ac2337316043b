#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "m2s/point_cloud.hpp"

namespace m2s {

struct Neighbor {
  std::size_t index;
  double distance2;
};

// Exact nearest neighbor within a fixed radius.
class RadiusSearch {
 public:
  virtual ~RadiusSearch() = default;
  virtual std::optional<Neighbor> nearest(const Point3& query) const = 0;
};

class BruteForceSearch final : public RadiusSearch {
 public:
  BruteForceSearch(std::span<const Point3> points, double radius) : points_(points), radius2_(radius * radius) {}

  std::optional<Neighbor> nearest(const Point3& q) const override {
    std::optional<Neighbor> best;
    for (std::size_t i = 0; i < points_.size(); ++i) {
      const double d2 = (points_[i] - q).squaredNorm();
      if (d2 <= radius2_ && (!best || d2 < best->distance2)) best = Neighbor{i, d2};
    }
    return best;
  }

 private:
  std::span<const Point3> points_;
  double radius2_;
};

// Uniform grid with cell edge = radius; a query inspects the 27 surrounding
// cells, which contain every point within the radius.
class GridHashSearch final : public RadiusSearch {
 public:
  GridHashSearch(std::span<const Point3> points, double radius)
      : points_(points), cell_(radius), radius2_(radius * radius) {
    for (std::size_t i = 0; i < points.size(); ++i) cells_[key(cell_of(points[i]))].push_back(i);
  }

  std::optional<Neighbor> nearest(const Point3& q) const override {
    std::optional<Neighbor> best;
    const auto c = cell_of(q);
    for (std::int64_t dx = -1; dx <= 1; ++dx)
      for (std::int64_t dy = -1; dy <= 1; ++dy)
        for (std::int64_t dz = -1; dz <= 1; ++dz) {
          auto it = cells_.find(key({c[0] + dx, c[1] + dy, c[2] + dz}));
          if (it == cells_.end()) continue;
          for (auto i : it->second) {
            const double d2 = (points_[i] - q).squaredNorm();
            if (d2 > radius2_) continue;
            // Lowest index wins ties, matching the brute-force scan.
            if (!best || d2 < best->distance2 || (d2 == best->distance2 && i < best->index)) best = Neighbor{i, d2};
          }
        }
    return best;
  }

 private:
  using Cell = std::array<std::int64_t, 3>;

  Cell cell_of(const Point3& p) const {
    return {static_cast<std::int64_t>(std::floor(p.x() / cell_)), static_cast<std::int64_t>(std::floor(p.y() / cell_)),
            static_cast<std::int64_t>(std::floor(p.z() / cell_))};
  }

  static std::uint64_t key(const Cell& c) {
    // 21 bits per axis.
    auto wrap = [](std::int64_t v) { return static_cast<std::uint64_t>(v) & 0x1FFFFFu; };
    return (wrap(c[0]) << 42) | (wrap(c[1]) << 21) | wrap(c[2]);
  }

  std::span<const Point3> points_;
  double cell_;
  double radius2_;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> cells_;
};

}  // namespace m2s
