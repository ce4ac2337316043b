#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "m2s/class_map.hpp"
#include "m2s/error.hpp"
#include "m2s/geometry.hpp"
#include "m2s/kitti_io.hpp"
#include "m2s/point_cloud.hpp"
#include "m2s/registration.hpp"

namespace m2s {

struct FusionConfig {
  std::set<std::uint16_t> hard_classes = default_hard_raw_classes();
  std::size_t window = 4;         // past scans K
  double moving_threshold = 0.2;  // meters of centroid displacement per scan
  bool register_moving = true;    // false: moving instances use pose composition only
  RegistrationConfig registration;

  void validate() const {
    if (window < 1) throw Error(ErrorKind::InvalidConfig, "window must be >= 1");
    if (!(moving_threshold >= 0.0)) throw Error(ErrorKind::InvalidConfig, "moving_threshold must be >= 0");
    if (hard_classes.empty()) throw Error(ErrorKind::InvalidConfig, "hard_classes must be nonempty");
    registration.validate();
  }

  bool is_hard(std::uint16_t semantic) const { return hard_classes.count(semantic) != 0; }
};

enum class Motion { Static, Moving };

struct InstanceTrack {
  std::uint16_t instance_id = 0;
  std::uint16_t class_id = 0;
  std::size_t first_scan = 0;
  std::size_t current_scan = 0;
  // indices[k] lists the points of the instance in scan first_scan + k.
  std::vector<std::vector<std::size_t>> indices;

  const std::vector<std::size_t>& in_scan(std::size_t scan) const { return indices.at(scan - first_scan); }
};

struct InstanceFusionReport {
  std::uint16_t instance_id = 0;
  std::uint16_t class_id = 0;
  Motion motion = Motion::Static;
  std::size_t appended = 0;
  bool registration_fallback = false;  // NoOverlap: centroid alignment was used instead
};

struct FusedScan {
  PointCloud cloud;                          // current scan first, fused points after
  LabelSet labels;                           // parallel to cloud
  std::vector<int> origin_index;             // per appended point: -1 ... -K
  std::vector<std::size_t> current_to_fused;  // identity over the current-scan prefix
  std::vector<InstanceFusionReport> reports;

  std::size_t current_size() const { return current_to_fused.size(); }
  std::size_t appended_size() const { return cloud.size() - current_size(); }

  PointCloud current_cloud() const {
    PointCloud out;
    out.frame_tag = cloud.frame_tag;
    out.points.assign(cloud.points.begin(), cloud.points.begin() + current_size());
    out.remission.assign(cloud.remission.begin(), cloud.remission.begin() + current_size());
    return out;
  }

  LabelSet current_labels() const {
    LabelSet out;
    out.semantic.assign(labels.semantic.begin(), labels.semantic.begin() + current_size());
    out.instance.assign(labels.instance.begin(), labels.instance.begin() + current_size());
    return out;
  }

  static FusedScan from_single(const PointCloud& cloud, const LabelSet& labels) {
    FusedScan out;
    out.cloud = cloud;
    out.labels = labels;
    out.current_to_fused.resize(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) out.current_to_fused[i] = i;
    return out;
  }
};

namespace detail {

inline const LabelSet& require_labels(const Sequence& seq, std::size_t scan) {
  if (scan >= seq.size()) throw Error(ErrorKind::ShapeError, "scan index out of range");
  if (!seq.labels[scan]) throw Error(ErrorKind::MissingLabels, "scan " + std::to_string(scan) + " has no labels");
  if (seq.labels[scan]->size() != seq.scans[scan].size())
    throw Error(ErrorKind::MalformedLabel, "scan " + std::to_string(scan) + ": label count differs from point count");
  return *seq.labels[scan];
}

inline std::size_t window_start(std::size_t scan_t, std::size_t window) { return scan_t >= window ? scan_t - window : 0; }

}  // namespace detail

inline InstanceTrack gather_instance_track(const Sequence& seq, std::size_t scan_t, std::uint16_t instance_id,
                                           std::size_t window) {
  InstanceTrack track;
  track.instance_id = instance_id;
  track.current_scan = scan_t;
  track.first_scan = detail::window_start(scan_t, window);
  for (std::size_t s = track.first_scan; s <= scan_t; ++s) {
    const auto& labels = detail::require_labels(seq, s);
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels.instance[i] == instance_id) idx.push_back(i);
    track.indices.push_back(std::move(idx));
  }
  const auto& current = track.indices.back();
  if (instance_id == 0 || current.empty())
    throw Error(ErrorKind::InstanceNotFound, "instance " + std::to_string(instance_id) + " not in scan " +
                                                 std::to_string(scan_t));
  track.class_id = seq.labels[scan_t]->semantic[current.front()];
  return track;
}

inline Motion classify_motion(const InstanceTrack& track, const Sequence& seq, double moving_threshold) {
  double max_step = 0.0;
  bool have_prev = false;
  std::size_t prev_scan = 0;
  Point3 prev_centroid;
  for (std::size_t k = 0; k < track.indices.size(); ++k) {
    if (track.indices[k].empty()) continue;
    const std::size_t s = track.first_scan + k;
    const auto world = apply_transform(seq.poses.at(s), gather_points(seq.scans[s], track.indices[k]));
    const Point3 c = centroid(world);
    if (have_prev) max_step = std::max(max_step, (c - prev_centroid).norm() / static_cast<double>(s - prev_scan));
    prev_centroid = c;
    prev_scan = s;
    have_prev = true;
  }
  return max_step > moving_threshold ? Motion::Moving : Motion::Static;
}

// Sparse multi-scan fusion: hard-class instances present in scan_t are
// gathered from the past window and appended in the current sensor frame.
// Static instances are placed by the pose chain; moving ones are additionally
// aligned onto the current instance by centroid initialization and ICP.
inline FusedScan fuse_scan(const Sequence& seq, std::size_t scan_t, const FusionConfig& config) {
  config.validate();
  const LabelSet& current_labels = detail::require_labels(seq, scan_t);
  const std::size_t first = detail::window_start(scan_t, config.window);
  for (std::size_t s = first; s < scan_t; ++s) detail::require_labels(seq, s);

  FusedScan out = FusedScan::from_single(seq.scans[scan_t], current_labels);

  std::set<std::uint16_t> instances;
  for (std::size_t i = 0; i < current_labels.size(); ++i)
    if (current_labels.instance[i] != 0 && config.is_hard(current_labels.semantic[i]))
      instances.insert(current_labels.instance[i]);

  const RigidTransform world_to_current = invert(seq.poses.at(scan_t));
  for (auto inst : instances) {
    const InstanceTrack track = gather_instance_track(seq, scan_t, inst, config.window);
    InstanceFusionReport report;
    report.instance_id = inst;
    report.class_id = track.class_id;
    report.motion = classify_motion(track, seq, config.moving_threshold);
    const auto current_pts = gather_points(seq.scans[scan_t], track.in_scan(scan_t));

    for (std::size_t k = 1; k <= scan_t - first; ++k) {
      const std::size_t s = scan_t - k;
      const auto& idx = track.in_scan(s);
      if (idx.empty()) continue;
      const RigidTransform by_pose = world_to_current * seq.poses.at(s);
      RigidTransform placement = by_pose;
      if (report.motion == Motion::Moving && config.register_moving) {
        const auto moved = apply_transform(by_pose, gather_points(seq.scans[s], idx));
        const RigidTransform init = centroid_align(moved, current_pts);
        RigidTransform refined = init;
        try {
          refined = icp_register(moved, current_pts, init, config.registration).transform;
        } catch (const Error& e) {
          if (e.kind() == ErrorKind::NoOverlap)
            report.registration_fallback = true;
          else if (e.kind() != ErrorKind::DegenerateSource)
            throw;
        }
        placement = refined * by_pose;
      }
      const LabelSet& past_labels = *seq.labels[s];
      for (auto i : idx) {
        out.cloud.push_back(placement.apply(seq.scans[s].points[i]), seq.scans[s].remission[i]);
        out.labels.push_back(past_labels.semantic[i], past_labels.instance[i]);
        out.origin_index.push_back(-static_cast<int>(k));
        ++report.appended;
      }
    }
    out.reports.push_back(report);
  }
  return out;
}

// Conventional dense fusion: every point of every scan in the window, placed
// by the pose chain. Used as the size and accuracy baseline.
inline FusedScan naive_full_fusion(const Sequence& seq, std::size_t scan_t, std::size_t window) {
  const LabelSet& current_labels = detail::require_labels(seq, scan_t);
  FusedScan out = FusedScan::from_single(seq.scans[scan_t], current_labels);
  const RigidTransform world_to_current = invert(seq.poses.at(scan_t));
  const std::size_t first = detail::window_start(scan_t, window);
  for (std::size_t k = 1; k <= scan_t - first; ++k) {
    const std::size_t s = scan_t - k;
    const LabelSet& labels = detail::require_labels(seq, s);
    const RigidTransform t = world_to_current * seq.poses.at(s);
    for (std::size_t i = 0; i < seq.scans[s].size(); ++i) {
      out.cloud.push_back(t.apply(seq.scans[s].points[i]), seq.scans[s].remission[i]);
      out.labels.push_back(labels.semantic[i], labels.instance[i]);
      out.origin_index.push_back(-static_cast<int>(k));
    }
  }
  return out;
}

}  // namespace m2s
