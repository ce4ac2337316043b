#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "m2s/error.hpp"
#include "m2s/fusion.hpp"
#include "m2s/kitti_io.hpp"
#include "m2s/random.hpp"

namespace m2s {

// One hard-class instance occurrence: its single-scan points and the same
// instance after fusion. fused_cloud starts with the single-scan points.
struct InstanceEntry {
  std::string sequence;
  std::size_t scan = 0;
  std::uint16_t instance_id = 0;
  std::uint16_t class_id = 0;
  PointCloud single_cloud;
  LabelSet single_labels;
  PointCloud fused_cloud;
  LabelSet fused_labels;
  std::vector<int> fused_origin;  // 0 for single-scan points, -k for appended ones

  bool operator==(const InstanceEntry&) const = default;
};

struct InstanceDatabase {
  std::vector<InstanceEntry> entries;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
  bool operator==(const InstanceDatabase&) const = default;
};

// Entries are stored at float32 precision so that save/load is lossless.
inline InstanceDatabase build_instance_db(const Sequence& seq, const FusionConfig& config) {
  InstanceDatabase db;
  for (std::size_t t = 0; t < seq.size(); ++t) {
    const FusedScan fused = fuse_scan(seq, t, config);
    for (const auto& report : fused.reports) {
      InstanceEntry e;
      e.sequence = seq.name;
      e.scan = t;
      e.instance_id = report.instance_id;
      e.class_id = report.class_id;
      for (std::size_t i = 0; i < fused.current_size(); ++i) {
        if (fused.labels.instance[i] != report.instance_id) continue;
        e.single_cloud.push_back(fused.cloud.points[i], fused.cloud.remission[i]);
        e.single_labels.push_back(fused.labels.semantic[i], fused.labels.instance[i]);
      }
      e.fused_cloud = e.single_cloud;
      e.fused_labels = e.single_labels;
      e.fused_origin.assign(e.single_cloud.size(), 0);
      for (std::size_t i = fused.current_size(); i < fused.cloud.size(); ++i) {
        if (fused.labels.instance[i] != report.instance_id) continue;
        e.fused_cloud.push_back(fused.cloud.points[i], fused.cloud.remission[i]);
        e.fused_labels.push_back(fused.labels.semantic[i], fused.labels.instance[i]);
        e.fused_origin.push_back(fused.origin_index[i - fused.current_size()]);
      }
      e.single_cloud = quantize_to_float(std::move(e.single_cloud));
      e.fused_cloud = quantize_to_float(std::move(e.fused_cloud));
      db.entries.push_back(std::move(e));
    }
  }
  return db;
}

namespace detail {

inline std::string entry_dir_name(const InstanceEntry& e) {
  std::ostringstream ss;
  ss << e.sequence << '_' << frame_name(e.scan) << '_' << e.instance_id;
  return ss.str();
}

}  // namespace detail

// Layout: <dir>/manifest.txt plus one subdirectory per entry holding
// single.bin, single.label, fused.bin, fused.label and fused.origin.
inline void save_instance_db(const InstanceDatabase& db, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::DbWriteError, "cannot create " + dir.string() + ": " + ec.message());
  std::string manifest = "# sequence scan instance class directory\n";
  for (const auto& e : db.entries) {
    const std::string name = detail::entry_dir_name(e);
    const fs::path sub = dir / name;
    fs::create_directories(sub, ec);
    if (ec) throw Error(ErrorKind::DbWriteError, "cannot create " + sub.string() + ": " + ec.message());
    write_bytes(sub / "single.bin", write_scan(e.single_cloud), ErrorKind::DbWriteError);
    write_bytes(sub / "single.label", write_labels(e.single_labels), ErrorKind::DbWriteError);
    write_bytes(sub / "fused.bin", write_scan(e.fused_cloud), ErrorKind::DbWriteError);
    write_bytes(sub / "fused.label", write_labels(e.fused_labels), ErrorKind::DbWriteError);
    std::string origin;
    for (int o : e.fused_origin) origin += std::to_string(o) + '\n';
    write_text(sub / "fused.origin", origin, ErrorKind::DbWriteError);
    manifest += e.sequence + ' ' + std::to_string(e.scan) + ' ' + std::to_string(e.instance_id) + ' ' +
                std::to_string(e.class_id) + ' ' + name + '\n';
  }
  write_text(dir / "manifest.txt", manifest, ErrorKind::DbWriteError);
}

inline InstanceDatabase build_instance_db(const Sequence& seq, const FusionConfig& config,
                                          const std::filesystem::path& out_path) {
  InstanceDatabase db = build_instance_db(seq, config);
  save_instance_db(db, out_path);
  return db;
}

inline InstanceDatabase load_instance_db(const std::filesystem::path& dir) {
  InstanceDatabase db;
  try {
    std::istringstream manifest(read_text(dir / "manifest.txt"));
    std::string line;
    while (std::getline(manifest, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::istringstream in(line);
      InstanceEntry e;
      unsigned inst = 0, cls = 0;
      std::string name;
      if (!(in >> e.sequence >> e.scan >> inst >> cls >> name))
        throw Error(ErrorKind::DbReadError, "bad manifest line: " + line);
      e.instance_id = static_cast<std::uint16_t>(inst);
      e.class_id = static_cast<std::uint16_t>(cls);
      const auto sub = dir / name;
      e.single_cloud = load_scan(sub / "single.bin");
      e.single_labels = load_labels(sub / "single.label");
      e.fused_cloud = load_scan(sub / "fused.bin");
      e.fused_labels = load_labels(sub / "fused.label");
      std::istringstream origin(read_text(sub / "fused.origin"));
      int o = 0;
      while (origin >> o) e.fused_origin.push_back(o);
      if (e.single_labels.size() != e.single_cloud.size() || e.fused_labels.size() != e.fused_cloud.size() ||
          e.fused_origin.size() != e.fused_cloud.size() || e.fused_cloud.size() < e.single_cloud.size())
        throw Error(ErrorKind::DbReadError, "inconsistent entry " + name);
      db.entries.push_back(std::move(e));
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::DbReadError) throw;
    throw Error(ErrorKind::DbReadError, e.what());
  }
  return db;
}

// ---- copy-paste augmentation -----------------------------------------------

struct PasteConfig {
  double half_extent_x = 20.0;  // meters; pasted centroids land in [-x, x] x [-y, y]
  double half_extent_y = 20.0;
};

struct PasteRecord {
  std::size_t entry = 0;
  double yaw = 0.0;
  Eigen::Vector2d position = Eigen::Vector2d::Zero();
  RigidTransform single_transform;
  RigidTransform fused_transform;
  std::uint16_t new_instance_id = 0;
};

struct PasteResult {
  FusedScan scan;
  std::vector<PasteRecord> pastes;
};

// Draws n entries and pastes each pair with one shared transform: the
// single-scan member into the current-scan prefix, the fused member's extra
// points into the appended region.
inline PasteResult sample_and_paste(const FusedScan& scan, const InstanceDatabase& db, std::size_t n,
                                    std::uint64_t rng_seed, const PasteConfig& config = {}) {
  PasteResult result;
  if (n == 0) {
    result.scan = scan;
    return result;
  }
  if (db.empty()) throw Error(ErrorKind::EmptyDatabase, "cannot paste from an empty instance database");

  Rng rng(rng_seed);
  std::uint32_t next_id = static_cast<std::uint32_t>(scan.labels.max_instance()) + 1;
  for (std::size_t p = 0; p < n; ++p) {
    PasteRecord rec;
    rec.entry = static_cast<std::size_t>(rng.below(db.size()));
    rec.yaw = rng.uniform(0.0, 2.0 * std::numbers::pi);
    rec.position.x() = rng.uniform(-config.half_extent_x, config.half_extent_x);
    rec.position.y() = rng.uniform(-config.half_extent_y, config.half_extent_y);
    if (next_id > 0xFFFF) throw Error(ErrorKind::NumericError, "instance id space exhausted");
    rec.new_instance_id = static_cast<std::uint16_t>(next_id++);
    const auto& e = db.entries[rec.entry];
    const Point3 pivot = e.single_cloud.empty() ? Point3::Zero() : centroid(e.single_cloud.points);
    const RigidTransform to_origin = RigidTransform::from_translation(Point3(-pivot.x(), -pivot.y(), 0.0));
    const RigidTransform placed = RigidTransform::from_yaw(rec.yaw, Point3(rec.position.x(), rec.position.y(), 0.0));
    rec.single_transform = placed * to_origin;
    rec.fused_transform = rec.single_transform;
    result.pastes.push_back(rec);
  }

  FusedScan& out = result.scan;
  const std::size_t old_current = scan.current_size();
  out.cloud.frame_tag = scan.cloud.frame_tag;
  auto copy_range = [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      out.cloud.push_back(scan.cloud.points[i], scan.cloud.remission[i]);
      out.labels.push_back(scan.labels.semantic[i], scan.labels.instance[i]);
    }
  };
  copy_range(0, old_current);
  for (const auto& rec : result.pastes) {
    const auto& e = db.entries[rec.entry];
    for (std::size_t i = 0; i < e.single_cloud.size(); ++i) {
      out.cloud.push_back(rec.single_transform.apply(e.single_cloud.points[i]), e.single_cloud.remission[i]);
      out.labels.push_back(e.single_labels.semantic[i], rec.new_instance_id);
    }
  }
  out.current_to_fused.resize(out.cloud.size());
  for (std::size_t i = 0; i < out.cloud.size(); ++i) out.current_to_fused[i] = i;
  copy_range(old_current, scan.cloud.size());
  out.origin_index = scan.origin_index;
  for (const auto& rec : result.pastes) {
    const auto& e = db.entries[rec.entry];
    for (std::size_t i = e.single_cloud.size(); i < e.fused_cloud.size(); ++i) {
      out.cloud.push_back(rec.fused_transform.apply(e.fused_cloud.points[i]), e.fused_cloud.remission[i]);
      out.labels.push_back(e.fused_labels.semantic[i], rec.new_instance_id);
      out.origin_index.push_back(e.fused_origin[i]);
    }
  }
  out.reports = scan.reports;
  return result;
}

}  // namespace m2s
