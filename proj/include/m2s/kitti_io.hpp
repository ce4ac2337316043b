#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "m2s/error.hpp"
#include "m2s/geometry.hpp"
#include "m2s/point_cloud.hpp"

namespace m2s {

using Bytes = std::vector<std::uint8_t>;

namespace detail {

template <typename T>
T load_le(const std::uint8_t* src) {
  std::array<std::uint8_t, sizeof(T)> buf;
  std::memcpy(buf.data(), src, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf.begin(), buf.end());
  return std::bit_cast<T>(buf);
}

template <typename T>
void store_le(T value, Bytes& out) {
  auto buf = std::bit_cast<std::array<std::uint8_t, sizeof(T)>>(value);
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf.begin(), buf.end());
  out.insert(out.end(), buf.begin(), buf.end());
}

inline std::string format_double(double v) {
  std::array<char, 32> buf;
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

inline bool parse_double(std::string_view tok, double& out) {
  // from_chars rejects a leading '+', which some writers emit.
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc() && ptr == tok.data() + tok.size();
}

inline std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

}  // namespace detail

// ---- scans -----------------------------------------------------------------

inline PointCloud parse_scan(std::span<const std::uint8_t> bytes) {
  if (bytes.size() % 16 != 0)
    throw Error(ErrorKind::MalformedScan, "byte length " + std::to_string(bytes.size()) + " is not a multiple of 16");
  const std::size_t n = bytes.size() / 16;
  PointCloud cloud;
  cloud.points.reserve(n);
  cloud.remission.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* p = bytes.data() + 16 * i;
    float v[4];
    for (int k = 0; k < 4; ++k) {
      v[k] = detail::load_le<float>(p + 4 * k);
      if (!std::isfinite(v[k]))
        throw Error(ErrorKind::MalformedScan, "non-finite value in point " + std::to_string(i));
    }
    cloud.push_back(Point3(v[0], v[1], v[2]), v[3]);
  }
  return cloud;
}

// Values are narrowed to float32; clouds that are float-representable
// (every parsed cloud) round-trip exactly.
inline Bytes write_scan(const PointCloud& cloud) {
  cloud.validate();
  Bytes out;
  out.reserve(cloud.size() * 16);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (int k = 0; k < 3; ++k) detail::store_le(static_cast<float>(cloud.points[i][k]), out);
    detail::store_le(static_cast<float>(cloud.remission[i]), out);
  }
  return out;
}

// ---- labels ----------------------------------------------------------------

inline LabelSet parse_labels(std::span<const std::uint8_t> bytes) {
  if (bytes.size() % 4 != 0)
    throw Error(ErrorKind::MalformedLabel, "byte length " + std::to_string(bytes.size()) + " is not a multiple of 4");
  std::vector<std::uint32_t> packed(bytes.size() / 4);
  for (std::size_t i = 0; i < packed.size(); ++i) packed[i] = detail::load_le<std::uint32_t>(bytes.data() + 4 * i);
  return LabelSet::from_packed(packed);
}

inline Bytes write_labels(const LabelSet& labels) {
  if (labels.semantic.size() != labels.instance.size())
    throw Error(ErrorKind::ShapeError, "semantic and instance lengths differ");
  Bytes out;
  out.reserve(labels.size() * 4);
  for (std::size_t i = 0; i < labels.size(); ++i) detail::store_le(labels.packed(i), out);
  return out;
}

// ---- poses and calibration -------------------------------------------------

inline constexpr double kPoseOrthonormalityTol = 1e-4;

namespace detail {

inline std::array<double, 12> parse_3x4(const std::vector<std::string>& toks, std::size_t first, ErrorKind kind,
                                        const std::string& where) {
  std::array<double, 12> m{};
  for (std::size_t k = 0; k < 12; ++k) {
    if (!parse_double(toks[first + k], m[k]) || !std::isfinite(m[k]))
      throw Error(kind, where + ": bad number '" + toks[first + k] + "'");
  }
  return m;
}

inline std::string format_3x4(const RigidTransform& t) {
  std::string line;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) {
      if (!line.empty()) line += ' ';
      line += format_double(c < 3 ? t.rotation(r, c) : t.translation[r]);
    }
  }
  return line;
}

}  // namespace detail

// Camera-frame 3x4 poses, one per line, converted to sensor-frame world poses
// T_world_velo = calib^-1 * T_cam * calib. Blank lines are skipped.
inline std::vector<RigidTransform> parse_poses(const std::string& text, const RigidTransform& calib) {
  const RigidTransform calib_inv = invert(calib);
  std::vector<RigidTransform> poses;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto toks = detail::split_ws(line);
    if (toks.empty()) continue;
    const std::string where = "line " + std::to_string(line_no);
    if (toks.size() != 12)
      throw Error(ErrorKind::MalformedPose, where + ": expected 12 values, got " + std::to_string(toks.size()));
    const auto m = detail::parse_3x4(toks, 0, ErrorKind::MalformedPose, where);
    const auto cam = RigidTransform::from_3x4(m);
    if (cam.orthonormality_error() > kPoseOrthonormalityTol)
      throw Error(ErrorKind::MalformedPose, where + ": rotation is not orthonormal");
    poses.push_back(calib_inv * cam * calib);
  }
  return poses;
}

inline std::string write_poses(std::span<const RigidTransform> velo_poses, const RigidTransform& calib) {
  const RigidTransform calib_inv = invert(calib);
  std::string out;
  for (const auto& p : velo_poses) out += detail::format_3x4(calib * p * calib_inv) + '\n';
  return out;
}

// Velodyne-to-camera transform from the `Tr:` line of calib.txt.
inline RigidTransform parse_calib(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    auto toks = detail::split_ws(line);
    if (toks.empty() || toks[0] != "Tr:") continue;
    if (toks.size() != 13) throw Error(ErrorKind::MalformedCalib, "Tr: expects 12 values");
    auto t = RigidTransform::from_3x4(detail::parse_3x4(toks, 1, ErrorKind::MalformedCalib, "Tr"));
    if (t.orthonormality_error() > kPoseOrthonormalityTol)
      throw Error(ErrorKind::MalformedCalib, "Tr rotation is not orthonormal");
    return t;
  }
  throw Error(ErrorKind::MalformedCalib, "no Tr: line");
}

inline std::string write_calib(const RigidTransform& calib) { return "Tr: " + detail::format_3x4(calib) + '\n'; }

// ---- files -----------------------------------------------------------------

inline Bytes read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes,
                        ErrorKind kind = ErrorKind::IoError) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(kind, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(kind, "write failed for " + path.string());
}

inline void write_text(const std::filesystem::path& path, const std::string& text,
                       ErrorKind kind = ErrorKind::IoError) {
  write_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()), kind);
}

inline PointCloud load_scan(const std::filesystem::path& path) { return parse_scan(read_bytes(path)); }
inline LabelSet load_labels(const std::filesystem::path& path) { return parse_labels(read_bytes(path)); }

inline std::string frame_name(std::size_t index) {
  std::ostringstream ss;
  ss << std::setw(6) << std::setfill('0') << index;
  return ss.str();
}

// ---- sequences -------------------------------------------------------------

// File listing of one SemanticKITTI sequence directory:
//   velodyne/NNNNNN.bin, labels/NNNNNN.label, poses.txt, calib.txt
struct SequenceIndex {
  std::vector<std::filesystem::path> scan_paths;
  std::vector<std::filesystem::path> label_paths;  // empty path: no labels for that scan
  std::vector<RigidTransform> poses;               // sensor-to-world
  RigidTransform calib_velo_to_cam;

  bool has_labels(std::size_t i) const { return !label_paths.at(i).empty(); }
};

inline SequenceIndex index_sequence(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  SequenceIndex idx;
  const fs::path velo = dir / "velodyne";
  if (!fs::is_directory(velo)) throw Error(ErrorKind::IoError, "missing directory " + velo.string());
  for (const auto& e : fs::directory_iterator(velo))
    if (e.path().extension() == ".bin") idx.scan_paths.push_back(e.path());
  std::sort(idx.scan_paths.begin(), idx.scan_paths.end());
  for (const auto& scan : idx.scan_paths) {
    fs::path label = dir / "labels" / scan.filename().replace_extension(".label");
    idx.label_paths.push_back(fs::exists(label) ? label : fs::path());
  }
  idx.calib_velo_to_cam = parse_calib(read_text(dir / "calib.txt"));
  idx.poses = parse_poses(read_text(dir / "poses.txt"), idx.calib_velo_to_cam);
  if (idx.poses.size() != idx.scan_paths.size())
    throw Error(ErrorKind::MalformedPose, "poses.txt has " + std::to_string(idx.poses.size()) + " poses for " +
                                              std::to_string(idx.scan_paths.size()) + " scans");
  return idx;
}

// Fully loaded sequence.
struct Sequence {
  std::string name = "00";
  std::vector<PointCloud> scans;
  std::vector<std::optional<LabelSet>> labels;
  std::vector<RigidTransform> poses;  // sensor-to-world, one per scan
  RigidTransform calib_velo_to_cam;

  std::size_t size() const { return scans.size(); }

  void validate() const {
    if (labels.size() != scans.size() || poses.size() != scans.size())
      throw Error(ErrorKind::ShapeError, "sequence scans, labels and poses lengths differ");
    for (std::size_t i = 0; i < scans.size(); ++i)
      if (labels[i] && labels[i]->size() != scans[i].size())
        throw Error(ErrorKind::MalformedLabel, "scan " + std::to_string(i) + ": label count differs from point count");
  }
};

inline Sequence load_sequence(const std::filesystem::path& dir) {
  const SequenceIndex idx = index_sequence(dir);
  Sequence seq;
  seq.name = dir.filename().empty() ? dir.parent_path().filename().string() : dir.filename().string();
  seq.poses = idx.poses;
  seq.calib_velo_to_cam = idx.calib_velo_to_cam;
  for (std::size_t i = 0; i < idx.scan_paths.size(); ++i) {
    seq.scans.push_back(load_scan(idx.scan_paths[i]));
    if (idx.has_labels(i))
      seq.labels.push_back(load_labels(idx.label_paths[i]));
    else
      seq.labels.emplace_back();
  }
  seq.validate();
  return seq;
}

inline void write_sequence(const std::filesystem::path& dir, const Sequence& seq) {
  namespace fs = std::filesystem;
  seq.validate();
  fs::create_directories(dir / "velodyne");
  fs::create_directories(dir / "labels");
  for (std::size_t i = 0; i < seq.size(); ++i) {
    write_bytes(dir / "velodyne" / (frame_name(i) + ".bin"), write_scan(seq.scans[i]));
    if (seq.labels[i]) write_bytes(dir / "labels" / (frame_name(i) + ".label"), write_labels(*seq.labels[i]));
  }
  write_text(dir / "poses.txt", write_poses(seq.poses, seq.calib_velo_to_cam));
  write_text(dir / "calib.txt", write_calib(seq.calib_velo_to_cam));
}

}  // namespace m2s
