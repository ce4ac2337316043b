#pragma once

#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "m2s/m2s.hpp"

namespace m2s::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2 };

namespace detail {

inline KeyValueConfig load_config(const std::string& path) {
  return path.empty() ? KeyValueConfig{} : KeyValueConfig::load(path);
}

inline fs::path strip_bin(const fs::path& p) { return p.extension() == ".bin" ? fs::path(p).replace_extension() : p; }

inline void write_fused(const fs::path& base, const FusedScan& fused) {
  if (base.has_parent_path()) fs::create_directories(base.parent_path());
  write_bytes(fs::path(base).concat(".bin"), write_scan(fused.cloud));
  write_bytes(fs::path(base).concat(".label"), write_labels(fused.labels));
  std::string origin = "# current " + std::to_string(fused.current_size()) + "\n";
  for (int o : fused.origin_index) origin += std::to_string(o) + '\n';
  write_text(fs::path(base).concat(".origin"), origin);
}

inline std::vector<fs::path> label_files(const fs::path& dir) {
  const fs::path root = fs::is_directory(dir / "labels") ? dir / "labels" : dir;
  if (!fs::is_directory(root)) throw Error(ErrorKind::IoError, "not a directory: " + root.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(root))
    if (e.path().extension() == ".label") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

// Returns the process exit code: 0 success, 1 usage error, 2 data error.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-scan to single-scan distillation toolkit for LiDAR semantic segmentation", "m2s"};
  app.require_subcommand(1);

  // inspect
  std::string inspect_path;
  auto* inspect = app.add_subcommand("inspect", "Print a summary of a .bin scan or .label file");
  inspect->add_option("file", inspect_path, "Scan or label file")->required();

  // gen-instances
  int gi_class = -1;
  double gi_stop = 2.0;
  std::size_t gi_min = 5;
  std::string gi_scan, gi_labels, gi_out, gi_seq;
  auto* gen = app.add_subcommand("gen-instances", "Assign instance ids to one class by FPS + keypoint clustering");
  gen->add_option("--class", gi_class, "Raw semantic class id")->required();
  gen->add_option("--stop-distance", gi_stop, "FPS stop distance in meters")->capture_default_str();
  gen->add_option("--min-points", gi_min, "Smallest cluster that receives an id")->capture_default_str();
  gen->add_option("--scan", gi_scan, "Scan file (.bin)");
  gen->add_option("--labels", gi_labels, "Label file (.label)");
  gen->add_option("--seq", gi_seq, "Sequence directory; every labeled scan is processed");
  gen->add_option("--out", gi_out, "Output label file, or output directory with --seq")->required();

  // fuse
  std::string fuse_seq, fuse_out, fuse_config;
  std::size_t fuse_scan_idx = 0;
  std::optional<std::size_t> fuse_window;
  auto* fuse = app.add_subcommand("fuse", "Sparse multi-scan fusion of hard-class instances");
  fuse->add_option("--seq", fuse_seq, "Sequence directory")->required();
  fuse->add_option("--scan", fuse_scan_idx, "Current scan index")->required();
  fuse->add_option("--window", fuse_window, "Number of past scans");
  fuse->add_option("--out", fuse_out, "Output base path (.bin, .label and .origin are written)");
  fuse->add_option("--config", fuse_config, "key = value config file");

  // build-augdb
  std::string db_seq, db_out, db_config;
  std::optional<std::size_t> db_window;
  auto* augdb = app.add_subcommand("build-augdb", "Build the paired single/fused instance database");
  augdb->add_option("--seq", db_seq, "Sequence directory")->required();
  augdb->add_option("--out", db_out, "Database directory")->required();
  augdb->add_option("--window", db_window, "Number of past scans");
  augdb->add_option("--config", db_config, "key = value config file");

  // loss-check
  std::uint64_t lc_seed = 0;
  std::size_t lc_cases = 100;
  auto* loss_check = app.add_subcommand("loss-check", "Verify analytic gradients against finite differences");
  loss_check->add_option("--seed", lc_seed, "Random seed")->capture_default_str();
  loss_check->add_option("--cases", lc_cases, "Random cases per loss")->capture_default_str();

  // train-toy
  std::uint64_t tt_seed = 0;
  std::size_t tt_steps = 200;
  std::string tt_config;
  auto* train = app.add_subcommand("train-toy", "Teacher/student distillation on a synthetic sequence");
  train->add_option("--seed", tt_seed, "Random seed")->capture_default_str();
  train->add_option("--steps", tt_steps, "Training steps")->capture_default_str();
  train->add_option("--config", tt_config, "key = value config file");

  // eval-miou
  std::string ev_pred, ev_gt, ev_map;
  auto* eval = app.add_subcommand("eval-miou", "Per-class IoU and mIoU of predicted labels");
  eval->add_option("--pred", ev_pred, "Directory of predicted .label files")->required();
  eval->add_option("--gt", ev_gt, "Directory of ground-truth .label files")->required();
  eval->add_option("--classmap", ev_map, "Class map config (default: SemanticKITTI)");

  // make-synthetic
  std::uint64_t ms_seed = 0;
  std::string ms_out, ms_config;
  std::optional<std::size_t> ms_scans;
  auto* synth = app.add_subcommand("make-synthetic", "Write a synthetic labeled sequence");
  synth->add_option("--seed", ms_seed, "Random seed")->capture_default_str();
  synth->add_option("--out", ms_out, "Output sequence directory")->required();
  synth->add_option("--scans", ms_scans, "Number of scans (default 5)");
  synth->add_option("--config", ms_config, "key = value config file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*inspect) {
      const fs::path p = inspect_path;
      if (p.extension() == ".bin") {
        const PointCloud cloud = load_scan(p);
        out << "points: " << cloud.size() << "\n";
        if (!cloud.empty()) {
          Point3 lo = cloud.points[0], hi = cloud.points[0];
          for (const auto& q : cloud.points) {
            lo = lo.cwiseMin(q);
            hi = hi.cwiseMax(q);
          }
          out << std::setprecision(6) << "bbox min: " << lo.x() << ' ' << lo.y() << ' ' << lo.z() << "\n"
              << "bbox max: " << hi.x() << ' ' << hi.y() << ' ' << hi.z() << "\n";
        }
      } else if (p.extension() == ".label") {
        const LabelSet labels = load_labels(p);
        const ClassMap names = ClassMap::semantic_kitti();
        out << "labels: " << labels.size() << "\n";
        std::map<std::uint16_t, std::size_t> hist;
        std::set<std::uint16_t> instances;
        for (std::size_t i = 0; i < labels.size(); ++i) {
          ++hist[labels.semantic[i]];
          if (labels.instance[i]) instances.insert(labels.instance[i]);
        }
        for (const auto& [cls, count] : hist) {
          auto it = names.raw_names.find(cls);
          out << "class " << cls << " (" << (it == names.raw_names.end() ? "?" : it->second) << "): " << count << "\n";
        }
        out << "instances: " << instances.size() << "\n";
      } else {
        err << "inspect: expected a .bin or .label file\n";
        return kUsage;
      }
    } else if (*gen) {
      InstanceGenConfig cfg;
      if (gi_class < 0 || gi_class > 0xFFFF) {
        err << "gen-instances: --class must be a 16-bit class id\n";
        return kUsage;
      }
      cfg.target_class = static_cast<std::uint16_t>(gi_class);
      cfg.stop_distance = gi_stop;
      cfg.min_cluster_points = gi_min;
      cfg.validate();
      if (!gi_seq.empty()) {
        const SequenceIndex idx = index_sequence(gi_seq);
        fs::create_directories(gi_out);
        std::size_t done = 0;
        for (std::size_t i = 0; i < idx.scan_paths.size(); ++i) {
          if (!idx.has_labels(i)) continue;
          const auto updated = generate_instance_ids(load_scan(idx.scan_paths[i]), load_labels(idx.label_paths[i]), cfg);
          write_bytes(fs::path(gi_out) / idx.label_paths[i].filename(), write_labels(updated));
          ++done;
        }
        out << "updated " << done << " label files\n";
      } else {
        if (gi_scan.empty() || gi_labels.empty()) {
          err << "gen-instances: give --scan and --labels, or --seq\n";
          return kUsage;
        }
        const LabelSet before = load_labels(gi_labels);
        const LabelSet after = generate_instance_ids(load_scan(gi_scan), before, cfg);
        write_bytes(gi_out, write_labels(after));
        std::set<std::uint16_t> fresh;
        for (std::size_t i = 0; i < after.size(); ++i)
          if (after.instance[i] != before.instance[i]) fresh.insert(after.instance[i]);
        out << "assigned " << fresh.size() << " instance ids\n";
      }
    } else if (*fuse) {
      FusionConfig cfg;
      apply_config(detail::load_config(fuse_config), cfg);
      if (fuse_window) cfg.window = *fuse_window;
      cfg.validate();
      const Sequence seq = load_sequence(fuse_seq);
      if (fuse_scan_idx >= seq.size()) {
        err << "fuse: scan " << fuse_scan_idx << " out of range (" << seq.size() << " scans)\n";
        return kData;
      }
      const FusedScan fused = fuse_scan(seq, fuse_scan_idx, cfg);
      if (!fuse_out.empty()) detail::write_fused(detail::strip_bin(fuse_out), fused);
      out << "current points: " << fused.current_size() << "\nappended points: " << fused.appended_size() << "\n";
      for (const auto& r : fused.reports) {
        out << "instance " << r.instance_id << " class " << r.class_id << ' '
            << (r.motion == Motion::Moving ? "moving" : "static") << " appended " << r.appended << "\n";
        if (r.registration_fallback)
          err << "warning: instance " << r.instance_id << " had no registration overlap; centroid alignment used\n";
      }
    } else if (*augdb) {
      FusionConfig cfg;
      apply_config(detail::load_config(db_config), cfg);
      if (db_window) cfg.window = *db_window;
      cfg.validate();
      const Sequence seq = load_sequence(db_seq);
      const InstanceDatabase db = build_instance_db(seq, cfg, db_out);
      out << "entries: " << db.size() << "\n";
    } else if (*loss_check) {
      const auto rows = run_gradient_checks(lc_seed, lc_cases);
      bool all = true;
      out << std::left << std::setw(30) << "check" << std::setw(8) << "cases" << std::setw(14) << "max_rel_err"
          << std::setw(10) << "tol" << "result\n";
      for (const auto& r : rows) {
        out << std::left << std::setw(30) << r.name << std::setw(8) << r.cases << std::setw(14) << std::scientific
            << std::setprecision(3) << r.max_rel_err << std::setw(10) << r.tolerance << std::defaultfloat
            << (r.pass() ? "PASS" : "FAIL") << "\n";
        all = all && r.pass();
      }
      if (!all) {
        err << "loss-check: gradient verification failed\n";
        return kData;
      }
    } else if (*train) {
      const ToyRunConfig cfg = toy_run_config(detail::load_config(tt_config));
      out << "step total seg_student seg_teacher feature logits affinity\n";
      auto result = run_toy_training(cfg, tt_seed, tt_steps, [&](std::size_t step, const LossBreakdown& l) {
        char line[256];
        std::snprintf(line, sizeof line, "%zu %.6f %.6f %.6f %.6f %.6f %.6f\n", step, l.total, l.terms.seg_student,
                      l.terms.seg_teacher, l.terms.feature, l.terms.logits, l.terms.affinity);
        out << line;
      });
      out << "\n" << format_iou_table(result.student_iou, ClassMap::semantic_kitti().train_names, "student");
    } else if (*eval) {
      const ClassMap map = ev_map.empty() ? ClassMap::semantic_kitti() : ClassMap::from_config(KeyValueConfig::load(ev_map));
      const auto preds = detail::label_files(ev_pred);
      ConfusionMatrix cm(static_cast<std::size_t>(map.num_train_classes()), {0});
      std::size_t files = 0;
      for (const auto& pred_path : preds) {
        fs::path gt_path = (fs::is_directory(fs::path(ev_gt) / "labels") ? fs::path(ev_gt) / "labels" : fs::path(ev_gt)) /
                           pred_path.filename();
        if (!fs::exists(gt_path)) throw Error(ErrorKind::IoError, "missing ground truth " + gt_path.string());
        const LabelSet p = load_labels(pred_path), g = load_labels(gt_path);
        if (p.size() != g.size()) throw Error(ErrorKind::ShapeError, "point count differs for " + pred_path.filename().string());
        std::vector<int> pv, gv;
        for (auto v : p.semantic) pv.push_back(map.to_train(v));
        for (auto v : g.semantic) gv.push_back(map.to_train(v));
        cm.accumulate(pv, gv);
        ++files;
      }
      if (files == 0) throw Error(ErrorKind::IoError, "no prediction files in " + ev_pred);
      out << format_iou_table(miou(cm), map.train_names, "prediction");
    } else if (*synth) {
      SyntheticConfig cfg = SyntheticConfig::default_scene();
      apply_config(detail::load_config(ms_config), cfg);
      if (ms_scans) cfg.num_scans = *ms_scans;
      const auto s = make_synthetic_sequence(cfg, ms_seed);
      write_sequence(ms_out, s.sequence);
      out << "wrote " << s.sequence.size() << " scans to " << ms_out << "\n";
    }
  } catch (const Error& e) {
    err << e.what() << "\n";
    return kData;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "IoError: " << e.what() << "\n";
    return kData;
  }
  return kOk;
}

}  // namespace m2s::cli
