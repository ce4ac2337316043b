#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "m2s/class_map.hpp"
#include "m2s/config.hpp"
#include "m2s/fusion.hpp"
#include "m2s/instance_db.hpp"
#include "m2s/settings.hpp"
#include "m2s/synthetic.hpp"
#include "m2s/toynet.hpp"

namespace m2s {

struct ToyRunConfig {
  SyntheticConfig scene = SyntheticConfig::default_scene();
  FusionConfig fusion;
  DistillConfig distill;
  long hidden = 16;
  double learning_rate = 1e-2;
  std::size_t paste = 0;  // copy-paste instances per step
};

// Keys: toy.hidden, toy.lr, toy.paste, plus the synthetic.*, fusion.*, icp.*
// and distill.* families.
inline ToyRunConfig toy_run_config(const KeyValueConfig& cfg) {
  ToyRunConfig out;
  out.scene.num_scans = 6;
  apply_config(cfg, out.scene);
  apply_config(cfg, out.fusion);
  apply_config(cfg, out.distill);
  cfg.read("toy.hidden", out.hidden);
  cfg.read("toy.lr", out.learning_rate);
  cfg.read("toy.paste", out.paste);
  if (out.hidden <= 0 || !(out.learning_rate > 0.0))
    throw Error(ErrorKind::InvalidConfig, "toy.hidden and toy.lr must be positive");
  return out;
}

struct ToyRunResult {
  std::vector<LossBreakdown> history;
  TrainState state;
  IoUResult student_iou;
};

// Synthetic sequence -> sparse fusion of every scan -> joint teacher/student
// training cycling through the scans -> student IoU on the single scans.
inline ToyRunResult run_toy_training(const ToyRunConfig& config, std::uint64_t seed, std::size_t steps,
                                     const std::function<void(std::size_t, const LossBreakdown&)>& on_step = {}) {
  const ClassMap class_map = ClassMap::semantic_kitti();
  const auto synthetic = make_synthetic_sequence(config.scene, seed);
  const Sequence& seq = synthetic.sequence;

  std::vector<FusedScan> fused;
  for (std::size_t t = 0; t < seq.size(); ++t) fused.push_back(fuse_scan(seq, t, config.fusion));
  InstanceDatabase db;
  if (config.paste > 0) db = build_instance_db(seq, config.fusion);

  ToyRunResult result;
  TrainState& state = result.state;
  state.seed = seed;
  state.learning_rate = config.learning_rate;
  state.distill = config.distill;
  Rng rng(seed ^ 0x9E3779B97F4A7C15ull);
  state.teacher = ToyNetParams::random(config.hidden, class_map.num_train_classes(), rng.next_u64());
  state.student = ToyNetParams::random(config.hidden, class_map.num_train_classes(), rng.next_u64());

  for (std::size_t step = 0; step < steps; ++step) {
    const FusedScan& scan = fused[step % fused.size()];
    TrainBatch batch;
    if (config.paste > 0) {
      const auto pasted = sample_and_paste(scan, db, config.paste, rng.next_u64());
      batch = make_batch(pasted.scan, class_map, config.fusion.hard_classes);
    } else {
      batch = make_batch(scan, class_map, config.fusion.hard_classes);
    }
    const LossBreakdown losses = train_step(state, batch);
    result.history.push_back(losses);
    if (on_step) on_step(step + 1, losses);
  }

  std::vector<LabelSet> labels;
  for (const auto& l : seq.labels) labels.push_back(*l);
  result.student_iou = evaluate(state.student, seq.scans, labels, class_map);
  return result;
}

struct SparseHardConfig {
  DistillConfig distill;
  long hidden = 16;
  double learning_rate = 0.3;
  std::size_t steps = 1000;
};

// Trains teacher and student on one sparse-hard scene and returns the
// student's IoU for the hard class on the dense evaluation scan.
inline double run_sparse_hard_trial(const SparseHardConfig& config, std::uint64_t seed) {
  const ClassMap class_map = ClassMap::semantic_kitti();
  const SparseHardScene scene = make_sparse_hard_scene(seed);
  const TrainBatch batch = make_batch(scene.train, class_map, default_hard_raw_classes());
  TrainState state;
  state.seed = seed;
  state.learning_rate = config.learning_rate;
  state.distill = config.distill;
  Rng rng(seed ^ 0x5DEECE66Dull);
  state.teacher = ToyNetParams::random(config.hidden, class_map.num_train_classes(), rng.next_u64());
  state.student = ToyNetParams::random(config.hidden, class_map.num_train_classes(), rng.next_u64());
  for (std::size_t s = 0; s < config.steps; ++s) train_step(state, batch);
  const std::vector<PointCloud> clouds{scene.eval_cloud};
  const std::vector<LabelSet> labels{scene.eval_labels};
  const auto iou = evaluate(state.student, clouds, labels, class_map);
  const auto& hard = iou.per_class.at(static_cast<std::size_t>(class_map.to_train(scene.hard_class)));
  return hard.value_or(0.0);
}

}  // namespace m2s
