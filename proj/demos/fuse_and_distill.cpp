// Builds a synthetic sequence, fuses the hard-class instances of its last
// scan, and runs a few teacher/student steps on the result.

#include <cstdio>

#include "m2s/m2s.hpp"

int main() {
  using namespace m2s;
  const auto synthetic = make_synthetic_sequence(SyntheticConfig::default_scene(), 7);
  const Sequence& seq = synthetic.sequence;
  const std::size_t t = seq.size() - 1;

  const FusedScan fused = fuse_scan(seq, t, FusionConfig{});
  const FusedScan naive = naive_full_fusion(seq, t, 4);
  std::printf("scan %zu: %zu points, sparse fusion %zu, full fusion %zu\n", t, fused.current_size(), fused.cloud.size(),
              naive.cloud.size());
  for (const auto& r : fused.reports)
    std::printf("  instance %u (class %u): %s, %zu points appended\n", r.instance_id, r.class_id,
                r.motion == Motion::Moving ? "moving" : "static", r.appended);

  const ClassMap map = ClassMap::semantic_kitti();
  const TrainBatch batch = make_batch(fused, map, default_hard_raw_classes());
  TrainState state;
  state.teacher = ToyNetParams::random(16, map.num_train_classes(), 1);
  state.student = ToyNetParams::random(16, map.num_train_classes(), 2);
  state.learning_rate = 0.1;
  for (int step = 1; step <= 20; ++step) {
    const LossBreakdown l = train_step(state, batch);
    if (step % 5 == 0)
      std::printf("step %2d total %.4f (student %.4f teacher %.4f fd %.5f kl %.5f iaad %.5f)\n", step, l.total,
                  l.terms.seg_student, l.terms.seg_teacher, l.terms.feature, l.terms.logits, l.terms.affinity);
  }
  return 0;
}
