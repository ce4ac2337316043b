#include <gtest/gtest.h>

#include <cmath>

#include "m2s/gradcheck.hpp"
#include "m2s/synthetic.hpp"
#include "m2s/toynet.hpp"
#include "oracles.hpp"

using namespace m2s;

namespace {

ClassMap two_class_map() {
  ClassMap m;
  m.raw_to_train = {{40, 1}, {30, 2}};
  m.train_names = {"unlabeled", "road", "person"};
  return m;
}

// Class 1 left of the y axis, class 2 right of it.
FusedScan separable_scene(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  PointCloud cloud;
  LabelSet labels;
  for (std::size_t i = 0; i < n; ++i) {
    const bool right = i % 2 == 0;
    cloud.push_back(Point3(right ? rng.uniform(1, 10) : rng.uniform(-10, -1), rng.uniform(-10, 10), rng.uniform(-1, 1)),
                    rng.uniform(0.2, 0.8));
    labels.push_back(right ? 30 : 40, 0);
  }
  return FusedScan::from_single(cloud, labels);
}

// A small scene with two person instances and a few fused extras.
FusedScan small_fused_scene(Rng& rng) {
  PointCloud cloud;
  LabelSet labels;
  for (std::size_t i = 0; i < 24; ++i) {
    cloud.push_back(Point3(rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-2, 2)), rng.uniform(0, 1));
    const bool person = i % 3 == 0;
    labels.push_back(person ? 30 : 40, person ? static_cast<std::uint16_t>(1 + (i / 3) % 2) : 0);
  }
  FusedScan fused = FusedScan::from_single(cloud, labels);
  for (std::size_t i = 0; i < 8; ++i) {
    fused.cloud.push_back(cloud.points[3 * i] + Point3(0.05, -0.05, 0.02), cloud.remission[3 * i]);
    fused.labels.push_back(30, labels.instance[3 * i]);
    fused.origin_index.push_back(-1);
  }
  return fused;
}

std::vector<double> flatten(ToyNetParams p) {
  std::vector<double> v;
  p.for_each_param([&](double& x) { v.push_back(x); });
  return v;
}

ToyNetParams unflatten(ToyNetParams p, const std::vector<double>& v) {
  std::size_t i = 0;
  p.for_each_param([&](double& x) { x = v[i++]; });
  return p;
}

}  // namespace

TEST(ToyNetForward, ZeroWeightsGiveZeroLogits) {
  Rng rng(1);
  const auto fused = small_fused_scene(rng);
  const auto out = forward(ToyNetParams::zeros(6, 4), fused.cloud);
  EXPECT_EQ(out.logits.logits.rows(), static_cast<Eigen::Index>(fused.cloud.size()));
  EXPECT_EQ(out.logits.logits.cwiseAbs().maxCoeff(), 0.0);
}

TEST(ToyNetForward, HandComputedSinglePoint) {
  auto p = ToyNetParams::zeros(1, 1);
  p.w1(0, 0) = 0.5;
  p.w1(0, 3) = -1.0;
  p.b1[0] = 0.25;
  p.w2(0, 0) = 2.0;
  p.b2[0] = 1.0;
  PointCloud cloud;
  cloud.push_back(Point3(10.0, 3.0, -4.0), 0.5);
  const auto out = forward(p, cloud);
  // input = (1, 0.3, -0.4, 0.5); pre = 0.5 - 0.5 + 0.25
  EXPECT_DOUBLE_EQ(out.features.features(0, 0), std::tanh(0.25));
  EXPECT_DOUBLE_EQ(out.logits.logits(0, 0), 2.0 * std::tanh(0.25) + 1.0);
}

TEST(ToyNetForward, PermutationEquivariant) {
  Rng rng(2);
  const auto fused = small_fused_scene(rng);
  const auto p = ToyNetParams::random(7, 3, 5);
  const auto base = forward(p, fused.cloud);
  std::vector<std::size_t> perm(fused.cloud.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  std::swap(perm[0], perm[5]);
  PointCloud shuffled;
  for (auto i : perm) shuffled.push_back(fused.cloud.points[i], fused.cloud.remission[i]);
  const auto out = forward(p, shuffled);
  for (std::size_t r = 0; r < perm.size(); ++r) {
    EXPECT_EQ(out.logits.logits.row(static_cast<Eigen::Index>(r)), base.logits.logits.row(static_cast<Eigen::Index>(perm[r])));
    EXPECT_EQ(out.features.features.row(static_cast<Eigen::Index>(r)),
              base.features.features.row(static_cast<Eigen::Index>(perm[r])));
  }
}

TEST(ToyNetForward, RejectsBadParams) {
  auto p = ToyNetParams::zeros(3, 2);
  p.w2(0, 0) = std::nan("");
  EXPECT_THROW(forward(p, PointCloud{}), Error);
  p = ToyNetParams::zeros(3, 2);
  p.b1.resize(2);
  EXPECT_THROW(p.validate(), Error);
}

TEST(CrossEntropy, ValueAndIgnore) {
  Matrix logits(2, 2);
  logits << 0.0, 0.0, 5.0, -5.0;
  const std::vector<int> t{1, -1};
  const auto ce = cross_entropy(logits, t);
  EXPECT_NEAR(ce.loss, std::log(2.0), 1e-15);
  EXPECT_EQ(ce.grad.row(1).cwiseAbs().maxCoeff(), 0.0);
  const std::vector<int> bad{2, 0};
  EXPECT_THROW(cross_entropy(logits, bad), Error);
}

TEST(TrainStep, SupervisedLossDecreases) {
  const auto scene = separable_scene(3, 60);
  const auto map = two_class_map();
  const auto batch = make_batch(scene, map, {});
  TrainState state;
  state.student = ToyNetParams::random(8, 3, 11);
  state.teacher = state.student;
  state.learning_rate = 0.1;
  state.distill.betas = {0, 0, 0, 0};
  double first = 0.0, last = 0.0;
  for (int s = 0; s < 50; ++s) {
    const auto l = train_step(state, batch);
    if (s == 0) first = l.terms.seg_student;
    last = l.terms.seg_student;
  }
  EXPECT_EQ(state.step, 50u);
  EXPECT_LT(last, first);
}

TEST(TrainStep, CopiedTeacherGivesZeroDistillation) {
  const auto s = make_synthetic_sequence(SyntheticConfig::default_scene(), 4);
  const auto& scan = s.sequence.scans[2];
  const auto batch = make_batch(FusedScan::from_single(scan, *s.sequence.labels[2]), ClassMap::semantic_kitti(),
                                default_hard_raw_classes());
  ASSERT_FALSE(batch.hard_rows.empty());
  TrainState state;
  state.teacher = ToyNetParams::random(16, 20, 9);
  state.student = state.teacher;
  const auto g = compute_gradients(state, batch);
  EXPECT_EQ(g.losses.terms.feature, 0.0);
  EXPECT_EQ(g.losses.terms.logits, 0.0);
  EXPECT_EQ(g.losses.terms.affinity, 0.0);
  EXPECT_EQ(g.losses.terms.seg_student, g.losses.terms.seg_teacher);
}

TEST(TrainStep, ZeroBetasMatchSupervisedStepBitwise) {
  const auto s = make_synthetic_sequence(SyntheticConfig::default_scene(), 5);
  const auto fused = fuse_scan(s.sequence, 4, FusionConfig{});
  const auto batch = make_batch(fused, ClassMap::semantic_kitti(), default_hard_raw_classes());
  TrainState state;
  state.teacher = ToyNetParams::random(16, 20, 1);
  state.student = ToyNetParams::random(16, 20, 2);
  state.distill.betas = {0, 0, 0, 0};
  ToyNetParams baseline = state.student;
  const ToyNetParams teacher_before = state.teacher;
  for (int step = 0; step < 10; ++step) {
    const auto l = train_step(state, batch);
    const double ce = supervised_step(baseline, batch.student_cloud, batch.student_targets, state.learning_rate);
    EXPECT_EQ(l.terms.seg_student, ce);
    EXPECT_EQ(l.total, ce);
  }
  EXPECT_TRUE(state.student == baseline);
  EXPECT_TRUE(state.teacher == teacher_before);
}

TEST(TrainStep, EndToEndGradientMatchesFiniteDifferences) {
  Rng rng(6);
  for (int trial = 0; trial < 3; ++trial) {
    const auto fused = small_fused_scene(rng);
    const auto batch = make_batch(fused, two_class_map(), {30});
    ASSERT_EQ(batch.instances.size(), 2u);
    TrainState state;
    state.teacher = ToyNetParams::random(5, 3, rng.next_u64());
    state.student = ToyNetParams::random(5, 3, rng.next_u64());
    state.distill.betas = {0.5, 0.3, 0.4, 0.7};
    const auto analytic = flatten(compute_gradients(state, batch).student_grad);
    const auto numeric = oracle::central_diff(
        [&](const std::vector<double>& w) {
          TrainState probe = state;
          probe.student = unflatten(state.student, w);
          return compute_gradients(probe, batch).losses.total;
        },
        flatten(state.student));
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) worst = std::max(worst, oracle::rel_err(analytic[i], numeric[i]));
    EXPECT_LT(worst, 1e-3);
  }
}

TEST(TrainStep, TeacherGetsOnlyItsSegmentationGradient) {
  Rng rng(7);
  const auto batch = make_batch(small_fused_scene(rng), two_class_map(), {30});
  TrainState state;
  state.teacher = ToyNetParams::random(5, 3, 1);
  state.student = ToyNetParams::random(5, 3, 2);
  state.distill.betas = {0.5, 0.3, 0.4, 0.7};
  const auto a = compute_gradients(state, batch);
  state.distill.betas = {0.5, 0.0, 0.0, 0.0};
  const auto b = compute_gradients(state, batch);
  EXPECT_TRUE(a.teacher_grad == b.teacher_grad);
}

TEST(TrainBatch, MisalignedMapIsShapeError) {
  Rng rng(8);
  auto batch = make_batch(small_fused_scene(rng), two_class_map(), {30});
  batch.current_to_fused.back() = 1000;
  TrainState state;
  state.teacher = state.student = ToyNetParams::random(4, 3, 1);
  try {
    train_step(state, batch);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ShapeError);
  }
  EXPECT_EQ(state.step, 0u);
}

TEST(Evaluate, PerfectMemorizationOnOnePoint) {
  PointCloud cloud;
  cloud.push_back(Point3(1, 2, 3), 0.5);
  LabelSet labels;
  labels.push_back(30, 0);
  auto p = ToyNetParams::zeros(2, 3);
  p.b2[2] = 1.0;
  const std::vector<PointCloud> clouds{cloud};
  const std::vector<LabelSet> ls{labels};
  const auto r = evaluate(p, clouds, ls, two_class_map());
  EXPECT_EQ(r.mean, 1.0);
}

TEST(Evaluate, DeterministicAndNearChanceWhenUntrained) {
  const auto map = two_class_map();
  double sum = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto scene = separable_scene(100 + seed, 200);
    const std::vector<PointCloud> clouds{scene.cloud};
    const std::vector<LabelSet> labels{scene.labels};
    // Two-way head over the two labeled classes, nothing ignored.
    ClassMap m;
    m.raw_to_train = {{40, 0}, {30, 1}};
    m.train_names = {"road", "person"};
    const auto p = ToyNetParams::random(16, 2, seed);
    const auto a = evaluate(p, clouds, labels, m, {});
    const auto b = evaluate(p, clouds, labels, m, {});
    EXPECT_EQ(a.mean, b.mean);
    sum += a.mean;
  }
  const double mean = sum / 20.0;
  EXPECT_GE(mean, 0.15);
  EXPECT_LE(mean, 0.55);
}

TEST(GradCheck, BuiltInSuitePasses) {
  for (const auto& row : run_gradient_checks(3, 20)) EXPECT_TRUE(row.pass()) << row.name << " " << row.max_rel_err;
}
