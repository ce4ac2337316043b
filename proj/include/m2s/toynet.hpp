#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "m2s/class_map.hpp"
#include "m2s/distill.hpp"
#include "m2s/error.hpp"
#include "m2s/fusion.hpp"
#include "m2s/metrics.hpp"
#include "m2s/point_cloud.hpp"
#include "m2s/random.hpp"

namespace m2s {

// Per-point network: tanh encoder (4 -> H) followed by a linear head (H -> C).
// The encoder output is the feature tap; the head output is the logit tap.
struct ToyNetParams {
  Matrix w1;                // H x 4
  Eigen::RowVectorXd b1;    // H
  Matrix w2;                // C x H
  Eigen::RowVectorXd b2;    // C
  double input_scale = 10.0;  // coordinates are divided by this; not trained

  Eigen::Index hidden() const { return w1.rows(); }
  Eigen::Index classes() const { return w2.rows(); }

  static ToyNetParams zeros(Eigen::Index hidden, Eigen::Index classes) {
    ToyNetParams p;
    p.w1 = Matrix::Zero(hidden, 4);
    p.b1 = Eigen::RowVectorXd::Zero(hidden);
    p.w2 = Matrix::Zero(classes, hidden);
    p.b2 = Eigen::RowVectorXd::Zero(classes);
    return p;
  }

  // Gaussian weights with std 1/sqrt(fan_in), zero biases.
  static ToyNetParams random(Eigen::Index hidden, Eigen::Index classes, std::uint64_t seed) {
    Rng rng(seed);
    ToyNetParams p = zeros(hidden, classes);
    for (Eigen::Index i = 0; i < p.w1.size(); ++i) p.w1.data()[i] = rng.normal(0.0, 0.5);
    const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
    for (Eigen::Index i = 0; i < p.w2.size(); ++i) p.w2.data()[i] = rng.normal(0.0, s2);
    return p;
  }

  void validate() const {
    if (w1.cols() != 4 || b1.size() != w1.rows() || w2.cols() != w1.rows() || b2.size() != w2.rows())
      throw Error(ErrorKind::ShapeError, "inconsistent toy network shapes");
    if (!w1.allFinite() || !b1.allFinite() || !w2.allFinite() || !b2.allFinite())
      throw Error(ErrorKind::NumericError, "non-finite toy network weights");
  }

  // Visits every trainable scalar in a fixed order.
  template <typename F>
  void for_each_param(F&& f) {
    for (Eigen::Index i = 0; i < w1.size(); ++i) f(w1.data()[i]);
    for (Eigen::Index i = 0; i < b1.size(); ++i) f(b1.data()[i]);
    for (Eigen::Index i = 0; i < w2.size(); ++i) f(w2.data()[i]);
    for (Eigen::Index i = 0; i < b2.size(); ++i) f(b2.data()[i]);
  }

  std::size_t num_params() const {
    return static_cast<std::size_t>(w1.size() + b1.size() + w2.size() + b2.size());
  }

  bool operator==(const ToyNetParams& o) const {
    return input_scale == o.input_scale && w1 == o.w1 && b1 == o.b1 && w2 == o.w2 && b2 == o.b2;
  }
};

struct ForwardCache {
  Matrix inputs;  // N x 4, scaled
  Matrix hidden;  // N x H, tanh output
};

struct ForwardResult {
  FeatureMap features;
  LogitMap logits;
  ForwardCache cache;
};

inline ForwardResult forward(const ToyNetParams& params, const PointCloud& cloud) {
  params.validate();
  const auto n = static_cast<Eigen::Index>(cloud.size());
  ForwardResult out;
  out.cache.inputs.resize(n, 4);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = cloud.points[static_cast<std::size_t>(i)];
    out.cache.inputs.row(i) << p.x() / params.input_scale, p.y() / params.input_scale, p.z() / params.input_scale,
        cloud.remission[static_cast<std::size_t>(i)];
  }
  Matrix pre = out.cache.inputs * params.w1.transpose();
  pre.rowwise() += params.b1;
  out.cache.hidden = pre.array().tanh().matrix();
  out.logits.logits = out.cache.hidden * params.w2.transpose();
  out.logits.logits.rowwise() += params.b2;
  if (!out.logits.logits.allFinite()) throw Error(ErrorKind::NumericError, "non-finite activations");
  out.features.features = out.cache.hidden;
  out.features.point_indices.resize(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) out.features.point_indices[i] = i;
  return out;
}

// Backpropagates loss gradients given at both taps.
inline ToyNetParams backward(const ToyNetParams& params, const ForwardCache& cache, const Matrix& d_logits,
                             const Matrix& d_features) {
  ToyNetParams g = ToyNetParams::zeros(params.hidden(), params.classes());
  g.input_scale = params.input_scale;
  g.w2 = d_logits.transpose() * cache.hidden;
  g.b2 = d_logits.colwise().sum();
  Matrix d_hidden = d_logits * params.w2 + d_features;
  const Matrix d_pre = (d_hidden.array() * (1.0 - cache.hidden.array().square())).matrix();
  g.w1 = d_pre.transpose() * cache.inputs;
  g.b1 = d_pre.colwise().sum();
  return g;
}

// Mean cross-entropy over points with target >= 0, with its logit gradient.
inline LossAndGrad cross_entropy(const Matrix& logits, std::span<const int> targets) {
  if (static_cast<std::size_t>(logits.rows()) != targets.size())
    throw Error(ErrorKind::ShapeError, "cross_entropy: target count differs from rows");
  LossAndGrad out;
  out.grad = Matrix::Zero(logits.rows(), logits.cols());
  std::size_t count = 0;
  for (int t : targets) {
    if (t >= logits.cols()) throw Error(ErrorKind::ClassRangeError, "target class outside logit range");
    if (t >= 0) ++count;
  }
  if (count == 0) return out;
  const double inv = 1.0 / static_cast<double>(count);
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const int t = targets[static_cast<std::size_t>(i)];
    if (t < 0) continue;
    const Eigen::RowVectorXd lp = log_softmax(logits.row(i));
    out.loss -= lp[t];
    Eigen::RowVectorXd g = lp.array().exp();
    g[t] -= 1.0;
    out.grad.row(i) = g * inv;
  }
  out.loss *= inv;
  return out;
}

inline std::vector<int> predict(const ToyNetParams& params, const PointCloud& cloud) {
  const auto fwd = forward(params, cloud);
  std::vector<int> out(cloud.size());
  for (Eigen::Index i = 0; i < fwd.logits.logits.rows(); ++i) {
    Eigen::Index best = 0;
    fwd.logits.logits.row(i).maxCoeff(&best);
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

// ---- training --------------------------------------------------------------

// Student input (the current scan) and teacher input (the fused scan), with
// everything the distillation terms need to pair their rows.
struct TrainBatch {
  PointCloud student_cloud;
  PointCloud teacher_cloud;
  std::vector<int> student_targets;  // train ids, -1 = ignore
  std::vector<int> teacher_targets;
  std::vector<std::size_t> current_to_fused;
  std::vector<std::size_t> hard_rows;                // student rows used by the distillation terms
  std::vector<std::vector<std::size_t>> instances;  // positions into hard_rows, one list per instance

  void validate() const {
    if (current_to_fused.size() != student_cloud.size())
      throw Error(ErrorKind::ShapeError, "current_to_fused length differs from the student cloud");
    for (auto j : current_to_fused)
      if (j >= teacher_cloud.size()) throw Error(ErrorKind::ShapeError, "current_to_fused index out of range");
    if (student_targets.size() != student_cloud.size() || teacher_targets.size() != teacher_cloud.size())
      throw Error(ErrorKind::ShapeError, "target lengths differ from clouds");
    for (auto r : hard_rows)
      if (r >= student_cloud.size()) throw Error(ErrorKind::ShapeError, "hard row out of range");
    for (const auto& inst : instances)
      for (auto k : inst)
        if (k >= hard_rows.size()) throw Error(ErrorKind::ShapeError, "instance member out of range");
  }
};

// Hard rows are current-scan points of hard classes; instances group them by
// nonzero instance id. Unlabeled (train id 0) points are ignored by the
// segmentation losses.
inline TrainBatch make_batch(const FusedScan& fused, const ClassMap& class_map,
                             const std::set<std::uint16_t>& hard_raw_classes) {
  TrainBatch b;
  b.student_cloud = fused.current_cloud();
  b.teacher_cloud = fused.cloud;
  b.current_to_fused = fused.current_to_fused;
  auto target = [&](std::uint16_t raw) {
    const int t = class_map.to_train(raw);
    return t == 0 ? -1 : t;
  };
  for (std::size_t i = 0; i < fused.cloud.size(); ++i) b.teacher_targets.push_back(target(fused.labels.semantic[i]));
  std::map<std::uint16_t, std::vector<std::size_t>> by_instance;
  for (std::size_t i = 0; i < fused.current_size(); ++i) {
    const std::size_t j = fused.current_to_fused[i];
    b.student_targets.push_back(b.teacher_targets.at(j));
    if (!hard_raw_classes.count(fused.labels.semantic[j])) continue;
    if (fused.labels.instance[j] != 0) by_instance[fused.labels.instance[j]].push_back(b.hard_rows.size());
    b.hard_rows.push_back(i);
  }
  for (auto& [id, members] : by_instance) b.instances.push_back(std::move(members));
  return b;
}

struct TrainState {
  ToyNetParams teacher;
  ToyNetParams student;
  std::size_t step = 0;
  double learning_rate = 1e-2;
  DistillConfig distill;
  std::uint64_t seed = 0;
};

struct LossBreakdown {
  LossTerms terms;
  double total = 0.0;
};

struct StepGradients {
  LossBreakdown losses;
  ToyNetParams student_grad;
  ToyNetParams teacher_grad;
  bool teacher_updated = false;
};

namespace detail {

inline Matrix select_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

inline void scatter_add_rows(Matrix& dst, std::span<const std::size_t> rows, const Matrix& src, double weight) {
  for (std::size_t i = 0; i < rows.size(); ++i)
    dst.row(static_cast<Eigen::Index>(rows[i])) += weight * src.row(static_cast<Eigen::Index>(i));
}

inline void sgd(ToyNetParams& p, const ToyNetParams& g, double lr) {
  p.w1 -= lr * g.w1;
  p.b1 -= lr * g.b1;
  p.w2 -= lr * g.w2;
  p.b2 -= lr * g.b2;
}

}  // namespace detail

// Losses and gradients of the combined objective. The teacher receives only
// the weighted gradient of its own segmentation loss; distillation terms
// treat teacher outputs as constants. Terms whose weight is zero contribute
// no arithmetic to the gradients.
inline StepGradients compute_gradients(const TrainState& state, const TrainBatch& batch) {
  batch.validate();
  state.distill.validate();
  const auto& betas = state.distill.betas;
  StepGradients out;
  LossTerms& terms = out.losses.terms;

  const auto student = forward(state.student, batch.student_cloud);
  const auto teacher = forward(state.teacher, batch.teacher_cloud);

  const auto seg_s = cross_entropy(student.logits.logits, batch.student_targets);
  const auto seg_t = cross_entropy(teacher.logits.logits, batch.teacher_targets);
  terms.seg_student = seg_s.loss;
  terms.seg_teacher = seg_t.loss;

  Matrix d_logits = seg_s.grad;
  Matrix d_features = Matrix::Zero(student.features.rows(), student.features.features.cols());

  if (!batch.hard_rows.empty()) {
    std::vector<std::size_t> teacher_rows;
    for (auto r : batch.hard_rows) teacher_rows.push_back(batch.current_to_fused[r]);
    FeatureMap s_feat{detail::select_rows(student.features.features, batch.hard_rows), batch.hard_rows};
    FeatureMap t_feat{detail::select_rows(teacher.features.features, teacher_rows), teacher_rows};
    LogitMap s_logit{detail::select_rows(student.logits.logits, batch.hard_rows)};
    LogitMap t_logit{detail::select_rows(teacher.logits.logits, teacher_rows)};

    const auto fd = feature_distill_loss(t_feat, s_feat, state.distill.smooth_l1_T);
    const auto sld = soft_logits_kl_loss(t_logit, s_logit, state.distill.temperature_P);
    const auto iaad = iaad_loss(t_feat, s_feat, batch.instances, state.distill.affinity_norm);
    terms.feature = fd.loss;
    terms.logits = sld.loss;
    terms.affinity = iaad.loss;
    if (betas[1] != 0.0) detail::scatter_add_rows(d_features, batch.hard_rows, fd.grad, betas[1]);
    if (betas[2] != 0.0) detail::scatter_add_rows(d_logits, batch.hard_rows, sld.grad, betas[2]);
    if (betas[3] != 0.0) detail::scatter_add_rows(d_features, batch.hard_rows, iaad.grad, betas[3]);
  }
  out.losses.total = total_loss(terms, betas);

  out.student_grad = backward(state.student, student.cache, d_logits, d_features);
  if (betas[0] != 0.0) {
    const Matrix d_teacher_logits = betas[0] * seg_t.grad;
    const Matrix zero = Matrix::Zero(teacher.features.rows(), teacher.features.features.cols());
    out.teacher_grad = backward(state.teacher, teacher.cache, d_teacher_logits, zero);
    out.teacher_updated = true;
  }
  return out;
}

// One gradient-descent step on both branches.
inline LossBreakdown train_step(TrainState& state, const TrainBatch& batch) {
  const StepGradients g = compute_gradients(state, batch);
  detail::sgd(state.student, g.student_grad, state.learning_rate);
  if (g.teacher_updated) detail::sgd(state.teacher, g.teacher_grad, state.learning_rate);
  ++state.step;
  return g.losses;
}

// Plain supervised step on one branch, no distillation involved.
inline double supervised_step(ToyNetParams& params, const PointCloud& cloud, std::span<const int> targets,
                              double learning_rate) {
  const auto fwd = forward(params, cloud);
  const auto ce = cross_entropy(fwd.logits.logits, targets);
  const Matrix zero = Matrix::Zero(fwd.features.rows(), fwd.features.features.cols());
  const ToyNetParams g = backward(params, fwd.cache, ce.grad, zero);
  detail::sgd(params, g, learning_rate);
  return ce.loss;
}

// Per-class IoU of the network's argmax predictions over labeled scans.
// Ground truth goes through the class map; train id 0 is ignored.
inline IoUResult evaluate(const ToyNetParams& params, std::span<const PointCloud> clouds,
                          std::span<const LabelSet> labels, const ClassMap& class_map,
                          const std::set<int>& ignore = {0}) {
  if (clouds.size() != labels.size()) throw Error(ErrorKind::ShapeError, "clouds and labels counts differ");
  ConfusionMatrix cm(static_cast<std::size_t>(params.classes()), ignore);
  for (std::size_t s = 0; s < clouds.size(); ++s) {
    if (labels[s].size() != clouds[s].size()) throw Error(ErrorKind::ShapeError, "labels differ from cloud size");
    const auto pred = predict(params, clouds[s]);
    std::vector<int> gt;
    gt.reserve(labels[s].size());
    for (auto raw : labels[s].semantic) gt.push_back(class_map.to_train(raw));
    cm.accumulate(pred, gt);
  }
  return miou(cm);
}

}  // namespace m2s
