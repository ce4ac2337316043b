#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "m2s/distill.hpp"
#include "m2s/random.hpp"
#include "m2s/toynet.hpp"

namespace m2s {

// |a - n| / max(|a|, |n|, floor). The floor keeps near-zero entries from
// dominating through rounding noise alone.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Central differences of f at x, one entry at a time.
inline Matrix numeric_gradient(const std::function<double(const Matrix&)>& f, const Matrix& x, double h = 1e-5) {
  Matrix g(x.rows(), x.cols());
  Matrix probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double orig = probe.data()[i];
    probe.data()[i] = orig + h;
    const double up = f(probe);
    probe.data()[i] = orig - h;
    const double down = f(probe);
    probe.data()[i] = orig;
    g.data()[i] = (up - down) / (2.0 * h);
  }
  return g;
}

inline double max_relative_error(const Matrix& analytic, const Matrix& numeric) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < analytic.size(); ++i)
    worst = std::max(worst, relative_error(analytic.data()[i], numeric.data()[i]));
  return worst;
}

struct GradCheckRow {
  std::string name;
  std::size_t cases = 0;
  double max_rel_err = 0.0;
  double tolerance = 0.0;
  bool pass() const { return max_rel_err < tolerance; }
};

namespace detail {

inline Matrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal(0.0, scale);
  return m;
}

}  // namespace detail

// Seeded finite-difference verification of every analytic gradient: the three
// distillation losses and the end-to-end student gradient of the toy network.
inline std::vector<GradCheckRow> run_gradient_checks(std::uint64_t seed, std::size_t cases) {
  Rng rng(seed);
  GradCheckRow fd{"feature_distill (smooth-L1)", cases, 0.0, 1e-4};
  GradCheckRow sld{"soft_logits_kl", cases, 0.0, 1e-4};
  GradCheckRow aff{"instance_affinity", cases, 0.0, 1e-4};
  GradCheckRow e2e{"toynet end-to-end", std::max<std::size_t>(1, cases / 10), 0.0, 1e-3};

  for (std::size_t c = 0; c < cases; ++c) {
    const auto n = static_cast<Eigen::Index>(2 + rng.below(6));
    const auto f = static_cast<Eigen::Index>(1 + rng.below(6));
    const double T = rng.uniform(0.2, 2.0);
    FeatureMap teacher{detail::random_matrix(rng, n, f, 1.5), {}};
    FeatureMap student{detail::random_matrix(rng, n, f, 1.5), {}};
    const auto a = feature_distill_loss(teacher, student, T);
    const auto num = numeric_gradient(
        [&](const Matrix& x) { return feature_distill_loss(teacher, FeatureMap{x, {}}, T).loss; }, student.features);
    fd.max_rel_err = std::max(fd.max_rel_err, max_relative_error(a.grad, num));

    const double P = rng.uniform(0.5, 4.0);
    LogitMap tl{detail::random_matrix(rng, n, f + 1, 2.0)};
    LogitMap sl{detail::random_matrix(rng, n, f + 1, 2.0)};
    const auto k = soft_logits_kl_loss(tl, sl, P);
    const auto knum = numeric_gradient([&](const Matrix& x) { return soft_logits_kl_loss(tl, LogitMap{x}, P).loss; },
                                       sl.logits);
    sld.max_rel_err = std::max(sld.max_rel_err, max_relative_error(k.grad, knum));

    std::vector<std::vector<std::size_t>> instances(2);
    for (Eigen::Index r = 0; r < n; ++r) instances[rng.below(2)].push_back(static_cast<std::size_t>(r));
    const auto ia = iaad_loss(teacher, student, instances);
    const auto ianum = numeric_gradient(
        [&](const Matrix& x) { return iaad_loss(teacher, FeatureMap{x, {}}, instances).loss; }, student.features);
    aff.max_rel_err = std::max(aff.max_rel_err, max_relative_error(ia.grad, ianum));
  }

  for (std::size_t c = 0; c < e2e.cases; ++c) {
    const std::size_t points = 12 + rng.below(20);
    PointCloud cloud;
    for (std::size_t i = 0; i < points; ++i)
      cloud.push_back(Point3(rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-2, 2)), rng.uniform(0, 1));
    FusedScan fused = FusedScan::from_single(cloud, LabelSet{});
    fused.labels.semantic.assign(points, 40);
    fused.labels.instance.assign(points, 0);
    for (std::size_t i = 0; i < points; i += 3) {
      fused.labels.semantic[i] = 30;
      fused.labels.instance[i] = static_cast<std::uint16_t>(1 + (i / 3) % 2);
    }
    for (std::size_t i = 0; i < 6; ++i) {
      fused.cloud.push_back(cloud.points[i] + Point3(0.1, 0.0, 0.0), cloud.remission[i]);
      fused.labels.push_back(30, 1);
      fused.origin_index.push_back(-1);
    }
    ClassMap map;
    map.raw_to_train = {{40, 1}, {30, 2}};
    map.train_names = {"unlabeled", "road", "person"};
    const TrainBatch batch = make_batch(fused, map, {30});
    TrainState state;
    state.teacher = ToyNetParams::random(5, 3, rng.next_u64());
    state.student = ToyNetParams::random(5, 3, rng.next_u64());
    state.distill.betas = {0.5, 0.3, 0.4, 0.7};
    const auto grads = compute_gradients(state, batch);

    std::vector<double> analytic;
    ToyNetParams g = grads.student_grad;
    g.for_each_param([&](double& v) { analytic.push_back(v); });
    std::size_t idx = 0;
    state.student.for_each_param([&](double& w) {
      const double orig = w, h = 1e-5;
      w = orig + h;
      const double up = compute_gradients(state, batch).losses.total;
      w = orig - h;
      const double down = compute_gradients(state, batch).losses.total;
      w = orig;
      e2e.max_rel_err = std::max(e2e.max_rel_err, relative_error(analytic[idx++], (up - down) / (2 * h)));
    });
  }
  return {fd, sld, aff, e2e};
}

}  // namespace m2s
