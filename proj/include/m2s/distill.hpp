#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "m2s/error.hpp"

namespace m2s {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Per-point feature rows; row i belongs to cloud point point_indices[i].
struct FeatureMap {
  Matrix features;
  std::vector<std::size_t> point_indices;

  Eigen::Index rows() const { return features.rows(); }
};

struct LogitMap {
  Matrix logits;
};

enum class AffinityNorm {
  Cosine,          // x_i.x_j / (|x_i| |x_j|)
  SquaredLiteral,  // x_i.x_j / (|x_i|^2 |x_j|^2), comparison studies only
};

struct DistillConfig {
  double smooth_l1_T = 1.0;
  double temperature_P = 1.0;
  // Weights of teacher segmentation, feature, logit and affinity terms.
  std::array<double, 4> betas{0.5, 0.01, 0.1, 0.1};
  AffinityNorm affinity_norm = AffinityNorm::Cosine;

  void validate() const {
    if (!(smooth_l1_T > 0.0)) throw Error(ErrorKind::InvalidConfig, "smooth-L1 threshold must be positive");
    if (!(temperature_P > 0.0)) throw Error(ErrorKind::InvalidConfig, "temperature must be positive");
    for (double b : betas)
      if (!std::isfinite(b)) throw Error(ErrorKind::InvalidConfig, "betas must be finite");
  }
};

struct LossAndGrad {
  double loss = 0.0;
  Matrix grad;  // d loss / d student input, same shape as the student matrix
};

namespace detail {

inline void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw Error(ErrorKind::ShapeError, std::string(what) + ": shape mismatch");
}

inline void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw Error(ErrorKind::NumericError, std::string(what) + ": non-finite input");
}

}  // namespace detail

// ---- feature distillation --------------------------------------------------

inline double smooth_l1_quadratic(double d, double T) { return d * d / (2.0 * T); }
inline double smooth_l1_linear(double d, double T) { return std::abs(d) - 0.5 * T; }

inline double smooth_l1(double d, double T) {
  return std::abs(d) < T ? smooth_l1_quadratic(d, T) : smooth_l1_linear(d, T);
}

inline double smooth_l1_derivative(double d, double T) {
  if (std::abs(d) < T) return d / T;
  return d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
}

// Mean smooth-L1 of (teacher - student) over all N x f_c elements.
inline LossAndGrad feature_distill_loss(const FeatureMap& teacher, const FeatureMap& student, double T) {
  detail::require_same_shape(teacher.features, student.features, "feature_distill_loss");
  detail::require_finite(teacher.features, "feature_distill_loss");
  detail::require_finite(student.features, "feature_distill_loss");
  if (!(T > 0.0)) throw Error(ErrorKind::InvalidConfig, "smooth-L1 threshold must be positive");
  LossAndGrad out;
  out.grad = Matrix::Zero(student.features.rows(), student.features.cols());
  const double count = static_cast<double>(student.features.size());
  if (count == 0) return out;
  for (Eigen::Index i = 0; i < student.features.rows(); ++i) {
    for (Eigen::Index k = 0; k < student.features.cols(); ++k) {
      const double d = teacher.features(i, k) - student.features(i, k);
      out.loss += smooth_l1(d, T);
      out.grad(i, k) = -smooth_l1_derivative(d, T) / count;
    }
  }
  out.loss /= count;
  return out;
}

// ---- logit distillation ----------------------------------------------------

inline Eigen::RowVectorXd log_softmax(const Eigen::RowVectorXd& z) {
  const double m = z.maxCoeff();
  const double lse = m + std::log((z.array() - m).exp().sum());
  return z.array() - lse;
}

// KL(p || q) with p = softmax(teacher / P), q = softmax(student / P),
// averaged over N x C.
inline LossAndGrad soft_logits_kl_loss(const LogitMap& teacher, const LogitMap& student, double P) {
  detail::require_same_shape(teacher.logits, student.logits, "soft_logits_kl_loss");
  detail::require_finite(teacher.logits, "soft_logits_kl_loss");
  detail::require_finite(student.logits, "soft_logits_kl_loss");
  if (!(P > 0.0)) throw Error(ErrorKind::InvalidConfig, "temperature must be positive");
  LossAndGrad out;
  const Eigen::Index n = student.logits.rows(), c = student.logits.cols();
  out.grad = Matrix::Zero(n, c);
  if (n == 0 || c == 0) return out;
  const double scale = 1.0 / static_cast<double>(n * c);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::RowVectorXd log_p = log_softmax(teacher.logits.row(i) / P);
    const Eigen::RowVectorXd log_q = log_softmax(student.logits.row(i) / P);
    const Eigen::RowVectorXd p = log_p.array().exp();
    const Eigen::RowVectorXd q = log_q.array().exp();
    for (Eigen::Index k = 0; k < c; ++k)
      if (p[k] > 0.0) out.loss += p[k] * (log_p[k] - log_q[k]);
    out.grad.row(i) = (q - p) * (scale / P);
  }
  out.loss *= scale;
  // Rounding can leave a tiny negative value where p == q.
  if (out.loss < 0.0) out.loss = 0.0;
  return out;
}

// ---- instance-aware affinity distillation ----------------------------------

namespace detail {

inline int norm_power(AffinityNorm norm) { return norm == AffinityNorm::Cosine ? 1 : 2; }

inline std::vector<double> row_norms(const Matrix& f, std::span<const std::size_t> rows) {
  std::vector<double> n;
  n.reserve(rows.size());
  for (auto r : rows) {
    if (r >= static_cast<std::size_t>(f.rows())) throw Error(ErrorKind::ShapeError, "instance row index out of range");
    const double v = f.row(static_cast<Eigen::Index>(r)).norm();
    if (!(v > 0.0)) throw Error(ErrorKind::NumericError, "zero-norm feature row " + std::to_string(r));
    n.push_back(v);
  }
  return n;
}

}  // namespace detail

// Pairwise normalized inner products among the rows listed in `instance`.
inline Matrix affinity_matrix(const FeatureMap& features, std::span<const std::size_t> instance,
                              AffinityNorm norm = AffinityNorm::Cosine) {
  if (instance.size() < 2) throw Error(ErrorKind::DegenerateInstance, "instance needs at least 2 points");
  detail::require_finite(features.features, "affinity_matrix");
  const auto n = detail::row_norms(features.features, instance);
  const int p = detail::norm_power(norm);
  const auto m = static_cast<Eigen::Index>(instance.size());
  Matrix a(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto xi = features.features.row(static_cast<Eigen::Index>(instance[i]));
    for (Eigen::Index j = i; j < m; ++j) {
      const auto xj = features.features.row(static_cast<Eigen::Index>(instance[j]));
      double v = xi.dot(xj) / (std::pow(n[i], p) * std::pow(n[j], p));
      if (i == j && p == 1) v = 1.0;
      if (p == 1) v = std::clamp(v, -1.0, 1.0);
      a(i, j) = v;
      a(j, i) = v;
    }
  }
  return a;
}

// Sum over instances of the mean squared difference between teacher and
// student affinity matrices. Instances with fewer than two points add nothing.
inline LossAndGrad iaad_loss(const FeatureMap& teacher, const FeatureMap& student,
                             const std::vector<std::vector<std::size_t>>& instances,
                             AffinityNorm norm = AffinityNorm::Cosine) {
  detail::require_same_shape(teacher.features, student.features, "iaad_loss");
  detail::require_finite(teacher.features, "iaad_loss");
  detail::require_finite(student.features, "iaad_loss");
  LossAndGrad out;
  const Matrix& x = student.features;
  out.grad = Matrix::Zero(x.rows(), x.cols());
  const int p = detail::norm_power(norm);

  for (const auto& inst : instances) {
    if (inst.size() < 2) continue;
    const Matrix at = affinity_matrix(teacher, inst, norm);
    const Matrix as = affinity_matrix(student, inst, norm);
    const auto m = static_cast<Eigen::Index>(inst.size());
    const double w = 1.0 / static_cast<double>(m * m);
    const Matrix diff = at - as;
    out.loss += w * diff.squaredNorm();

    // dL/dA_s(i,j) = -2 w (A_t - A_s)(i,j); G is symmetric.
    const Matrix g = -2.0 * w * diff;
    const auto n = detail::row_norms(x, inst);
    // A(i,j) = x_i.x_j s_i s_j with s_i = |x_i|^-p, so
    // dA(i,j)/dx_i = s_i s_j x_j - p (x_i.x_j) s_i s_j x_i / |x_i|^2.
    // Summing over both index slots with symmetric G gives the factor 2.
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto ri = static_cast<Eigen::Index>(inst[i]);
      const double si = std::pow(n[i], -p);
      Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(x.cols());
      double radial = 0.0;
      for (Eigen::Index j = 0; j < m; ++j) {
        const auto rj = static_cast<Eigen::Index>(inst[j]);
        const double sj = std::pow(n[j], -p);
        const double gij = g(i, j);
        acc += gij * si * sj * x.row(rj);
        radial += gij * x.row(ri).dot(x.row(rj)) * si * sj;
      }
      out.grad.row(ri) += 2.0 * (acc - p * radial * x.row(ri) / (n[i] * n[i]));
    }
  }
  return out;
}

// ---- combined objective ----------------------------------------------------

struct LossTerms {
  double seg_student = 0.0;
  double seg_teacher = 0.0;
  double feature = 0.0;
  double logits = 0.0;
  double affinity = 0.0;
};

inline double total_loss(const LossTerms& t, const std::array<double, 4>& betas) {
  const std::array<double, 5> v{t.seg_student, t.seg_teacher, t.feature, t.logits, t.affinity};
  for (double x : v)
    if (!std::isfinite(x)) throw Error(ErrorKind::NumericError, "non-finite loss term");
  for (double b : betas)
    if (!std::isfinite(b)) throw Error(ErrorKind::NumericError, "non-finite loss weight");
  return t.seg_student + betas[0] * t.seg_teacher + betas[1] * t.feature + betas[2] * t.logits + betas[3] * t.affinity;
}

inline double total_loss(double seg_student, double seg_teacher, double fd, double sld, double iaad,
                         const std::array<double, 4>& betas) {
  return total_loss(LossTerms{seg_student, seg_teacher, fd, sld, iaad}, betas);
}

}  // namespace m2s
