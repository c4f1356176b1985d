#pragma once

#include <Eigen/SVD>
#include <cmath>

#include "types.hpp"

namespace echorec {

/// Sum of Euclidean row norms (the l2,1 norm).
inline double l21_norm(const MatrixXd& z) {
  double s = 0.0;
  for (Eigen::Index r = 0; r < z.rows(); ++r) s += z.row(r).norm();
  return s;
}

/// Sum of singular values.
inline double nuclear_norm(const MatrixXd& z) {
  return Eigen::JacobiSVD<MatrixXd>(z).singularValues().sum();
}

/// Exact prox of tau * ||.||_{2,1}: each row shrinks toward zero by tau in
/// Euclidean length, vanishing entirely once its norm is below tau.
inline MatrixXd row_soft_threshold(const MatrixXd& z, double tau) {
  if (tau < 0.0) throw validation_error("row_soft_threshold: negative tau");
  MatrixXd out = z;
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const double n = z.row(r).norm();
    out.row(r) *= (n > tau) ? (1.0 - tau / n) : 0.0;
  }
  return out;
}

/// Exact prox of tau * ||.||_* (singular value shrinkage).
inline MatrixXd svt(const MatrixXd& z, double tau) {
  if (tau < 0.0) throw validation_error("svt: negative tau");
  if (!z.allFinite()) throw validation_error("svt: non-finite input");
  Eigen::JacobiSVD<MatrixXd> svd(z, Eigen::ComputeThinU | Eigen::ComputeThinV);
  VectorXd s = svd.singularValues();
  for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = std::max(s(i) - tau, 0.0);
  return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
}

/// Elementwise projection onto the nonnegative orthant.
inline MatrixXd relu_project(const MatrixXd& z) { return z.cwiseMax(0.0); }

/// argmin_X ||B - A X||_F^2 + damp ||X||_F^2 from precomputed normal-equation
/// blocks. Throws when damp == 0 and A^T A is numerically singular.
inline MatrixXd ridge_lstsq_gram(const MatrixXd& ata, const MatrixXd& atb, double damp) {
  if (damp < 0.0) throw validation_error("ridge_lstsq: negative damp");
  MatrixXd m = ata;
  if (damp > 0.0) m.diagonal().array() += damp;
  Eigen::LDLT<MatrixXd> ldlt(m);
  const VectorXd d = ldlt.vectorD();
  const double dmax = d.cwiseAbs().maxCoeff();
  if (ldlt.info() != Eigen::Success || dmax <= 0.0 ||
      d.cwiseAbs().minCoeff() <= 1e-13 * dmax)
    throw solver_error("ridge_lstsq: singular normal matrix; retry with damp > 0");
  return ldlt.solve(atb);
}

inline MatrixXd ridge_lstsq(const MatrixXd& a, const MatrixXd& b, double damp) {
  if (a.rows() != b.rows()) throw validation_error("ridge_lstsq: row mismatch");
  return ridge_lstsq_gram(a.transpose() * a, a.transpose() * b, damp);
}

/// Largest eigenvalue of a symmetric PSD matrix by power iteration.
inline double power_lambda_max(const MatrixXd& m) {
  const Eigen::Index n = m.rows();
  if (n == 0) return 0.0;
  VectorXd v = VectorXd::Ones(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) += 1e-3 * static_cast<double>(i % 7);
  v.normalize();
  double lambda = 0.0;
  for (int it = 0; it < 500; ++it) {
    VectorXd w = m * v;
    const double nw = w.norm();
    if (nw == 0.0) return 0.0;
    w /= nw;
    const double next = w.dot(m * w);
    if (std::abs(next - lambda) <= 1e-13 * std::max(1.0, std::abs(next))) return next;
    lambda = next;
    v = std::move(w);
  }
  return lambda;
}

struct IstaDiag {
  std::vector<double> objective_trace;
  bool degenerate = false; // A == 0: returned the trivial minimizer directly
};

namespace detail {

enum class IstaReg { RowSparse, LowRank };

/// Proximal gradient on weight * ||B - A Z||_F^2 + gamma * reg(Z) with the
/// exact Lipschitz step 1 / (2 * weight * lambda_max(A^T A)).
inline MatrixXd ista_impl(const MatrixXd& a, const MatrixXd& b, double gamma, double weight,
                          int n_iters, IstaReg reg, const MatrixXd* z0, IstaDiag* diag) {
  if (gamma < 0.0) throw validation_error("ista: negative gamma");
  if (weight < 0.0) throw validation_error("ista: negative weight");
  if (a.rows() != b.rows()) throw validation_error("ista: shape mismatch");

  const MatrixXd ata = a.transpose() * a;
  const MatrixXd atb = a.transpose() * b;
  const double lmax = power_lambda_max(ata);

  auto regval = [&](const MatrixXd& z) {
    return reg == IstaReg::RowSparse ? l21_norm(z) : nuclear_norm(z);
  };
  auto objective = [&](const MatrixXd& z) {
    return weight * (b - a * z).squaredNorm() + gamma * regval(z);
  };

  if (weight * lmax <= 0.0) {
    // Zero quadratic curvature: the penalty alone decides, and its minimizer
    // is the zero matrix.
    if (diag) diag->degenerate = true;
    MatrixXd z = MatrixXd::Zero(a.cols(), b.cols());
    if (diag) diag->objective_trace.push_back(objective(z));
    return z;
  }

  const double step = 1.0 / (2.0 * weight * lmax);
  MatrixXd z = (z0 && z0->rows() == a.cols() && z0->cols() == b.cols())
                   ? *z0
                   : MatrixXd::Zero(a.cols(), b.cols());
  for (int it = 0; it < n_iters; ++it) {
    const MatrixXd grad = 2.0 * weight * (ata * z - atb);
    const MatrixXd v = z - step * grad;
    z = reg == IstaReg::RowSparse ? row_soft_threshold(v, step * gamma) : svt(v, step * gamma);
    if (diag) diag->objective_trace.push_back(objective(z));
  }
  return z;
}

} // namespace detail

/// Row-sparse MMV recovery: min_Z weight ||B - A Z||_F^2 + gamma ||Z||_{2,1}.
inline MatrixXd ista_l21(const MatrixXd& a, const MatrixXd& b, double gamma, double weight,
                         int n_iters, const MatrixXd* z0 = nullptr, IstaDiag* diag = nullptr) {
  return detail::ista_impl(a, b, gamma, weight, n_iters, detail::IstaReg::RowSparse, z0, diag);
}

/// Low-rank recovery: min_Z weight ||B - A Z||_F^2 + gamma ||Z||_*.
inline MatrixXd ista_nuclear(const MatrixXd& a, const MatrixXd& b, double gamma, double weight,
                             int n_iters, const MatrixXd* z0 = nullptr, IstaDiag* diag = nullptr) {
  return detail::ista_impl(a, b, gamma, weight, n_iters, detail::IstaReg::LowRank, z0, diag);
}

} // namespace echorec
