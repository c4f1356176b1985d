#pragma once

#include <chrono>
#include <cmath>
#include <optional>
#include <utility>

#include "eval.hpp"
#include "kspace.hpp"
#include "patches.hpp"
#include "prox.hpp"

namespace echorec {

enum class Regularizer { RowSparse, LowRank };

/// Deep dictionary solver configuration. mu1/mu2 default to unity; layers
/// beyond the third reuse mu2. gamma has no universal default and is expected
/// to be set explicitly or via lcurve_tune.
struct SolverConfig {
  double lambda = 0.1;
  double gamma = 0.05;
  double mu1 = 1.0;
  double mu2 = 1.0;
  int layers = 3;
  Regularizer regularizer = Regularizer::RowSparse;
  PatchConfig patch;
  int outer_iters = 50;
  double tol = 1e-4;
  int ista_iters = 30;
  int first_layer_atoms = 0; // 0: complete first layer (patch_size^2)
  std::uint64_t seed = 0;

  void require_valid() const {
    if (lambda < 0.0 || gamma < 0.0 || mu1 < 0.0 || mu2 < 0.0)
      throw validation_error("SolverConfig: weights must be nonnegative");
    if (layers < 1 || layers > 4) throw validation_error("SolverConfig: layers must be 1..4");
    if (outer_iters < 1 || ista_iters < 1)
      throw validation_error("SolverConfig: iteration budgets must be positive");
    if (tol < 0.0) throw validation_error("SolverConfig: negative tolerance");
    if (first_layer_atoms < 0) throw validation_error("SolverConfig: negative atom count");
  }
};

/// Dictionary chain D_1 (patch_size^2 x a1), D_2 (a1 x a2), ... with atom
/// counts halved per layer. a1 defaults to patch_size^2 (complete first
/// layer) and may be set overcomplete.
struct DeepDictionary {
  std::vector<MatrixXd> layers;

  static std::vector<int> atom_counts(int patch_size, int n_layers, int first_atoms = 0) {
    std::vector<int> a(static_cast<std::size_t>(n_layers));
    a[0] = first_atoms > 0 ? first_atoms : patch_size * patch_size;
    for (int k = 1; k < n_layers; ++k) a[static_cast<std::size_t>(k)] =
        std::max(a[static_cast<std::size_t>(k - 1)] / 2, 1);
    return a;
  }
};

struct ReconReport {
  std::vector<double> objective_trace; // value after each completed outer sweep
  double initial_objective = 0.0;
  int iterations_run = 0;
  double wall_time_s = 0.0;
  std::optional<double> final_snr_db;
  SolverConfig config;
};

/// Stationarity residuals and pre-projection data gathered when
/// SolverState::collect_diagnostics is set.
struct SweepDiagnostics {
  double p1_rel_residual = 0.0;
  std::vector<double> dict_rel_residual;       // per dictionary layer
  std::vector<double> proxy_rel_residual;      // per proxy level, pre-projection
  std::vector<double> proxy_min_pre_projection;
  double code_objective_before = 0.0;
  double code_objective_after = 0.0;
};

struct SolverState {
  SolverConfig cfg;
  int height = 0, width = 0, n_echoes = 0, n_patches = 0;
  EchoStack x;
  DeepDictionary dict;
  // reps[k][c]: level-(k+1) representation of echo-column c for all patches,
  // shape a_{k+1} x n_patches. reps.back() is the code Z; levels before it
  // are the nonnegative proxies.
  std::vector<std::vector<MatrixXd>> reps;
  std::vector<VectorXcd> y;               // measured samples per echo
  std::vector<MatrixXcd> rty;             // R^T y as full spectra
  std::vector<std::vector<char>> flags;   // selected-line flags per echo
  MatrixXd cov;
  bool uniform_cov = false;
  double cov_value = 0.0;
  bool collect_diagnostics = false;
  SweepDiagnostics diag;

  int n_cols() const { return 2 * n_echoes; }

  /// Weight of the level-k fit term ||r_{k-1} - D_k r_k||^2 (1-based k;
  /// r_0 is the patch data).
  double level_weight(int k) const {
    if (k <= 1) return 1.0;
    if (k == 2) return cfg.mu1;
    return cfg.mu2;
  }
};

namespace detail {

inline void require_finite(const MatrixXd& m, const char* subproblem) {
  if (!m.allFinite())
    throw solver_error(std::string("solver aborted: non-finite values after ") + subproblem);
}

inline void require_finite_c(const MatrixXcd& m, const char* subproblem) {
  if (!m.allFinite())
    throw solver_error(std::string("solver aborted: non-finite values after ") + subproblem);
}

/// Ridge damping for dictionary updates, scaled to the Gram trace.
inline double dict_damp(const MatrixXd& gram) {
  return std::max(1e-6 * gram.trace() / static_cast<double>(gram.cols()), 1e-12);
}

/// Effective synthesis dictionary for the code: the product D1 D2 ... D_L.
inline MatrixXd synthesis_product(const SolverState& s) {
  MatrixXd a = s.dict.layers[0];
  for (int k = 1; k < s.cfg.layers; ++k)
    a = a * s.dict.layers[static_cast<std::size_t>(k)];
  return a;
}

/// Rescale the last layer's columns (and the code's rows inversely) so the
/// product dictionary has unit columns. Layer compositions contract, and
/// without this the code penalty's scale would depend on the layer count.
inline void normalize_product_columns(SolverState& s) {
  const MatrixXd prod = synthesis_product(s);
  MatrixXd& dl = s.dict.layers[static_cast<std::size_t>(s.cfg.layers - 1)];
  std::vector<MatrixXd>& z = s.reps[static_cast<std::size_t>(s.cfg.layers - 1)];
  for (Eigen::Index t = 0; t < prod.cols(); ++t) {
    const double n = prod.col(t).norm();
    if (n > 1e-12) {
      dl.col(t) /= n;
      for (auto& zc : z) zc.row(t) *= n;
    }
  }
}

/// Unit-normalize dictionary columns, rescaling the matching rows of the
/// level's representation so the product D_k * r_k is unchanged. Applied to
/// every layer: unnormalized layers let the product dictionary's column
/// norms spread until the code update stops making progress.
inline void normalize_dictionary_columns(MatrixXd& d, std::vector<MatrixXd>& reps) {
  for (Eigen::Index t = 0; t < d.cols(); ++t) {
    const double n = d.col(t).norm();
    if (n > 1e-12) {
      d.col(t) /= n;
      for (auto& rc : reps) rc.row(t) *= n;
    }
  }
}

/// Complex conjugate-gradient solve of (F^H R^T R F + lambda diag(cov)) v = b,
/// used when patch coverage is not uniform.
inline MatrixXcd p1_conjugate_gradient(const std::vector<char>& flags, const MatrixXd& cov,
                                       double lambda, const MatrixXcd& b, double tol_rel,
                                       int max_iters, double* rel_out) {
  auto apply = [&](const MatrixXcd& v) {
    MatrixXcd spec = fft2c(v);
    for (int r = 0; r < spec.rows(); ++r)
      if (!flags[static_cast<std::size_t>(r)]) spec.row(r).setZero();
    MatrixXcd out = ifft2c(spec);
    out += lambda * cov.cwiseProduct(v.real()).cast<Complex>() +
           Complex(0, 1) * lambda * cov.cwiseProduct(v.imag()).cast<Complex>();
    return out;
  };
  const double bnorm = std::sqrt(b.squaredNorm());
  MatrixXcd v = MatrixXcd::Zero(b.rows(), b.cols());
  if (bnorm == 0.0) {
    if (rel_out) *rel_out = 0.0;
    return v;
  }
  MatrixXcd r = b;
  MatrixXcd p = r;
  double rs = r.squaredNorm();
  for (int it = 0; it < max_iters; ++it) {
    const MatrixXcd ap = apply(p);
    const double pap = (p.conjugate().cwiseProduct(ap)).sum().real();
    if (pap <= 0.0) break;
    const double alpha = rs / pap;
    v += alpha * p;
    r -= alpha * ap;
    const double rs_next = r.squaredNorm();
    if (std::sqrt(rs_next) <= tol_rel * bnorm) {
      rs = rs_next;
      break;
    }
    p = r + (rs_next / rs) * p;
    rs = rs_next;
  }
  const double rel = std::sqrt(r.squaredNorm()) / bnorm;
  if (rel_out) *rel_out = rel;
  if (rel > tol_rel)
    throw solver_error("P1 conjugate gradient failed to reach relative residual 1e-8");
  return v;
}

} // namespace detail

/// Deterministic initial state: zero-filled images, Gaussian unit-column
/// dictionaries, and representations from a ReLU'd transpose / pseudo-inverse
/// cascade of the patch data.
inline SolverState init_solver(const SolverConfig& cfg, const AcquiredData& d) {
  cfg.require_valid();
  d.require_valid("init_solver");

  SolverState s;
  s.cfg = cfg;
  s.height = d.echoes.front().mask.height;
  s.width = d.echoes.front().mask.width;
  s.n_echoes = d.n_echoes();
  cfg.patch.require_valid(s.height, s.width);
  s.n_patches = cfg.patch.n_patches(s.height, s.width);

  s.x = adjoint(d);
  s.cov = coverage(cfg.patch, s.height, s.width);
  s.uniform_cov = coverage_is_uniform(s.cov);
  s.cov_value = s.cov(0, 0);

  for (int j = 0; j < s.n_echoes; ++j) {
    const EchoSamples& e = d.echoes[static_cast<std::size_t>(j)];
    s.y.push_back(e.y);
    s.flags.push_back(e.mask.row_flags());
    MatrixXcd spec = MatrixXcd::Zero(s.height, s.width);
    Eigen::Index k = 0;
    for (int r : e.mask.lines)
      for (int c = 0; c < s.width; ++c) spec(r, c) = e.y(k++);
    s.rty.push_back(std::move(spec));
  }

  // Dictionaries: i.i.d. Gaussian entries, unit-normalized columns.
  Rng rng(cfg.seed);
  const std::vector<int> atoms =
      DeepDictionary::atom_counts(cfg.patch.patch_size, cfg.layers, cfg.first_layer_atoms);
  int rows = cfg.patch.patch_size * cfg.patch.patch_size;
  for (int k = 0; k < cfg.layers; ++k) {
    MatrixXd dk(rows, atoms[static_cast<std::size_t>(k)]);
    for (Eigen::Index c = 0; c < dk.cols(); ++c)
      for (Eigen::Index r = 0; r < dk.rows(); ++r) dk(r, c) = rng.gaussian();
    for (Eigen::Index c = 0; c < dk.cols(); ++c) {
      const double n = dk.col(c).norm();
      if (n > 0.0) dk.col(c) /= n;
    }
    s.dict.layers.push_back(std::move(dk));
    rows = atoms[static_cast<std::size_t>(k)];
  }

  // Representations, column by column to bound the working set.
  s.reps.assign(static_cast<std::size_t>(cfg.layers),
                std::vector<MatrixXd>(static_cast<std::size_t>(s.n_cols())));
  std::vector<Eigen::LDLT<MatrixXd>> pinv; // per layer >= 2
  for (int k = 1; k < cfg.layers; ++k) {
    const MatrixXd& dk = s.dict.layers[static_cast<std::size_t>(k)];
    MatrixXd g = dk.transpose() * dk;
    g.diagonal().array() += 1e-10;
    pinv.emplace_back(g);
  }
  for (int c = 0; c < s.n_cols(); ++c) {
    const MatrixXd bc = extract_column(s.x, cfg.patch, c);
    MatrixXd r = s.dict.layers[0].transpose() * bc;
    if (cfg.layers > 1) r = relu_project(r); // level 1 is a proxy only when deeper layers exist
    s.reps[0][static_cast<std::size_t>(c)] = r;
    for (int k = 1; k < cfg.layers; ++k) {
      const MatrixXd& dk = s.dict.layers[static_cast<std::size_t>(k)];
      MatrixXd next = pinv[static_cast<std::size_t>(k - 1)].solve(
          dk.transpose() * s.reps[static_cast<std::size_t>(k - 1)][static_cast<std::size_t>(c)]);
      if (k < cfg.layers - 1) next = relu_project(next); // code layer stays unconstrained
      s.reps[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)] = std::move(next);
    }
  }
  if (cfg.layers > 1) detail::normalize_product_columns(s);
  return s;
}

/// P1 — image update. With uniform patch coverage c the normal equations are
/// diagonal per Fourier coefficient:
///   x_hat = (R^T y + lambda fft2c(aggregate(D1 r1))) / (R^T R + lambda c).
/// Non-uniform coverage falls back to conjugate gradient.
inline void update_images(SolverState& s) {
  const double lam = s.cfg.lambda;
  double worst_rel = 0.0;
  for (int j = 0; j < s.n_echoes; ++j) {
    const MatrixXd gre = s.dict.layers[0] * s.reps[0][static_cast<std::size_t>(2 * j)];
    const MatrixXd gim = s.dict.layers[0] * s.reps[0][static_cast<std::size_t>(2 * j + 1)];
    const MatrixXd agg_re = scatter_column(gre, s.cfg.patch, s.height, s.width);
    const MatrixXd agg_im = scatter_column(gim, s.cfg.patch, s.height, s.width);
    const MatrixXcd agg =
        agg_re.cast<Complex>() + Complex(0.0, 1.0) * agg_im.cast<Complex>();
    detail::require_finite_c(agg, "P1 (update_images)");
    const std::vector<char>& fl = s.flags[static_cast<std::size_t>(j)];

    if (s.uniform_cov || lam == 0.0) {
      MatrixXcd num = s.rty[static_cast<std::size_t>(j)];
      if (lam > 0.0) num += lam * fft2c(agg);
      MatrixXcd xhat(s.height, s.width);
      for (int r = 0; r < s.height; ++r) {
        const double denom = (fl[static_cast<std::size_t>(r)] ? 1.0 : 0.0) + lam * s.cov_value;
        if (denom > 0.0)
          xhat.row(r) = num.row(r) / denom;
        else
          xhat.row(r).setZero();
      }
      s.x.echoes[static_cast<std::size_t>(j)] = ifft2c(xhat);
    } else {
      const MatrixXcd rhs = ifft2c(s.rty[static_cast<std::size_t>(j)]) + lam * agg;
      double rel = 0.0;
      s.x.echoes[static_cast<std::size_t>(j)] =
          detail::p1_conjugate_gradient(fl, s.cov, lam, rhs, 1e-8, 2000, &rel);
      worst_rel = std::max(worst_rel, rel);
    }
    detail::require_finite_c(s.x.echoes[static_cast<std::size_t>(j)], "P1 (update_images)");
  }
  if (s.collect_diagnostics) s.diag.p1_rel_residual = worst_rel; // exact on the fast path
}

/// P2-P4 — dictionary updates by ridge least squares on accumulated normal
/// equations. D1 is column-renormalized right after its refit, with the
/// compensating row rescale of the level-1 representation, so the deeper
/// layers are fit against the representation they will actually see.
inline void update_dictionaries(SolverState& s) {
  if (s.collect_diagnostics) s.diag.dict_rel_residual.assign(
      static_cast<std::size_t>(s.cfg.layers), 0.0);
  for (int k = 0; k < s.cfg.layers; ++k) {
    const std::vector<MatrixXd>& rk = s.reps[static_cast<std::size_t>(k)];
    const Eigen::Index ak = rk[0].rows();
    const Eigen::Index prev_rows =
        k == 0 ? s.cfg.patch.patch_size * s.cfg.patch.patch_size : s.reps[k - 1][0].rows();
    MatrixXd gram = MatrixXd::Zero(ak, ak);
    MatrixXd cross = MatrixXd::Zero(ak, prev_rows);
    for (int c = 0; c < s.n_cols(); ++c) {
      const MatrixXd& z = rk[static_cast<std::size_t>(c)];
      gram.noalias() += z * z.transpose();
      if (k == 0) {
        const MatrixXd bc = extract_column(s.x, s.cfg.patch, c);
        cross.noalias() += z * bc.transpose();
      } else {
        cross.noalias() += z * s.reps[k - 1][static_cast<std::size_t>(c)].transpose();
      }
    }
    const double damp = detail::dict_damp(gram);
    const MatrixXd dkt = ridge_lstsq_gram(gram, cross, damp);
    s.dict.layers[static_cast<std::size_t>(k)] = dkt.transpose();
    detail::require_finite(s.dict.layers[static_cast<std::size_t>(k)],
                           "P2-P4 (update_dictionaries)");
    if (s.collect_diagnostics) {
      MatrixXd m = gram;
      m.diagonal().array() += damp;
      const double denom = std::max(cross.norm(), 1e-300);
      s.diag.dict_rel_residual[static_cast<std::size_t>(k)] = (m * dkt - cross).norm() / denom;
    }
    detail::normalize_dictionary_columns(s.dict.layers[static_cast<std::size_t>(k)],
                                         s.reps[static_cast<std::size_t>(k)]);
  }
  if (s.cfg.layers > 1) detail::normalize_product_columns(s);
}

/// P5-P6 — proxy updates: exact ridge solves of the two coupling quadratics,
/// negatives zeroed afterwards.
inline void update_proxies(SolverState& s) {
  if (s.collect_diagnostics) {
    s.diag.proxy_rel_residual.assign(static_cast<std::size_t>(s.cfg.layers - 1), 0.0);
    s.diag.proxy_min_pre_projection.assign(static_cast<std::size_t>(s.cfg.layers - 1), 0.0);
  }
  for (int k = 1; k < s.cfg.layers; ++k) { // proxy levels, 1-based level k
    const MatrixXd& dk = s.dict.layers[static_cast<std::size_t>(k - 1)];
    const MatrixXd& dnext = s.dict.layers[static_cast<std::size_t>(k)];
    const double wk = s.level_weight(k);
    const double wnext = s.level_weight(k + 1);
    MatrixXd lhs = wk * (dk.transpose() * dk);
    lhs.diagonal().array() += wnext;
    Eigen::LLT<MatrixXd> llt(lhs);
    if (llt.info() != Eigen::Success)
      throw solver_error("P5-P6 (update_proxies): indefinite normal matrix");
    double res_num = 0.0, res_den = 0.0, min_pre = 0.0;
    for (int c = 0; c < s.n_cols(); ++c) {
      MatrixXd rhs;
      if (k == 1) {
        const MatrixXd bc = extract_column(s.x, s.cfg.patch, c);
        rhs = wk * (dk.transpose() * bc);
      } else {
        rhs = wk * (dk.transpose() * s.reps[k - 2][static_cast<std::size_t>(c)]);
      }
      rhs.noalias() += wnext * (dnext * s.reps[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)]);
      MatrixXd sol = llt.solve(rhs);
      if (s.collect_diagnostics) {
        res_num += (lhs * sol - rhs).squaredNorm();
        res_den += rhs.squaredNorm();
        min_pre = std::min(min_pre, sol.minCoeff());
      }
      s.reps[k - 1][static_cast<std::size_t>(c)] = relu_project(sol);
      detail::require_finite(s.reps[k - 1][static_cast<std::size_t>(c)],
                             "P5-P6 (update_proxies)");
    }
    if (s.collect_diagnostics) {
      s.diag.proxy_rel_residual[static_cast<std::size_t>(k - 1)] =
          std::sqrt(res_num) / std::max(std::sqrt(res_den), 1e-300);
      s.diag.proxy_min_pre_projection[static_cast<std::size_t>(k - 1)] = min_pre;
    }
  }
}

namespace detail {

/// Code objective: ||B - (D1...D_L) Z||_F^2 + gamma * reg(Z), summed per patch.
inline double code_objective(const SolverState& s) {
  const MatrixXd a = synthesis_product(s);
  const int last = s.cfg.layers - 1;
  double fit = 0.0;
  for (int c = 0; c < s.n_cols(); ++c) {
    const MatrixXd bc = extract_column(s.x, s.cfg.patch, c);
    fit += (bc - a * s.reps[static_cast<std::size_t>(last)][static_cast<std::size_t>(c)])
               .squaredNorm();
  }
  double reg = 0.0;
  const std::vector<MatrixXd>& z = s.reps[static_cast<std::size_t>(last)];
  const Eigen::Index al = z[0].rows();
  if (s.cfg.regularizer == Regularizer::RowSparse) {
    MatrixXd ns = MatrixXd::Zero(al, s.n_patches);
    for (int c = 0; c < s.n_cols(); ++c) ns += z[static_cast<std::size_t>(c)].cwiseAbs2();
    reg = ns.cwiseSqrt().sum();
  } else {
    MatrixXd m(al, s.n_cols());
    for (int i = 0; i < s.n_patches; ++i) {
      for (int c = 0; c < s.n_cols(); ++c) m.col(c) = z[static_cast<std::size_t>(c)].col(i);
      reg += Eigen::JacobiSVD<MatrixXd>(m).singularValues().sum();
    }
  }
  return fit + s.cfg.gamma * reg;
}

} // namespace detail

/// P7 — code update by warm-started proximal gradient, batched over patches:
///   min_Z ||P_i X - (D1...D_L) Z_i||_F^2 + gamma reg(Z_i).
/// The code synthesizes the patch data through the full dictionary product,
/// which is the reading under which the sparsity/rank prior reaches the
/// reconstruction. Row-sparse mode shrinks each per-patch row jointly across
/// all 2n echo columns; low-rank mode applies singular value shrinkage per
/// patch.
inline void update_codes(SolverState& s) {
  const int last = s.cfg.layers - 1;
  const MatrixXd a = detail::synthesis_product(s);
  std::vector<MatrixXd>& z = s.reps[static_cast<std::size_t>(last)];
  const Eigen::Index al = a.cols();

  if (s.collect_diagnostics) s.diag.code_objective_before = detail::code_objective(s);

  const MatrixXd ata = a.transpose() * a;
  const double lmax = power_lambda_max(ata);
  if (lmax <= 0.0) {
    // Degenerate quadratic term: the penalty minimizer is the zero code.
    for (int c = 0; c < s.n_cols(); ++c) z[static_cast<std::size_t>(c)].setZero();
    if (s.collect_diagnostics) s.diag.code_objective_after = detail::code_objective(s);
    return;
  }
  const double step = 1.0 / (2.0 * lmax);
  const double tau = step * s.cfg.gamma;

  std::vector<MatrixXd> atprev(static_cast<std::size_t>(s.n_cols()));
  for (int c = 0; c < s.n_cols(); ++c) {
    const MatrixXd bc = extract_column(s.x, s.cfg.patch, c);
    atprev[static_cast<std::size_t>(c)] = a.transpose() * bc;
  }

  std::vector<MatrixXd> v(static_cast<std::size_t>(s.n_cols()));
  for (int it = 0; it < s.cfg.ista_iters; ++it) {
    for (int c = 0; c < s.n_cols(); ++c) {
      const MatrixXd& zc = z[static_cast<std::size_t>(c)];
      v[static_cast<std::size_t>(c)] =
          zc - (2.0 * step) * (ata * zc - atprev[static_cast<std::size_t>(c)]);
    }
    if (s.cfg.regularizer == Regularizer::RowSparse) {
      MatrixXd ns = MatrixXd::Zero(al, s.n_patches);
      for (int c = 0; c < s.n_cols(); ++c) ns += v[static_cast<std::size_t>(c)].cwiseAbs2();
      MatrixXd factor(al, s.n_patches);
      for (Eigen::Index r = 0; r < al; ++r)
        for (int i = 0; i < s.n_patches; ++i) {
          const double n = std::sqrt(ns(r, i));
          factor(r, i) = n > tau ? 1.0 - tau / n : 0.0;
        }
      for (int c = 0; c < s.n_cols(); ++c)
        z[static_cast<std::size_t>(c)] =
            v[static_cast<std::size_t>(c)].cwiseProduct(factor);
    } else {
      MatrixXd m(al, s.n_cols());
      for (int i = 0; i < s.n_patches; ++i) {
        for (int c = 0; c < s.n_cols(); ++c)
          m.col(c) = v[static_cast<std::size_t>(c)].col(i);
        const MatrixXd shrunk = svt(m, tau);
        for (int c = 0; c < s.n_cols(); ++c)
          z[static_cast<std::size_t>(c)].col(i) = shrunk.col(c);
      }
    }
  }
  for (int c = 0; c < s.n_cols(); ++c)
    detail::require_finite(z[static_cast<std::size_t>(c)], "P7 (update_codes)");
  if (s.collect_diagnostics) s.diag.code_objective_after = detail::code_objective(s);
}

/// The deep dictionary learning objective in its product form:
///   sum_j ||y_j - R_j F x_j||^2
///   + lambda * sum_i ( ||P_i X - (D1...D_L) Z_i||^2 + gamma reg(Z_i) ).
/// The proxy couplings enforce the ReLU constraints operationally and are
/// not part of the reported value.
inline double solver_objective(const SolverState& s) {
  double data = 0.0;
  for (int j = 0; j < s.n_echoes; ++j) {
    const MatrixXcd spec = fft2c(s.x.echoes[static_cast<std::size_t>(j)]);
    const VectorXcd& yj = s.y[static_cast<std::size_t>(j)];
    Eigen::Index k = 0;
    for (int r = 0; r < s.height; ++r) {
      if (!s.flags[static_cast<std::size_t>(j)][static_cast<std::size_t>(r)]) continue;
      for (int c = 0; c < s.width; ++c) {
        const Complex d = spec(r, c) - yj(k++);
        data += std::norm(d);
      }
    }
  }
  return data + s.cfg.lambda * detail::code_objective(s);
}

/// Outer alternation, cycling the dictionary, proxy, code and image
/// sub-problems each sweep until the relative objective change drops below
/// tol or the sweep budget runs out. The image update closes each cycle:
/// entering the cycle at P1 would overwrite the unsampled K-space content
/// with the synthesis of the untrained initial dictionaries.
inline std::pair<EchoStack, ReconReport> solve(const AcquiredData& d, const SolverConfig& cfg,
                                               const EchoStack* truth = nullptr) {
  const auto t0 = std::chrono::steady_clock::now();
  SolverState s = init_solver(cfg, d);

  ReconReport rep;
  rep.config = cfg;
  rep.initial_objective = solver_objective(s);
  if (!std::isfinite(rep.initial_objective))
    throw solver_error("solver aborted: non-finite initial objective");

  double prev = rep.initial_objective;
  for (int it = 0; it < cfg.outer_iters; ++it) {
    update_dictionaries(s);
    update_proxies(s);
    update_codes(s);
    update_images(s);
    const double obj = solver_objective(s);
    if (!std::isfinite(obj))
      throw solver_error("solver aborted: non-finite objective after full sweep");
    rep.objective_trace.push_back(obj);
    rep.iterations_run = it + 1;
    const double change = std::abs(obj - prev) / std::max(std::abs(prev), 1e-300);
    prev = obj;
    if (change < cfg.tol) break;
  }

  rep.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (truth) rep.final_snr_db = snr_db(s.x, *truth);
  return {std::move(s.x), std::move(rep)};
}

/// Single-layer group-sparse dictionary learning baseline: same alternation
/// with no proxies, no ReLU constraints, and direct l2,1 sparse coding.
inline std::pair<EchoStack, ReconReport> solve_shallow(const AcquiredData& d,
                                                       const SolverConfig& cfg,
                                                       const EchoStack* truth = nullptr) {
  SolverConfig shallow = cfg;
  shallow.layers = 1;
  shallow.regularizer = Regularizer::RowSparse;
  return solve(d, shallow, truth);
}

} // namespace echorec
