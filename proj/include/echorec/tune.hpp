#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "dictlearn.hpp"

namespace echorec {

/// Candidate grids for the greedy L-curve schedule: lambda is tuned with
/// gamma held at the grid median, then gamma at the chosen lambda.
struct TuneGrid {
  std::vector<double> lambda_values;
  std::vector<double> gamma_values;
  SolverConfig fixed;

  /// Sorts ascending; rejects empty or non-positive grids. The tuning result
  /// is therefore invariant to the order values are supplied in.
  void normalize() {
    auto check = [](std::vector<double>& v, const char* name) {
      if (v.empty()) throw validation_error(std::string("TuneGrid: empty ") + name);
      for (double x : v)
        if (!(x > 0.0)) throw validation_error(std::string("TuneGrid: non-positive ") + name);
      std::sort(v.begin(), v.end());
    };
    check(lambda_values, "lambda grid");
    check(gamma_values, "gamma grid");
  }
};

struct TunePoint {
  double value = 0.0;
  double residual = 0.0;
  double penalty = 0.0;
  double curvature = 0.0;
};

struct TuneReport {
  std::vector<TunePoint> lambda_points;
  std::vector<TunePoint> gamma_points;
  double chosen_lambda = 0.0;
  double chosen_gamma = 0.0;
  bool lambda_degenerate = false;
  bool gamma_degenerate = false;

  std::string table() const {
    std::ostringstream os;
    char buf[160];
    os << "param        value      residual       penalty     curvature\n";
    auto rows = [&](const char* name, const std::vector<TunePoint>& pts) {
      for (const auto& p : pts) {
        std::snprintf(buf, sizeof(buf), "%-6s %12.6g %13.6g %13.6g %13.6g\n", name, p.value,
                      p.residual, p.penalty, p.curvature);
        os << buf;
      }
    };
    rows("lambda", lambda_points);
    rows("gamma", gamma_points);
    std::snprintf(buf, sizeof(buf), "chosen lambda %.6g%s, gamma %.6g%s\n", chosen_lambda,
                  lambda_degenerate ? " (degenerate, median)" : "", chosen_gamma,
                  gamma_degenerate ? " (degenerate, median)" : "");
    os << buf;
    return os.str();
  }
};

namespace detail {

/// Menger curvature of consecutive triples on the log-log curve; writes the
/// per-point curvature back and returns the corner index. Collinear or
/// too-short curves fall back to the median index and set `degenerate`.
inline std::size_t lcurve_corner(std::vector<TunePoint>& pts, bool& degenerate) {
  degenerate = false;
  const std::size_t n = pts.size();
  if (n < 3) {
    degenerate = n > 1;
    return (n - 1) / 2;
  }
  auto lx = [&](std::size_t i) { return std::log(std::max(pts[i].residual, 1e-300)); };
  auto ly = [&](std::size_t i) { return std::log(std::max(pts[i].penalty, 1e-300)); };
  double best = 0.0;
  std::size_t best_i = 0;
  bool any = false;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double ax = lx(i) - lx(i - 1), ay = ly(i) - ly(i - 1);
    const double bx = lx(i + 1) - lx(i), by = ly(i + 1) - ly(i);
    const double cx = lx(i + 1) - lx(i - 1), cy = ly(i + 1) - ly(i - 1);
    const double area2 = std::abs(ax * by - ay * bx);
    const double la = std::hypot(ax, ay), lb = std::hypot(bx, by), lc = std::hypot(cx, cy);
    const double denom = la * lb * lc;
    const double kappa = denom > 0.0 ? 2.0 * area2 / denom : 0.0;
    pts[i].curvature = kappa;
    if (!any || kappa > best) {
      best = kappa;
      best_i = i;
      any = true;
    }
  }
  if (!any || best < 1e-12) {
    degenerate = true;
    return (n - 1) / 2;
  }
  return best_i;
}

struct ObjectiveParts {
  double residual = 0.0; // ||y - R F x||_2
  double dl = 0.0;       // patch synthesis fit ||B - (D1...D_L) Z||^2
  double reg = 0.0;      // sum of code penalties (unweighted)
};

inline ObjectiveParts objective_parts(const SolverState& s) {
  ObjectiveParts parts;
  double data = 0.0;
  for (int j = 0; j < s.n_echoes; ++j) {
    const MatrixXcd spec = fft2c(s.x.echoes[static_cast<std::size_t>(j)]);
    const VectorXcd& yj = s.y[static_cast<std::size_t>(j)];
    Eigen::Index k = 0;
    for (int r = 0; r < s.height; ++r) {
      if (!s.flags[static_cast<std::size_t>(j)][static_cast<std::size_t>(r)]) continue;
      for (int c = 0; c < s.width; ++c) data += std::norm(spec(r, c) - yj(k++));
    }
  }
  parts.residual = std::sqrt(data);
  const MatrixXd prod = detail::synthesis_product(s);
  const std::vector<MatrixXd>& z = s.reps[static_cast<std::size_t>(s.cfg.layers - 1)];
  for (int c = 0; c < s.n_cols(); ++c) {
    const MatrixXd bc = extract_column(s.x, s.cfg.patch, c);
    parts.dl += (bc - prod * z[static_cast<std::size_t>(c)]).squaredNorm();
  }
  const Eigen::Index al = z[0].rows();
  if (s.cfg.regularizer == Regularizer::RowSparse) {
    MatrixXd ns = MatrixXd::Zero(al, s.n_patches);
    for (int c = 0; c < s.n_cols(); ++c) ns += z[static_cast<std::size_t>(c)].cwiseAbs2();
    parts.reg = ns.cwiseSqrt().sum();
  } else {
    MatrixXd m(al, s.n_cols());
    for (int i = 0; i < s.n_patches; ++i) {
      for (int c = 0; c < s.n_cols(); ++c) m.col(c) = z[static_cast<std::size_t>(c)].col(i);
      parts.reg += Eigen::JacobiSVD<MatrixXd>(m).singularValues().sum();
    }
  }
  return parts;
}

inline ObjectiveParts short_solve_parts(const AcquiredData& d, const SolverConfig& cfg) {
  SolverState s = init_solver(cfg, d);
  double prev = solver_objective(s);
  for (int it = 0; it < cfg.outer_iters; ++it) {
    update_dictionaries(s);
    update_proxies(s);
    update_codes(s);
    update_images(s);
    const double obj = solver_objective(s);
    const double change = std::abs(obj - prev) / std::max(std::abs(prev), 1e-300);
    prev = obj;
    if (change < cfg.tol) break;
  }
  return objective_parts(s);
}

} // namespace detail

/// Greedy L-curve hyperparameter selection with short-budget solves
/// (outer_iters = 10). Deterministic; the result always lies on the grid.
inline SolverConfig lcurve_tune(TuneGrid grid, const AcquiredData& d,
                                TuneReport* report = nullptr) {
  grid.normalize();
  d.require_valid("lcurve_tune");
  SolverConfig base = grid.fixed;
  base.outer_iters = 10;

  TuneReport local;
  const double gamma_median = grid.gamma_values[(grid.gamma_values.size() - 1) / 2];

  for (double lam : grid.lambda_values) {
    SolverConfig c = base;
    c.lambda = lam;
    c.gamma = gamma_median;
    const auto parts = detail::short_solve_parts(d, c);
    local.lambda_points.push_back(
        {lam, parts.residual, parts.dl + c.gamma * parts.reg, 0.0});
  }
  const std::size_t li = detail::lcurve_corner(local.lambda_points, local.lambda_degenerate);
  local.chosen_lambda = local.lambda_points[li].value;

  for (double gam : grid.gamma_values) {
    SolverConfig c = base;
    c.lambda = local.chosen_lambda;
    c.gamma = gam;
    const auto parts = detail::short_solve_parts(d, c);
    local.gamma_points.push_back({gam, parts.residual, parts.reg, 0.0});
  }
  const std::size_t gi = detail::lcurve_corner(local.gamma_points, local.gamma_degenerate);
  local.chosen_gamma = local.gamma_points[gi].value;

  SolverConfig chosen = grid.fixed;
  chosen.lambda = local.chosen_lambda;
  chosen.gamma = local.chosen_gamma;
  if (report) *report = std::move(local);
  return chosen;
}

} // namespace echorec
