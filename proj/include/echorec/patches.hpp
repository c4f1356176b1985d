#pragma once

#include <vector>

#include "types.hpp"

namespace echorec {

enum class Boundary { Wraparound, InteriorOnly };

/// Geometry of the patch operator. Patches are square, vectorized
/// column-major; echo j of a patch occupies real column 2j and imaginary
/// column 2j+1 of the patch matrix.
struct PatchConfig {
  int patch_size = 12;
  int stride = 1;
  Boundary boundary = Boundary::Wraparound;

  void require_valid(int height, int width) const {
    if (patch_size < 1) throw validation_error("PatchConfig: patch_size must be positive");
    if (stride < 1 || stride > patch_size)
      throw validation_error("PatchConfig: stride must be in [1, patch_size]");
    if (patch_size > height || patch_size > width)
      throw validation_error("PatchConfig: patch exceeds image");
  }

  int origins_along(int extent) const {
    if (boundary == Boundary::Wraparound) return (extent + stride - 1) / stride;
    return (extent - patch_size) / stride + 1;
  }

  int n_patches(int height, int width) const {
    return origins_along(height) * origins_along(width);
  }

  /// Origin (top-left pixel) of patch `index`; row-major over the origin grid.
  std::pair<int, int> origin(int index, int height, int width) const {
    const int oc = origins_along(width);
    return {(index / oc) * stride, (index % oc) * stride};
  }
};

/// One extracted patch: rows are the patch_size^2 pixels (column-major),
/// columns alternate real/imag per echo.
struct PatchMatrix {
  MatrixXd values;
  int patch_index = 0;
  int origin_row = 0;
  int origin_col = 0;
};

inline PatchMatrix extract(const EchoStack& x, const PatchConfig& cfg, int index) {
  cfg.require_valid(x.height, x.width);
  if (index < 0 || index >= cfg.n_patches(x.height, x.width))
    throw validation_error("extract: patch index out of range");
  const int p = cfg.patch_size;
  const auto [orow, ocol] = cfg.origin(index, x.height, x.width);
  PatchMatrix pm;
  pm.patch_index = index;
  pm.origin_row = orow;
  pm.origin_col = ocol;
  pm.values.resize(p * p, 2 * x.n_echoes());
  for (int j = 0; j < x.n_echoes(); ++j) {
    const MatrixXcd& e = x.echoes[static_cast<std::size_t>(j)];
    for (int q = 0; q < p * p; ++q) {
      const int r = (orow + q % p) % x.height;
      const int c = (ocol + q / p) % x.width;
      const Complex v = e(r, c);
      pm.values(q, 2 * j) = v.real();
      pm.values(q, 2 * j + 1) = v.imag();
    }
  }
  return pm;
}

inline std::vector<PatchMatrix> extract_all(const EchoStack& x, const PatchConfig& cfg) {
  cfg.require_valid(x.height, x.width);
  const int n = cfg.n_patches(x.height, x.width);
  std::vector<PatchMatrix> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out.push_back(extract(x, cfg, i));
  return out;
}

/// Per-pixel count of covering patches. Wraparound with stride 1 is uniformly
/// patch_size^2, which is what gives the image update its closed form.
inline MatrixXd coverage(const PatchConfig& cfg, int height, int width) {
  cfg.require_valid(height, width);
  MatrixXd cov = MatrixXd::Zero(height, width);
  const int n = cfg.n_patches(height, width);
  const int p = cfg.patch_size;
  for (int i = 0; i < n; ++i) {
    const auto [orow, ocol] = cfg.origin(i, height, width);
    for (int q = 0; q < p * p; ++q)
      cov((orow + q % p) % height, (ocol + q / p) % width) += 1.0;
  }
  return cov;
}

inline bool coverage_is_uniform(const MatrixXd& cov) {
  return cov.maxCoeff() - cov.minCoeff() == 0.0;
}

/// Adjoint of extract_all: every patch entry is added back onto the pixel it
/// came from. aggregate(extract_all(x)) == coverage .* x elementwise.
inline EchoStack aggregate(const std::vector<PatchMatrix>& patches, const PatchConfig& cfg,
                           int height, int width, int n_echoes) {
  cfg.require_valid(height, width);
  if (static_cast<int>(patches.size()) != cfg.n_patches(height, width))
    throw validation_error("aggregate: incomplete patch set");
  EchoStack out(height, width, n_echoes);
  const int p = cfg.patch_size;
  for (const PatchMatrix& pm : patches) {
    if (pm.values.rows() != p * p || pm.values.cols() != 2 * n_echoes)
      throw validation_error("aggregate: patch shape disagrees with config");
    const auto [orow, ocol] = cfg.origin(pm.patch_index, height, width);
    for (int j = 0; j < n_echoes; ++j) {
      MatrixXcd& e = out.echoes[static_cast<std::size_t>(j)];
      for (int q = 0; q < p * p; ++q) {
        const int r = (orow + q % p) % height;
        const int c = (ocol + q / p) % width;
        e(r, c) += Complex(pm.values(q, 2 * j), pm.values(q, 2 * j + 1));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Bulk column layout used by the solver: one (patch_size^2 x n_patches) real
// matrix per real/imag echo column. Identical index math as extract/aggregate,
// organized so the per-patch solves become a handful of large GEMMs.
// ---------------------------------------------------------------------------

/// One real plane of the bulk layout: column index 2j selects the real part
/// of echo j, 2j+1 the imaginary part. Result is patch_size^2 x n_patches.
inline MatrixXd extract_column(const EchoStack& x, const PatchConfig& cfg, int col) {
  cfg.require_valid(x.height, x.width);
  if (col < 0 || col >= 2 * x.n_echoes())
    throw validation_error("extract_column: column out of range");
  const int n = cfg.n_patches(x.height, x.width);
  const int p = cfg.patch_size;
  const bool real_part = col % 2 == 0;
  const MatrixXcd& e = x.echoes[static_cast<std::size_t>(col / 2)];
  MatrixXd out(p * p, n);
  for (int i = 0; i < n; ++i) {
    const auto [orow, ocol] = cfg.origin(i, x.height, x.width);
    for (int q = 0; q < p * p; ++q) {
      const Complex v = e((orow + q % p) % x.height, (ocol + q / p) % x.width);
      out(q, i) = real_part ? v.real() : v.imag();
    }
  }
  return out;
}

/// Adjoint of extract_column for a single real plane.
inline MatrixXd scatter_column(const MatrixXd& vals, const PatchConfig& cfg, int height,
                               int width) {
  cfg.require_valid(height, width);
  const int n = cfg.n_patches(height, width);
  const int p = cfg.patch_size;
  if (vals.rows() != p * p || vals.cols() != n)
    throw validation_error("scatter_column: shape disagrees with config");
  MatrixXd out = MatrixXd::Zero(height, width);
  for (int i = 0; i < n; ++i) {
    const auto [orow, ocol] = cfg.origin(i, height, width);
    for (int q = 0; q < p * p; ++q)
      out((orow + q % p) % height, (ocol + q / p) % width) += vals(q, i);
  }
  return out;
}

/// Column 2j / 2j+1 hold the real / imaginary parts of echo j for all patches.
inline std::vector<MatrixXd> extract_columns(const EchoStack& x, const PatchConfig& cfg) {
  std::vector<MatrixXd> cols;
  cols.reserve(static_cast<std::size_t>(2 * x.n_echoes()));
  for (int c = 0; c < 2 * x.n_echoes(); ++c) cols.push_back(extract_column(x, cfg, c));
  return cols;
}

inline EchoStack aggregate_columns(const std::vector<MatrixXd>& cols, const PatchConfig& cfg,
                                   int height, int width) {
  if (cols.empty() || cols.size() % 2 != 0)
    throw validation_error("aggregate_columns: need real/imag column pairs");
  const int n_echoes = static_cast<int>(cols.size()) / 2;
  EchoStack out(height, width, n_echoes);
  for (int j = 0; j < n_echoes; ++j) {
    const MatrixXd re = scatter_column(cols[static_cast<std::size_t>(2 * j)], cfg, height, width);
    const MatrixXd im =
        scatter_column(cols[static_cast<std::size_t>(2 * j + 1)], cfg, height, width);
    out.echoes[static_cast<std::size_t>(j)] =
        re.cast<Complex>() + Complex(0.0, 1.0) * im.cast<Complex>();
  }
  return out;
}

} // namespace echorec
