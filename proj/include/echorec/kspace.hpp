#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unsupported/Eigen/FFT>

#include "rng.hpp"
#include "types.hpp"

namespace echorec {

namespace detail {

/// Circular shift: out(i) = in((i + offset) mod n), applied to rows then cols.
inline MatrixXcd circshift2(const MatrixXcd& a, int row_off, int col_off) {
  const int h = static_cast<int>(a.rows());
  const int w = static_cast<int>(a.cols());
  MatrixXcd out(h, w);
  for (int c = 0; c < w; ++c) {
    const int sc = (c + col_off) % w;
    for (int r = 0; r < h; ++r) out(r, c) = a((r + row_off) % h, sc);
  }
  return out;
}

inline MatrixXcd fftshift2(const MatrixXcd& a) {
  const int h = static_cast<int>(a.rows()), w = static_cast<int>(a.cols());
  return circshift2(a, (h + 1) / 2, (w + 1) / 2);
}

inline MatrixXcd ifftshift2(const MatrixXcd& a) {
  const int h = static_cast<int>(a.rows()), w = static_cast<int>(a.cols());
  return circshift2(a, h / 2, w / 2);
}

/// Unnormalized forward DFT along both axes.
inline MatrixXcd raw_fft2(const MatrixXcd& a, bool inverse) {
  Eigen::FFT<double> fft;
  const Eigen::Index h = a.rows(), w = a.cols();
  MatrixXcd tmp(h, w);
  std::vector<Complex> in(static_cast<std::size_t>(h)), out(static_cast<std::size_t>(h));
  for (Eigen::Index c = 0; c < w; ++c) {
    for (Eigen::Index r = 0; r < h; ++r) in[static_cast<std::size_t>(r)] = a(r, c);
    if (inverse)
      fft.inv(out, in);
    else
      fft.fwd(out, in);
    for (Eigen::Index r = 0; r < h; ++r) tmp(r, c) = out[static_cast<std::size_t>(r)];
  }
  MatrixXcd res(h, w);
  in.resize(static_cast<std::size_t>(w));
  out.resize(static_cast<std::size_t>(w));
  for (Eigen::Index r = 0; r < h; ++r) {
    for (Eigen::Index c = 0; c < w; ++c) in[static_cast<std::size_t>(c)] = tmp(r, c);
    if (inverse)
      fft.inv(out, in);
    else
      fft.fwd(out, in);
    for (Eigen::Index c = 0; c < w; ++c) res(r, c) = out[static_cast<std::size_t>(c)];
  }
  return res;
}

} // namespace detail

/// Centered, unitary 2-D DFT: DC lands at (floor(H/2), floor(W/2)) and
/// ||fft2c(x)|| == ||x||.
inline MatrixXcd fft2c(const MatrixXcd& img) {
  if (!img.allFinite()) throw validation_error("fft2c: non-finite input");
  const double scale = 1.0 / std::sqrt(static_cast<double>(img.rows() * img.cols()));
  return detail::fftshift2(detail::raw_fft2(detail::ifftshift2(img), false)) * scale;
}

inline MatrixXcd ifft2c(const MatrixXcd& spec) {
  if (!spec.allFinite()) throw validation_error("ifft2c: non-finite input");
  // Eigen's inv scales by 1/(H*W); rescale to the unitary convention.
  const double scale = std::sqrt(static_cast<double>(spec.rows() * spec.cols()));
  return detail::fftshift2(detail::raw_fft2(detail::ifftshift2(spec), true)) * scale;
}

/// Number of centre lines for a given budget: round-half-up of
/// center_fraction * n_lines.
inline int center_line_count(int n_lines, double center_fraction) {
  return static_cast<int>(std::floor(center_fraction * n_lines + 0.5));
}

/// Variable-density Cartesian line mask: a contiguous block of
/// round(center_fraction * n_lines) rows around height/2 plus uniformly drawn
/// periphery lines. Deterministic in (height, n_lines, center_fraction, seed).
inline SamplingMask make_mask(int height, int width, int n_lines, double center_fraction,
                              std::uint64_t seed) {
  if (height < 1 || width < 1) throw validation_error("make_mask: bad dims");
  if (n_lines < 1 || n_lines > height)
    throw validation_error("make_mask: n_lines must be in [1, height]");
  if (!(center_fraction > 0.0 && center_fraction < 1.0))
    throw validation_error("make_mask: center_fraction must be in (0, 1)");

  const int n_center = std::min(center_line_count(n_lines, center_fraction), n_lines);
  const int c0 = height / 2 - n_center / 2; // block covers the DC row at height/2
  if (c0 < 0 || c0 + n_center > height)
    throw validation_error("make_mask: centre block exceeds image height");

  std::vector<char> selected(static_cast<std::size_t>(height), 0);
  for (int r = c0; r < c0 + n_center; ++r) selected[static_cast<std::size_t>(r)] = 1;

  std::vector<int> periphery;
  periphery.reserve(static_cast<std::size_t>(height - n_center));
  for (int r = 0; r < height; ++r)
    if (!selected[static_cast<std::size_t>(r)]) periphery.push_back(r);

  // Partial Fisher-Yates over the periphery.
  Rng rng(seed);
  const int n_extra = n_lines - n_center;
  for (int i = 0; i < n_extra; ++i) {
    const std::size_t j =
        static_cast<std::size_t>(i) + rng.bounded(periphery.size() - static_cast<std::size_t>(i));
    std::swap(periphery[static_cast<std::size_t>(i)], periphery[j]);
    selected[static_cast<std::size_t>(periphery[static_cast<std::size_t>(i)])] = 1;
  }

  SamplingMask m;
  m.height = height;
  m.width = width;
  m.center_fraction = center_fraction;
  m.seed = seed;
  for (int r = 0; r < height; ++r)
    if (selected[static_cast<std::size_t>(r)]) m.lines.push_back(r);
  return m;
}

/// y_i = R_i F x_i + eta_i. Selected K-space lines of each echo, stacked in
/// ascending line order, with optional i.i.d. complex Gaussian noise of total
/// standard deviation `noise_sigma` per sample.
inline AcquiredData forward(const EchoStack& x, const std::vector<SamplingMask>& masks,
                            double noise_sigma = 0.0, std::uint64_t noise_seed = 0) {
  x.require_valid("forward");
  if (static_cast<int>(masks.size()) != x.n_echoes())
    throw validation_error("forward: one mask per echo required");
  if (noise_sigma < 0.0) throw validation_error("forward: negative noise sigma");

  AcquiredData d;
  d.noise_sigma = noise_sigma;
  Rng rng(noise_seed);
  const double comp_sigma = noise_sigma / std::sqrt(2.0);
  for (int j = 0; j < x.n_echoes(); ++j) {
    const SamplingMask& m = masks[static_cast<std::size_t>(j)];
    m.require_valid("forward");
    if (m.height != x.height || m.width != x.width)
      throw validation_error("forward: mask dims disagree with image dims");
    const MatrixXcd spec = fft2c(x.echoes[static_cast<std::size_t>(j)]);
    EchoSamples e;
    e.mask = m;
    e.y.resize(static_cast<Eigen::Index>(m.n_lines()) * m.width);
    Eigen::Index k = 0;
    for (int r : m.lines)
      for (int c = 0; c < m.width; ++c) e.y(k++) = spec(r, c);
    if (noise_sigma > 0.0)
      for (Eigen::Index i = 0; i < e.y.size(); ++i)
        e.y(i) += Complex(comp_sigma * rng.gaussian(), comp_sigma * rng.gaussian());
    d.echoes.push_back(std::move(e));
  }
  return d;
}

/// Adjoint of `forward`: scatter samples back to their lines, zero elsewhere,
/// inverse FFT. This is the zero-filled baseline reconstruction.
inline EchoStack adjoint(const AcquiredData& d) {
  d.require_valid("adjoint");
  const int h = d.echoes.front().mask.height;
  const int w = d.echoes.front().mask.width;
  EchoStack x(h, w, d.n_echoes());
  for (int j = 0; j < d.n_echoes(); ++j) {
    const EchoSamples& e = d.echoes[static_cast<std::size_t>(j)];
    MatrixXcd spec = MatrixXcd::Zero(h, w);
    Eigen::Index k = 0;
    for (int r : e.mask.lines)
      for (int c = 0; c < w; ++c) spec(r, c) = e.y(k++);
    x.echoes[static_cast<std::size_t>(j)] = ifft2c(spec);
  }
  return x;
}

/// Masks for a multi-echo acquisition; echo j is seeded with base_seed ^ j so
/// every echo gets a distinct, reproducible pattern.
inline std::vector<SamplingMask> make_echo_masks(int height, int width, int n_echoes, int n_lines,
                                                 double center_fraction, std::uint64_t base_seed) {
  std::vector<SamplingMask> masks;
  masks.reserve(static_cast<std::size_t>(n_echoes));
  for (int j = 0; j < n_echoes; ++j)
    masks.push_back(make_mask(height, width, n_lines, center_fraction,
                              base_seed ^ static_cast<std::uint64_t>(j)));
  return masks;
}

} // namespace echorec
