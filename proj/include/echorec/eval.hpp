#pragma once

#include <cmath>

#include "types.hpp"

namespace echorec {

/// SNR ceiling reported for exact reconstructions.
inline constexpr double kSnrCapDb = 300.0;

/// 10 log10(||truth||^2 / ||truth - recon||^2) over all echoes jointly,
/// computed on pixel magnitudes. Exact matches are capped at +300 dB.
inline double snr_db(const EchoStack& recon, const EchoStack& truth) {
  truth.require_valid("snr_db");
  recon.require_valid("snr_db");
  if (recon.height != truth.height || recon.width != truth.width ||
      recon.n_echoes() != truth.n_echoes())
    throw validation_error("snr_db: dimension mismatch");
  double sig = 0.0, err = 0.0;
  for (int j = 0; j < truth.n_echoes(); ++j) {
    const auto& t = truth.echoes[static_cast<std::size_t>(j)];
    const auto& r = recon.echoes[static_cast<std::size_t>(j)];
    for (int a = 0; a < truth.height; ++a)
      for (int b = 0; b < truth.width; ++b) {
        const double tm = std::abs(t(a, b));
        const double d = tm - std::abs(r(a, b));
        sig += tm * tm;
        err += d * d;
      }
  }
  if (sig == 0.0) throw validation_error("snr_db: zero ground truth");
  if (err == 0.0) return kSnrCapDb;
  return std::min(10.0 * std::log10(sig / err), kSnrCapDb);
}

/// | |truth| - |recon| | for one echo; pair with export_png windowed on the
/// ground-truth maximum so darkness is comparable across methods.
inline MatrixXd difference_image(const EchoStack& recon, const EchoStack& truth, int echo) {
  if (echo < 0 || echo >= truth.n_echoes() || echo >= recon.n_echoes())
    throw validation_error("difference_image: echo index out of range");
  if (recon.height != truth.height || recon.width != truth.width)
    throw validation_error("difference_image: dimension mismatch");
  const auto& t = truth.echoes[static_cast<std::size_t>(echo)];
  const auto& r = recon.echoes[static_cast<std::size_t>(echo)];
  MatrixXd out(truth.height, truth.width);
  for (int a = 0; a < truth.height; ++a)
    for (int b = 0; b < truth.width; ++b)
      out(a, b) = std::abs(std::abs(t(a, b)) - std::abs(r(a, b)));
  return out;
}

/// Magnitude of one echo, for PNG export.
inline MatrixXd magnitude_image(const EchoStack& x, int echo) {
  if (echo < 0 || echo >= x.n_echoes())
    throw validation_error("magnitude_image: echo index out of range");
  return x.echoes[static_cast<std::size_t>(echo)].cwiseAbs();
}

} // namespace echorec
