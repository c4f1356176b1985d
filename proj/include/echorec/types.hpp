#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace echorec {

using Complex = std::complex<double>;
using MatrixXcd = Eigen::MatrixXcd;
using MatrixXd = Eigen::MatrixXd;
using VectorXcd = Eigen::VectorXcd;
using VectorXd = Eigen::VectorXd;

/// Thrown when an operation receives arguments that violate its contract.
class validation_error : public std::invalid_argument {
public:
  explicit validation_error(const std::string& what) : std::invalid_argument(what) {}
};

/// Thrown when a numerical procedure fails mid-flight (non-finite state,
/// convergence failure, ...).
class solver_error : public std::runtime_error {
public:
  explicit solver_error(const std::string& what) : std::runtime_error(what) {}
};

/// A stack of complex 2-D images of one cross-section, one per echo time.
/// All echoes share the same geometry.
struct EchoStack {
  int height = 0;
  int width = 0;
  std::vector<MatrixXcd> echoes;

  EchoStack() = default;
  EchoStack(int h, int w, int n) : height(h), width(w) {
    if (h < 1 || w < 1 || n < 1) throw validation_error("EchoStack: dims must be positive");
    echoes.assign(static_cast<std::size_t>(n), MatrixXcd::Zero(h, w));
  }

  int n_echoes() const { return static_cast<int>(echoes.size()); }

  bool all_finite() const {
    for (const auto& e : echoes)
      if (!e.allFinite()) return false;
    return true;
  }

  void require_valid(const char* where) const {
    if (echoes.empty()) throw validation_error(std::string(where) + ": empty echo stack");
    for (const auto& e : echoes)
      if (e.rows() != height || e.cols() != width)
        throw validation_error(std::string(where) + ": echo dims disagree with stack dims");
    if (!all_finite()) throw validation_error(std::string(where) + ": non-finite samples");
  }

  double squared_norm() const {
    double s = 0.0;
    for (const auto& e : echoes) s += e.squaredNorm();
    return s;
  }
};

/// Phase-encode line selection for one echo. Lines index image rows; the
/// full readout is kept for every selected line. `lines` is sorted ascending
/// and duplicate-free, and always contains the contiguous centre block.
struct SamplingMask {
  int height = 0;
  int width = 0;
  std::vector<int> lines;
  double center_fraction = 0.33;
  std::uint64_t seed = 0;

  int n_lines() const { return static_cast<int>(lines.size()); }

  bool is_full() const { return n_lines() == height; }

  /// Per-row selection flags, length `height`.
  std::vector<char> row_flags() const {
    std::vector<char> f(static_cast<std::size_t>(height), 0);
    for (int r : lines) f[static_cast<std::size_t>(r)] = 1;
    return f;
  }

  void require_valid(const char* where) const {
    if (height < 1 || width < 1) throw validation_error(std::string(where) + ": bad mask dims");
    if (lines.empty() || n_lines() > height)
      throw validation_error(std::string(where) + ": bad line count");
    int prev = -1;
    for (int r : lines) {
      if (r < 0 || r >= height || r <= prev)
        throw validation_error(std::string(where) + ": mask lines must be sorted, unique, in range");
      prev = r;
    }
  }
};

/// K-space samples for one echo together with the mask that produced them.
/// `y` stacks the selected lines in ascending line order, each line holding
/// `width` samples left to right.
struct EchoSamples {
  VectorXcd y;
  SamplingMask mask;
};

/// Undersampled multi-echo acquisition (Eq. block-diagonal across echoes).
struct AcquiredData {
  std::vector<EchoSamples> echoes;
  double noise_sigma = 0.0;

  int n_echoes() const { return static_cast<int>(echoes.size()); }

  void require_valid(const char* where) const {
    if (echoes.empty()) throw validation_error(std::string(where) + ": no echoes");
    for (const auto& e : echoes) {
      e.mask.require_valid(where);
      if (e.y.size() != static_cast<Eigen::Index>(e.mask.n_lines()) * e.mask.width)
        throw validation_error(std::string(where) + ": sample count disagrees with mask");
      if (!e.y.allFinite()) throw validation_error(std::string(where) + ": non-finite samples");
      if (e.mask.height != echoes.front().mask.height || e.mask.width != echoes.front().mask.width)
        throw validation_error(std::string(where) + ": echoes have mixed geometries");
    }
  }
};

} // namespace echorec
