#pragma once

#include <cmath>
#include <vector>

#include "rng.hpp"
#include "types.hpp"

namespace echorec {

/// One elliptical region in normalized [0,1]^2 coordinates. Pixel centres
/// are sampled at ((col+0.5)/size, (row+0.5)/size).
struct EllipseRegion {
  double center_x = 0.5;
  double center_y = 0.5;
  double semi_x = 0.25; // semi-axis along the rotated x direction
  double semi_y = 0.25;
  double angle_rad = 0.0;
  double proton_density = 1.0;
  double t2_ms = 80.0;

  bool contains(double x, double y) const {
    const double dx = x - center_x;
    const double dy = y - center_y;
    const double c = std::cos(angle_rad), s = std::sin(angle_rad);
    const double u = (dx * c + dy * s) / semi_x;
    const double v = (-dx * s + dy * c) / semi_y;
    return u * u + v * v <= 1.0;
  }
};

/// Synthetic multi-echo phantom: later regions overwrite earlier ones, and
/// echo j (0-based) carries intensity rho * exp(-(j+1) * echo_spacing / T2).
struct PhantomSpec {
  int size = 256;
  int n_echoes = 8;
  double echo_spacing_ms = 6.738;
  std::vector<EllipseRegion> regions;
  std::uint64_t seed = 0;

  void require_valid() const {
    if (size < 1 || n_echoes < 1) throw validation_error("PhantomSpec: bad dims");
    if (echo_spacing_ms <= 0.0) throw validation_error("PhantomSpec: echo spacing must be positive");
    if (regions.empty()) throw validation_error("PhantomSpec: no regions");
    for (const auto& r : regions) {
      if (r.semi_x <= 0.0 || r.semi_y <= 0.0)
        throw validation_error("PhantomSpec: degenerate ellipse");
      if (r.t2_ms <= 0.0) throw validation_error("PhantomSpec: T2 must be positive");
    }
  }
};

/// Four-region layout used throughout the test and CLI defaults.
inline PhantomSpec default_phantom_spec(int size = 256, int n_echoes = 8,
                                        std::uint64_t seed = 0) {
  PhantomSpec spec;
  spec.size = size;
  spec.n_echoes = n_echoes;
  spec.seed = seed;
  spec.regions = {
      {0.50, 0.50, 0.40, 0.34, 0.00, 1.00, 90.0},
      {0.42, 0.38, 0.16, 0.11, 0.50, 0.75, 45.0},
      {0.60, 0.62, 0.09, 0.13, -0.30, 1.15, 140.0},
      {0.38, 0.66, 0.07, 0.05, 0.00, 0.55, 22.0},
  };
  return spec;
}

/// Magnitudes follow the per-region T2 decay; a smooth low-order phase ramp
/// (coefficients drawn from the seed) makes the images genuinely complex.
inline EchoStack make_phantom(const PhantomSpec& spec) {
  spec.require_valid();
  Rng rng(spec.seed);
  const double pi = 3.14159265358979323846;
  const double a0 = (2.0 * rng.uniform01() - 1.0) * pi / 4.0;
  const double a1 = (2.0 * rng.uniform01() - 1.0) * pi / 4.0;
  const double a2 = (2.0 * rng.uniform01() - 1.0) * pi / 4.0;

  EchoStack x(spec.size, spec.size, spec.n_echoes);
  for (int r = 0; r < spec.size; ++r) {
    const double py = (r + 0.5) / spec.size;
    for (int c = 0; c < spec.size; ++c) {
      const double px = (c + 0.5) / spec.size;
      // Last region containing the pixel wins.
      const EllipseRegion* hit = nullptr;
      for (const auto& reg : spec.regions)
        if (reg.contains(px, py)) hit = &reg;
      if (!hit) continue;
      const double theta =
          a0 * (py - 0.5) + a1 * (px - 0.5) + a2 * (py - 0.5) * (px - 0.5);
      const Complex phase(std::cos(theta), std::sin(theta));
      for (int j = 0; j < spec.n_echoes; ++j) {
        const double mag =
            hit->proton_density * std::exp(-(j + 1) * spec.echo_spacing_ms / hit->t2_ms);
        x.echoes[static_cast<std::size_t>(j)](r, c) = mag * phase;
      }
    }
  }
  return x;
}

} // namespace echorec
