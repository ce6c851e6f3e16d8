// SPDX-License-Identifier: Apache-2.0
//
// Certified key-rate arithmetic. The rate is R = f(g) - h(e) with
//   f(g) = 1 - log2(1 + sqrt(2 - g^2/4))   (min-entropy from the CHSH value)
//   h(e) = -e log2 e - (1-e) log2 (1-e)   (binary entropy of the QBER)
// f is convex and h concave, so the same formula bounds mixed preparations
// when evaluated at the observed averages.
#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "qkdsim/estimation.hpp"

namespace qkdsim {

/// 2 sqrt(2), the largest quantum CHSH value.
inline constexpr double kTsirelson = 2.8284271247461903;
inline constexpr double kLocalBound = 2.0;
inline constexpr double kSupraQuantumTolerance = 1e-6;

/// h(e) with h(0) = h(1) = 0. Throws InvalidArgument outside [0,1].
double binary_entropy(double e);

/// f(g). Zero for g <= 2, one at 2 sqrt(2). Values in (2 sqrt 2, 2 sqrt 2 +
/// tolerance] are treated as 2 sqrt 2; beyond that throws SupraQuantum.
double min_entropy_bound(double g, double tolerance = kSupraQuantumTolerance);

struct KeyRateInput {
  double g = 0.0;
  double e = 0.0;
};

/// f(g) - h(e), possibly negative.
double key_rate_unclamped(KeyRateInput input);

/// max(0, f(g) - h(e)).
double key_rate(KeyRateInput input);

/// e* in [0, 0.5] with h(e*) = f(g), by bisection to 1e-10. Throws
/// InvalidArgument for g outside [2, 2 sqrt 2].
double tolerable_qber(double g);

struct SurfaceRow {
  double g = 0.0;
  double e = 0.0;
  double R = 0.0;
};

/// One row per (g, e), g-major. Throws InvalidArgument for grid points
/// outside g in [2, 2 sqrt 2], e in [0, 1].
std::vector<SurfaceRow> surface(std::span<const double> g_grid, std::span<const double> e_grid);

/// `steps` evenly spaced points from lo to hi inclusive. Endpoints are exact.
std::vector<double> linspace(double lo, double hi, std::size_t steps);

/// Header "g,e,R", 9 significant digits.
void write_surface_csv(std::ostream& out, std::span<const SurfaceRow> rows);

/// CHSH estimate made safe for f(g): overshoot above 2 sqrt 2 within n_sigma
/// standard errors is clamped (clamped = true); further overshoot throws
/// SupraQuantum.
struct CertifiedChsh {
  double value = 0.0;
  bool clamped = false;
};
CertifiedChsh certify_chsh(const EstimateWithError& g, double n_sigma = 5.0);

}  // namespace qkdsim
