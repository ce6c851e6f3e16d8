// SPDX-License-Identifier: Apache-2.0
#include "qkdsim/keyrate.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "qkdsim/errors.hpp"

namespace qkdsim {

double binary_entropy(double e) {
  if (!(e >= 0.0 && e <= 1.0)) {
    throw InvalidArgument(fmt::format("binary entropy argument {} outside [0,1]", e));
  }
  if (e == 0.0 || e == 1.0) return 0.0;
  return -e * std::log2(e) - (1.0 - e) * std::log2(1.0 - e);
}

double min_entropy_bound(double g, double tolerance) {
  if (!std::isfinite(g)) throw InvalidArgument("CHSH value must be finite");
  if (g > kTsirelson + tolerance) {
    throw SupraQuantum(fmt::format("CHSH value {:.9g} exceeds 2*sqrt(2)", g));
  }
  if (g <= kLocalBound) return 0.0;
  if (g >= kTsirelson) return 1.0;
  const double radicand = std::max(0.0, 2.0 - g * g / 4.0);
  return 1.0 - std::log2(1.0 + std::sqrt(radicand));
}

double key_rate_unclamped(KeyRateInput input) {
  return min_entropy_bound(input.g) - binary_entropy(input.e);
}

double key_rate(KeyRateInput input) { return std::max(0.0, key_rate_unclamped(input)); }

double tolerable_qber(double g) {
  if (!(g >= kLocalBound && g <= kTsirelson)) {
    throw InvalidArgument(fmt::format("tolerable QBER needs g in [2, 2 sqrt 2], got {}", g));
  }
  const double target = min_entropy_bound(g);
  // h is strictly increasing on [0, 0.5].
  double lo = 0.0;
  double hi = 0.5;
  for (int i = 0; i < 200 && hi - lo > 1e-10; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (binary_entropy(mid) < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  if (target <= 0.0) return 0.0;
  if (target >= 1.0) return 0.5;
  return 0.5 * (lo + hi);
}

std::vector<SurfaceRow> surface(std::span<const double> g_grid, std::span<const double> e_grid) {
  for (double g : g_grid) {
    if (!(g >= kLocalBound && g <= kTsirelson)) {
      throw InvalidArgument(fmt::format("surface g = {} outside [2, 2 sqrt 2]", g));
    }
  }
  for (double e : e_grid) {
    if (!(e >= 0.0 && e <= 1.0)) {
      throw InvalidArgument(fmt::format("surface e = {} outside [0, 1]", e));
    }
  }
  std::vector<SurfaceRow> rows;
  rows.reserve(g_grid.size() * e_grid.size());
  for (double g : g_grid) {
    const double f = min_entropy_bound(g);
    for (double e : e_grid) rows.push_back({g, e, std::max(0.0, f - binary_entropy(e))});
  }
  return rows;
}

std::vector<double> linspace(double lo, double hi, std::size_t steps) {
  std::vector<double> out;
  if (steps == 0) return out;
  if (steps == 1) return {lo};
  out.reserve(steps);
  const double n = static_cast<double>(steps - 1);
  for (std::size_t i = 0; i < steps; ++i) {
    const double t = static_cast<double>(i) / n;
    out.push_back(i + 1 == steps ? hi : lo + (hi - lo) * t);
  }
  return out;
}

void write_surface_csv(std::ostream& out, std::span<const SurfaceRow> rows) {
  fmt::memory_buffer buf;
  fmt::format_to(std::back_inserter(buf), "g,e,R\n");
  for (const auto& r : rows) {
    fmt::format_to(std::back_inserter(buf), "{:.9g},{:.9g},{:.9g}\n", r.g, r.e, r.R);
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

CertifiedChsh certify_chsh(const EstimateWithError& g, double n_sigma) {
  if (!std::isfinite(g.value)) throw InvalidArgument("CHSH estimate must be finite");
  if (g.value <= kTsirelson) return {g.value, false};
  const double slack = std::max(n_sigma * g.std_error, kSupraQuantumTolerance);
  if (g.value > kTsirelson + slack) {
    throw SupraQuantum(fmt::format("CHSH estimate {:.6f} +- {:.6f} exceeds 2*sqrt(2) by more than "
                                   "{} standard errors",
                                   g.value, g.std_error, n_sigma));
  }
  return {kTsirelson, true};
}

}  // namespace qkdsim
