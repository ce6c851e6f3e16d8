// SPDX-License-Identifier: Apache-2.0
#include "qkdsim/estimation.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "qkdsim/errors.hpp"

namespace qkdsim {

namespace {

void validate_cells(const std::array<CondProbTable::Cell, 4>& p) {
  for (int xy = 0; xy < 4; ++xy) {
    double total = 0.0;
    for (double v : p[xy]) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw InvalidArgument(fmt::format("table entry {} in cell (x={},y={}) outside [0,1]", v,
                                          xy / 2, xy % 2));
      }
      total += v;
    }
    if (std::abs(total - 1.0) > kProbabilityTolerance) {
      throw InvalidArgument(
          fmt::format("cell (x={},y={}) sums to {:.12g}", xy / 2, xy % 2, total));
    }
  }
}

DensityMatrix2 evolve(std::span<const Channel> chain, DensityMatrix2 rho) {
  for (const auto& ch : chain) rho = ch.evolve(rho);
  return rho;
}

}  // namespace

CondProbTable::CondProbTable(std::array<Cell, 4> probabilities,
                             std::array<std::uint64_t, 4> counts)
    : p_(probabilities), counts_(counts) {
  validate_cells(p_);
}

CondProbTable CondProbTable::exact(std::array<Cell, 4> probabilities) {
  CondProbTable t(probabilities, {0, 0, 0, 0});
  t.exact_ = true;
  return t;
}

double CondProbTable::correlator(int x, int y) const {
  const Cell& c = p_[2 * x + y];
  return c[0] - c[1] - c[2] + c[3];
}

nlohmann::json to_json(const CondProbTable& table) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& cell : table.cells()) rows.push_back(cell);
  return {{"pab_xy", rows}, {"counts", table.counts()}};
}

CondProbTable table_from_json(const nlohmann::json& j) {
  try {
    const auto cells = j.at("pab_xy").get<std::array<CondProbTable::Cell, 4>>();
    const auto counts = j.at("counts").get<std::array<std::uint64_t, 4>>();
    bool all_zero = true;
    for (auto c : counts) all_zero = all_zero && c == 0;
    return all_zero ? CondProbTable::exact(cells) : CondProbTable(cells, counts);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(fmt::format("malformed probability table: {}", e.what()));
  }
}

CondProbTable conditional_table(std::span<const RoundRecord> s1, std::uint64_t min_cell_count) {
  std::array<std::array<std::uint64_t, 4>, 4> n{};
  for (const auto& r : s1) {
    if (r.x.basis < 0 || r.x.basis > 1 || r.y.basis < 0 || r.y.basis > 1) {
      throw InvalidArgument(fmt::format("round {} is not a CHSH round (x1={}, y1={})",
                                        r.round_index, r.x.basis, r.y.basis));
    }
    ++n[2 * r.x.basis + r.y.basis][2 * r.alice_bit + r.bob_bit_sifted];
  }

  std::array<CondProbTable::Cell, 4> p{};
  std::array<std::uint64_t, 4> counts{};
  for (int xy = 0; xy < 4; ++xy) {
    const std::uint64_t total = n[xy][0] + n[xy][1] + n[xy][2] + n[xy][3];
    if (total < std::max<std::uint64_t>(min_cell_count, 1)) {
      throw InsufficientData(fmt::format("cell (x={},y={}) has {} accepted rounds, need {}",
                                         xy / 2, xy % 2, total, min_cell_count));
    }
    counts[xy] = total;
    for (int ab = 0; ab < 4; ++ab) {
      p[xy][ab] = static_cast<double>(n[xy][ab]) / static_cast<double>(total);
    }
  }
  return CondProbTable(p, counts);
}

EstimateWithError chsh_value(const CondProbTable& table) {
  double g = 0.0;
  double variance = 0.0;
  std::uint64_t samples = 0;
  for (int x = 0; x < 2; ++x) {
    for (int y = 0; y < 2; ++y) {
      const double e = table.correlator(x, y);
      g += (x * y == 1) ? -e : e;
      const std::uint64_t count = table.counts()[2 * x + y];
      if (!table.is_exact()) {
        variance += std::max(0.0, 1.0 - e * e) / static_cast<double>(count);
        samples += count;
      }
    }
  }
  return {g, std::sqrt(variance), samples};
}

EstimateWithError qber(std::span<const RoundRecord> s2) {
  if (s2.empty()) throw InsufficientData("S2 is empty; no QBER estimate possible");
  std::uint64_t errors = 0;
  for (const auto& r : s2) errors += (r.alice_bit != r.bob_bit_sifted) ? 1 : 0;
  const double n = static_cast<double>(s2.size());
  const double e = static_cast<double>(errors) / n;
  return {e, std::sqrt(e * (1.0 - e) / n), s2.size()};
}

CondProbTable analytic_table(const SessionConfig& config) {
  if (!is_quantum_relay(config.eve)) {
    throw NotApplicable("analytic table exists only for quantum Bell-measurement relays");
  }
  const auto psi_plus = bell_state(BellKind::psi_plus);

  std::array<CondProbTable::Cell, 4> p{};
  for (int x = 0; x < 2; ++x) {
    for (int y = 0; y < 2; ++y) {
      auto& cell = p[2 * x + y];
      for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
          double w = 0.0;
          for (const auto& ca : config.alice_mixture.components()) {
            const auto rho_a = evolve(config.channel_a, density(alice_prepare({x, a}, ca.offset)));
            for (const auto& cb : config.bob_mixture.components()) {
              const auto rho_b = evolve(config.channel_b, density(bob_prepare({y, b}, cb.offset)));
              w += ca.weight * cb.weight * born_probability(psi_plus, tensor(rho_a, rho_b));
            }
          }
          const int b_sifted = b ^ static_cast<int>(kS1BobFlip[x][y]);
          cell[2 * a + b_sifted] += w;
        }
      }
      double total = 0.0;
      for (double v : cell) total += v;
      if (total <= 0.0) {
        throw NotApplicable(fmt::format("cell (x={},y={}) is never accepted", x, y));
      }
      for (double& v : cell) v = std::clamp(v / total, 0.0, 1.0);
    }
  }
  return CondProbTable::exact(p);
}

}  // namespace qkdsim
