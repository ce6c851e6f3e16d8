// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <span>

#include <nlohmann/json_fwd.hpp>

#include "qkdsim/protocol.hpp"

namespace qkdsim {

inline constexpr std::uint64_t kDefaultMinCellCount = 100;

/// p(a,b|x,y) for a,b,x,y in {0,1}, each (x,y) cell normalized on its own.
/// Cells are indexed 2x+y, outcomes 2a+b.
class CondProbTable {
 public:
  using Cell = std::array<double, 4>;

  /// Empirical table. Validates entries in [0,1] and rows summing to 1
  /// within 1e-9.
  CondProbTable(std::array<Cell, 4> probabilities, std::array<std::uint64_t, 4> counts);

  /// Exact table with no sample counts.
  static CondProbTable exact(std::array<Cell, 4> probabilities);

  double operator()(int a, int b, int x, int y) const { return p_[2 * x + y][2 * a + b]; }
  const std::array<Cell, 4>& cells() const noexcept { return p_; }
  const std::array<std::uint64_t, 4>& counts() const noexcept { return counts_; }
  bool is_exact() const noexcept { return exact_; }

  /// E(x,y) = sum_ab (-1)^(a+b) p(a,b|x,y).
  double correlator(int x, int y) const;

 private:
  std::array<Cell, 4> p_;
  std::array<std::uint64_t, 4> counts_;
  bool exact_ = false;
};

/// {"pab_xy": 4x4 row-major (row = 2x+y, column = 2a+b), "counts": [4]}
nlohmann::json to_json(const CondProbTable& table);
CondProbTable table_from_json(const nlohmann::json& j);

struct EstimateWithError {
  double value = 0.0;
  double std_error = 0.0;
  /// Number of samples behind the estimate; 0 marks an exact value.
  std::uint64_t sample_size = 0;
};

/// Empirical table from S1 records, using Bob's sifted bit. Throws
/// InsufficientData naming the first cell with fewer than min_cell_count
/// records, and InvalidArgument for records outside x1, y1 in {0,1}.
CondProbTable conditional_table(std::span<const RoundRecord> s1,
                                std::uint64_t min_cell_count = kDefaultMinCellCount);

/// g = sum (-1)^(a+b+xy) p(a,b|x,y). Standard error: independent binomial
/// cells, var(E_xy) = (1 - E_xy^2) / N_xy, summed in quadrature.
EstimateWithError chsh_value(const CondProbTable& table);

/// Fraction of S2 records with alice_bit != bob_bit_sifted. Throws
/// InsufficientData on an empty set.
EstimateWithError qber(std::span<const RoundRecord> s2);

/// Exact post-selected table for a quantum relay: Born weight of psi+ on the
/// channel-evolved pair, averaged over both hidden-variable mixtures, with
/// Bob's S1 relabeling applied, normalized per (x,y) cell. Loss does not
/// enter because lost rounds are discarded. Throws NotApplicable for
/// classical relays.
CondProbTable analytic_table(const SessionConfig& config);

}  // namespace qkdsim
