// SPDX-License-Identifier: Apache-2.0
//
// JSON session configuration (schema 1).
//
//   {
//     "schema": 1,                              optional, must be 1
//     "rounds": 1000000,                        required, >= 1
//     "seed": 42,                               required, unsigned 64-bit
//     "eve": "ideal_bsm",                       required, see below
//     "alice_mixture": {"weights": [..], "offsets": [..]},
//     "bob_mixture":   {"weights": [..], "offsets": [..]},
//     "channel_a": {"kind": "depolarizing", "p": 0.02},   or an array (chain)
//     "channel_b": {"kind": "identity"},
//     "setting_probabilities": [[p00, p01, p02], [p10, p11, p12]],
//     "min_cell_count": 100,
//     "reconciliation_passes": 4
//   }
//
// eve is "ideal_bsm", "linear_optics_bsm", or an object with "kind":
//   {"kind": "linear_optics_bsm", "efficiency": 0.9}
//   {"kind": "classical_lhv", "preset": "z_intercept"}
//   {"kind": "classical_lhv", "bases": [{"weight", "angle_a", "angle_b"}, ..],
//    "rule": [4 announcements for outcome pairs 00, 01, 10, 11]}
//   {"kind": "dishonest_announce", "preset": "z_random_announce"}
//   {"kind": "dishonest_announce", "angle_a", "angle_b",
//    "table": [4 rows of {psi_plus, psi_minus, fail} probabilities]}
// Channel kinds: identity, depolarizing {p}, misalignment {delta}, loss {eta}.
// Unknown keys are rejected. Errors are ConfigError naming the field.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>

#include <nlohmann/json.hpp>

#include "qkdsim/estimation.hpp"
#include "qkdsim/protocol.hpp"

namespace qkdsim {

inline constexpr int kConfigSchemaVersion = 1;

struct RunConfig {
  SessionConfig session;
  std::uint64_t min_cell_count = kDefaultMinCellCount;
  int reconciliation_passes = 4;
  /// The parsed document with defaults filled in.
  nlohmann::ordered_json echo;
};

RunConfig parse_config(const std::filesystem::path& path);
RunConfig parse_config_json(const nlohmann::json& doc);

/// Sets the numeric field at a dotted path such as "channel_a.p" or
/// "alice_mixture.offsets[1]". Throws ConfigError if the path does not name
/// an existing numeric field.
void set_numeric_parameter(nlohmann::json& doc, std::string_view path, double value);

}  // namespace qkdsim
