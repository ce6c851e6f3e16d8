// SPDX-License-Identifier: Apache-2.0
//
// End-to-end session: run, sift, estimate, certify, reconcile, amplify.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qkdsim/config.hpp"
#include "qkdsim/postprocess.hpp"
#include "qkdsim/protocol.hpp"

namespace qkdsim {

enum class RunStatus { ok, aborted };

struct RunReport {
  nlohmann::ordered_json config_echo;
  std::uint64_t n_rounds = 0;
  std::uint64_t s1_size = 0;
  std::uint64_t s2_size = 0;
  std::optional<double> g;
  std::optional<double> g_std_error;
  /// g after clamping a small overshoot of the quantum bound.
  std::optional<double> g_certified;
  bool g_clamped = false;
  std::optional<double> e;
  std::optional<double> e_std_error;
  /// max(0, f(g_certified) - h(e)).
  std::optional<double> r_paper;
  std::optional<std::uint64_t> leaked_bits;
  bool reconciliation_verified = false;
  std::uint64_t final_key_length = 0;
  std::string final_key_hex;
  bool keys_match = false;
  RunStatus status = RunStatus::ok;
  std::string abort_reason;
  std::vector<std::string> warnings;
  double elapsed_seconds = 0.0;
};

struct SimulationOutcome {
  RunReport report;
  Transcript transcript;
  std::vector<ParityExchange> reconciliation_log;

  /// 0 on success, 2 on a protocol abort.
  int exit_code() const noexcept { return report.status == RunStatus::ok ? 0 : 2; }
};

/// Runs a full session. Protocol aborts (no certifiable key, too little
/// data, failed reconciliation) are reported in the result, not thrown.
SimulationOutcome simulate(const RunConfig& config, unsigned threads = 1);

/// Report as ordered JSON; elapsed_seconds is omitted when include_elapsed is
/// false so that reports of identical runs compare byte for byte.
nlohmann::ordered_json to_json(const RunReport& report, bool include_elapsed = true);

}  // namespace qkdsim
