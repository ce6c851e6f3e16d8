// SPDX-License-Identifier: Apache-2.0
#include "qkdsim/pipeline.hpp"

#include <chrono>

#include <fmt/format.h>

#include "qkdsim/errors.hpp"
#include "qkdsim/estimation.hpp"
#include "qkdsim/keyrate.hpp"

namespace qkdsim {

namespace {

struct SiftedKeys {
  BitString alice;
  BitString bob;
};

SiftedKeys key_bits(std::span<const RoundRecord> s2) {
  SiftedKeys keys{BitString(s2.size()), BitString(s2.size())};
  for (std::size_t i = 0; i < s2.size(); ++i) {
    keys.alice.set(i, s2[i].alice_bit);
    keys.bob.set(i, s2[i].bob_bit_sifted);
  }
  return keys;
}

void abort_run(RunReport& report, std::string reason) {
  report.status = RunStatus::aborted;
  report.abort_reason = std::move(reason);
}

// Steps after the session itself. Returns early, with the report marked
// aborted, on the first failed criterion.
void post_process(const RunConfig& config, const SiftedSets& sets, SimulationOutcome& out) {
  RunReport& report = out.report;

  EstimateWithError g;
  try {
    g = chsh_value(conditional_table(sets.s1, config.min_cell_count));
  } catch (const InsufficientData& e) {
    return abort_run(report, fmt::format("insufficient data: {}", e.what()));
  }
  report.g = g.value;
  report.g_std_error = g.std_error;

  if (sets.s2.empty()) return abort_run(report, "insufficient data: key set S2 is empty");
  const EstimateWithError e = qber(sets.s2);
  report.e = e.value;
  report.e_std_error = e.std_error;

  CertifiedChsh certified;
  try {
    certified = certify_chsh(g);
  } catch (const SupraQuantum& err) {
    return abort_run(report, fmt::format("supra-quantum CHSH value: {}", err.what()));
  }
  report.g_certified = certified.value;
  report.g_clamped = certified.clamped;
  if (certified.clamped) {
    report.warnings.push_back(
        fmt::format("CHSH estimate {:.6f} exceeds 2 sqrt 2 within sampling error; clamped", g.value));
  }

  const double rate = key_rate({certified.value, e.value});
  report.r_paper = rate;
  if (!(rate > 0.0)) return abort_run(report, "R <= 0");

  const SiftedKeys keys = key_bits(sets.s2);
  const std::uint64_t master = config.session.master_seed;
  auto reconcile_rng = derive_stream(master, 0, StreamRole::reconciliation);
  ReconciliationResult rec;
  try {
    rec = error_correct(keys.alice, keys.bob, reconcile_rng,
                        {e.value, config.reconciliation_passes, true});
  } catch (const ReconciliationFailure& err) {
    return abort_run(report, fmt::format("reconciliation failure: {}", err.what()));
  }
  report.leaked_bits = rec.leaked_bits;
  report.reconciliation_verified = rec.verified;
  out.reconciliation_log = std::move(rec.transcript);

  const std::uint64_t length =
      final_key_length(sets.s2.size(), certified.value, e.value, rec.leaked_bits);
  report.final_key_length = length;
  if (length == 0) return abort_run(report, "final key length is 0 after leakage");

  auto amplify_rng = derive_stream(master, 0, StreamRole::privacy_amplification);
  const auto seed = ToeplitzSeed::random(keys.alice.size(), length, amplify_rng);
  const BitString final_a = toeplitz_hash(keys.alice, seed, length);
  const BitString final_b = toeplitz_hash(rec.corrected_key, seed, length);
  report.keys_match = final_a == final_b;
  if (!report.keys_match) return abort_run(report, "final keys differ");
  report.final_key_hex = final_a.to_hex();
}

template <typename T>
nlohmann::ordered_json optional_json(const std::optional<T>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

}  // namespace

SimulationOutcome simulate(const RunConfig& config, unsigned threads) {
  const auto start = std::chrono::steady_clock::now();
  SimulationOutcome out;
  out.report.config_echo = config.echo;
  out.report.n_rounds = config.session.rounds;

  out.transcript = run_session(config.session, threads);
  const SiftedSets sets = sift(out.transcript);
  out.report.s1_size = sets.s1.size();
  out.report.s2_size = sets.s2.size();
  post_process(config, sets, out);

  out.report.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

nlohmann::ordered_json to_json(const RunReport& r, bool include_elapsed) {
  nlohmann::ordered_json j;
  j["config_echo"] = r.config_echo;
  j["n_rounds"] = r.n_rounds;
  j["s1_size"] = r.s1_size;
  j["s2_size"] = r.s2_size;
  j["g"] = optional_json(r.g);
  j["g_std_error"] = optional_json(r.g_std_error);
  j["g_certified"] = optional_json(r.g_certified);
  j["g_clamped"] = r.g_clamped;
  j["e"] = optional_json(r.e);
  j["e_std_error"] = optional_json(r.e_std_error);
  j["r_paper"] = optional_json(r.r_paper);
  j["leaked_bits"] = optional_json(r.leaked_bits);
  j["reconciliation_verified"] = r.reconciliation_verified;
  j["final_key_length"] = r.final_key_length;
  j["final_key_hex"] = r.final_key_hex;
  j["keys_match"] = r.keys_match;
  j["status"] = r.status == RunStatus::ok ? "ok" : "aborted";
  j["abort_reason"] = r.abort_reason.empty() ? nlohmann::ordered_json(nullptr)
                                             : nlohmann::ordered_json(r.abort_reason);
  j["warnings"] = r.warnings;
  if (include_elapsed) j["elapsed_seconds"] = r.elapsed_seconds;
  return j;
}

}  // namespace qkdsim
