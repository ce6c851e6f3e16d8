// SPDX-License-Identifier: Apache-2.0
//
// Three-party round model: two senders prepare qubits (with private
// hidden-variable mixtures), the links act on them, an untrusted relay
// announces a Bell outcome, and the rounds are sifted into the statistics
// set S1 and the key set S2.
#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "qkdsim/quantum.hpp"
#include "qkdsim/rng.hpp"

namespace qkdsim {

/// Preparation angles of the sender bases (observable angle convention).
inline constexpr std::array<double, 2> kAliceBasisAngles = {0.0, std::numbers::pi / 2};
inline constexpr std::array<double, 3> kBobBasisAngles = {5 * std::numbers::pi / 4,
                                                          -std::numbers::pi / 4, 0.0};

/// Fixed relabeling of Bob's bit for S1 rounds, indexed [x1][y1]. Chosen once
/// so that the ideal post-selected correlations give CHSH = +2 sqrt(2).
inline constexpr std::array<std::array<bool, 2>, 2> kS1BobFlip = {{{false, true}, {true, false}}};

struct PreparationSetting {
  int basis = 0;  ///< x1 for Alice (0..1), y1 for Bob (0..2)
  int bit = 0;    ///< x2 / y2

  bool operator==(const PreparationSetting&) const = default;
};

QubitState alice_prepare(PreparationSetting setting, double offset);
QubitState bob_prepare(PreparationSetting setting, double offset);

struct MixtureComponent {
  double weight = 1.0;
  double offset = 0.0;  ///< added to the preparation angle, radians

  bool operator==(const MixtureComponent&) const = default;
};

/// Finite hidden-variable mixture over preparation-angle offsets.
class HiddenVariableMixture {
 public:
  /// One component, zero offset.
  HiddenVariableMixture() : components_{{1.0, 0.0}} {}
  /// Throws InvalidArgument unless weights are non-negative and sum to 1
  /// within 1e-9 and offsets are finite.
  explicit HiddenVariableMixture(std::vector<MixtureComponent> components);

  std::span<const MixtureComponent> components() const noexcept { return components_; }
  std::size_t size() const noexcept { return components_.size(); }

  std::size_t sample(RandomStream& rng) const;

  bool operator==(const HiddenVariableMixture&) const = default;

 private:
  std::vector<MixtureComponent> components_;
};

enum class Announcement : std::uint8_t { psi_plus, psi_minus, fail };
enum class SiftSet : std::uint8_t { S1, S2, discard };

std::string_view to_string(Announcement a);
std::string_view to_string(SiftSet s);
Announcement announcement_from_string(std::string_view s);
SiftSet sift_set_from_string(std::string_view s);

struct RoundRecord {
  std::uint64_t round_index = 0;
  PreparationSetting x;
  PreparationSetting y;
  std::uint32_t lambda_a = 0;
  std::uint32_t lambda_b = 0;
  Announcement announcement = Announcement::fail;
  SiftSet sift_tag = SiftSet::discard;
  int alice_bit = 0;
  int bob_bit_raw = 0;
  int bob_bit_sifted = 0;

  bool operator==(const RoundRecord&) const = default;
};

using Transcript = std::vector<RoundRecord>;

// Relay strategies -----------------------------------------------------------

/// Full Bell-state measurement; phi outcomes are reported as failures.
struct IdealBsm {
  bool operator==(const IdealBsm&) const = default;
};

/// Linear-optics analyzer: resolves psi+ / psi- only, each detection
/// succeeding with probability `efficiency`.
struct LinearOpticsBsm {
  double efficiency = 1.0;
  bool operator==(const LinearOpticsBsm&) const = default;
};

struct LocalBasisChoice {
  double weight = 1.0;
  double angle_a = 0.0;
  double angle_b = 0.0;
  bool operator==(const LocalBasisChoice&) const = default;
};

/// Measure-and-decide relay: measures each qubit on its own in a basis drawn
/// from private randomness and maps the outcome pair through a fixed rule.
struct ClassicalLhv {
  std::string name;
  std::vector<LocalBasisChoice> bases;
  std::array<Announcement, 4> rule{};  ///< indexed by 2*outcome_a + outcome_b
  bool operator==(const ClassicalLhv&) const = default;
};

/// Local measurements in fixed bases, then a randomized announcement:
/// table[2*oa+ob] = probabilities of {psi_plus, psi_minus, fail}.
struct DishonestAnnounce {
  std::string name;
  double angle_a = 0.0;
  double angle_b = 0.0;
  std::array<std::array<double, 3>, 4> table{};
  bool operator==(const DishonestAnnounce&) const = default;
};

using EveStrategy = std::variant<IdealBsm, LinearOpticsBsm, ClassicalLhv, DishonestAnnounce>;

/// Throws InvalidArgument on malformed strategy parameters.
void validate(const EveStrategy& strategy);

bool is_quantum_relay(const EveStrategy& strategy);

/// The relay only ever sees the two photons and its own randomness.
Announcement eve_measure(const EveStrategy& strategy, const Photon& alice_out,
                         const Photon& bob_out, RandomStream& rng);

/// Named measure-and-decide strategies shipped with the simulator.
std::vector<EveStrategy> bundled_classical_strategies();

/// Looks up a bundled strategy by name; throws InvalidArgument if unknown.
EveStrategy bundled_classical_strategy(std::string_view name);

// Session --------------------------------------------------------------------

/// Joint distribution over (x1, y1), indexed [x1][y1]. Bits are uniform.
struct SettingDistribution {
  std::array<std::array<double, 3>, 2> joint{{{1.0 / 6, 1.0 / 6, 1.0 / 6},
                                              {1.0 / 6, 1.0 / 6, 1.0 / 6}}};
  bool operator==(const SettingDistribution&) const = default;
};

struct SessionConfig {
  std::uint64_t rounds = 1;
  std::uint64_t master_seed = 0;
  HiddenVariableMixture alice_mixture;
  HiddenVariableMixture bob_mixture;
  std::vector<Channel> channel_a;
  std::vector<Channel> channel_b;
  EveStrategy eve = IdealBsm{};
  SettingDistribution settings;

  /// Throws InvalidArgument if any invariant is violated.
  void validate() const;
};

/// Assigns sift_tag and bob_bit_sifted from the raw fields.
void classify(RoundRecord& record);

RoundRecord run_round(const SessionConfig& config, std::uint64_t round_index);

/// Runs all rounds on up to `threads` workers. The result does not depend on
/// the thread count.
Transcript run_session(const SessionConfig& config, unsigned threads = 1);

struct SiftedSets {
  std::vector<RoundRecord> s1;
  std::vector<RoundRecord> s2;
};

/// Re-derives the tags of every record and splits out S1 and S2.
SiftedSets sift(std::span<const RoundRecord> transcript);

/// JSON-lines, one record per line.
void write_transcript(std::ostream& out, std::span<const RoundRecord> transcript);
Transcript read_transcript(std::istream& in);

}  // namespace qkdsim
