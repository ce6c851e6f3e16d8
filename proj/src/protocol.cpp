// SPDX-License-Identifier: Apache-2.0
#include "qkdsim/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <istream>
#include <mutex>
#include <new>
#include <ostream>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "qkdsim/errors.hpp"

namespace qkdsim {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

void check_bit(int bit, const char* who) {
  if (bit != 0 && bit != 1) {
    throw InvalidArgument(fmt::format("{} bit must be 0 or 1, got {}", who, bit));
  }
}

// Projective measurement of a single photon in the eigenbasis of the given
// angle. Returns 0 for the +1 outcome.
int measure_local(const DensityMatrix2& rho, double angle, RandomStream& rng) {
  const auto basis = eigenstates(observable_from_angle(angle));
  const double p0 = std::clamp(born_probability(basis.plus, rho), 0.0, 1.0);
  return rng.uniform() < p0 ? 0 : 1;
}

void check_probability(double p, const std::string& what) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw InvalidArgument(fmt::format("{} = {} outside [0,1]", what, p));
  }
}

}  // namespace

QubitState alice_prepare(PreparationSetting setting, double offset) {
  if (setting.basis < 0 || setting.basis > 1) {
    throw InvalidArgument(fmt::format("Alice basis index must be 0 or 1, got {}", setting.basis));
  }
  check_bit(setting.bit, "Alice");
  return eigenstate_for_bit(observable_from_angle(kAliceBasisAngles[setting.basis] + offset),
                            setting.bit);
}

QubitState bob_prepare(PreparationSetting setting, double offset) {
  if (setting.basis < 0 || setting.basis > 2) {
    throw InvalidArgument(fmt::format("Bob basis index must be 0, 1 or 2, got {}", setting.basis));
  }
  check_bit(setting.bit, "Bob");
  return eigenstate_for_bit(observable_from_angle(kBobBasisAngles[setting.basis] + offset),
                            setting.bit);
}

HiddenVariableMixture::HiddenVariableMixture(std::vector<MixtureComponent> components)
    : components_(std::move(components)) {
  if (components_.empty()) throw InvalidArgument("hidden-variable mixture has no components");
  double total = 0.0;
  for (const auto& c : components_) {
    if (!(c.weight >= 0.0) || !std::isfinite(c.weight)) {
      throw InvalidArgument(fmt::format("mixture weight {} is negative or non-finite", c.weight));
    }
    if (!std::isfinite(c.offset)) throw InvalidArgument("mixture offset must be finite");
    total += c.weight;
  }
  if (std::abs(total - 1.0) > kProbabilityTolerance) {
    throw InvalidArgument(fmt::format("mixture weights sum to {:.12g}, expected 1", total));
  }
}

std::size_t HiddenVariableMixture::sample(RandomStream& rng) const {
  if (components_.size() == 1) return 0;
  std::vector<double> weights;
  weights.reserve(components_.size());
  for (const auto& c : components_) weights.push_back(c.weight);
  return sample_outcome(weights, rng);
}

std::string_view to_string(Announcement a) {
  switch (a) {
    case Announcement::psi_plus: return "psi_plus";
    case Announcement::psi_minus: return "psi_minus";
    case Announcement::fail: return "fail";
  }
  return "fail";
}

std::string_view to_string(SiftSet s) {
  switch (s) {
    case SiftSet::S1: return "S1";
    case SiftSet::S2: return "S2";
    case SiftSet::discard: return "discard";
  }
  return "discard";
}

Announcement announcement_from_string(std::string_view s) {
  if (s == "psi_plus") return Announcement::psi_plus;
  if (s == "psi_minus") return Announcement::psi_minus;
  if (s == "fail") return Announcement::fail;
  throw InvalidArgument(fmt::format("unknown announcement '{}'", s));
}

SiftSet sift_set_from_string(std::string_view s) {
  if (s == "S1") return SiftSet::S1;
  if (s == "S2") return SiftSet::S2;
  if (s == "discard") return SiftSet::discard;
  throw InvalidArgument(fmt::format("unknown sift set '{}'", s));
}

// Relay ----------------------------------------------------------------------

void validate(const EveStrategy& strategy) {
  std::visit(overloaded{
                 [](const IdealBsm&) {},
                 [](const LinearOpticsBsm& s) { check_probability(s.efficiency, "efficiency"); },
                 [](const ClassicalLhv& s) {
                   if (s.bases.empty()) throw InvalidArgument("classical_lhv needs at least one basis");
                   double total = 0.0;
                   for (const auto& b : s.bases) {
                     check_probability(b.weight, "basis weight");
                     if (!std::isfinite(b.angle_a) || !std::isfinite(b.angle_b)) {
                       throw InvalidArgument("classical_lhv angles must be finite");
                     }
                     total += b.weight;
                   }
                   if (std::abs(total - 1.0) > kProbabilityTolerance) {
                     throw InvalidArgument("classical_lhv basis weights must sum to 1");
                   }
                 },
                 [](const DishonestAnnounce& s) {
                   if (!std::isfinite(s.angle_a) || !std::isfinite(s.angle_b)) {
                     throw InvalidArgument("dishonest_announce angles must be finite");
                   }
                   for (const auto& row : s.table) {
                     double total = 0.0;
                     for (double p : row) {
                       check_probability(p, "announcement probability");
                       total += p;
                     }
                     if (std::abs(total - 1.0) > kProbabilityTolerance) {
                       throw InvalidArgument("dishonest_announce rows must sum to 1");
                     }
                   }
                 },
             },
             strategy);
}

bool is_quantum_relay(const EveStrategy& strategy) {
  return std::holds_alternative<IdealBsm>(strategy) ||
         std::holds_alternative<LinearOpticsBsm>(strategy);
}

Announcement eve_measure(const EveStrategy& strategy, const Photon& alice_out,
                         const Photon& bob_out, RandomStream& rng) {
  if (!alice_out || !bob_out) return Announcement::fail;
  const DensityMatrix2& rho_a = *alice_out;
  const DensityMatrix2& rho_b = *bob_out;

  return std::visit(
      overloaded{
          [&](const IdealBsm&) {
            const auto p = bell_probabilities(tensor(rho_a, rho_b));
            switch (kAllBellKinds[sample_outcome(p, rng)]) {
              case BellKind::psi_plus: return Announcement::psi_plus;
              case BellKind::psi_minus: return Announcement::psi_minus;
              default: return Announcement::fail;
            }
          },
          [&](const LinearOpticsBsm& s) {
            const auto p = bell_probabilities(tensor(rho_a, rho_b));
            const double plus = std::max(p[0], 0.0) * s.efficiency;
            const double minus = std::max(p[1], 0.0) * s.efficiency;
            const double u = rng.uniform();
            if (u < plus) return Announcement::psi_plus;
            if (u < plus + minus) return Announcement::psi_minus;
            return Announcement::fail;
          },
          [&](const ClassicalLhv& s) {
            std::size_t pick = 0;
            if (s.bases.size() > 1) {
              std::vector<double> w;
              w.reserve(s.bases.size());
              for (const auto& b : s.bases) w.push_back(b.weight);
              pick = sample_outcome(w, rng);
            }
            const int oa = measure_local(rho_a, s.bases[pick].angle_a, rng);
            const int ob = measure_local(rho_b, s.bases[pick].angle_b, rng);
            return s.rule[2 * oa + ob];
          },
          [&](const DishonestAnnounce& s) {
            const int oa = measure_local(rho_a, s.angle_a, rng);
            const int ob = measure_local(rho_b, s.angle_b, rng);
            constexpr std::array<Announcement, 3> kOrder = {
                Announcement::psi_plus, Announcement::psi_minus, Announcement::fail};
            return kOrder[sample_outcome(s.table[2 * oa + ob], rng)];
          },
      },
      strategy);
}

std::vector<EveStrategy> bundled_classical_strategies() {
  using enum Announcement;
  constexpr double kPi = std::numbers::pi;
  constexpr std::array<Announcement, 4> kDiffer = {fail, psi_plus, psi_plus, fail};
  return {
      ClassicalLhv{"z_intercept", {{1.0, 0.0, 0.0}}, kDiffer},
      ClassicalLhv{"x_intercept", {{1.0, kPi / 2, kPi / 2}}, kDiffer},
      ClassicalLhv{"random_basis_intercept", {{0.5, 0.0, 0.0}, {0.5, kPi / 2, kPi / 2}}, kDiffer},
      ClassicalLhv{"bob_basis_intercept",
                   {{0.5, 0.0, kBobBasisAngles[0]}, {0.5, kPi / 2, kBobBasisAngles[1]}},
                   {psi_plus, fail, fail, psi_plus}},
      DishonestAnnounce{"z_random_announce", 0.0, 0.0,
                        {{{0.0, 0.0, 1.0}, {0.5, 0.5, 0.0}, {0.5, 0.5, 0.0}, {0.0, 0.0, 1.0}}}},
      DishonestAnnounce{"always_psi_plus", 0.0, 0.0,
                        {{{1.0, 0.0, 0.0}, {1.0, 0.0, 0.0}, {1.0, 0.0, 0.0}, {1.0, 0.0, 0.0}}}},
  };
}

EveStrategy bundled_classical_strategy(std::string_view name) {
  for (auto& s : bundled_classical_strategies()) {
    const std::string& n = std::visit(
        overloaded{[](const ClassicalLhv& c) -> const std::string& { return c.name; },
                   [](const DishonestAnnounce& d) -> const std::string& { return d.name; },
                   [](const auto&) -> const std::string& {
                     static const std::string empty;
                     return empty;
                   }},
        s);
    if (n == name) return s;
  }
  throw InvalidArgument(fmt::format("unknown classical strategy preset '{}'", name));
}

// Session --------------------------------------------------------------------

void SessionConfig::validate() const {
  if (rounds < 1) throw InvalidArgument("rounds must be at least 1");
  double total = 0.0;
  for (const auto& row : settings.joint) {
    for (double p : row) {
      check_probability(p, "setting probability");
      total += p;
    }
  }
  if (std::abs(total - 1.0) > kProbabilityTolerance) {
    throw InvalidArgument(fmt::format("setting probabilities sum to {:.12g}", total));
  }
  qkdsim::validate(eve);
}

void classify(RoundRecord& r) {
  r.bob_bit_sifted = r.bob_bit_raw;
  r.sift_tag = SiftSet::discard;
  const int x1 = r.x.basis;
  const int y1 = r.y.basis;
  if (r.announcement == Announcement::psi_plus && x1 >= 0 && x1 <= 1 && y1 >= 0 && y1 <= 1) {
    r.sift_tag = SiftSet::S1;
    r.bob_bit_sifted = r.bob_bit_raw ^ static_cast<int>(kS1BobFlip[x1][y1]);
  } else if (r.announcement != Announcement::fail && x1 == 0 && y1 == 2) {
    r.sift_tag = SiftSet::S2;
    r.bob_bit_sifted = 1 - r.bob_bit_raw;
  }
}

RoundRecord run_round(const SessionConfig& config, std::uint64_t round_index) {
  const std::uint64_t seed = config.master_seed;
  RoundRecord r;
  r.round_index = round_index;

  {
    auto rng = derive_stream(seed, round_index, StreamRole::settings);
    const auto& j = config.settings.joint;
    const std::array<double, 6> flat = {j[0][0], j[0][1], j[0][2], j[1][0], j[1][1], j[1][2]};
    const auto cell = sample_outcome(flat, rng);
    r.x = {static_cast<int>(cell / 3), rng.bit()};
    r.y = {static_cast<int>(cell % 3), rng.bit()};
  }
  {
    auto rng = derive_stream(seed, round_index, StreamRole::alice_hidden);
    r.lambda_a = static_cast<std::uint32_t>(config.alice_mixture.sample(rng));
  }
  {
    auto rng = derive_stream(seed, round_index, StreamRole::bob_hidden);
    r.lambda_b = static_cast<std::uint32_t>(config.bob_mixture.sample(rng));
  }
  r.alice_bit = r.x.bit;
  r.bob_bit_raw = r.y.bit;

  const double offset_a = config.alice_mixture.components()[r.lambda_a].offset;
  const double offset_b = config.bob_mixture.components()[r.lambda_b].offset;

  auto rng_a = derive_stream(seed, round_index, StreamRole::channel_a);
  auto rng_b = derive_stream(seed, round_index, StreamRole::channel_b);
  const Photon alice_out =
      apply_channels(config.channel_a, density(alice_prepare(r.x, offset_a)), rng_a);
  const Photon bob_out =
      apply_channels(config.channel_b, density(bob_prepare(r.y, offset_b)), rng_b);

  auto rng_eve = derive_stream(seed, round_index, StreamRole::eve);
  r.announcement = eve_measure(config.eve, alice_out, bob_out, rng_eve);

  classify(r);
  return r;
}

Transcript run_session(const SessionConfig& config, unsigned threads) {
  config.validate();
  Transcript transcript;
  try {
    transcript.resize(config.rounds);
  } catch (const std::bad_alloc&) {
    throw Error(fmt::format("cannot allocate a transcript of {} rounds", config.rounds));
  } catch (const std::length_error&) {
    throw Error(fmt::format("cannot allocate a transcript of {} rounds", config.rounds));
  }

  const std::uint64_t n = config.rounds;
  const std::uint64_t workers = std::clamp<std::uint64_t>(threads, 1, std::max<std::uint64_t>(n, 1));
  if (workers == 1) {
    for (std::uint64_t i = 0; i < n; ++i) transcript[i] = run_round(config, i);
    return transcript;
  }

  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::uint64_t w = 0; w < workers; ++w) {
      const std::uint64_t begin = n * w / workers;
      const std::uint64_t end = n * (w + 1) / workers;
      pool.emplace_back([&, begin, end] {
        try {
          for (std::uint64_t i = begin; i < end; ++i) transcript[i] = run_round(config, i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
  return transcript;
}

SiftedSets sift(std::span<const RoundRecord> transcript) {
  SiftedSets out;
  for (RoundRecord r : transcript) {
    classify(r);
    if (r.sift_tag == SiftSet::S1) {
      out.s1.push_back(r);
    } else if (r.sift_tag == SiftSet::S2) {
      out.s2.push_back(r);
    }
  }
  return out;
}

void write_transcript(std::ostream& out, std::span<const RoundRecord> transcript) {
  fmt::memory_buffer buf;
  for (const auto& r : transcript) {
    buf.clear();
    fmt::format_to(std::back_inserter(buf),
                   R"({{"round":{},"x1":{},"x2":{},"y1":{},"y2":{},"la":{},"lb":{},)"
                   R"("announce":"{}","set":"{}","a":{},"b_raw":{},"b_sifted":{}}})"
                   "\n",
                   r.round_index, r.x.basis, r.x.bit, r.y.basis, r.y.bit, r.lambda_a, r.lambda_b,
                   to_string(r.announcement), to_string(r.sift_tag), r.alice_bit, r.bob_bit_raw,
                   r.bob_bit_sifted);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  }
}

Transcript read_transcript(std::istream& in) {
  Transcript transcript;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      RoundRecord r;
      r.round_index = j.at("round").get<std::uint64_t>();
      r.x = {j.at("x1").get<int>(), j.at("x2").get<int>()};
      r.y = {j.at("y1").get<int>(), j.at("y2").get<int>()};
      r.lambda_a = j.at("la").get<std::uint32_t>();
      r.lambda_b = j.at("lb").get<std::uint32_t>();
      r.announcement = announcement_from_string(j.at("announce").get<std::string>());
      r.sift_tag = sift_set_from_string(j.at("set").get<std::string>());
      r.alice_bit = j.at("a").get<int>();
      r.bob_bit_raw = j.at("b_raw").get<int>();
      r.bob_bit_sifted = j.at("b_sifted").get<int>();
      transcript.push_back(r);
    } catch (const nlohmann::json::exception& e) {
      throw InvalidArgument(fmt::format("transcript line {}: {}", line_no, e.what()));
    }
  }
  return transcript;
}

}  // namespace qkdsim
