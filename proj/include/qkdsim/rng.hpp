// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <limits>

namespace qkdsim {

/// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Small keyed random stream (SplitMix64). Satisfies UniformRandomBitGenerator,
/// so it can drive std::shuffle and friends. Copying a stream forks it.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  explicit constexpr RandomStream(std::uint64_t seed) noexcept : state_(seed) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  constexpr result_type operator()() noexcept {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, bound). bound must be positive.
  std::uint64_t below(std::uint64_t bound) noexcept;

  int bit() noexcept { return static_cast<int>((*this)() >> 63); }

 private:
  std::uint64_t state_;
};

/// Independent roles drawing randomness inside one protocol round.
enum class StreamRole : std::uint64_t {
  settings = 1,
  alice_hidden = 2,
  bob_hidden = 3,
  channel_a = 4,
  channel_b = 5,
  eve = 6,
  reconciliation = 7,
  privacy_amplification = 8,
};

/// Stream keyed by (master seed, round, role). The same key always yields
/// the same stream; distinct keys yield decorrelated streams.
RandomStream derive_stream(std::uint64_t master_seed, std::uint64_t round_index,
                           StreamRole role) noexcept;

}  // namespace qkdsim
