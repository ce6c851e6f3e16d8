// SPDX-License-Identifier: Apache-2.0
#include "qkdsim/rng.hpp"

namespace qkdsim {

std::uint64_t RandomStream::below(std::uint64_t bound) noexcept {
  // Lemire's multiply-shift with rejection.
  std::uint64_t x = (*this)();
  __uint128_t m = static_cast<__uint128_t>(x) * bound;
  auto low = static_cast<std::uint64_t>(m);
  if (low < bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    while (low < threshold) {
      x = (*this)();
      m = static_cast<__uint128_t>(x) * bound;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

RandomStream derive_stream(std::uint64_t master_seed, std::uint64_t round_index,
                           StreamRole role) noexcept {
  std::uint64_t key = mix64(master_seed);
  key = mix64(key ^ round_index);
  key = mix64(key ^ (static_cast<std::uint64_t>(role) * 0xD1B54A32D192ED03ULL));
  return RandomStream(key);
}

}  // namespace qkdsim
