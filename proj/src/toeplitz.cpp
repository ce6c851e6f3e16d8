// SPDX-License-Identifier: Apache-2.0
#include <bit>

#include <fmt/format.h>

#include "qkdsim/errors.hpp"
#include "qkdsim/postprocess.hpp"

namespace qkdsim {

namespace {

constexpr char kHexDigits[] = "0123456789abcdef";

// 64 bits of `bits` starting at `offset`; positions past the end read as 0.
std::uint64_t window_at(std::span<const std::uint64_t> words, std::size_t offset) {
  const std::size_t q = offset >> 6;
  const unsigned r = offset & 63;
  const std::uint64_t lo = q < words.size() ? words[q] : 0;
  if (r == 0) return lo;
  const std::uint64_t hi = q + 1 < words.size() ? words[q + 1] : 0;
  return (lo >> r) | (hi << (64 - r));
}

std::size_t required_seed_length(std::size_t n, std::size_t m) {
  return n + m == 0 ? 0 : n + m - 1;
}

}  // namespace

BitString BitString::from_bits(std::span<const int> bits) {
  BitString s(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] != 0 && bits[i] != 1) {
      throw InvalidArgument(fmt::format("bit {} has value {}", i, bits[i]));
    }
    if (bits[i]) s.flip(i);
  }
  return s;
}

BitString BitString::random(std::size_t length, RandomStream& rng) {
  BitString s(length);
  for (auto& w : s.words_) w = rng();
  if (const unsigned tail = length & 63; tail != 0) {
    s.words_.back() &= (std::uint64_t{1} << tail) - 1;
  }
  return s;
}

BitString BitString::from_hex(std::string_view hex, std::size_t length) {
  if (hex.size() != (length + 3) / 4) {
    throw InvalidArgument(
        fmt::format("hex string of {} digits cannot hold exactly {} bits", hex.size(), length));
  }
  BitString s(length);
  for (std::size_t d = 0; d < hex.size(); ++d) {
    const char c = hex[d];
    int v = -1;
    if (c >= '0' && c <= '9') v = c - '0';
    if (c >= 'a' && c <= 'f') v = c - 'a' + 10;
    if (c >= 'A' && c <= 'F') v = c - 'A' + 10;
    if (v < 0) throw InvalidArgument(fmt::format("invalid hex digit '{}'", c));
    for (int k = 0; k < 4; ++k) {
      const std::size_t i = 4 * d + static_cast<std::size_t>(k);
      const int bit = (v >> (3 - k)) & 1;
      if (i >= length) {
        if (bit) throw InvalidArgument("hex padding bits must be zero");
        continue;
      }
      if (bit) s.flip(i);
    }
  }
  return s;
}

std::string BitString::to_hex() const {
  std::string out((size_ + 3) / 4, '0');
  for (std::size_t d = 0; d < out.size(); ++d) {
    int v = 0;
    for (int k = 0; k < 4; ++k) {
      const std::size_t i = 4 * d + static_cast<std::size_t>(k);
      v = (v << 1) | (i < size_ ? get(i) : 0);
    }
    out[d] = kHexDigits[v];
  }
  return out;
}

std::size_t BitString::popcount() const noexcept {
  std::size_t total = 0;
  for (auto w : words_) total += static_cast<std::size_t>(std::popcount(w));
  return total;
}

BitString BitString::operator^(const BitString& other) const {
  if (size_ != other.size_) throw InvalidArgument("XOR of bit strings of different length");
  BitString out = *this;
  for (std::size_t w = 0; w < words_.size(); ++w) out.words_[w] ^= other.words_[w];
  return out;
}

ToeplitzSeed::ToeplitzSeed(BitString bits, std::size_t input_len, std::size_t output_len)
    : bits_(std::move(bits)), n_(input_len), m_(output_len) {
  const std::size_t want = required_seed_length(n_, m_);
  if (bits_.size() != want) {
    throw InvalidArgument(fmt::format("Toeplitz seed has {} bits, need n + m - 1 = {}",
                                      bits_.size(), want));
  }
}

ToeplitzSeed ToeplitzSeed::random(std::size_t input_len, std::size_t output_len,
                                  RandomStream& rng) {
  return ToeplitzSeed(BitString::random(required_seed_length(input_len, output_len), rng),
                      input_len, output_len);
}

BitString toeplitz_hash(const BitString& key, const ToeplitzSeed& seed, std::size_t out_len) {
  const std::size_t n = key.size();
  if (seed.input_len() != n || seed.output_len() != out_len) {
    throw InvalidArgument(fmt::format(
        "Toeplitz seed is for a {}x{} matrix, hash requested {}x{}", seed.output_len(),
        seed.input_len(), out_len, n));
  }
  BitString out(out_len);
  if (out_len == 0 || n == 0) return out;

  // With reversed[k] = key[n-1-k], out[i] = XOR_k seed[i+k] reversed[k]: each
  // row is a sliding window over the seed.
  BitString reversed(n);
  for (std::size_t j = 0; j < n; ++j) {
    if (key.get(j)) reversed.flip(n - 1 - j);
  }
  const auto rev = reversed.words();
  const auto seed_words = seed.bits().words();
  for (std::size_t i = 0; i < out_len; ++i) {
    std::uint64_t acc = 0;
    for (std::size_t w = 0; w < rev.size(); ++w) acc ^= window_at(seed_words, i + 64 * w) & rev[w];
    if (std::popcount(acc) & 1) out.flip(i);
  }
  return out;
}

}  // namespace qkdsim
