// SPDX-License-Identifier: Apache-2.0
//
// Classical post-processing: interactive error correction with exact leakage
// accounting, and privacy amplification by Toeplitz hashing.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qkdsim/rng.hpp"

namespace qkdsim {

/// Packed bit string. Bit i lives in word i/64 at position i%64; bits past
/// size() are kept zero.
class BitString {
 public:
  BitString() = default;
  explicit BitString(std::size_t length) : size_(length), words_((length + 63) / 64, 0) {}

  static BitString from_bits(std::span<const int> bits);
  static BitString random(std::size_t length, RandomStream& rng);
  /// Inverse of to_hex for a known length.
  static BitString from_hex(std::string_view hex, std::size_t length);

  std::size_t size() const noexcept { return size_; }
  bool empty() const noexcept { return size_ == 0; }

  int get(std::size_t i) const noexcept {
    return static_cast<int>((words_[i >> 6] >> (i & 63)) & 1U);
  }
  void set(std::size_t i, int bit) noexcept {
    const std::uint64_t mask = std::uint64_t{1} << (i & 63);
    words_[i >> 6] = bit ? (words_[i >> 6] | mask) : (words_[i >> 6] & ~mask);
  }
  void flip(std::size_t i) noexcept { words_[i >> 6] ^= std::uint64_t{1} << (i & 63); }

  std::span<const std::uint64_t> words() const noexcept { return words_; }

  /// Lowercase hex, first bit is the most significant bit of the first
  /// digit; the last digit is zero-padded.
  std::string to_hex() const;

  std::size_t popcount() const noexcept;

  BitString operator^(const BitString& other) const;
  bool operator==(const BitString&) const = default;

 private:
  std::size_t size_ = 0;
  std::vector<std::uint64_t> words_;
};

/// Toeplitz matrix seed of length n + m - 1.
class ToeplitzSeed {
 public:
  /// Throws InvalidArgument unless bits.size() == input_len + output_len - 1
  /// (zero when both lengths are zero).
  ToeplitzSeed(BitString bits, std::size_t input_len, std::size_t output_len);

  static ToeplitzSeed random(std::size_t input_len, std::size_t output_len, RandomStream& rng);

  const BitString& bits() const noexcept { return bits_; }
  std::size_t input_len() const noexcept { return n_; }
  std::size_t output_len() const noexcept { return m_; }

 private:
  BitString bits_;
  std::size_t n_;
  std::size_t m_;
};

/// out[i] = XOR_j T[i][j] key[j] with T[i][j] = seed[i - j + n - 1].
/// Throws InvalidArgument if the seed does not match (key.size(), out_len).
BitString toeplitz_hash(const BitString& key, const ToeplitzSeed& seed, std::size_t out_len);

struct ParityExchange {
  int pass = 0;
  std::size_t block_index = 0;  ///< top-level block in that pass
  int parity_a = 0;
  int parity_b = 0;

  bool operator==(const ParityExchange&) const = default;
};

inline constexpr std::size_t kVerificationHashBits = 64;

struct ReconciliationOptions {
  /// Expected disagreement rate; sets the first-pass block size to 0.73/e.
  double qber_estimate = 0.0;
  int passes = 4;
  bool keep_transcript = false;
};

struct ReconciliationResult {
  BitString corrected_key;
  /// Parity bits disclosed plus the verification hash.
  std::uint64_t leaked_bits = 0;
  /// Parity messages exchanged.
  std::uint64_t parity_rounds = 0;
  bool verified = false;
  std::size_t first_block_size = 0;
  std::vector<ParityExchange> transcript;
};

/// First-pass Cascade block size for a QBER estimate, clamped to [1, n].
std::size_t cascade_block_size(double qber_estimate, std::size_t n);

/// Cascade: each pass shuffles positions, compares block parities and
/// bisects mismatched blocks; a corrected bit re-opens the blocks holding it
/// in earlier passes. Block size starts at 0.73/e and doubles per pass.
/// A 64-bit Toeplitz hash then verifies the result. Alice's key is never
/// modified; the returned key is Bob's corrected copy.
///
/// Throws InvalidArgument for length mismatch or a disagreement rate of 0.5
/// or more, and ReconciliationFailure if the verification hashes differ.
ReconciliationResult error_correct(const BitString& key_a, const BitString& key_b,
                                   RandomStream& rng, const ReconciliationOptions& options = {});

/// JSON-lines {pass, block_index, parity_a, parity_b}.
void write_reconciliation_transcript(std::ostream& out, std::span<const ParityExchange> log);

/// max(0, floor(n_sifted * f(g)) - leaked_bits). The QBER is accepted for
/// interface symmetry and range-checked; leakage is counted exactly.
std::uint64_t final_key_length(std::uint64_t n_sifted, double g, double e,
                               std::uint64_t leaked_bits);

}  // namespace qkdsim
