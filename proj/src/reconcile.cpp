// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include <fmt/format.h>

#include "qkdsim/errors.hpp"
#include "qkdsim/keyrate.hpp"
#include "qkdsim/postprocess.hpp"

namespace qkdsim {

namespace {

// One Cascade pass: a permutation of key positions cut into equal blocks.
struct Pass {
  std::size_t block_size = 0;
  std::vector<std::uint32_t> order;     // position at each permuted slot
  std::vector<std::uint32_t> slot_of;   // inverse of order
  std::vector<std::uint8_t> parity_a;   // disclosed by Alice
  std::vector<std::uint8_t> parity_b;   // Bob's current parity

  std::size_t block_of(std::size_t pos) const { return slot_of[pos] / block_size; }
};

class Cascade {
 public:
  Cascade(const BitString& a, const BitString& b, bool keep_transcript)
      : a_(a), b_(b), keep_transcript_(keep_transcript) {}

  void run_pass(std::size_t block_size, RandomStream& rng) {
    const std::size_t n = a_.size();
    Pass pass;
    pass.block_size = block_size;
    pass.order.resize(n);
    std::iota(pass.order.begin(), pass.order.end(), 0U);
    std::shuffle(pass.order.begin(), pass.order.end(), rng);
    pass.slot_of.resize(n);
    for (std::size_t s = 0; s < n; ++s) pass.slot_of[pass.order[s]] = static_cast<std::uint32_t>(s);

    const std::size_t nblocks = (n + block_size - 1) / block_size;
    pass.parity_a.assign(nblocks, 0);
    pass.parity_b.assign(nblocks, 0);
    for (std::size_t s = 0; s < n; ++s) {
      pass.parity_a[s / block_size] ^= static_cast<std::uint8_t>(a_.get(pass.order[s]));
      pass.parity_b[s / block_size] ^= static_cast<std::uint8_t>(b_.get(pass.order[s]));
    }
    passes_.push_back(std::move(pass));

    const int p = static_cast<int>(passes_.size()) - 1;
    const Pass& cur = passes_.back();
    for (std::size_t blk = 0; blk < nblocks; ++blk) {
      record(p, blk, cur.parity_a[blk], cur.parity_b[blk]);
      if (cur.parity_a[blk] != cur.parity_b[blk]) pending_.push_back({p, blk});
    }
    drain();
  }

  const BitString& corrected() const { return b_; }
  std::uint64_t parity_messages() const { return messages_; }
  std::vector<ParityExchange>& transcript() { return log_; }

 private:
  struct BlockRef {
    int pass;
    std::size_t block;
  };

  void record(int pass, std::size_t block, int pa, int pb) {
    ++messages_;
    if (keep_transcript_) log_.push_back({pass, block, pa, pb});
  }

  void drain() {
    while (!pending_.empty()) {
      const BlockRef ref = pending_.back();
      pending_.pop_back();
      const Pass& pass = passes_[static_cast<std::size_t>(ref.pass)];
      if (pass.parity_a[ref.block] == pass.parity_b[ref.block]) continue;
      correct(bisect(ref));
    }
  }

  // Odd-parity block: halve until one position remains, disclosing the parity
  // of the left half each step.
  std::size_t bisect(BlockRef ref) {
    const Pass& pass = passes_[static_cast<std::size_t>(ref.pass)];
    std::size_t lo = ref.block * pass.block_size;
    std::size_t hi = std::min(lo + pass.block_size, pass.order.size());
    while (hi - lo > 1) {
      const std::size_t mid = lo + (hi - lo) / 2;
      int pa = 0;
      int pb = 0;
      for (std::size_t s = lo; s < mid; ++s) {
        pa ^= a_.get(pass.order[s]);
        pb ^= b_.get(pass.order[s]);
      }
      record(ref.pass, ref.block, pa, pb);
      if (pa != pb) {
        hi = mid;
      } else {
        lo = mid;
      }
    }
    return pass.order[lo];
  }

  void correct(std::size_t pos) {
    b_.flip(pos);
    for (std::size_t q = 0; q < passes_.size(); ++q) {
      Pass& pass = passes_[q];
      const std::size_t blk = pass.block_of(pos);
      pass.parity_b[blk] ^= 1;
      if (pass.parity_a[blk] != pass.parity_b[blk]) pending_.push_back({static_cast<int>(q), blk});
    }
  }

  const BitString& a_;
  BitString b_;
  bool keep_transcript_;
  std::vector<Pass> passes_;
  std::vector<BlockRef> pending_;
  std::vector<ParityExchange> log_;
  std::uint64_t messages_ = 0;
};

}  // namespace

std::size_t cascade_block_size(double qber_estimate, std::size_t n) {
  if (n == 0) return 0;
  if (!(qber_estimate > 0.0)) return n;
  const double k = std::round(0.73 / qber_estimate);
  if (k >= static_cast<double>(n)) return n;
  return std::max<std::size_t>(1, static_cast<std::size_t>(k));
}

ReconciliationResult error_correct(const BitString& key_a, const BitString& key_b,
                                   RandomStream& rng, const ReconciliationOptions& options) {
  if (key_a.size() != key_b.size()) {
    throw InvalidArgument(fmt::format("keys differ in length ({} vs {})", key_a.size(),
                                      key_b.size()));
  }
  if (key_a.size() > std::numeric_limits<std::uint32_t>::max()) {
    throw InvalidArgument("key too long for reconciliation");
  }
  if (options.passes < 1) throw InvalidArgument("reconciliation needs at least one pass");
  const std::size_t n = key_a.size();
  if (n > 0 && 2 * (key_a ^ key_b).popcount() >= n) {
    throw InvalidArgument("disagreement rate is 0.5 or more; reconciliation impossible");
  }

  ReconciliationResult result;
  result.first_block_size = cascade_block_size(options.qber_estimate, n);

  Cascade cascade(key_a, key_b, options.keep_transcript);
  if (n > 0) {
    std::size_t block = result.first_block_size;
    for (int p = 0; p < options.passes; ++p) {
      cascade.run_pass(block, rng);
      block = std::min(n, block * 2);
    }
  }

  const auto seed = ToeplitzSeed::random(n, kVerificationHashBits, rng);
  const bool match = toeplitz_hash(key_a, seed, kVerificationHashBits) ==
                     toeplitz_hash(cascade.corrected(), seed, kVerificationHashBits);
  result.parity_rounds = cascade.parity_messages();
  result.leaked_bits = result.parity_rounds + kVerificationHashBits;
  if (!match) {
    throw ReconciliationFailure(fmt::format(
        "verification hash mismatch after {} passes ({} parity bits disclosed)", options.passes,
        result.parity_rounds));
  }
  result.verified = true;
  result.corrected_key = cascade.corrected();
  result.transcript = std::move(cascade.transcript());
  return result;
}

void write_reconciliation_transcript(std::ostream& out, std::span<const ParityExchange> log) {
  fmt::memory_buffer buf;
  for (const auto& e : log) {
    fmt::format_to(std::back_inserter(buf),
                   R"({{"pass":{},"block_index":{},"parity_a":{},"parity_b":{}}})"
                   "\n",
                   e.pass, e.block_index, e.parity_a, e.parity_b);
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

std::uint64_t final_key_length(std::uint64_t n_sifted, double g, double e,
                               std::uint64_t leaked_bits) {
  if (!(e >= 0.0 && e <= 1.0)) {
    throw InvalidArgument(fmt::format("QBER {} outside [0,1]", e));
  }
  const double raw = std::floor(static_cast<double>(n_sifted) * min_entropy_bound(g));
  const auto secure = static_cast<std::uint64_t>(raw);
  return secure > leaked_bits ? secure - leaked_bits : 0;
}

}  // namespace qkdsim
