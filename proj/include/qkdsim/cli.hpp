// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>

namespace qkdsim {

inline constexpr int kExitSuccess = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitAbort = 2;

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view text) noexcept;

/// Shortest round-trip decimal form of a sweep value.
std::string canonical_value_text(double value);

/// Seed of one sweep point: master XOR fnv1a64(canonical_value_text(value)).
std::uint64_t sweep_seed(std::uint64_t master, double value);

/// Entry point of the qkdsim command. Results go to `out` (or --out files),
/// diagnostics and logs to `err`. Returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace qkdsim
