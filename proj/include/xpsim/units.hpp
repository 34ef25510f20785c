#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace xpsim {

// Byte sizes use binary units throughout: 1KB = 1024 B, so the default
// 16KB write-combining buffer is exactly 64 lines of 256 B.
inline constexpr uint64_t kKiB = 1024;
inline constexpr uint64_t kMiB = 1024 * kKiB;
inline constexpr uint64_t kGiB = 1024 * kMiB;

inline constexpr uint64_t kCacheLineBytes = 64;
inline constexpr uint64_t kXpLineBytes = 256;

// Parses "64", "64B", "16KB", "1MB", "2GB". Returns nullopt on malformed
// input or overflow.
std::optional<uint64_t> parse_bytes(std::string_view text);

// Parses "305ns", "80us", "1ms", "2s" (also bare integers, taken as ns).
std::optional<uint64_t> parse_ns(std::string_view text);

// Canonical forms used when echoing configs: largest exact unit.
std::string format_bytes(uint64_t bytes);
std::string format_ns(uint64_t ns);

// Shortest round-trip decimal representation (used for ratios in configs).
std::string format_double(double value);
// Fixed-point with the given number of decimals, computed with integer
// arithmetic when possible so CSV output is byte-stable everywhere.
std::string format_fixed(double value, int decimals);
// numer/denom rendered with `decimals` digits, pure integer math.
std::string format_ratio(uint64_t numer, uint64_t denom, int decimals);

std::optional<double> parse_double(std::string_view text);
std::optional<uint64_t> parse_u64(std::string_view text);

bool is_power_of_two(uint64_t v);

}  // namespace xpsim
