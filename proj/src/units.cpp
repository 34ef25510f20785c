#include "xpsim/units.hpp"

#include <charconv>
#include <cmath>

namespace xpsim {

namespace {

std::optional<uint64_t> parse_scaled(std::string_view text, std::string_view suffix_set,
                                     const uint64_t* scales, const std::string_view* suffixes,
                                     size_t n_suffixes, uint64_t bare_scale) {
  (void)suffix_set;
  if (text.empty()) return std::nullopt;
  size_t pos = 0;
  while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') pos++;
  if (pos == 0) return std::nullopt;
  uint64_t value = 0;
  auto res = std::from_chars(text.data(), text.data() + pos, value);
  if (res.ec != std::errc()) return std::nullopt;
  std::string_view suffix = text.substr(pos);
  uint64_t scale = bare_scale;
  if (!suffix.empty()) {
    bool found = false;
    for (size_t i = 0; i < n_suffixes; i++) {
      if (suffix == suffixes[i]) {
        scale = scales[i];
        found = true;
        break;
      }
    }
    if (!found) return std::nullopt;
  }
  if (scale != 0 && value > UINT64_MAX / scale) return std::nullopt;
  return value * scale;
}

}  // namespace

std::optional<uint64_t> parse_bytes(std::string_view text) {
  static constexpr std::string_view suffixes[] = {"B", "KB", "MB", "GB", "TB"};
  static constexpr uint64_t scales[] = {1, kKiB, kMiB, kGiB, 1024 * kGiB};
  return parse_scaled(text, "", scales, suffixes, 5, 1);
}

std::optional<uint64_t> parse_ns(std::string_view text) {
  static constexpr std::string_view suffixes[] = {"ns", "us", "ms", "s"};
  static constexpr uint64_t scales[] = {1, 1000, 1000 * 1000, 1000 * 1000 * 1000};
  return parse_scaled(text, "", scales, suffixes, 4, 1);
}

std::string format_bytes(uint64_t bytes) {
  static constexpr std::string_view suffixes[] = {"GB", "MB", "KB"};
  static constexpr uint64_t scales[] = {kGiB, kMiB, kKiB};
  for (int i = 0; i < 3; i++) {
    if (bytes >= scales[i] && bytes % scales[i] == 0)
      return std::to_string(bytes / scales[i]) + std::string(suffixes[i]);
  }
  return std::to_string(bytes) + "B";
}

std::string format_ns(uint64_t ns) {
  static constexpr std::string_view suffixes[] = {"s", "ms", "us"};
  static constexpr uint64_t scales[] = {1000000000, 1000000, 1000};
  for (int i = 0; i < 3; i++) {
    if (ns >= scales[i] && ns % scales[i] == 0)
      return std::to_string(ns / scales[i]) + std::string(suffixes[i]);
  }
  return std::to_string(ns) + "ns";
}

std::string format_double(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

std::string format_fixed(double value, int decimals) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::fixed, decimals);
  return std::string(buf, res.ptr);
}

std::string format_ratio(uint64_t numer, uint64_t denom, int decimals) {
  uint64_t scale = 1;
  for (int i = 0; i < decimals; i++) scale *= 10;
  // Rounded to nearest, ties away from zero.
  unsigned __int128 scaled = (unsigned __int128)numer * scale;
  uint64_t q = (uint64_t)((scaled + denom / 2) / denom);
  std::string whole = std::to_string(q / scale);
  if (decimals == 0) return whole;
  std::string frac = std::to_string(q % scale);
  frac.insert(0, decimals - frac.size(), '0');
  return whole + "." + frac;
}

std::optional<double> parse_double(std::string_view text) {
  double value = 0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

std::optional<uint64_t> parse_u64(std::string_view text) {
  uint64_t value = 0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

bool is_power_of_two(uint64_t v) { return v != 0 && (v & (v - 1)) == 0; }

}  // namespace xpsim
