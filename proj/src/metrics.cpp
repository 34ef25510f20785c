#include "xpsim/metrics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "xpsim/units.hpp"

namespace xpsim {

size_t LatencyHistogram::bin_of(uint64_t ns) {
  if (ns < (1ull << kSubBits)) return (size_t)ns;
  int exp = std::bit_width(ns) - 1;  // >= kSubBits
  int shift = exp - kSubBits;
  uint64_t mant = ns >> shift;  // in [64, 128)
  size_t bin = (size_t)shift * 64 + (size_t)mant;
  return std::min(bin, kBins - 1);
}

uint64_t LatencyHistogram::bin_upper(size_t bin) {
  if (bin < (1ull << kSubBits)) return bin;
  uint64_t shift = bin / 64;
  uint64_t mant = bin % 64 + 64;
  return ((mant + 1) << shift) - 1;
}

void LatencyHistogram::note_max(uint64_t ns) {
  if (maxima_.size() < kMaxReservoir) {
    maxima_.insert(std::lower_bound(maxima_.begin(), maxima_.end(), ns), ns);
  } else if (ns > maxima_.front()) {
    maxima_.erase(maxima_.begin());
    maxima_.insert(std::lower_bound(maxima_.begin(), maxima_.end(), ns), ns);
  }
}

void LatencyHistogram::record(uint64_t ns, bool sampled) {
  count_++;
  sum_ += ns;
  note_max(ns);
  if (sampled) {
    sampled_++;
    bins_[bin_of(ns)]++;
  }
}

std::optional<uint64_t> LatencyHistogram::max() const {
  if (maxima_.empty()) return std::nullopt;
  return maxima_.back();
}

std::optional<uint64_t> LatencyHistogram::mean() const {
  if (count_ == 0) return std::nullopt;
  return (uint64_t)(sum_ / count_);
}

std::optional<uint64_t> LatencyHistogram::percentile(double p) const {
  if (sampled_ == 0 || p <= 0.0 || p > 1.0) return std::nullopt;
  if (p == 1.0) return max();
  uint64_t target = (uint64_t)std::ceil(p * (double)sampled_);
  if (target == 0) target = 1;
  uint64_t cum = 0;
  for (size_t i = 0; i < kBins; i++) {
    cum += bins_[i];
    if (cum >= target) return bin_upper(i);
  }
  return max();
}

void LatencyHistogram::merge(const LatencyHistogram& other) {
  for (size_t i = 0; i < kBins; i++) bins_[i] += other.bins_[i];
  count_ += other.count_;
  sampled_ += other.sampled_;
  sum_ += other.sum_;
  for (uint64_t v : other.maxima_) note_max(v);
}

DeviceCounters ExperimentReport::total_counters() const {
  DeviceCounters total;
  for (const DeviceCounters& c : dimm_counters) {
    total.imc_read_bytes += c.imc_read_bytes;
    total.imc_write_bytes += c.imc_write_bytes;
    total.media_read_bytes += c.media_read_bytes;
    total.media_write_bytes += c.media_write_bytes;
    total.outlier_events += c.outlier_events;
  }
  return total;
}

std::optional<double> ExperimentReport::ewr() const {
  return effective_write_ratio(total_counters());
}

std::string ExperimentReport::bandwidth_mbps() const {
  if (duration_ns == 0) return "0.000";
  // bytes/ns * 1000 = MB/s (decimal megabytes).
  return format_ratio(payload_bytes * 1000, duration_ns, 3);
}

double ExperimentReport::bandwidth_mbps_value() const {
  if (duration_ns == 0) return 0.0;
  return (double)payload_bytes * 1000.0 / (double)duration_ns;
}

std::vector<std::optional<double>> round_ewr(const std::vector<RoundSample>& rounds) {
  std::vector<std::optional<double>> out;
  out.reserve(rounds.size());
  for (const RoundSample& r : rounds) out.push_back(effective_write_ratio(r.delta));
  return out;
}

CorrelationDataset correlation_dataset(const std::vector<std::pair<double, double>>& points) {
  CorrelationDataset ds;
  ds.rows = points;
  size_t n = points.size();
  if (n < 2) return ds;
  double mx = 0, my = 0;
  for (auto& [x, y] : points) {
    mx += x;
    my += y;
  }
  mx /= (double)n;
  my /= (double)n;
  double sxy = 0, sxx = 0, syy = 0;
  for (auto& [x, y] : points) {
    sxy += (x - mx) * (y - my);
    sxx += (x - mx) * (x - mx);
    syy += (y - my) * (y - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return ds;
  ds.pearson_r = sxy / std::sqrt(sxx * syy);
  return ds;
}

}  // namespace xpsim
