#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "xpsim/devices.hpp"

namespace xpsim {

// Log-scaled latency histogram, 1 ns up to seconds, with ~1.6% bin
// resolution (six mantissa bits per octave). Bounded memory for arbitrarily
// long runs; an exact reservoir of the largest samples preserves true maxima.
class LatencyHistogram {
 public:
  static constexpr int kSubBits = 6;
  static constexpr size_t kBins = 64 * 48;
  static constexpr size_t kMaxReservoir = 64;

  // Every op updates count/sum/max; the binned distribution may be sampled.
  void record(uint64_t ns, bool sampled = true);

  uint64_t count() const { return count_; }
  uint64_t sampled_count() const { return sampled_; }
  std::optional<uint64_t> max() const;
  std::optional<uint64_t> mean() const;
  // Smallest bin upper bound covering fraction p of sampled values;
  // p == 1 returns the exact maximum.
  std::optional<uint64_t> percentile(double p) const;

  static size_t bin_of(uint64_t ns);
  static uint64_t bin_upper(size_t bin);

  void merge(const LatencyHistogram& other);

 private:
  void note_max(uint64_t ns);

  std::vector<uint64_t> bins_ = std::vector<uint64_t>(kBins, 0);
  uint64_t count_ = 0;
  uint64_t sampled_ = 0;
  unsigned __int128 sum_ = 0;
  std::vector<uint64_t> maxima_;  // ascending, at most kMaxReservoir
};

enum class InstrClass : uint8_t { LOAD = 0, NTSTORE = 1, STORE_CLWB = 2, STORE = 3 };
inline const char* to_string(InstrClass c) {
  switch (c) {
    case InstrClass::LOAD: return "load";
    case InstrClass::NTSTORE: return "ntstore";
    case InstrClass::STORE_CLWB: return "store_clwb";
    case InstrClass::STORE: return "store";
  }
  return "?";
}

struct RoundSample {
  uint64_t round = 0;
  DeviceCounters delta;  // aggregate XP counters within the round
};

struct QueueSample {
  uint64_t time_ns = 0;
  std::vector<uint64_t> wpq_bytes;
  std::vector<uint32_t> rpq_outstanding;
};

struct ExperimentReport {
  uint64_t seed = 0;
  uint64_t duration_ns = 0;
  uint64_t payload_bytes = 0;
  uint64_t total_ops = 0;  // program-level accesses
  uint64_t sample_stride = 1;
  std::vector<uint64_t> thread_payload_bytes;
  LatencyHistogram latency[4];  // by InstrClass
  std::vector<DeviceCounters> dimm_counters;
  std::vector<RoundSample> rounds;
  std::vector<QueueSample> queue_samples;
  std::string config_echo;

  DeviceCounters total_counters() const;
  std::optional<double> ewr() const;
  // Payload bytes over virtual time, in decimal MB/s with stable formatting.
  std::string bandwidth_mbps() const;
  double bandwidth_mbps_value() const;
};

// Per-round EWR series from marker deltas; rounds with no media writes yield
// empty optionals.
std::vector<std::optional<double>> round_ewr(const std::vector<RoundSample>& rounds);

// (ewr, bandwidth) pairs plus their Pearson correlation; the correlation is
// absent below two points or at zero variance.
struct CorrelationDataset {
  std::vector<std::pair<double, double>> rows;
  std::optional<double> pearson_r;
};
CorrelationDataset correlation_dataset(const std::vector<std::pair<double, double>>& points);

}  // namespace xpsim
