#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "xpsim/rng.hpp"
#include "xpsim/units.hpp"

namespace xpsim {

struct DeviceCounters {
  uint64_t imc_read_bytes = 0;
  uint64_t imc_write_bytes = 0;
  uint64_t media_read_bytes = 0;
  uint64_t media_write_bytes = 0;
  uint64_t outlier_events = 0;
};

// Effective write ratio: iMC-issued write bytes over media-written bytes.
// Undefined until the media has been written.
inline std::optional<double> effective_write_ratio(const DeviceCounters& c) {
  if (c.media_write_bytes == 0) return std::nullopt;
  return (double)c.imc_write_bytes / (double)c.media_write_bytes;
}

struct XpParams {
  uint32_t buffer_lines = 64;  // 16KB of 256 B lines
  // Data-return latencies.
  uint64_t buffer_hit_ns = 100;
  uint64_t media_read_ns = 305;
  // Front-end service occupancies per 64 B request; these set bandwidth.
  uint64_t read_hit_occ_ns = 7;
  uint64_t read_miss_occ_ns = 17;
  uint64_t write_hit_occ_ns = 22;
  uint64_t write_miss_occ_ns = 45;  // includes the internal line fetch
  // Media writeback port: one outstanding 256 B write, pipelined with the
  // front end.
  uint64_t media_write_ns = 94;
  // Rare stall attached to media writes (wear-leveling side effect).
  double outlier_prob = 6e-5;
  uint64_t outlier_min_ns = 50000;
  uint64_t outlier_max_ns = 100000;
  // Concurrent-writer pressure: when the trailing window of writes carries
  // more distinct threads than the threshold, allocations victimize stale
  // partially-dirty lines early instead of letting them combine.
  uint32_t writer_window = 32;
  uint32_t writer_threshold = 6;
  uint32_t victim_min_stale = 6;  // in 64 B writes since the line's last write
  bool track_data = false;
};

struct XpAccessOutcome {
  uint64_t occupancy_ns = 0;   // front-end busy time, includes writeback-port waits
  uint64_t data_ready_at = 0;  // absolute; reads only
  bool buffer_hit = false;
};

// One 3D XPoint DIMM: 256 B media behind a small fully-associative
// write-combining buffer shared by reads and writes. Sub-line writes fetch
// the line on allocation (read-modify-write); a line whose four quarters are
// all dirty is written back eagerly without a prior fetch having to repeat;
// partially dirty lines linger until capacity (LRU) or writer pressure
// pushes them out.
class XpDimm {
 public:
  using LineWords = std::array<uint64_t, 32>;  // one 256 B XPLine

  XpDimm(const XpParams& params, uint64_t rng_seed);

  XpAccessOutcome read64(uint64_t offset, uint32_t thread, uint64_t now);
  XpAccessOutcome write64(uint64_t offset, uint32_t thread, uint64_t now,
                          const uint64_t* words = nullptr, uint8_t word_mask = 0);

  // Writes back every dirty line; used by tests and end-of-run reporting.
  void flush_all(uint64_t now);

  const DeviceCounters& counters() const { return counters_; }
  uint64_t writeback_busy_until() const { return wb_busy_until_; }
  uint32_t resident_lines() const { return (uint32_t)index_.size(); }
  uint32_t dirty_lines() const;

  // Device-visible value of one 64 B line (buffer over media), for cache
  // fills and crash images. track_data mode only.
  std::array<uint64_t, 8> image64(uint64_t line_offset) const;
  // Persistent image at 8-byte-word granularity: media overlaid with every
  // buffered dirty word. Sorted by offset; deterministic.
  std::vector<std::pair<uint64_t, uint64_t>> persistent_words() const;

 private:
  struct Slot {
    uint64_t line = 0;  // 256 B aligned offset
    bool valid = false;
    uint8_t dirty_mask = 0;  // one bit per 64 B quarter
    uint8_t data_mask = 0;   // quarters with known words (track_data)
    uint64_t lru_stamp = 0;
    uint64_t last_write_serial = 0;
    LineWords words{};
  };

  Slot* find(uint64_t line);
  Slot* allocate(uint64_t line, uint64_t now, uint64_t* wait_ns);
  void media_writeback(Slot& slot, uint64_t now, uint64_t* wait_ns);
  void media_fetch(Slot& slot);
  void push_writer(uint32_t thread);
  void pressure_victim(uint64_t spared_line, uint64_t now, uint64_t* wait_ns);

  XpParams params_;
  DeviceCounters counters_;
  Rng rng_;
  std::vector<Slot> slots_;
  std::unordered_map<uint64_t, uint32_t> index_;
  uint64_t tick_ = 0;
  uint64_t write_serial_ = 0;
  uint64_t wb_busy_until_ = 0;
  // Trailing writer window for the pressure heuristic.
  std::vector<uint32_t> window_;
  uint32_t window_pos_ = 0;
  std::vector<uint32_t> writer_counts_;
  uint32_t distinct_writers_ = 0;
  std::unordered_map<uint64_t, LineWords> media_;  // track_data only
};

struct DramParams {
  uint64_t row_bytes = 8 * kKiB;
  uint64_t row_hit_ns = 40;
  uint64_t row_miss_ns = 60;
  uint64_t read_occ_ns = 8;
  uint64_t write_occ_ns = 10;
  bool track_data = false;
};

// Comparison DRAM DIMM: single open row, no internal write amplification.
class DramDimm {
 public:
  explicit DramDimm(const DramParams& params) : params_(params) {}

  XpAccessOutcome read64(uint64_t offset, uint64_t now);
  XpAccessOutcome write64(uint64_t offset, uint64_t now, const uint64_t* words = nullptr,
                          uint8_t word_mask = 0);

  const DeviceCounters& counters() const { return counters_; }
  std::array<uint64_t, 8> image64(uint64_t line_offset) const;
  std::vector<std::pair<uint64_t, uint64_t>> persistent_words() const;

 private:
  DramParams params_;
  DeviceCounters counters_;
  uint64_t open_row_ = UINT64_MAX;
  std::unordered_map<uint64_t, std::array<uint64_t, 8>> media_;
};

}  // namespace xpsim
