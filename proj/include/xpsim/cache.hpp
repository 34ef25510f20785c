#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "xpsim/units.hpp"

namespace xpsim {

struct CacheParams {
  uint64_t capacity_bytes = 32 * kKiB;
  uint32_t ways = 8;
  uint64_t hit_ns = 2;
  // 8-byte word payloads are tracked only when crash images are needed.
  bool track_data = false;
};

// Volatile store-side cache for one simulated thread. Sets are indexed by a
// multiplicative hash of the line number, so natural capacity evictions of a
// sequential store stream leave the cache in scrambled address order; that
// scrambling is what makes unflushed streaming stores inefficient downstream.
class CacheModel {
 public:
  using LineWords = std::array<uint64_t, 8>;

  struct AccessResult {
    bool hit = false;
    bool needs_fill = false;   // miss: emit one 64 B read toward the device
    bool evicted_dirty = false;  // victim writeback: emit one 64 B write
    uint64_t evict_addr = 0;
    LineWords evict_words{};
  };

  struct FlushResult {
    bool wrote = false;  // dirty line written back (one 64 B write)
    LineWords words{};
  };

  explicit CacheModel(const CacheParams& params);

  AccessResult load(uint64_t line_addr);
  // offset/size are within the line; version is the value recorded per word.
  AccessResult store(uint64_t line_addr, uint32_t offset, uint32_t size, uint64_t version);

  FlushResult clwb(uint64_t line_addr);        // write back, keep valid-clean
  FlushResult clflush(uint64_t line_addr);     // write back and invalidate
  FlushResult clflushopt(uint64_t line_addr);  // same effect, weaker ordering

  // Fill data for a missed line (track_data mode); called right after the
  // access that reported needs_fill, before any further stores to the line.
  void fill_words(uint64_t line_addr, const LineWords& words);

  bool resident(uint64_t line_addr) const;
  bool dirty(uint64_t line_addr) const;
  uint64_t occupied_lines() const;
  uint32_t sets() const { return sets_; }

  // Dirty lines are excluded from crash images; exposed for tests.
  std::vector<uint64_t> dirty_lines() const;

 private:
  struct Line {
    uint64_t addr = 0;
    bool valid = false;
    bool dirty = false;
    uint64_t stamp = 0;
    LineWords words{};
  };

  uint32_t set_of(uint64_t line_addr) const;
  Line* find(uint64_t line_addr);
  const Line* find(uint64_t line_addr) const;
  FlushResult write_back(uint64_t line_addr, bool invalidate);

  CacheParams params_;
  uint32_t sets_;
  uint32_t set_shift_;
  uint64_t tick_ = 0;
  std::vector<Line> lines_;  // sets_ * ways, set-major
};

// One write-combining slot: adjacent ntstores to a line merge here and leave
// toward the iMC only as whole 64 B lines (or on fence/line switch).
class WriteCombineSlot {
 public:
  struct Flush {
    bool valid = false;
    uint64_t line_addr = 0;
    uint8_t word_mask = 0;  // which 8-byte words carry data
    CacheModel::LineWords words{};
  };

  struct Result {
    Flush switched;  // previously open line, flushed because the target moved
    Flush filled;    // the slot itself, flushed because all 64 B are present
  };

  Result ntstore(uint64_t addr, uint32_t size, uint64_t version);
  Flush drain();  // fence path: flush whatever is open
  bool open() const { return open_; }

 private:
  bool open_ = false;
  uint64_t line_addr_ = 0;
  uint8_t word_mask_ = 0;
  CacheModel::LineWords words_{};
};

}  // namespace xpsim
