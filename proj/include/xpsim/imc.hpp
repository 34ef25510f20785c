#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <vector>

#include "xpsim/units.hpp"

namespace xpsim {

struct ImcParams {
  uint64_t wpq_capacity_bytes = 1024;
  uint64_t wpq_thread_cap_bytes = 256;
  uint32_t rpq_max_outstanding = 32;
  uint64_t traversal_ns = 30;
  // Reads are served first until this many write entries are pending.
  uint32_t write_watermark_entries = 8;
};

struct WpqEntry {
  uint32_t thread = 0;
  uint64_t offset = 0;
  uint64_t enqueue_ns = 0;
  uint8_t word_mask = 0;
  std::array<uint64_t, 8> words{};
};

// Write pending queue for one DIMM. Entries are persistent from the moment
// they are accepted (the queue sits inside the ADR domain) and drain strictly
// FIFO; the head occupies its bytes until its device write completes, which
// is what produces head-of-line blocking under contention.
class WpqState {
 public:
  explicit WpqState(const ImcParams& params) : params_(params) {}

  bool can_accept(uint32_t thread) const;
  void accept(WpqEntry entry);

  bool has_pending() const { return entries_.size() > in_service_; }
  size_t entries() const { return entries_.size(); }
  const WpqEntry& head() const { return entries_.front(); }

  // FIFO drain: the head goes to the device, its occupancy is freed on
  // completion.
  const WpqEntry& begin_drain();
  WpqEntry complete_drain();

  uint64_t occupancy_bytes() const { return occupancy_; }
  uint64_t thread_bytes(uint32_t thread) const {
    return thread < per_thread_.size() ? per_thread_[thread] : 0;
  }
  bool above_watermark() const { return entries_.size() >= params_.write_watermark_entries; }

  // Snapshot in FIFO order (crash images).
  const std::deque<WpqEntry>& snapshot() const { return entries_; }

 private:
  ImcParams params_;
  std::deque<WpqEntry> entries_;
  uint32_t in_service_ = 0;
  uint64_t occupancy_ = 0;
  std::vector<uint64_t> per_thread_;
};

struct RpqEntry {
  uint32_t thread = 0;
  uint64_t offset = 0;
  uint64_t enqueue_ns = 0;
  uint64_t token = 0;  // engine-side completion routing
};

// Read pending queue: bounded number of reads in flight (queued, in service,
// or awaiting data return).
class RpqState {
 public:
  explicit RpqState(const ImcParams& params) : params_(params) {}

  bool can_accept() const { return outstanding_ < params_.rpq_max_outstanding; }
  void accept(RpqEntry entry);
  bool has_pending() const { return !pending_.empty(); }
  RpqEntry begin_service();
  void complete(uint64_t token);
  uint32_t outstanding() const { return outstanding_; }

 private:
  ImcParams params_;
  std::deque<RpqEntry> pending_;
  uint32_t outstanding_ = 0;
};

}  // namespace xpsim
