#include "xpsim/oracle.hpp"

#include <deque>
#include <list>
#include <set>
#include <unordered_map>

namespace xpsim {

namespace {

struct OracleLine {
  uint64_t line;
  uint8_t dirty_quarters;
  uint64_t last_write_serial;
};

class OracleBuffer {
 public:
  explicit OracleBuffer(const OracleParams& params) : params_(params) {}

  void read(uint64_t offset) {
    counters_.imc_read_bytes += 64;
    uint64_t line = offset & ~(uint64_t)255;
    auto it = index_.find(line);
    if (it != index_.end()) {
      touch(it->second);
      return;
    }
    insert_line(line);
    counters_.media_read_bytes += 256;
  }

  void write(uint64_t offset, uint32_t thread) {
    counters_.imc_write_bytes += 64;
    serial_++;
    window_.push_back(thread);
    if (window_.size() > params_.writer_window) window_.pop_front();
    uint64_t line = offset & ~(uint64_t)255;
    uint32_t quarter = (uint32_t)((offset % 256) / 64);
    auto it = index_.find(line);
    bool allocated = false;
    std::list<OracleLine>::iterator pos;
    if (it != index_.end()) {
      pos = it->second;
      touch(pos);
    } else {
      pos = insert_line(line);
      counters_.media_read_bytes += 256;  // sub-line fill before merging
      allocated = true;
    }
    pos->dirty_quarters |= (uint8_t)(1u << quarter);
    pos->last_write_serial = serial_;
    if (pos->dirty_quarters == 0xf) {
      counters_.media_write_bytes += 256;
      pos->dirty_quarters = 0;
    } else if (allocated && params_.writer_threshold > 0 &&
               distinct_writers() > params_.writer_threshold) {
      victimize(line);
    }
  }

  void flush() {
    for (OracleLine& l : lru_) {
      if (l.dirty_quarters != 0) {
        counters_.media_write_bytes += 256;
        l.dirty_quarters = 0;
      }
    }
  }

  const DeviceCounters& counters() const { return counters_; }

 private:
  void touch(std::list<OracleLine>::iterator it) { lru_.splice(lru_.end(), lru_, it); }

  std::list<OracleLine>::iterator insert_line(uint64_t line) {
    if (lru_.size() == params_.buffer_lines) {
      OracleLine victim = lru_.front();
      if (victim.dirty_quarters != 0) counters_.media_write_bytes += 256;
      index_.erase(victim.line);
      lru_.pop_front();
    }
    lru_.push_back(OracleLine{line, 0, serial_});
    auto it = std::prev(lru_.end());
    index_[line] = it;
    return it;
  }

  uint32_t distinct_writers() const {
    std::set<uint32_t> seen(window_.begin(), window_.end());
    return (uint32_t)seen.size();
  }

  void victimize(uint64_t spared_line) {
    std::list<OracleLine>::iterator best = lru_.end();
    for (auto it = lru_.begin(); it != lru_.end(); ++it) {
      if (it->line == spared_line) continue;
      if (it->dirty_quarters == 0 || it->dirty_quarters == 0xf) continue;
      if (serial_ - it->last_write_serial < params_.victim_min_stale) continue;
      if (best == lru_.end() || it->last_write_serial < best->last_write_serial) best = it;
    }
    if (best != lru_.end()) {
      counters_.media_write_bytes += 256;
      best->dirty_quarters = 0;
    }
  }

  OracleParams params_;
  DeviceCounters counters_;
  std::list<OracleLine> lru_;  // front = least recent
  std::unordered_map<uint64_t, std::list<OracleLine>::iterator> index_;
  std::deque<uint32_t> window_;
  uint64_t serial_ = 0;
};

}  // namespace

DeviceCounters oracle_replay_dimm(const std::vector<TraceRecord>& records, uint32_t dimm,
                                  const OracleParams& params) {
  OracleBuffer buffer(params);
  for (const TraceRecord& r : records) {
    if (r.dimm != dimm) continue;
    if (r.is_flush) buffer.flush();
    else if (r.is_write) buffer.write(r.offset, r.thread);
    else buffer.read(r.offset);
  }
  return buffer.counters();
}

std::vector<DeviceCounters> oracle_replay(const std::vector<TraceRecord>& records,
                                          uint32_t n_dimms, const OracleParams& params) {
  std::vector<DeviceCounters> out;
  out.reserve(n_dimms);
  for (uint32_t d = 0; d < n_dimms; d++) out.push_back(oracle_replay_dimm(records, d, params));
  return out;
}

}  // namespace xpsim
