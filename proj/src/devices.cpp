#include "xpsim/devices.hpp"

#include <algorithm>
#include <stdexcept>

namespace xpsim {

namespace {
constexpr uint64_t kLineMask = ~(uint64_t)(kXpLineBytes - 1);
}

XpDimm::XpDimm(const XpParams& params, uint64_t rng_seed)
    : params_(params), rng_(rng_seed) {
  slots_.resize(params_.buffer_lines);
  index_.reserve(params_.buffer_lines * 2);
  window_.assign(params_.writer_window, UINT32_MAX);
}

XpDimm::Slot* XpDimm::find(uint64_t line) {
  auto it = index_.find(line);
  return it == index_.end() ? nullptr : &slots_[it->second];
}

void XpDimm::media_fetch(Slot& slot) {
  counters_.media_read_bytes += kXpLineBytes;
  if (params_.track_data) {
    auto it = media_.find(slot.line);
    if (it != media_.end()) {
      for (uint32_t q = 0; q < 4; q++) {
        if (slot.data_mask & (1u << q)) continue;
        for (uint32_t w = 0; w < 8; w++) slot.words[q * 8 + w] = it->second[q * 8 + w];
      }
    }
    slot.data_mask = 0xf;
  }
}

void XpDimm::media_writeback(Slot& slot, uint64_t now, uint64_t* wait_ns) {
  // The front end hands a line to the writeback port only when the port is
  // free; one media write stays in flight while buffer service continues.
  uint64_t start = std::max(now + *wait_ns, wb_busy_until_);
  *wait_ns = start - now;
  uint64_t stall = 0;
  if (params_.outlier_prob > 0 && rng_.bernoulli(params_.outlier_prob)) {
    stall = rng_.range(params_.outlier_min_ns, params_.outlier_max_ns);
    counters_.outlier_events++;
  }
  wb_busy_until_ = start + params_.media_write_ns + stall;
  counters_.media_write_bytes += kXpLineBytes;
  if (params_.track_data) media_[slot.line] = slot.words;
  slot.dirty_mask = 0;
}

XpDimm::Slot* XpDimm::allocate(uint64_t line, uint64_t now, uint64_t* wait_ns) {
  uint32_t victim_idx = 0;
  if (index_.size() < slots_.size()) {
    for (uint32_t i = 0; i < slots_.size(); i++) {
      if (!slots_[i].valid) {
        victim_idx = i;
        break;
      }
    }
  } else {
    uint64_t best = UINT64_MAX;
    for (uint32_t i = 0; i < slots_.size(); i++) {
      if (slots_[i].lru_stamp < best) {
        best = slots_[i].lru_stamp;
        victim_idx = i;
      }
    }
    Slot& victim = slots_[victim_idx];
    if (victim.dirty_mask != 0) media_writeback(victim, now, wait_ns);
    index_.erase(victim.line);
  }
  Slot& slot = slots_[victim_idx];
  slot.line = line;
  slot.valid = true;
  slot.dirty_mask = 0;
  slot.data_mask = 0;
  slot.lru_stamp = ++tick_;
  slot.last_write_serial = write_serial_;
  slot.words = {};
  index_[line] = victim_idx;
  return &slot;
}

void XpDimm::push_writer(uint32_t thread) {
  if (params_.writer_window == 0) return;
  uint32_t old = window_[window_pos_];
  if (old != UINT32_MAX && --writer_counts_[old] == 0) distinct_writers_--;
  window_[window_pos_] = thread;
  window_pos_ = (window_pos_ + 1) % params_.writer_window;
  if (thread >= writer_counts_.size()) writer_counts_.resize(thread + 1, 0);
  if (writer_counts_[thread]++ == 0) distinct_writers_++;
}

void XpDimm::pressure_victim(uint64_t spared_line, uint64_t now, uint64_t* wait_ns) {
  // Too many interleaved writer streams for the combining logic to track:
  // push out the stalest partially dirty line even though it has not been
  // completed, costing a full 256 B media write for its fraction of data.
  uint32_t best_idx = UINT32_MAX;
  uint64_t best_serial = UINT64_MAX;
  for (uint32_t i = 0; i < slots_.size(); i++) {
    Slot& s = slots_[i];
    if (!s.valid || s.line == spared_line) continue;
    if (s.dirty_mask == 0 || s.dirty_mask == 0xf) continue;
    if (write_serial_ - s.last_write_serial < params_.victim_min_stale) continue;
    if (s.last_write_serial < best_serial) {
      best_serial = s.last_write_serial;
      best_idx = i;
    }
  }
  if (best_idx != UINT32_MAX) media_writeback(slots_[best_idx], now, wait_ns);
}

XpAccessOutcome XpDimm::read64(uint64_t offset, uint32_t thread, uint64_t now) {
  (void)thread;
  if (offset % kCacheLineBytes != 0)
    throw std::invalid_argument("device read must be 64 B aligned");
  XpAccessOutcome out;
  counters_.imc_read_bytes += kCacheLineBytes;
  uint64_t line = offset & kLineMask;
  uint64_t wait = 0;
  if (Slot* slot = find(line)) {
    slot->lru_stamp = ++tick_;
    out.buffer_hit = true;
    out.occupancy_ns = params_.read_hit_occ_ns;
    out.data_ready_at = now + params_.buffer_hit_ns;
    return out;
  }
  Slot* slot = allocate(line, now, &wait);
  media_fetch(*slot);
  out.occupancy_ns = wait + params_.read_miss_occ_ns;
  out.data_ready_at = now + wait + params_.media_read_ns;
  return out;
}

XpAccessOutcome XpDimm::write64(uint64_t offset, uint32_t thread, uint64_t now,
                                const uint64_t* words, uint8_t word_mask) {
  if (offset % kCacheLineBytes != 0)
    throw std::invalid_argument("device write must be 64 B aligned");
  XpAccessOutcome out;
  counters_.imc_write_bytes += kCacheLineBytes;
  write_serial_++;
  push_writer(thread);
  uint64_t line = offset & kLineMask;
  uint32_t quarter = (uint32_t)((offset % kXpLineBytes) / kCacheLineBytes);
  uint64_t wait = 0;
  Slot* slot = find(line);
  bool allocated = false;
  if (slot) {
    out.buffer_hit = true;
    out.occupancy_ns = params_.write_hit_occ_ns;
  } else {
    slot = allocate(line, now, &wait);
    // Sub-line write: the controller fetches the full XPLine so the eventual
    // writeback has all 256 B (read-modify-write).
    media_fetch(*slot);
    out.occupancy_ns = wait + params_.write_miss_occ_ns;
    allocated = true;
  }
  slot->lru_stamp = ++tick_;
  slot->last_write_serial = write_serial_;
  slot->dirty_mask |= (uint8_t)(1u << quarter);
  if (params_.track_data && words != nullptr) {
    for (uint32_t w = 0; w < 8; w++)
      if (word_mask & (1u << w)) slot->words[quarter * 8 + w] = words[w];
  }
  if (slot->dirty_mask == 0xf) {
    // Fully covered line: write it back now, keep it resident and clean.
    uint64_t extra = out.occupancy_ns;
    media_writeback(*slot, now, &extra);
    out.occupancy_ns = extra;
  } else if (allocated && params_.writer_threshold > 0 &&
             distinct_writers_ > params_.writer_threshold) {
    uint64_t extra = out.occupancy_ns;
    pressure_victim(line, now, &extra);
    out.occupancy_ns = extra;
  }
  out.data_ready_at = now + out.occupancy_ns;
  return out;
}

void XpDimm::flush_all(uint64_t now) {
  for (uint32_t i = 0; i < slots_.size(); i++) {
    if (!slots_[i].valid || slots_[i].dirty_mask == 0) continue;
    uint64_t wait = 0;
    media_writeback(slots_[i], now, &wait);
  }
}

uint32_t XpDimm::dirty_lines() const {
  uint32_t n = 0;
  for (const Slot& s : slots_)
    if (s.valid && s.dirty_mask != 0) n++;
  return n;
}

std::array<uint64_t, 8> XpDimm::image64(uint64_t line_offset) const {
  std::array<uint64_t, 8> out{};
  uint64_t line = line_offset & kLineMask;
  uint32_t quarter = (uint32_t)((line_offset % kXpLineBytes) / kCacheLineBytes);
  auto mit = media_.find(line);
  if (mit != media_.end())
    for (uint32_t w = 0; w < 8; w++) out[w] = mit->second[quarter * 8 + w];
  auto it = index_.find(line);
  if (it != index_.end()) {
    const Slot& slot = slots_[it->second];
    for (uint32_t w = 0; w < 8; w++)
      if (slot.words[quarter * 8 + w] != 0) out[w] = slot.words[quarter * 8 + w];
  }
  return out;
}

std::vector<std::pair<uint64_t, uint64_t>> XpDimm::persistent_words() const {
  std::vector<std::pair<uint64_t, uint64_t>> out;
  for (const auto& [line, words] : media_) {
    for (uint32_t w = 0; w < 32; w++)
      if (words[w] != 0) out.emplace_back(line + w * 8, words[w]);
  }
  for (const Slot& slot : slots_) {
    if (!slot.valid || slot.dirty_mask == 0) continue;
    for (uint32_t q = 0; q < 4; q++) {
      if (!(slot.dirty_mask & (1u << q))) continue;
      for (uint32_t w = 0; w < 8; w++) {
        uint64_t value = slot.words[q * 8 + w];
        if (value == 0) continue;
        uint64_t addr = slot.line + q * 64 + w * 8;
        bool replaced = false;
        for (auto& kv : out) {
          if (kv.first == addr) {
            kv.second = value;
            replaced = true;
            break;
          }
        }
        if (!replaced) out.emplace_back(addr, value);
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

XpAccessOutcome DramDimm::read64(uint64_t offset, uint64_t now) {
  if (offset % kCacheLineBytes != 0)
    throw std::invalid_argument("device read must be 64 B aligned");
  XpAccessOutcome out;
  counters_.imc_read_bytes += kCacheLineBytes;
  counters_.media_read_bytes += kCacheLineBytes;
  uint64_t row = offset / params_.row_bytes;
  bool hit = row == open_row_;
  open_row_ = row;
  out.buffer_hit = hit;
  out.occupancy_ns = params_.read_occ_ns;
  out.data_ready_at = now + (hit ? params_.row_hit_ns : params_.row_miss_ns);
  return out;
}

XpAccessOutcome DramDimm::write64(uint64_t offset, uint64_t now, const uint64_t* words,
                                  uint8_t word_mask) {
  if (offset % kCacheLineBytes != 0)
    throw std::invalid_argument("device write must be 64 B aligned");
  XpAccessOutcome out;
  counters_.imc_write_bytes += kCacheLineBytes;
  counters_.media_write_bytes += kCacheLineBytes;
  uint64_t row = offset / params_.row_bytes;
  out.buffer_hit = row == open_row_;
  open_row_ = row;
  out.occupancy_ns = params_.write_occ_ns;
  out.data_ready_at = now + params_.write_occ_ns;
  if (params_.track_data && words != nullptr) {
    auto& line = media_[offset];
    for (uint32_t w = 0; w < 8; w++)
      if (word_mask & (1u << w)) line[w] = words[w];
  }
  return out;
}

std::array<uint64_t, 8> DramDimm::image64(uint64_t line_offset) const {
  auto it = media_.find(line_offset);
  if (it == media_.end()) return {};
  return it->second;
}

std::vector<std::pair<uint64_t, uint64_t>> DramDimm::persistent_words() const {
  std::vector<std::pair<uint64_t, uint64_t>> out;
  for (const auto& [addr, words] : media_)
    for (uint32_t w = 0; w < 8; w++)
      if (words[w] != 0) out.emplace_back(addr + w * 8, words[w]);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace xpsim
