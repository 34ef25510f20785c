#include "xpsim/cache.hpp"

#include <bit>

namespace xpsim {

CacheModel::CacheModel(const CacheParams& params) : params_(params) {
  uint64_t n_lines = params.capacity_bytes / kCacheLineBytes;
  sets_ = (uint32_t)(n_lines / params.ways);
  if (sets_ == 0) sets_ = 1;
  set_shift_ = 64 - std::bit_width((uint64_t)sets_ - 1);
  if (sets_ == 1) set_shift_ = 64;
  lines_.resize((size_t)sets_ * params.ways);
}

uint32_t CacheModel::set_of(uint64_t line_addr) const {
  if (sets_ == 1) return 0;
  uint64_t h = (line_addr / kCacheLineBytes) * 0x9e3779b97f4a7c15ULL;
  return (uint32_t)(h >> set_shift_);
}

CacheModel::Line* CacheModel::find(uint64_t line_addr) {
  Line* base = &lines_[(size_t)set_of(line_addr) * params_.ways];
  for (uint32_t w = 0; w < params_.ways; w++)
    if (base[w].valid && base[w].addr == line_addr) return &base[w];
  return nullptr;
}

const CacheModel::Line* CacheModel::find(uint64_t line_addr) const {
  return const_cast<CacheModel*>(this)->find(line_addr);
}

CacheModel::AccessResult CacheModel::load(uint64_t line_addr) {
  AccessResult res;
  tick_++;
  if (Line* line = find(line_addr)) {
    line->stamp = tick_;
    res.hit = true;
    return res;
  }
  res.needs_fill = true;
  Line* base = &lines_[(size_t)set_of(line_addr) * params_.ways];
  Line* victim = &base[0];
  for (uint32_t w = 0; w < params_.ways; w++) {
    if (!base[w].valid) {
      victim = &base[w];
      break;
    }
    if (base[w].stamp < victim->stamp) victim = &base[w];
  }
  if (victim->valid && victim->dirty) {
    res.evicted_dirty = true;
    res.evict_addr = victim->addr;
    res.evict_words = victim->words;
  }
  victim->addr = line_addr;
  victim->valid = true;
  victim->dirty = false;
  victim->stamp = tick_;
  victim->words = {};
  return res;
}

CacheModel::AccessResult CacheModel::store(uint64_t line_addr, uint32_t offset, uint32_t size,
                                           uint64_t version) {
  AccessResult res = load(line_addr);
  Line* line = find(line_addr);
  line->dirty = true;
  if (params_.track_data) {
    for (uint32_t w = offset / 8; w < (offset + size) / 8 && w < 8; w++)
      line->words[w] = version;
  }
  return res;
}

void CacheModel::fill_words(uint64_t line_addr, const LineWords& words) {
  Line* line = find(line_addr);
  if (!line) return;
  // A store that triggered the fill already dirtied some words; the fill only
  // provides the rest, and a nonzero version never collides with image data
  // because versions are globally unique.
  for (uint32_t w = 0; w < 8; w++)
    if (line->words[w] == 0) line->words[w] = words[w];
}

CacheModel::FlushResult CacheModel::write_back(uint64_t line_addr, bool invalidate) {
  FlushResult res;
  Line* line = find(line_addr);
  if (!line) return res;
  if (line->dirty) {
    res.wrote = true;
    res.words = line->words;
    line->dirty = false;
  }
  if (invalidate) line->valid = false;
  return res;
}

CacheModel::FlushResult CacheModel::clwb(uint64_t line_addr) {
  return write_back(line_addr, false);
}
CacheModel::FlushResult CacheModel::clflush(uint64_t line_addr) {
  return write_back(line_addr, true);
}
CacheModel::FlushResult CacheModel::clflushopt(uint64_t line_addr) {
  return write_back(line_addr, true);
}

bool CacheModel::resident(uint64_t line_addr) const { return find(line_addr) != nullptr; }

bool CacheModel::dirty(uint64_t line_addr) const {
  const Line* line = find(line_addr);
  return line && line->dirty;
}

uint64_t CacheModel::occupied_lines() const {
  uint64_t n = 0;
  for (const Line& line : lines_)
    if (line.valid) n++;
  return n;
}

std::vector<uint64_t> CacheModel::dirty_lines() const {
  std::vector<uint64_t> out;
  for (const Line& line : lines_)
    if (line.valid && line.dirty) out.push_back(line.addr);
  return out;
}

WriteCombineSlot::Result WriteCombineSlot::ntstore(uint64_t addr, uint32_t size,
                                                   uint64_t version) {
  uint64_t line = addr & ~(uint64_t)63;
  Result out;
  if (open_ && line_addr_ != line) out.switched = drain();
  if (!open_) {
    open_ = true;
    line_addr_ = line;
    word_mask_ = 0;
    words_ = {};
  }
  uint32_t offset = (uint32_t)(addr % 64);
  for (uint32_t w = offset / 8; w < (offset + size) / 8 && w < 8; w++) {
    word_mask_ |= (uint8_t)(1u << w);
    words_[w] = version;
  }
  if (word_mask_ == 0xff) out.filled = drain();
  return out;
}

WriteCombineSlot::Flush WriteCombineSlot::drain() {
  Flush out;
  if (!open_) return out;
  out.valid = true;
  out.line_addr = line_addr_;
  out.word_mask = word_mask_;
  out.words = words_;
  open_ = false;
  word_mask_ = 0;
  return out;
}

}  // namespace xpsim
