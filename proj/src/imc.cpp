#include "xpsim/imc.hpp"

#include <stdexcept>

namespace xpsim {

bool WpqState::can_accept(uint32_t thread) const {
  if (occupancy_ + kCacheLineBytes > params_.wpq_capacity_bytes) return false;
  uint64_t mine = thread < per_thread_.size() ? per_thread_[thread] : 0;
  return mine + kCacheLineBytes <= params_.wpq_thread_cap_bytes;
}

void WpqState::accept(WpqEntry entry) {
  if (!can_accept(entry.thread)) throw std::logic_error("WPQ accept over capacity");
  occupancy_ += kCacheLineBytes;
  if (entry.thread >= per_thread_.size()) per_thread_.resize(entry.thread + 1, 0);
  per_thread_[entry.thread] += kCacheLineBytes;
  entries_.push_back(std::move(entry));
}

const WpqEntry& WpqState::begin_drain() {
  if (!has_pending()) throw std::logic_error("WPQ drain on empty queue");
  if (in_service_ != 0) throw std::logic_error("WPQ drain while head in service");
  in_service_ = 1;
  return entries_.front();
}

WpqEntry WpqState::complete_drain() {
  if (in_service_ != 1 || entries_.empty()) throw std::logic_error("WPQ completion mismatch");
  WpqEntry entry = std::move(entries_.front());
  entries_.pop_front();
  in_service_ = 0;
  occupancy_ -= kCacheLineBytes;
  per_thread_[entry.thread] -= kCacheLineBytes;
  return entry;
}

void RpqState::accept(RpqEntry entry) {
  if (!can_accept()) throw std::logic_error("RPQ accept over limit");
  outstanding_++;
  pending_.push_back(std::move(entry));
}

RpqEntry RpqState::begin_service() {
  if (pending_.empty()) throw std::logic_error("RPQ service on empty queue");
  RpqEntry entry = std::move(pending_.front());
  pending_.pop_front();
  return entry;
}

void RpqState::complete(uint64_t token) {
  (void)token;
  if (outstanding_ == 0) throw std::logic_error("RPQ completion underflow");
  outstanding_--;
}

}  // namespace xpsim
