#include "xpsim/workload.hpp"

#include <algorithm>

namespace xpsim {

const char* to_string(OpKind kind) {
  switch (kind) {
    case OpKind::LOAD: return "load";
    case OpKind::STORE: return "store";
    case OpKind::NTSTORE: return "ntstore";
    case OpKind::CLWB: return "clwb";
    case OpKind::CLFLUSH: return "clflush";
    case OpKind::CLFLUSHOPT: return "clflushopt";
    case OpKind::SFENCE: return "sfence";
    case OpKind::DELAY: return "delay";
    case OpKind::ROUND_MARKER: return "marker";
  }
  return "?";
}

std::optional<OpKind> op_kind_from_string(const std::string& s) {
  for (OpKind k : {OpKind::LOAD, OpKind::STORE, OpKind::NTSTORE, OpKind::CLWB, OpKind::CLFLUSH,
                   OpKind::CLFLUSHOPT, OpKind::SFENCE, OpKind::DELAY, OpKind::ROUND_MARKER})
    if (s == to_string(k)) return k;
  return std::nullopt;
}

const char* to_string(Pattern p) {
  switch (p) {
    case Pattern::SEQUENTIAL: return "sequential";
    case Pattern::RANDOM_UNIFORM: return "random";
    case Pattern::HOTSPOT: return "hotspot";
    case Pattern::STRIDED: return "strided";
  }
  return "?";
}

const char* to_string(InstrSeq i) {
  switch (i) {
    case InstrSeq::LOAD: return "load";
    case InstrSeq::NTSTORE_SFENCE: return "ntstore";
    case InstrSeq::STORE_CLWB_SFENCE: return "store_clwb";
    case InstrSeq::STORE_SFENCE: return "store";
  }
  return "?";
}

const char* to_string(FlushPlacement f) {
  return f == FlushPlacement::PER_LINE ? "per_line" : "per_access_end";
}

const char* to_string(RegionPolicy r) { return r == RegionPolicy::SHARED ? "shared" : "private"; }

std::optional<Pattern> pattern_from_string(const std::string& s) {
  for (Pattern p : {Pattern::SEQUENTIAL, Pattern::RANDOM_UNIFORM, Pattern::HOTSPOT,
                    Pattern::STRIDED})
    if (s == to_string(p)) return p;
  return std::nullopt;
}

std::optional<InstrSeq> instr_from_string(const std::string& s) {
  for (InstrSeq i : {InstrSeq::LOAD, InstrSeq::NTSTORE_SFENCE, InstrSeq::STORE_CLWB_SFENCE,
                     InstrSeq::STORE_SFENCE})
    if (s == to_string(i)) return i;
  return std::nullopt;
}

std::optional<FlushPlacement> flush_placement_from_string(const std::string& s) {
  if (s == "per_line") return FlushPlacement::PER_LINE;
  if (s == "per_access_end") return FlushPlacement::PER_ACCESS_END;
  return std::nullopt;
}

std::optional<RegionPolicy> region_policy_from_string(const std::string& s) {
  if (s == "shared") return RegionPolicy::SHARED;
  if (s == "private") return RegionPolicy::PRIVATE;
  return std::nullopt;
}

std::string WorkloadSpec::validate(const PlatformTopology& topo) const {
  if (access_bytes < 8 || access_bytes % 8 != 0)
    return "access must be a multiple of 8 and at least 8 bytes";
  if (threads == 0) return "threads must be nonzero";
  if (ops_per_thread == 0) return "ops must be nonzero";
  if (region_len == 0 || region_len % access_bytes != 0)
    return "region_len must be a nonzero multiple of access";
  if (region_base % access_bytes != 0) return "region_base must be access-aligned";
  if (region_base + region_len > topo.total_capacity())
    return "region exceeds namespace capacity";
  if (pattern == Pattern::HOTSPOT) {
    if (hotspot_bytes == 0 || hotspot_bytes > region_len)
      return "hotspot must be nonzero and within region_len";
    if (hotspot_bytes % access_bytes != 0) return "hotspot must be a multiple of access";
  }
  if (pattern == Pattern::STRIDED && (stride_bytes == 0 || stride_bytes % access_bytes != 0))
    return "stride must be a nonzero multiple of access";
  if (read_fraction > 1.0) return "read_fraction must be within [0,1]";
  if (dimm_fanout > 0) {
    if (!topo.interleaved()) return "dimm_fanout requires an interleaved namespace";
    if (dimm_fanout > topo.dimms_per_socket()) return "dimm_fanout exceeds DIMMs per socket";
    if (pattern != Pattern::RANDOM_UNIFORM) return "dimm_fanout requires random pattern";
    if (access_bytes > topo.interleave_bytes)
      return "dimm_fanout requires access no larger than the interleave chunk";
    if (region_len % topo.stripe_bytes() != 0)
      return "dimm_fanout requires a stripe-aligned region_len";
  }
  if (sfence_interval_bytes % kCacheLineBytes != 0)
    return "sfence_interval must be a multiple of 64";
  return "";
}

void WorkloadSpec::thread_region(uint32_t thread, uint64_t* base, uint64_t* len) const {
  if (region_policy == RegionPolicy::SHARED || threads == 1 || dimm_fanout > 0) {
    *base = region_base;
    *len = region_len;
    return;
  }
  uint64_t align = std::max<uint64_t>(access_bytes, kXpLineBytes);
  uint64_t chunk = region_len / threads / align * align;
  if (chunk == 0) chunk = align;
  *base = region_base + (uint64_t)thread * chunk;
  *len = chunk;
}

WorkloadStream::WorkloadStream(const WorkloadSpec& spec, const PlatformTopology& topo,
                               uint64_t seed, uint32_t thread)
    : spec_(spec),
      interleave_(topo.interleave_bytes),
      dimms_(topo.dimms_per_socket()),
      rng_(derive_seed(seed, thread)),
      thread_(thread) {
  spec_.thread_region(thread, &base_, &len_);
  // Stagger sequential walks so thread t starts on DIMM (t mod D). Without
  // this, private-region bases put every thread on the same chunk phase and
  // they march across the DIMMs in lockstep, colliding on one DIMM forever;
  // hardware threads drift apart on their own.
  if (spec_.pattern == Pattern::SEQUENTIAL && topo.interleaved() && spec_.threads > 1) {
    uint64_t base_phase = (base_ / interleave_) % dimms_;
    uint64_t want = thread % dimms_;
    uint64_t delta_chunks = (want + dimms_ - base_phase) % dimms_;
    stagger_ = (delta_chunks * interleave_) % len_ / spec_.access_bytes * spec_.access_bytes;
  }
}

uint64_t WorkloadStream::draw_address() {
  const uint64_t access = spec_.access_bytes;
  if (spec_.dimm_fanout > 0) {
    uint32_t pick = (uint32_t)rng_.bounded(spec_.dimm_fanout);
    uint32_t dimm = (thread_ * spec_.dimm_fanout + pick) % dimms_;
    uint64_t stripe = interleave_ * dimms_;
    uint64_t row = rng_.bounded(len_ / stripe);
    uint64_t in_chunk = rng_.bounded(interleave_ / access) * access;
    return base_ + row * stripe + (uint64_t)dimm * interleave_ + in_chunk;
  }
  switch (spec_.pattern) {
    case Pattern::SEQUENTIAL:
      return base_ + (stagger_ + ops_done_ * access) % len_;
    case Pattern::RANDOM_UNIFORM:
      return base_ + rng_.bounded(len_ / access) * access;
    case Pattern::HOTSPOT:
      return base_ + rng_.bounded(spec_.hotspot_bytes / access) * access;
    case Pattern::STRIDED:
      return base_ + (ops_done_ * spec_.stride_bytes) % len_;
  }
  return base_;
}

void WorkloadStream::emit_access() {
  const uint64_t addr = draw_address();
  const uint64_t size = spec_.access_bytes;
  bool is_read = spec_.instr == InstrSeq::LOAD;
  if (spec_.read_fraction >= 0.0) is_read = rng_.bernoulli(spec_.read_fraction);

  auto push = [&](OpKind kind, uint64_t a, uint32_t s) {
    pending_.push_back(StreamItem{kind, false, a, s, 0});
  };
  auto push_fence_if_due = [&](uint32_t piece) {
    if (spec_.sfence_interval_bytes == 0) return;
    fence_accumulator_ += piece;
    if (fence_accumulator_ >= spec_.sfence_interval_bytes) {
      push(OpKind::SFENCE, 0, 0);
      fence_accumulator_ = 0;
    }
  };

  if (is_read) {
    for (uint64_t off = 0; off < size;) {
      uint32_t piece = (uint32_t)std::min<uint64_t>(64 - ((addr + off) % 64), size - off);
      push(OpKind::LOAD, addr + off, piece);
      off += piece;
    }
  } else {
    switch (spec_.instr == InstrSeq::LOAD ? InstrSeq::NTSTORE_SFENCE : spec_.instr) {
      case InstrSeq::NTSTORE_SFENCE: {
        for (uint64_t off = 0; off < size;) {
          uint32_t piece = (uint32_t)std::min<uint64_t>(64 - ((addr + off) % 64), size - off);
          push(OpKind::NTSTORE, addr + off, piece);
          off += piece;
          push_fence_if_due(piece);
        }
        if (spec_.sfence_interval_bytes == 0) push(OpKind::SFENCE, 0, 0);
        break;
      }
      case InstrSeq::STORE_CLWB_SFENCE: {
        if (spec_.flush_placement == FlushPlacement::PER_LINE) {
          uint64_t line = UINT64_MAX;
          for (uint64_t off = 0; off < size;) {
            uint32_t piece = (uint32_t)std::min<uint64_t>(64 - ((addr + off) % 64), size - off);
            uint64_t this_line = (addr + off) & ~(uint64_t)63;
            if (line != UINT64_MAX && this_line != line) push(OpKind::CLWB, line, 0);
            push(OpKind::STORE, addr + off, piece);
            line = this_line;
            off += piece;
            if (off >= size) push(OpKind::CLWB, line, 0);
            push_fence_if_due(piece);
          }
        } else {
          for (uint64_t off = 0; off < size;) {
            uint32_t piece = (uint32_t)std::min<uint64_t>(64 - ((addr + off) % 64), size - off);
            push(OpKind::STORE, addr + off, piece);
            off += piece;
            push_fence_if_due(piece);
          }
          for (uint64_t line = addr & ~(uint64_t)63; line < addr + size; line += 64)
            push(OpKind::CLWB, line, 0);
        }
        if (spec_.sfence_interval_bytes == 0) push(OpKind::SFENCE, 0, 0);
        break;
      }
      case InstrSeq::STORE_SFENCE: {
        for (uint64_t off = 0; off < size;) {
          uint32_t piece = (uint32_t)std::min<uint64_t>(64 - ((addr + off) % 64), size - off);
          push(OpKind::STORE, addr + off, piece);
          off += piece;
          push_fence_if_due(piece);
        }
        if (spec_.sfence_interval_bytes == 0) push(OpKind::SFENCE, 0, 0);
        break;
      }
      case InstrSeq::LOAD:
        break;
    }
  }
  if (!pending_.empty()) pending_.back().ends_access = true;
  if (spec_.delay_ns > 0)
    pending_.push_back(StreamItem{OpKind::DELAY, false, 0, 0, spec_.delay_ns});
  ops_done_++;
}

std::optional<StreamItem> WorkloadStream::next() {
  if (pending_.empty()) {
    if (ops_done_ >= spec_.ops_per_thread) return std::nullopt;
    emit_access();
  }
  StreamItem item = pending_.front();
  pending_.pop_front();
  return item;
}

ProbeStream::ProbeStream(uint32_t n_lines, uint64_t region_base, uint32_t rounds)
    : n_lines_(n_lines), base_(region_base), rounds_(rounds) {}

std::optional<StreamItem> ProbeStream::next() {
  // Per line-half: two 64 B ntstores then a fence. After both halves of every
  // line, a round marker so metrics can take per-round counter deltas.
  while (!done_) {
    if (piece_ < 2) {
      uint64_t addr =
          base_ + (uint64_t)line_ * kXpLineBytes + (uint64_t)half_ * 128 + piece_ * 64;
      piece_++;
      return StreamItem{OpKind::NTSTORE, false, addr, 64, 0};
    }
    if (piece_ == 2) {
      piece_++;
      return StreamItem{OpKind::SFENCE, true, 0, 0, 0};
    }
    piece_ = 0;
    line_++;
    if (line_ < n_lines_) continue;
    line_ = 0;
    half_++;
    if (half_ < 2) continue;
    half_ = 0;
    uint32_t finished = round_++;
    if (round_ >= rounds_) done_ = true;
    return StreamItem{OpKind::ROUND_MARKER, false, 0, 0, finished};
  }
  return std::nullopt;
}

std::unique_ptr<StreamSource> make_workload_stream(const WorkloadSpec& spec,
                                                   const PlatformTopology& topo, uint64_t seed,
                                                   uint32_t thread) {
  return std::make_unique<WorkloadStream>(spec, topo, seed, thread);
}

}  // namespace xpsim
