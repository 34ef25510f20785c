#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "xpsim/rng.hpp"
#include "xpsim/topology.hpp"

namespace xpsim {

// Micro-op kinds. LOAD..SFENCE mirror the instruction-level event model;
// DELAY and ROUND_MARKER are stream annotations consumed by the engine and
// metrics, never by the memory hierarchy.
enum class OpKind : uint8_t {
  LOAD,
  STORE,
  NTSTORE,
  CLWB,
  CLFLUSH,
  CLFLUSHOPT,
  SFENCE,
  DELAY,
  ROUND_MARKER,
};

const char* to_string(OpKind kind);
std::optional<OpKind> op_kind_from_string(const std::string& s);

// One stream element. Payload ops (LOAD/STORE/NTSTORE) never cross a 64 B
// line boundary; flushes carry the line address. `arg` holds the delay in ns
// for DELAY and the round index for ROUND_MARKER.
struct StreamItem {
  OpKind kind = OpKind::LOAD;
  bool ends_access = false;
  uint64_t addr = 0;
  uint32_t size = 0;
  uint64_t arg = 0;
};

enum class Pattern : uint8_t { SEQUENTIAL, RANDOM_UNIFORM, HOTSPOT, STRIDED };
enum class InstrSeq : uint8_t { LOAD, NTSTORE_SFENCE, STORE_CLWB_SFENCE, STORE_SFENCE };
enum class FlushPlacement : uint8_t { PER_LINE, PER_ACCESS_END };
enum class RegionPolicy : uint8_t { SHARED, PRIVATE };

const char* to_string(Pattern p);
const char* to_string(InstrSeq i);
const char* to_string(FlushPlacement f);
const char* to_string(RegionPolicy r);
std::optional<Pattern> pattern_from_string(const std::string& s);
std::optional<InstrSeq> instr_from_string(const std::string& s);
std::optional<FlushPlacement> flush_placement_from_string(const std::string& s);
std::optional<RegionPolicy> region_policy_from_string(const std::string& s);

struct WorkloadSpec {
  Pattern pattern = Pattern::SEQUENTIAL;
  uint64_t region_base = 0;
  uint64_t region_len = 256 * kMiB;
  uint64_t access_bytes = 64;
  uint64_t stride_bytes = 0;      // STRIDED only
  uint64_t hotspot_bytes = 0;     // HOTSPOT only
  InstrSeq instr = InstrSeq::LOAD;
  FlushPlacement flush_placement = FlushPlacement::PER_LINE;
  uint64_t sfence_interval_bytes = 0;  // 0: fence once per access
  double read_fraction = -1.0;         // in [0,1]: Bernoulli load/write mix
  uint64_t delay_ns = 0;               // idle gap between accesses
  uint32_t threads = 1;
  RegionPolicy region_policy = RegionPolicy::PRIVATE;
  uint32_t dimm_fanout = 0;  // 0: unrestricted; N: thread offsets span N DIMMs
  uint64_t ops_per_thread = 1000000;

  // Empty string when valid; otherwise names the offending field.
  std::string validate(const PlatformTopology& topo) const;
  // Per-thread address window under the region policy.
  void thread_region(uint32_t thread, uint64_t* base, uint64_t* len) const;
};

// Pull-based op source so billion-op streams never materialize in memory.
class StreamSource {
 public:
  virtual ~StreamSource() = default;
  virtual std::optional<StreamItem> next() = 0;
};

// Expands program-level accesses into 64 B micro-ops plus the instruction
// sequence's flush and fence ops. Deterministic in (spec, seed, thread).
class WorkloadStream : public StreamSource {
 public:
  WorkloadStream(const WorkloadSpec& spec, const PlatformTopology& topo, uint64_t seed,
                 uint32_t thread);
  std::optional<StreamItem> next() override;

 private:
  void emit_access();
  uint64_t draw_address();

  WorkloadSpec spec_;
  uint64_t interleave_;
  uint32_t dimms_;
  Rng rng_;
  uint32_t thread_;
  uint64_t base_ = 0;
  uint64_t len_ = 0;
  uint64_t stagger_ = 0;
  uint64_t ops_done_ = 0;
  uint64_t fence_accumulator_ = 0;
  std::deque<StreamItem> pending_;
};

// The XPBuffer capacity probe: each round writes the first half of each of
// n_lines XPLines in turn, then the second halves, fencing every half, and
// closes with a round marker so per-round counter deltas can be taken.
class ProbeStream : public StreamSource {
 public:
  ProbeStream(uint32_t n_lines, uint64_t region_base, uint32_t rounds);
  std::optional<StreamItem> next() override;

 private:
  uint32_t n_lines_;
  uint64_t base_;
  uint32_t rounds_;
  uint32_t round_ = 0;
  uint32_t half_ = 0;
  uint32_t line_ = 0;
  uint32_t piece_ = 0;
  bool done_ = false;
};

class ExplicitStream : public StreamSource {
 public:
  explicit ExplicitStream(std::vector<StreamItem> items) : items_(std::move(items)) {}
  std::optional<StreamItem> next() override {
    if (pos_ >= items_.size()) return std::nullopt;
    return items_[pos_++];
  }

 private:
  std::vector<StreamItem> items_;
  size_t pos_ = 0;
};

std::unique_ptr<StreamSource> make_workload_stream(const WorkloadSpec& spec,
                                                   const PlatformTopology& topo, uint64_t seed,
                                                   uint32_t thread);

}  // namespace xpsim
