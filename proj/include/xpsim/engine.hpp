#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <stdexcept>
#include <unordered_map>
#include <variant>
#include <vector>

#include "xpsim/cache.hpp"
#include "xpsim/config.hpp"
#include "xpsim/imc.hpp"
#include "xpsim/metrics.hpp"
#include "xpsim/rng.hpp"
#include "xpsim/workload.hpp"

namespace xpsim {

// Internal invariant violation (an engine bug, never a config problem).
class SimError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Persistent image after a crash: namespace address of each written 8-byte
// word to its value. Values are engine-assigned version tags.
using CrashImage = std::map<uint64_t, uint64_t>;

struct AcceptanceRecord {
  uint64_t time_ns = 0;
  uint32_t thread = 0;
  uint64_t line_addr = 0;  // namespace address, 64 B aligned
  uint8_t word_mask = 0;
  std::array<uint64_t, 8> words{};
};

// Receives every request the iMC front end hands to a device, in service
// order. Used to dump replayable traces for the counter oracle.
class TraceSink {
 public:
  virtual ~TraceSink() = default;
  virtual void on_request(uint32_t dimm, uint32_t thread, bool is_write, uint64_t offset) = 0;
  virtual void on_flush(uint32_t dimm) = 0;
};

struct EngineResult {
  ExperimentReport report;
  std::optional<CrashImage> crash_image;
  std::vector<AcceptanceRecord> acceptance_log;  // track_data runs only
};

// One deterministic simulation run: virtual nanosecond clock, (time, seq)
// ordered event heap, simulated-thread actors over per-thread op streams,
// per-DIMM queue and device state. Strictly single-threaded over its own
// state; independent runs can execute concurrently.
class Simulation {
 public:
  explicit Simulation(const RunConfig& cfg);

  // Replaces the workload-generated streams (tests build explicit op lists).
  void inject_streams(std::vector<std::unique_ptr<StreamSource>> streams);
  void set_crash_time(uint64_t ns) { crash_at_ = ns; }
  void set_trace_sink(TraceSink* sink) { trace_ = sink; }
  // Total program-level accesses expected, used to pick the latency sampling
  // stride against run.sample_cap.
  void set_planned_accesses(uint64_t n);

  EngineResult run();

 private:
  enum class EvKind : uint8_t {
    THREAD_STEP,
    SERVICE_DONE,
    READ_DEVICE_DONE,
    READ_DELIVERED,
    WPQ_ARRIVAL,
    RPQ_ARRIVAL,
    CREDIT_RELEASE,
    QUEUE_SAMPLE,
  };

  struct Event {
    uint64_t time;
    uint64_t seq;
    EvKind kind;
    uint32_t a;
    uint64_t b;
    bool operator>(const Event& o) const {
      return time != o.time ? time > o.time : seq > o.seq;
    }
  };

  struct Action {
    enum class Kind : uint8_t {
      CHARGE,
      EMIT_WRITE,
      ISSUE_READ,
      PREP_LOAD_MISS,
      PREP_STORE_MISS,
      MLP_WAIT,
      ACQUIRE_CREDITS,
      FENCE,
      DELAY,
      MARKER,
    };
    Kind kind = Kind::CHARGE;
    uint8_t credits = 0;
    bool persist = false;
    bool deliver = false;
    bool invalidate = false;  // PREP_STORE/flush variants
    bool end_access = false;
    uint32_t dimm = 0;
    uint64_t ns = 0;
    uint64_t addr = 0;  // namespace line address
    uint64_t offset = 0;  // device offset
    uint8_t word_mask = 0;
    std::array<uint64_t, 8> words{};
    uint64_t access_serial = 0;
    uint64_t version = 0;
    uint32_t size = 0;
  };

  struct AccessRec {
    uint64_t start_ns = 0;
    uint32_t pending_loads = 0;
    bool issue_done = false;
    bool sampled = true;
    bool has_nt = false, has_store = false, has_clwb = false, has_load = false;
  };

  struct ThreadCtx {
    uint32_t id = 0;
    std::unique_ptr<StreamSource> stream;
    std::unique_ptr<CacheModel> cache;
    WriteCombineSlot wc;
    std::deque<Action> plan;
    bool parked = false;
    bool finished = false;
    bool step_scheduled = false;
    uint32_t outstanding_loads = 0;
    uint64_t unaccepted_persists = 0;
    bool had_wc_since_fence = false;
    uint64_t payload_bytes = 0;
    uint64_t access_counter = 0;
    uint64_t open_serial = 0;  // 0: none
    std::unordered_map<uint64_t, AccessRec> accesses;
    Rng jitter_rng{0};
  };

  struct ReadOp {
    uint32_t thread = 0;
    uint32_t dimm = 0;
    uint64_t access_serial = 0;
    bool deliver = false;
    bool end_access = false;
    bool remote = false;
    bool in_use = false;
  };

  struct WpqWaiter {
    bool remote = false;
    uint32_t tid = 0;  // local: parked thread
    WpqEntry entry;
    uint64_t line_addr = 0;
    bool persist = false;
    uint32_t owner = 0;  // remote: issuing thread
  };

  struct RpqWaiter {
    bool remote = false;
    uint32_t tid = 0;
    RpqEntry entry;
  };

  struct DimmUnit {
    std::optional<XpDimm> xp;
    std::optional<DramDimm> dram;
    WpqState wpq;
    RpqState rpq;
    bool busy = false;
    bool serving_write = false;
    std::deque<WpqWaiter> wpq_waiters;
    std::deque<RpqWaiter> rpq_waiters;

    DimmUnit(const ImcParams& imc) : wpq(imc), rpq(imc) {}
    XpAccessOutcome dev_read(uint64_t offset, uint32_t thread, uint64_t now);
    XpAccessOutcome dev_write(uint64_t offset, uint32_t thread, uint64_t now,
                              const uint64_t* words, uint8_t mask);
    const DeviceCounters& dev_counters() const;
    std::array<uint64_t, 8> dev_image64(uint64_t offset) const;
    void dev_flush(uint64_t now);
  };

  struct LinkState {
    uint32_t available = 0;
    std::deque<uint32_t> waiters;  // parked threads, FIFO
  };

  // --- event machinery ---
  void schedule(uint64_t time, EvKind kind, uint32_t a, uint64_t b = 0);
  void schedule_step(ThreadCtx& tc, uint64_t time);
  void dispatch(const Event& ev);

  // --- thread execution ---
  void thread_step(uint32_t tid, uint64_t now);
  bool compile_next(ThreadCtx& tc, uint64_t now);
  void compile_item(ThreadCtx& tc, const StreamItem& item, uint64_t now);
  void open_access(ThreadCtx& tc, const StreamItem& item, uint64_t now);
  // Returns false when the thread parked on the action's resource.
  bool exec_action(ThreadCtx& tc, Action& act, uint64_t now);
  void finish_access_issue(ThreadCtx& tc, uint64_t serial, uint64_t end_ns);
  void complete_access(ThreadCtx& tc, uint64_t serial, uint64_t end_ns);

  // --- memory path ---
  void accept_write(const WpqEntry& entry, uint32_t dimm, uint64_t line_addr, bool persist,
                    uint32_t owner, uint64_t now);
  void issue_read_local(uint32_t dimm, RpqEntry entry, uint64_t now);
  void process_wpq_waiters(uint32_t dimm, uint64_t now);
  void process_rpq_waiters(uint32_t dimm, uint64_t now);
  void kick(uint32_t dimm, uint64_t now);
  void release_credits(uint32_t n, uint64_t now);
  void on_persist_accepted(uint32_t owner, uint64_t now);
  std::array<uint64_t, 8> line_image(uint32_t dimm, uint64_t offset) const;

  uint64_t make_read_token(ReadOp op);
  CrashImage build_crash_image() const;
  void snapshot_round(uint64_t round);

  RunConfig cfg_;
  PlatformTopology topo_;
  bool remote_ = false;
  TraceSink* trace_ = nullptr;
  std::optional<uint64_t> crash_at_;
  uint64_t planned_accesses_ = 0;
  uint64_t sample_stride_ = 1;

  std::priority_queue<Event, std::vector<Event>, std::greater<Event>> events_;
  uint64_t seq_ = 0;
  uint64_t now_ = 0;
  uint64_t version_ = 0;

  std::vector<ThreadCtx> threads_;
  std::vector<DimmUnit> dimms_;
  LinkState link_;
  std::vector<ReadOp> reads_;
  std::vector<uint64_t> read_freelist_;
  std::vector<WpqWaiter> wpq_arrivals_;  // remote writes in flight on the link
  std::vector<uint64_t> wpq_arrival_free_;
  std::vector<RpqWaiter> rpq_arrivals_;
  std::vector<uint64_t> rpq_arrival_free_;
  uint32_t unfinished_ = 0;

  ExperimentReport report_;
  std::vector<AcceptanceRecord> acceptance_log_;
  DeviceCounters last_round_counters_;
  bool streams_injected_ = false;
};

}  // namespace xpsim
