#include "xpsim/engine.hpp"

#include <algorithm>

namespace xpsim {

namespace {
constexpr uint64_t kLine64Mask = ~(uint64_t)(kCacheLineBytes - 1);
}

XpAccessOutcome Simulation::DimmUnit::dev_read(uint64_t offset, uint32_t thread, uint64_t now) {
  return xp ? xp->read64(offset, thread, now) : dram->read64(offset, now);
}

XpAccessOutcome Simulation::DimmUnit::dev_write(uint64_t offset, uint32_t thread, uint64_t now,
                                                const uint64_t* words, uint8_t mask) {
  return xp ? xp->write64(offset, thread, now, words, mask)
            : dram->write64(offset, now, words, mask);
}

const DeviceCounters& Simulation::DimmUnit::dev_counters() const {
  return xp ? xp->counters() : dram->counters();
}

std::array<uint64_t, 8> Simulation::DimmUnit::dev_image64(uint64_t offset) const {
  return xp ? xp->image64(offset) : dram->image64(offset);
}

void Simulation::DimmUnit::dev_flush(uint64_t now) {
  if (xp) xp->flush_all(now);
}

Simulation::Simulation(const RunConfig& cfg) : cfg_(cfg), topo_(cfg.topology) {
  std::string err = cfg_.validate();
  if (!err.empty()) throw std::invalid_argument(err);
  remote_ = cfg_.thread_socket != topo_.ns_socket;

  uint32_t n_dimms = topo_.interleaved() ? topo_.dimms_per_socket() : 1;
  XpParams xp = cfg_.xp;
  xp.track_data = cfg_.run.track_data;
  DramParams dram = cfg_.dram;
  dram.track_data = cfg_.run.track_data;
  for (uint32_t d = 0; d < n_dimms; d++) {
    dimms_.emplace_back(cfg_.imc);
    uint32_t flat = topo_.interleaved() ? d : *topo_.ns_dimm;
    if (topo_.device_kind == DeviceKind::XPDIMM)
      dimms_.back().xp.emplace(xp, derive_seed(cfg_.run.seed, 0x10000 + flat));
    else
      dimms_.back().dram.emplace(dram);
  }

  CacheParams cache = cfg_.cache;
  cache.track_data = cfg_.run.track_data;
  threads_.resize(cfg_.workload.threads);
  for (uint32_t t = 0; t < cfg_.workload.threads; t++) {
    threads_[t].id = t;
    threads_[t].cache = std::make_unique<CacheModel>(cache);
    threads_[t].stream = make_workload_stream(cfg_.workload, topo_, cfg_.run.seed, t);
    threads_[t].jitter_rng = Rng(derive_seed(cfg_.run.seed, 0xa000 + t));
  }
  unfinished_ = (uint32_t)threads_.size();
  link_.available = cfg_.remote.credits;
  planned_accesses_ = cfg_.workload.ops_per_thread * cfg_.workload.threads;
}

void Simulation::inject_streams(std::vector<std::unique_ptr<StreamSource>> streams) {
  if (streams.size() != threads_.size()) {
    threads_.resize(streams.size());
    CacheParams cache = cfg_.cache;
    cache.track_data = cfg_.run.track_data;
    for (uint32_t t = 0; t < threads_.size(); t++) {
      threads_[t].id = t;
      if (!threads_[t].cache) threads_[t].cache = std::make_unique<CacheModel>(cache);
      threads_[t].jitter_rng = Rng(derive_seed(cfg_.run.seed, 0xa000 + t));
    }
    unfinished_ = (uint32_t)threads_.size();
  }
  for (uint32_t t = 0; t < threads_.size(); t++) threads_[t].stream = std::move(streams[t]);
  streams_injected_ = true;
  planned_accesses_ = 0;
}

void Simulation::set_planned_accesses(uint64_t n) { planned_accesses_ = n; }

void Simulation::schedule(uint64_t time, EvKind kind, uint32_t a, uint64_t b) {
  events_.push(Event{time, seq_++, kind, a, b});
}

void Simulation::schedule_step(ThreadCtx& tc, uint64_t time) {
  if (tc.step_scheduled || tc.finished) return;
  tc.step_scheduled = true;
  schedule(time, EvKind::THREAD_STEP, tc.id, 0);
}

uint64_t Simulation::make_read_token(ReadOp op) {
  op.in_use = true;
  if (!read_freelist_.empty()) {
    uint64_t token = read_freelist_.back();
    read_freelist_.pop_back();
    reads_[token] = op;
    return token;
  }
  reads_.push_back(op);
  return reads_.size() - 1;
}

EngineResult Simulation::run() {
  sample_stride_ = 1;
  if (planned_accesses_ > cfg_.run.sample_cap && cfg_.run.sample_cap > 0)
    sample_stride_ = (planned_accesses_ + cfg_.run.sample_cap - 1) / cfg_.run.sample_cap;

  for (ThreadCtx& tc : threads_) schedule_step(tc, 0);
  if (cfg_.run.dump_queue_depth)
    schedule(cfg_.run.queue_sample_interval_ns, EvKind::QUEUE_SAMPLE, 0, 0);

  bool crashed = false;
  while (!events_.empty()) {
    Event ev = events_.top();
    events_.pop();
    if (ev.time < now_) throw SimError("virtual time went backwards");
    if (crash_at_ && ev.time >= *crash_at_) {
      crashed = true;
      break;
    }
    now_ = ev.time;
    dispatch(ev);
  }
  if (!crashed && unfinished_ > 0)
    throw SimError("deadlock: event queue empty with unfinished threads");

  if (cfg_.run.flush_devices_at_end && !crashed) {
    for (uint32_t d = 0; d < dimms_.size(); d++) {
      if (trace_) trace_->on_flush(d);
      dimms_[d].dev_flush(now_);
    }
  }

  EngineResult result;
  report_.seed = cfg_.run.seed;
  report_.duration_ns = now_;
  report_.sample_stride = sample_stride_;
  report_.config_echo = cfg_.echo();
  report_.thread_payload_bytes.clear();
  for (ThreadCtx& tc : threads_) {
    report_.thread_payload_bytes.push_back(tc.payload_bytes);
    report_.payload_bytes += tc.payload_bytes;
  }
  for (DimmUnit& unit : dimms_) report_.dimm_counters.push_back(unit.dev_counters());
  result.report = std::move(report_);
  if (crash_at_) result.crash_image = build_crash_image();
  result.acceptance_log = std::move(acceptance_log_);
  return result;
}

void Simulation::dispatch(const Event& ev) {
  switch (ev.kind) {
    case EvKind::THREAD_STEP: {
      ThreadCtx& tc = threads_[ev.a];
      tc.step_scheduled = false;
      thread_step(ev.a, ev.time);
      break;
    }
    case EvKind::SERVICE_DONE: {
      DimmUnit& unit = dimms_[ev.a];
      unit.busy = false;
      if (unit.serving_write) {
        unit.serving_write = false;
        unit.wpq.complete_drain();
        process_wpq_waiters(ev.a, ev.time);
      }
      kick(ev.a, ev.time);
      break;
    }
    case EvKind::READ_DEVICE_DONE: {
      DimmUnit& unit = dimms_[ev.a];
      unit.rpq.complete(ev.b);
      process_rpq_waiters(ev.a, ev.time);
      ReadOp& op = reads_[ev.b];
      uint64_t delivery =
          ev.time + 2 * cfg_.imc.traversal_ns + (op.remote ? cfg_.remote.link_ns : 0);
      schedule(delivery, EvKind::READ_DELIVERED, 0, ev.b);
      break;
    }
    case EvKind::READ_DELIVERED: {
      ReadOp op = reads_[ev.b];
      reads_[ev.b].in_use = false;
      read_freelist_.push_back(ev.b);
      ThreadCtx& tc = threads_[op.thread];
      if (op.deliver) {
        tc.outstanding_loads--;
        auto it = tc.accesses.find(op.access_serial);
        if (it != tc.accesses.end()) {
          it->second.pending_loads--;
          if (op.end_access) it->second.issue_done = true;
          if (it->second.issue_done && it->second.pending_loads == 0)
            complete_access(tc, op.access_serial, ev.time);
        }
        if (tc.parked && !tc.plan.empty() &&
            tc.plan.front().kind == Action::Kind::MLP_WAIT)
          schedule_step(tc, ev.time);
      }
      if (op.remote) release_credits(1, ev.time);
      break;
    }
    case EvKind::WPQ_ARRIVAL: {
      WpqWaiter w = wpq_arrivals_[ev.b];
      wpq_arrival_free_.push_back(ev.b);
      DimmUnit& unit = dimms_[ev.a];
      if (unit.wpq_waiters.empty() && unit.wpq.can_accept(w.entry.thread)) {
        accept_write(w.entry, ev.a, w.line_addr, w.persist, w.owner, ev.time);
        schedule(ev.time + cfg_.remote.link_ns, EvKind::CREDIT_RELEASE,
                 cfg_.remote.write_credits, 0);
        if (w.persist) on_persist_accepted(w.owner, ev.time);
      } else {
        unit.wpq_waiters.push_back(std::move(w));
      }
      break;
    }
    case EvKind::RPQ_ARRIVAL: {
      RpqWaiter w = rpq_arrivals_[ev.b];
      rpq_arrival_free_.push_back(ev.b);
      DimmUnit& unit = dimms_[ev.a];
      if (unit.rpq_waiters.empty() && unit.rpq.can_accept()) {
        unit.rpq.accept(w.entry);
        kick(ev.a, ev.time);
      } else {
        unit.rpq_waiters.push_back(std::move(w));
      }
      break;
    }
    case EvKind::CREDIT_RELEASE:
      release_credits(ev.a, ev.time);
      break;
    case EvKind::QUEUE_SAMPLE: {
      QueueSample sample;
      sample.time_ns = ev.time;
      for (DimmUnit& unit : dimms_) {
        sample.wpq_bytes.push_back(unit.wpq.occupancy_bytes());
        sample.rpq_outstanding.push_back(unit.rpq.outstanding());
      }
      report_.queue_samples.push_back(std::move(sample));
      if (!events_.empty())
        schedule(ev.time + cfg_.run.queue_sample_interval_ns, EvKind::QUEUE_SAMPLE, 0, 0);
      break;
    }
  }
}

void Simulation::thread_step(uint32_t tid, uint64_t now) {
  ThreadCtx& tc = threads_[tid];
  if (tc.finished) return;
  tc.parked = false;
  while (true) {
    if (tc.plan.empty()) {
      if (!compile_next(tc, now)) return;
      continue;
    }
    Action& act = tc.plan.front();
    if (!exec_action(tc, act, now)) return;  // parked or rescheduled
  }
}

bool Simulation::compile_next(ThreadCtx& tc, uint64_t now) {
  auto item = tc.stream->next();
  if (!item) {
    tc.finished = true;
    unfinished_--;
    return false;
  }
  compile_item(tc, *item, now);
  return true;
}

void Simulation::open_access(ThreadCtx& tc, const StreamItem& item, uint64_t now) {
  (void)item;
  if (tc.open_serial != 0) return;
  uint64_t serial = ++tc.access_counter;
  AccessRec rec;
  rec.start_ns = now;
  rec.sampled = ((serial - 1) % sample_stride_) == 0;
  tc.accesses.emplace(serial, rec);
  tc.open_serial = serial;
  report_.total_ops++;
}

void Simulation::compile_item(ThreadCtx& tc, const StreamItem& item, uint64_t now) {
  auto plan = [&tc](Action a) { tc.plan.push_back(std::move(a)); };
  auto loc_of = [this](uint64_t addr) { return topo_.decode_address(addr); };
  auto unit_of = [this](const DimmLocation& loc) -> uint32_t {
    return topo_.interleaved() ? topo_.flat_index(loc) : 0;
  };

  switch (item.kind) {
    case OpKind::LOAD: {
      open_access(tc, item, now);
      AccessRec& rec = tc.accesses.at(tc.open_serial);
      rec.has_load = true;
      tc.payload_bytes += item.size;
      uint64_t line = item.addr & kLine64Mask;
      if (tc.cache->resident(line)) {
        tc.cache->load(line);
        Action a;
        a.kind = Action::Kind::CHARGE;
        a.ns = cfg_.cache.hit_ns;
        a.end_access = item.ends_access;
        a.access_serial = tc.open_serial;
        plan(a);
      } else {
        Action mlp;
        mlp.kind = Action::Kind::MLP_WAIT;
        plan(mlp);
        Action prep;
        prep.kind = Action::Kind::PREP_LOAD_MISS;
        prep.addr = line;
        prep.end_access = item.ends_access;
        prep.access_serial = tc.open_serial;
        plan(prep);
      }
      break;
    }
    case OpKind::STORE: {
      open_access(tc, item, now);
      AccessRec& rec = tc.accesses.at(tc.open_serial);
      rec.has_store = true;
      tc.payload_bytes += item.size;
      uint64_t line = item.addr & kLine64Mask;
      uint64_t version = ++version_;
      if (tc.cache->resident(line)) {
        tc.cache->store(line, (uint32_t)(item.addr % 64), item.size, version);
        Action a;
        a.kind = Action::Kind::CHARGE;
        a.ns = cfg_.cpu.op_cost_ns;
        a.end_access = item.ends_access;
        a.access_serial = tc.open_serial;
        plan(a);
      } else {
        Action prep;
        prep.kind = Action::Kind::PREP_STORE_MISS;
        prep.addr = line;
        prep.offset = item.addr % 64;
        prep.size = item.size;
        prep.version = version;
        prep.end_access = item.ends_access;
        prep.access_serial = tc.open_serial;
        plan(prep);
      }
      break;
    }
    case OpKind::NTSTORE: {
      open_access(tc, item, now);
      AccessRec& rec = tc.accesses.at(tc.open_serial);
      rec.has_nt = true;
      tc.payload_bytes += item.size;
      uint64_t version = ++version_;
      auto flushes = tc.wc.ntstore(item.addr, item.size, version);
      for (const WriteCombineSlot::Flush* f : {&flushes.switched, &flushes.filled}) {
        if (!f->valid) continue;
        tc.had_wc_since_fence = true;
        DimmLocation loc = loc_of(f->line_addr);
        if (remote_) {
          Action acq;
          acq.kind = Action::Kind::ACQUIRE_CREDITS;
          acq.credits = (uint8_t)cfg_.remote.write_credits;
          plan(acq);
        }
        Action emit;
        emit.kind = Action::Kind::EMIT_WRITE;
        emit.dimm = unit_of(loc);
        emit.offset = loc.offset;
        emit.addr = f->line_addr;
        emit.persist = true;
        emit.word_mask = f->word_mask;
        emit.words = f->words;
        plan(emit);
      }
      Action a;
      a.kind = Action::Kind::CHARGE;
      a.ns = cfg_.cpu.op_cost_ns;
      a.end_access = item.ends_access;
      a.access_serial = tc.open_serial;
      plan(a);
      break;
    }
    case OpKind::CLWB:
    case OpKind::CLFLUSH:
    case OpKind::CLFLUSHOPT: {
      if (tc.open_serial != 0) tc.accesses.at(tc.open_serial).has_clwb = true;
      uint64_t line = item.addr & kLine64Mask;
      if (item.kind == OpKind::CLFLUSH) {
        // Serializes with the thread's prior flushes before it can issue.
        Action wait;
        wait.kind = Action::Kind::FENCE;
        wait.ns = 0;
        plan(wait);
      }
      CacheModel::FlushResult fr = item.kind == OpKind::CLWB ? tc.cache->clwb(line)
                                   : item.kind == OpKind::CLFLUSH
                                       ? tc.cache->clflush(line)
                                       : tc.cache->clflushopt(line);
      if (fr.wrote) {
        DimmLocation loc = loc_of(line);
        if (remote_) {
          Action acq;
          acq.kind = Action::Kind::ACQUIRE_CREDITS;
          acq.credits = (uint8_t)cfg_.remote.write_credits;
          plan(acq);
        }
        Action emit;
        emit.kind = Action::Kind::EMIT_WRITE;
        emit.dimm = unit_of(loc);
        emit.offset = loc.offset;
        emit.addr = line;
        emit.persist = true;
        emit.word_mask = 0xff;
        emit.words = fr.words;
        plan(emit);
      }
      Action a;
      a.kind = Action::Kind::CHARGE;
      a.ns = cfg_.cpu.op_cost_ns;
      a.end_access = item.ends_access;
      a.access_serial = tc.open_serial;
      plan(a);
      break;
    }
    case OpKind::SFENCE: {
      WriteCombineSlot::Flush f = tc.wc.drain();
      if (f.valid) {
        tc.had_wc_since_fence = true;
        DimmLocation loc = loc_of(f.line_addr);
        if (remote_) {
          Action acq;
          acq.kind = Action::Kind::ACQUIRE_CREDITS;
          acq.credits = (uint8_t)cfg_.remote.write_credits;
          plan(acq);
        }
        Action emit;
        emit.kind = Action::Kind::EMIT_WRITE;
        emit.dimm = unit_of(loc);
        emit.offset = loc.offset;
        emit.addr = f.line_addr;
        emit.persist = true;
        emit.word_mask = f.word_mask;
        emit.words = f.words;
        plan(emit);
      }
      Action fence;
      fence.kind = Action::Kind::FENCE;
      fence.ns = cfg_.cpu.fence_ns +
                 (tc.had_wc_since_fence ? cfg_.cpu.ntstore_drain_ns : 0);
      fence.end_access = item.ends_access;
      fence.access_serial = tc.open_serial;
      plan(fence);
      tc.had_wc_since_fence = false;
      break;
    }
    case OpKind::DELAY: {
      Action a;
      a.kind = Action::Kind::DELAY;
      a.ns = item.arg;
      plan(a);
      break;
    }
    case OpKind::ROUND_MARKER: {
      Action a;
      a.kind = Action::Kind::MARKER;
      a.ns = item.arg;
      plan(a);
      break;
    }
  }
  if (item.ends_access && tc.open_serial != 0) {
    // Write-path accesses take a few ns of issue spread so identical threads
    // do not stay phase-locked forever.
    if (cfg_.cpu.jitter_ns > 0 && item.kind != OpKind::LOAD && !tc.plan.empty()) {
      Action& last = tc.plan.back();
      if (last.kind == Action::Kind::CHARGE || last.kind == Action::Kind::FENCE)
        last.ns += tc.jitter_rng.bounded(cfg_.cpu.jitter_ns + 1);
    }
    tc.open_serial = 0;
  }
}

bool Simulation::exec_action(ThreadCtx& tc, Action& act, uint64_t now) {
  switch (act.kind) {
    case Action::Kind::CHARGE: {
      uint64_t end = now + act.ns;
      if (act.end_access) finish_access_issue(tc, act.access_serial, end);
      tc.plan.pop_front();
      schedule_step(tc, end);
      return false;
    }
    case Action::Kind::DELAY: {
      uint64_t end = now + act.ns;
      tc.plan.pop_front();
      schedule_step(tc, end);
      return false;
    }
    case Action::Kind::MARKER: {
      snapshot_round(act.ns);
      tc.plan.pop_front();
      return true;
    }
    case Action::Kind::MLP_WAIT: {
      if (tc.outstanding_loads >= cfg_.cpu.mlp) {
        tc.parked = true;
        return false;
      }
      tc.plan.pop_front();
      return true;
    }
    case Action::Kind::ACQUIRE_CREDITS: {
      if (!remote_) {
        tc.plan.pop_front();
        return true;
      }
      if (link_.waiters.empty() && link_.available >= act.credits) {
        link_.available -= act.credits;
        tc.plan.pop_front();
        return true;
      }
      link_.waiters.push_back(tc.id);
      tc.parked = true;
      return false;
    }
    case Action::Kind::FENCE: {
      if (tc.unaccepted_persists > 0) {
        tc.parked = true;
        return false;
      }
      uint64_t end = now + act.ns;
      if (act.end_access) finish_access_issue(tc, act.access_serial, end);
      tc.plan.pop_front();
      schedule_step(tc, end);
      return false;
    }
    case Action::Kind::EMIT_WRITE: {
      WpqEntry entry;
      entry.thread = tc.id;
      entry.offset = act.offset;
      entry.enqueue_ns = now;
      entry.word_mask = act.word_mask;
      entry.words = act.words;
      if (remote_) {
        if (act.persist) tc.unaccepted_persists++;
        WpqWaiter w;
        w.remote = true;
        w.entry = entry;
        w.line_addr = act.addr;
        w.persist = act.persist;
        w.owner = tc.id;
        uint64_t slot;
        if (!wpq_arrival_free_.empty()) {
          slot = wpq_arrival_free_.back();
          wpq_arrival_free_.pop_back();
          wpq_arrivals_[slot] = std::move(w);
        } else {
          wpq_arrivals_.push_back(std::move(w));
          slot = wpq_arrivals_.size() - 1;
        }
        schedule(now + cfg_.remote.link_ns, EvKind::WPQ_ARRIVAL, act.dimm, slot);
        tc.plan.pop_front();
        return true;
      }
      DimmUnit& unit = dimms_[act.dimm];
      if (unit.wpq_waiters.empty() && unit.wpq.can_accept(tc.id)) {
        accept_write(entry, act.dimm, act.addr, act.persist, tc.id, now);
        tc.plan.pop_front();
        return true;
      }
      WpqWaiter w;
      w.remote = false;
      w.tid = tc.id;
      w.entry = entry;
      w.line_addr = act.addr;
      w.persist = act.persist;
      w.owner = tc.id;
      unit.wpq_waiters.push_back(std::move(w));
      tc.parked = true;
      return false;
    }
    case Action::Kind::ISSUE_READ: {
      RpqEntry entry;
      entry.thread = tc.id;
      entry.offset = act.offset;
      entry.enqueue_ns = now;
      ReadOp op;
      op.thread = tc.id;
      op.dimm = act.dimm;
      op.access_serial = act.access_serial;
      op.deliver = act.deliver;
      op.end_access = act.end_access;
      op.remote = remote_;
      if (act.deliver) {
        tc.outstanding_loads++;
        auto it = tc.accesses.find(act.access_serial);
        if (it != tc.accesses.end()) it->second.pending_loads++;
      }
      entry.token = make_read_token(op);
      if (remote_) {
        RpqWaiter w;
        w.remote = true;
        w.entry = entry;
        uint64_t slot;
        if (!rpq_arrival_free_.empty()) {
          slot = rpq_arrival_free_.back();
          rpq_arrival_free_.pop_back();
          rpq_arrivals_[slot] = std::move(w);
        } else {
          rpq_arrivals_.push_back(std::move(w));
          slot = rpq_arrivals_.size() - 1;
        }
        schedule(now + cfg_.remote.link_ns, EvKind::RPQ_ARRIVAL, act.dimm, slot);
        tc.plan.pop_front();
        return true;
      }
      DimmUnit& unit = dimms_[act.dimm];
      if (unit.rpq_waiters.empty() && unit.rpq.can_accept()) {
        issue_read_local(act.dimm, entry, now);
        tc.plan.pop_front();
        return true;
      }
      RpqWaiter w;
      w.remote = false;
      w.tid = tc.id;
      w.entry = entry;
      unit.rpq_waiters.push_back(std::move(w));
      tc.parked = true;
      return false;
    }
    case Action::Kind::PREP_LOAD_MISS: {
      Action prep = act;
      tc.plan.pop_front();
      CacheModel::AccessResult res = tc.cache->load(prep.addr);
      std::vector<Action> seq;
      if (res.evicted_dirty) {
        DimmLocation loc = topo_.decode_address(res.evict_addr);
        if (remote_) {
          Action acq;
          acq.kind = Action::Kind::ACQUIRE_CREDITS;
          acq.credits = (uint8_t)cfg_.remote.write_credits;
          seq.push_back(acq);
        }
        Action emit;
        emit.kind = Action::Kind::EMIT_WRITE;
        emit.dimm = topo_.interleaved() ? topo_.flat_index(loc) : 0;
        emit.offset = loc.offset;
        emit.addr = res.evict_addr;
        emit.persist = false;
        emit.word_mask = 0xff;
        emit.words = res.evict_words;
        seq.push_back(emit);
      }
      if (remote_) {
        Action acq;
        acq.kind = Action::Kind::ACQUIRE_CREDITS;
        acq.credits = 1;
        seq.push_back(acq);
      }
      DimmLocation loc = topo_.decode_address(prep.addr);
      Action read;
      read.kind = Action::Kind::ISSUE_READ;
      read.dimm = topo_.interleaved() ? topo_.flat_index(loc) : 0;
      read.offset = loc.offset;
      read.deliver = true;
      read.end_access = prep.end_access;
      read.access_serial = prep.access_serial;
      seq.push_back(read);
      Action charge;
      charge.kind = Action::Kind::CHARGE;
      charge.ns = cfg_.cpu.op_cost_ns;
      seq.push_back(charge);
      for (auto it = seq.rbegin(); it != seq.rend(); ++it) tc.plan.push_front(*it);
      return true;
    }
    case Action::Kind::PREP_STORE_MISS: {
      Action prep = act;
      tc.plan.pop_front();
      CacheModel::AccessResult res =
          tc.cache->store(prep.addr, (uint32_t)prep.offset, prep.size, prep.version);
      std::vector<Action> seq;
      if (res.evicted_dirty) {
        DimmLocation loc = topo_.decode_address(res.evict_addr);
        if (remote_) {
          Action acq;
          acq.kind = Action::Kind::ACQUIRE_CREDITS;
          acq.credits = (uint8_t)cfg_.remote.write_credits;
          seq.push_back(acq);
        }
        Action emit;
        emit.kind = Action::Kind::EMIT_WRITE;
        emit.dimm = topo_.interleaved() ? topo_.flat_index(loc) : 0;
        emit.offset = loc.offset;
        emit.addr = res.evict_addr;
        emit.persist = false;
        emit.word_mask = 0xff;
        emit.words = res.evict_words;
        seq.push_back(emit);
      }
      DimmLocation loc = topo_.decode_address(prep.addr);
      if (cfg_.run.track_data) {
        uint32_t dimm = topo_.interleaved() ? topo_.flat_index(loc) : 0;
        tc.cache->fill_words(prep.addr, line_image(dimm, loc.offset));
      }
      if (remote_) {
        Action acq;
        acq.kind = Action::Kind::ACQUIRE_CREDITS;
        acq.credits = 1;
        seq.push_back(acq);
      }
      Action read;
      read.kind = Action::Kind::ISSUE_READ;
      read.dimm = topo_.interleaved() ? topo_.flat_index(loc) : 0;
      read.offset = loc.offset;
      read.deliver = false;
      seq.push_back(read);
      Action charge;
      charge.kind = Action::Kind::CHARGE;
      charge.ns = cfg_.cpu.op_cost_ns;
      charge.end_access = prep.end_access;
      charge.access_serial = prep.access_serial;
      seq.push_back(charge);
      for (auto it = seq.rbegin(); it != seq.rend(); ++it) tc.plan.push_front(*it);
      return true;
    }
  }
  return true;
}

void Simulation::finish_access_issue(ThreadCtx& tc, uint64_t serial, uint64_t end_ns) {
  auto it = tc.accesses.find(serial);
  if (it == tc.accesses.end()) return;
  it->second.issue_done = true;
  if (it->second.pending_loads == 0) complete_access(tc, serial, end_ns);
}

void Simulation::complete_access(ThreadCtx& tc, uint64_t serial, uint64_t end_ns) {
  auto it = tc.accesses.find(serial);
  if (it == tc.accesses.end()) return;
  const AccessRec& rec = it->second;
  InstrClass cls = InstrClass::LOAD;
  if (rec.has_nt) cls = InstrClass::NTSTORE;
  else if (rec.has_store && rec.has_clwb) cls = InstrClass::STORE_CLWB;
  else if (rec.has_store) cls = InstrClass::STORE;
  uint64_t latency = end_ns - rec.start_ns;
  report_.latency[(size_t)cls].record(latency, rec.sampled);
  tc.accesses.erase(it);
}

void Simulation::accept_write(const WpqEntry& entry, uint32_t dimm, uint64_t line_addr,
                              bool persist, uint32_t owner, uint64_t now) {
  (void)persist;
  dimms_[dimm].wpq.accept(entry);
  if (cfg_.run.track_data) {
    AcceptanceRecord rec;
    rec.time_ns = now;
    rec.thread = owner;
    rec.line_addr = line_addr;
    rec.word_mask = entry.word_mask;
    rec.words = entry.words;
    acceptance_log_.push_back(rec);
  }
  kick(dimm, now);
}

void Simulation::issue_read_local(uint32_t dimm, RpqEntry entry, uint64_t now) {
  entry.enqueue_ns = now;
  dimms_[dimm].rpq.accept(entry);
  kick(dimm, now);
}

void Simulation::process_wpq_waiters(uint32_t dimm, uint64_t now) {
  DimmUnit& unit = dimms_[dimm];
  while (!unit.wpq_waiters.empty()) {
    WpqWaiter& w = unit.wpq_waiters.front();
    if (!unit.wpq.can_accept(w.entry.thread)) break;
    WpqWaiter waiter = std::move(w);
    unit.wpq_waiters.pop_front();
    waiter.entry.enqueue_ns = now;
    accept_write(waiter.entry, dimm, waiter.line_addr, waiter.persist, waiter.owner, now);
    if (waiter.remote) {
      schedule(now + cfg_.remote.link_ns, EvKind::CREDIT_RELEASE, cfg_.remote.write_credits, 0);
      if (waiter.persist) on_persist_accepted(waiter.owner, now);
    } else {
      ThreadCtx& tc = threads_[waiter.tid];
      if (tc.plan.empty() || tc.plan.front().kind != Action::Kind::EMIT_WRITE)
        throw SimError("woken thread is not parked on a write emission");
      tc.plan.pop_front();
      schedule_step(tc, now);
    }
  }
}

void Simulation::process_rpq_waiters(uint32_t dimm, uint64_t now) {
  DimmUnit& unit = dimms_[dimm];
  while (!unit.rpq_waiters.empty() && unit.rpq.can_accept()) {
    RpqWaiter waiter = std::move(unit.rpq_waiters.front());
    unit.rpq_waiters.pop_front();
    waiter.entry.enqueue_ns = now;
    unit.rpq.accept(waiter.entry);
    kick(dimm, now);
    if (!waiter.remote) {
      ThreadCtx& tc = threads_[waiter.tid];
      if (tc.plan.empty() || tc.plan.front().kind != Action::Kind::ISSUE_READ)
        throw SimError("woken thread is not parked on a read issue");
      tc.plan.pop_front();
      schedule_step(tc, now);
    }
  }
}

void Simulation::kick(uint32_t dimm, uint64_t now) {
  DimmUnit& unit = dimms_[dimm];
  if (unit.busy) return;
  bool do_write;
  if (unit.wpq.above_watermark() && unit.wpq.has_pending()) do_write = true;
  else if (unit.rpq.has_pending()) do_write = false;
  else if (unit.wpq.has_pending()) do_write = true;
  else return;

  if (do_write) {
    const WpqEntry& entry = unit.wpq.begin_drain();
    if (trace_) trace_->on_request(dimm, entry.thread, true, entry.offset);
    XpAccessOutcome outcome = unit.dev_write(entry.offset, entry.thread, now,
                                             entry.words.data(), entry.word_mask);
    unit.busy = true;
    unit.serving_write = true;
    schedule(now + outcome.occupancy_ns, EvKind::SERVICE_DONE, dimm, 0);
  } else {
    RpqEntry entry = unit.rpq.begin_service();
    if (trace_) trace_->on_request(dimm, entry.thread, false, entry.offset);
    XpAccessOutcome outcome = unit.dev_read(entry.offset, entry.thread, now);
    unit.busy = true;
    unit.serving_write = false;
    schedule(now + outcome.occupancy_ns, EvKind::SERVICE_DONE, dimm, 0);
    schedule(outcome.data_ready_at, EvKind::READ_DEVICE_DONE, dimm, entry.token);
  }
}

void Simulation::release_credits(uint32_t n, uint64_t now) {
  link_.available += n;
  if (link_.available > cfg_.remote.credits) throw SimError("credit pool overflow");
  while (!link_.waiters.empty()) {
    uint32_t tid = link_.waiters.front();
    ThreadCtx& tc = threads_[tid];
    if (tc.plan.empty() || tc.plan.front().kind != Action::Kind::ACQUIRE_CREDITS)
      throw SimError("credit waiter is not parked on an acquire");
    if (link_.available < tc.plan.front().credits) break;
    link_.available -= tc.plan.front().credits;
    tc.plan.pop_front();
    link_.waiters.pop_front();
    schedule_step(tc, now);
  }
}

void Simulation::on_persist_accepted(uint32_t owner, uint64_t now) {
  ThreadCtx& tc = threads_[owner];
  if (tc.unaccepted_persists == 0) throw SimError("persist acceptance underflow");
  tc.unaccepted_persists--;
  if (tc.unaccepted_persists == 0 && tc.parked && !tc.plan.empty() &&
      tc.plan.front().kind == Action::Kind::FENCE)
    schedule_step(tc, now);
}

std::array<uint64_t, 8> Simulation::line_image(uint32_t dimm, uint64_t offset) const {
  std::array<uint64_t, 8> words = dimms_[dimm].dev_image64(offset);
  for (const WpqEntry& e : dimms_[dimm].wpq.snapshot()) {
    if ((e.offset & kLine64Mask) != (offset & kLine64Mask)) continue;
    for (uint32_t w = 0; w < 8; w++)
      if (e.word_mask & (1u << w)) words[w] = e.words[w];
  }
  return words;
}

void Simulation::snapshot_round(uint64_t round) {
  DeviceCounters total;
  for (DimmUnit& unit : dimms_) {
    const DeviceCounters& c = unit.dev_counters();
    total.imc_read_bytes += c.imc_read_bytes;
    total.imc_write_bytes += c.imc_write_bytes;
    total.media_read_bytes += c.media_read_bytes;
    total.media_write_bytes += c.media_write_bytes;
    total.outlier_events += c.outlier_events;
  }
  RoundSample sample;
  sample.round = round;
  sample.delta.imc_read_bytes = total.imc_read_bytes - last_round_counters_.imc_read_bytes;
  sample.delta.imc_write_bytes = total.imc_write_bytes - last_round_counters_.imc_write_bytes;
  sample.delta.media_read_bytes =
      total.media_read_bytes - last_round_counters_.media_read_bytes;
  sample.delta.media_write_bytes =
      total.media_write_bytes - last_round_counters_.media_write_bytes;
  sample.delta.outlier_events = total.outlier_events - last_round_counters_.outlier_events;
  last_round_counters_ = total;
  report_.rounds.push_back(sample);
}

CrashImage Simulation::build_crash_image() const {
  CrashImage image;
  for (uint32_t d = 0; d < dimms_.size(); d++) {
    uint32_t flat = topo_.interleaved() ? d : *topo_.ns_dimm;
    const DimmUnit& unit = dimms_[d];
    auto words = unit.xp ? unit.xp->persistent_words() : unit.dram->persistent_words();
    for (auto& [offset, value] : words)
      image[topo_.encode_address(topo_.location_of_flat(flat, offset))] = value;
    for (const WpqEntry& e : unit.wpq.snapshot()) {
      uint64_t base = topo_.encode_address(topo_.location_of_flat(flat, e.offset));
      for (uint32_t w = 0; w < 8; w++)
        if ((e.word_mask & (1u << w)) && e.words[w] != 0) image[base + w * 8] = e.words[w];
    }
  }
  return image;
}

}  // namespace xpsim
