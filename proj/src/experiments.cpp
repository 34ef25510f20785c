#include "xpsim/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <sstream>
#include <thread>

#include "xpsim/rng.hpp"

namespace xpsim {

namespace {

struct GridPoint {
  RunConfig cfg;
  uint32_t probe_lines = 0;
  uint32_t probe_rounds = 4;
};

uint64_t point_ops(uint64_t base_ops, uint64_t access, uint64_t cap) {
  uint64_t by_bytes = std::max<uint64_t>(1000, 64 * kMiB / access);
  uint64_t ops = std::min(base_ops, by_bytes);
  if (cap > 0) ops = std::min(ops, cap);
  return ops;
}

void fit_region(RunConfig& p, uint64_t region_target) {
  uint64_t access = p.workload.access_bytes;
  uint64_t cap = p.topology.total_capacity();
  uint64_t len = std::min(region_target, cap);
  len = len / access * access;
  if (len == 0) len = access;
  p.workload.region_base = 0;
  p.workload.region_len = len;
}

void use_xp_interleaved(RunConfig& p) {
  p.topology.device_kind = DeviceKind::XPDIMM;
  p.topology.ns_dimm.reset();
}
void use_xp_single(RunConfig& p) {
  p.topology.device_kind = DeviceKind::XPDIMM;
  p.topology.ns_dimm = 0;
}
void use_dram_interleaved(RunConfig& p) {
  p.topology.device_kind = DeviceKind::DRAM;
  p.topology.ns_dimm.reset();
}

}  // namespace

const char* to_string(ExperimentId id) {
  switch (id) {
    case ExperimentId::E1_LATENCY: return "E1_LATENCY";
    case ExperimentId::E2_TAIL: return "E2_TAIL";
    case ExperimentId::E3_BW_THREADS: return "E3_BW_THREADS";
    case ExperimentId::E4_BW_SIZE: return "E4_BW_SIZE";
    case ExperimentId::E5_LOADED_LATENCY: return "E5_LOADED_LATENCY";
    case ExperimentId::E6_XPBUFFER_INFER: return "E6_XPBUFFER_INFER";
    case ExperimentId::E7_INSTR_AND_FENCE: return "E7_INSTR_AND_FENCE";
    case ExperimentId::E8_IMC_CONTENTION: return "E8_IMC_CONTENTION";
    case ExperimentId::E9_NUMA_MIX: return "E9_NUMA_MIX";
  }
  return "?";
}

const char* experiment_description(ExperimentId id) {
  switch (id) {
    case ExperimentId::E1_LATENCY:
      return "idle read/write latency, sequential vs random, per instruction";
    case ExperimentId::E2_TAIL: return "tail latency vs hotspot size";
    case ExperimentId::E3_BW_THREADS: return "bandwidth vs thread count";
    case ExperimentId::E4_BW_SIZE: return "bandwidth vs access size (random)";
    case ExperimentId::E5_LOADED_LATENCY: return "latency and bandwidth under varying load";
    case ExperimentId::E6_XPBUFFER_INFER: return "write-combining buffer capacity inference";
    case ExperimentId::E7_INSTR_AND_FENCE:
      return "persistence instruction comparison and fence intervals";
    case ExperimentId::E8_IMC_CONTENTION: return "per-thread DIMM fanout contention";
    case ExperimentId::E9_NUMA_MIX: return "local vs remote bandwidth over read/write mix";
  }
  return "?";
}

std::optional<ExperimentId> experiment_from_string(const std::string& s) {
  for (ExperimentId id : all_experiments()) {
    std::string name = to_string(id);
    if (s == name) return id;
    if (s.size() == 2 && name.rfind(s, 0) == 0) return id;  // short form E1..E9
  }
  return std::nullopt;
}

std::vector<ExperimentId> all_experiments() {
  return {ExperimentId::E1_LATENCY,      ExperimentId::E2_TAIL,
          ExperimentId::E3_BW_THREADS,   ExperimentId::E4_BW_SIZE,
          ExperimentId::E5_LOADED_LATENCY, ExperimentId::E6_XPBUFFER_INFER,
          ExperimentId::E7_INSTR_AND_FENCE, ExperimentId::E8_IMC_CONTENTION,
          ExperimentId::E9_NUMA_MIX};
}

namespace {

std::vector<GridPoint> build_grid(ExperimentId id, const RunConfig& base) {
  std::vector<GridPoint> points;
  auto push = [&points](RunConfig cfg, uint32_t probe_lines = 0) {
    GridPoint pt;
    pt.cfg = std::move(cfg);
    pt.probe_lines = probe_lines;
    points.push_back(std::move(pt));
  };

  switch (id) {
    case ExperimentId::E1_LATENCY: {
      for (bool dram : {false, true}) {
        for (Pattern pattern : {Pattern::SEQUENTIAL, Pattern::RANDOM_UNIFORM}) {
          for (InstrSeq instr :
               {InstrSeq::LOAD, InstrSeq::NTSTORE_SFENCE, InstrSeq::STORE_CLWB_SFENCE}) {
            RunConfig p = base;
            dram ? use_dram_interleaved(p) : use_xp_interleaved(p);
            p.workload.pattern = pattern;
            p.workload.instr = instr;
            p.workload.access_bytes = 64;
            p.workload.threads = 1;
            p.workload.delay_ns = 1000;
            p.workload.ops_per_thread = point_ops(base.workload.ops_per_thread, 64, 100000);
            fit_region(p, 256 * kMiB);
            push(std::move(p));
          }
        }
      }
      break;
    }
    case ExperimentId::E2_TAIL: {
      for (uint64_t hotspot : std::initializer_list<uint64_t>{256, 1 * kKiB, 4 * kKiB,
             16 * kKiB, 64 * kKiB, 256 * kKiB, 1 * kMiB, 4 * kMiB, 16 * kMiB}) {
        RunConfig p = base;
        use_xp_interleaved(p);
        p.workload.pattern = Pattern::HOTSPOT;
        p.workload.hotspot_bytes = hotspot;
        p.workload.instr = InstrSeq::STORE_CLWB_SFENCE;
        p.workload.access_bytes = 64;
        p.workload.threads = 1;
        p.workload.ops_per_thread = point_ops(base.workload.ops_per_thread, 64, 0);
        fit_region(p, 32 * kMiB);
        push(std::move(p));
      }
      break;
    }
    case ExperimentId::E3_BW_THREADS: {
      for (int topo : {0, 1, 2}) {  // dram interleaved, xp single-DIMM, xp interleaved
        for (InstrSeq instr :
             {InstrSeq::LOAD, InstrSeq::NTSTORE_SFENCE, InstrSeq::STORE_CLWB_SFENCE}) {
          for (uint32_t threads = 1; threads <= 24; threads++) {
            RunConfig p = base;
            if (topo == 0) use_dram_interleaved(p);
            else if (topo == 1) use_xp_single(p);
            else use_xp_interleaved(p);
            p.workload.pattern = Pattern::SEQUENTIAL;
            p.workload.instr = instr;
            p.workload.access_bytes = 256;
            p.workload.threads = threads;
            p.workload.region_policy = RegionPolicy::PRIVATE;
            p.workload.ops_per_thread = point_ops(base.workload.ops_per_thread, 256, 0);
            fit_region(p, 256 * kMiB);
            push(std::move(p));
          }
        }
      }
      break;
    }
    case ExperimentId::E4_BW_SIZE: {
      for (int topo : {0, 1, 2}) {
        for (InstrSeq instr :
             {InstrSeq::LOAD, InstrSeq::NTSTORE_SFENCE, InstrSeq::STORE_CLWB_SFENCE}) {
          for (uint64_t access : std::initializer_list<uint64_t>{
                   64, 128, 256, 512, 1 * kKiB, 2 * kKiB, 4 * kKiB, 8 * kKiB, 16 * kKiB,
                   24 * kKiB, 32 * kKiB, 48 * kKiB, 64 * kKiB, 256 * kKiB, 1 * kMiB}) {
            RunConfig p = base;
            if (topo == 0) use_dram_interleaved(p);
            else if (topo == 1) use_xp_single(p);
            else use_xp_interleaved(p);
            p.workload.pattern = Pattern::RANDOM_UNIFORM;
            p.workload.instr = instr;
            p.workload.access_bytes = access;
            p.workload.threads = instr == InstrSeq::LOAD ? 16 : 6;
            p.workload.region_policy = RegionPolicy::SHARED;
            p.workload.ops_per_thread =
                point_ops(base.workload.ops_per_thread, access, 0);
            fit_region(p, 256 * kMiB);
            push(std::move(p));
          }
        }
      }
      break;
    }
    case ExperimentId::E5_LOADED_LATENCY: {
      for (bool dram : {false, true}) {
        for (Pattern pattern : {Pattern::SEQUENTIAL, Pattern::RANDOM_UNIFORM}) {
          for (InstrSeq instr : {InstrSeq::LOAD, InstrSeq::NTSTORE_SFENCE}) {
            for (uint64_t delay : {0ull, 100ull, 200ull, 400ull, 800ull, 1600ull, 3200ull,
                                   6400ull, 12800ull, 25600ull, 51200ull, 80000ull}) {
              RunConfig p = base;
              dram ? use_dram_interleaved(p) : use_xp_interleaved(p);
              p.workload.pattern = pattern;
              p.workload.instr = instr;
              p.workload.access_bytes = 64;
              p.workload.threads = instr == InstrSeq::LOAD ? 16 : 4;
              p.workload.delay_ns = delay;
              p.workload.region_policy = RegionPolicy::PRIVATE;
              p.workload.ops_per_thread = point_ops(base.workload.ops_per_thread, 64, 30000);
              fit_region(p, 256 * kMiB);
              push(std::move(p));
            }
          }
        }
      }
      break;
    }
    case ExperimentId::E6_XPBUFFER_INFER: {
      for (uint32_t n : {1u, 2u, 4u, 8u, 16u, 32u, 48u, 56u, 62u, 64u, 66u, 72u, 96u, 128u,
                         192u, 256u}) {
        RunConfig p = base;
        use_xp_single(p);
        p.workload.pattern = Pattern::SEQUENTIAL;
        p.workload.instr = InstrSeq::NTSTORE_SFENCE;
        p.workload.access_bytes = 64;
        p.workload.threads = 1;
        p.workload.ops_per_thread = 1;
        fit_region(p, 256 * kMiB);
        push(std::move(p), n);
      }
      break;
    }
    case ExperimentId::E7_INSTR_AND_FENCE: {
      // Instruction comparison: single-thread latency and six-thread
      // bandwidth over sequential access sizes.
      for (bool bw_mode : {false, true}) {
        for (InstrSeq instr :
             {InstrSeq::NTSTORE_SFENCE, InstrSeq::STORE_CLWB_SFENCE, InstrSeq::STORE_SFENCE}) {
          for (uint64_t access : std::initializer_list<uint64_t>{
                   64, 128, 256, 512, 768, 1 * kKiB, 1536, 2 * kKiB, 4 * kKiB, 8 * kKiB}) {
            RunConfig p = base;
            bw_mode ? use_xp_interleaved(p) : use_xp_single(p);
            p.workload.pattern = Pattern::SEQUENTIAL;
            p.workload.instr = instr;
            p.workload.access_bytes = access;
            p.workload.threads = bw_mode ? 6 : 1;
            p.workload.flush_placement = FlushPlacement::PER_LINE;
            p.workload.region_policy = RegionPolicy::PRIVATE;
            p.workload.ops_per_thread = point_ops(base.workload.ops_per_thread, access, 0);
            fit_region(p, 256 * kMiB);
            push(std::move(p));
          }
        }
      }
      // Fence-interval sweep: one fence per write of the given size, flushes
      // during or after the write.
      for (FlushPlacement fp : {FlushPlacement::PER_LINE, FlushPlacement::PER_ACCESS_END}) {
        for (uint64_t access : std::initializer_list<uint64_t>{
                 64, 128, 256, 512, 1 * kKiB, 2 * kKiB, 4 * kKiB, 8 * kKiB, 16 * kKiB,
                 32 * kKiB, 64 * kKiB, 128 * kKiB, 256 * kKiB}) {
          RunConfig p = base;
          use_xp_single(p);
          p.workload.pattern = Pattern::SEQUENTIAL;
          p.workload.instr = InstrSeq::STORE_CLWB_SFENCE;
          p.workload.flush_placement = fp;
          p.workload.access_bytes = access;
          p.workload.threads = 1;
          p.workload.ops_per_thread = point_ops(base.workload.ops_per_thread, access, 0);
          fit_region(p, 256 * kMiB);
          push(std::move(p));
        }
      }
      break;
    }
    case ExperimentId::E8_IMC_CONTENTION: {
      for (InstrSeq instr : {InstrSeq::NTSTORE_SFENCE, InstrSeq::LOAD}) {
        for (uint32_t fanout = 1; fanout <= 6; fanout++) {
          RunConfig p = base;
          use_xp_interleaved(p);
          p.workload.pattern = Pattern::RANDOM_UNIFORM;
          p.workload.instr = instr;
          p.workload.access_bytes = 4 * kKiB;
          p.workload.threads = instr == InstrSeq::LOAD ? 24 : 6;
          p.workload.dimm_fanout = fanout;
          p.workload.region_policy = RegionPolicy::SHARED;
          p.workload.ops_per_thread = point_ops(base.workload.ops_per_thread, 4 * kKiB, 0);
          // Fanout needs a stripe-aligned region.
          uint64_t stripe = p.topology.stripe_bytes();
          p.workload.region_base = 0;
          p.workload.region_len = 240 * kMiB / stripe * stripe;
          push(std::move(p));
        }
      }
      break;
    }
    case ExperimentId::E9_NUMA_MIX: {
      for (uint32_t socket : {0u, 1u}) {
        for (uint32_t threads : {1u, 4u}) {
          for (double fraction : {0.0, 0.25, 0.5, 0.75, 1.0}) {
            RunConfig p = base;
            use_xp_interleaved(p);
            p.topology.ns_socket = 0;
            p.thread_socket = socket;
            p.workload.pattern = Pattern::RANDOM_UNIFORM;
            p.workload.instr = InstrSeq::NTSTORE_SFENCE;
            p.workload.read_fraction = fraction;
            p.workload.access_bytes = 256;
            p.workload.threads = threads;
            p.workload.region_policy = RegionPolicy::PRIVATE;
            p.workload.ops_per_thread = point_ops(base.workload.ops_per_thread, 256, 200000);
            fit_region(p, 256 * kMiB);
            push(std::move(p));
          }
        }
      }
      break;
    }
  }
  return points;
}

struct PointOutcome {
  ReportRow row;
  std::vector<DeviceRow> devices;
  std::vector<RoundRow> rounds;
};

ReportRow make_row(const RunConfig& cfg, const ExperimentReport& rep, const std::string& name,
                   uint32_t index, uint32_t probe_lines) {
  ReportRow row;
  row.run_id = name + "-" + std::to_string(index);
  row.experiment = name;
  row.grid_index = index;
  row.device = to_string(cfg.topology.device_kind);
  row.location = cfg.thread_socket != cfg.topology.ns_socket ? "remote" : "local";
  row.ns = cfg.topology.ns_dimm ? "dimm" + std::to_string(*cfg.topology.ns_dimm)
                                : std::string("interleaved");
  row.pattern = to_string(cfg.workload.pattern);
  row.instr = to_string(cfg.workload.instr);
  row.flush_placement = to_string(cfg.workload.flush_placement);
  row.threads = cfg.workload.threads;
  row.access_bytes = cfg.workload.access_bytes;
  row.stride_bytes = cfg.workload.stride_bytes;
  row.hotspot_bytes = cfg.workload.hotspot_bytes;
  row.sfence_interval_bytes = cfg.workload.sfence_interval_bytes;
  row.read_fraction = cfg.workload.read_fraction;
  row.delay_ns = cfg.workload.delay_ns;
  row.dimm_fanout = cfg.workload.dimm_fanout;
  row.probe_lines = probe_lines;
  row.ops_per_thread = cfg.workload.ops_per_thread;
  row.seed = cfg.run.seed;
  row.duration_ns = rep.duration_ns;
  row.payload_bytes = rep.payload_bytes;
  row.bandwidth_mbps = rep.bandwidth_mbps_value();
  row.bandwidth_str = rep.bandwidth_mbps();

  LatencyHistogram merged;
  for (const LatencyHistogram& h : rep.latency) merged.merge(h);
  row.lat_mean_ns = merged.mean().value_or(0);
  row.p50_ns = merged.percentile(0.5).value_or(0);
  row.p99_ns = merged.percentile(0.99).value_or(0);
  row.p999_ns = merged.percentile(0.999).value_or(0);
  row.p9999_ns = merged.percentile(0.9999).value_or(0);
  row.max_ns = merged.max().value_or(0);
  row.samples = merged.sampled_count();

  DeviceCounters total = rep.total_counters();
  row.ewr = effective_write_ratio(total);
  row.imc_read_bytes = total.imc_read_bytes;
  row.imc_write_bytes = total.imc_write_bytes;
  row.media_read_bytes = total.media_read_bytes;
  row.media_write_bytes = total.media_write_bytes;
  row.outlier_events = total.outlier_events;
  return row;
}

PointOutcome exec_point(const GridPoint& pt, const std::string& name, uint32_t index) {
  RunConfig cfg = pt.cfg;
  Simulation sim(cfg);
  if (pt.probe_lines > 0) {
    std::vector<std::unique_ptr<StreamSource>> streams;
    streams.push_back(std::make_unique<ProbeStream>(pt.probe_lines, 0, pt.probe_rounds));
    sim.inject_streams(std::move(streams));
  } else {
    sim.set_planned_accesses((uint64_t)cfg.workload.threads * cfg.workload.ops_per_thread);
  }
  EngineResult result = sim.run();

  PointOutcome out;
  out.row = make_row(cfg, result.report, name, index, pt.probe_lines);
  if (pt.probe_lines > 0) {
    // Steady-state rounds only; the first round warms the buffer.
    double sum = 0;
    uint32_t n = 0;
    for (size_t r = 1; r < result.report.rounds.size(); r++) {
      auto e = effective_write_ratio(result.report.rounds[r].delta);
      if (e) {
        sum += *e;
        n++;
      }
    }
    if (n > 0) out.row.ewr = sum / n;
    for (const RoundSample& rs : result.report.rounds) {
      RoundRow rr;
      rr.run_id = out.row.run_id;
      rr.probe_lines = pt.probe_lines;
      rr.round = rs.round;
      rr.delta = rs.delta;
      out.rounds.push_back(rr);
    }
  }
  for (uint32_t d = 0; d < result.report.dimm_counters.size(); d++) {
    DeviceRow dr;
    dr.run_id = out.row.run_id;
    dr.dimm_id = d;
    dr.counters = result.report.dimm_counters[d];
    out.devices.push_back(dr);
  }
  return out;
}

}  // namespace

ExperimentOutput run_experiment(ExperimentId id, const RunConfig& base, uint64_t master_seed,
                                uint32_t jobs) {
  std::vector<GridPoint> points = build_grid(id, base);
  std::string name = to_string(id);
  uint64_t exp_salt = hash_str(name.c_str());
  for (uint32_t i = 0; i < points.size(); i++)
    points[i].cfg.run.seed = derive_seed(master_seed, exp_salt + i);

  std::vector<PointOutcome> outcomes(points.size());
  std::atomic<size_t> next{0};
  std::atomic<bool> failed{false};
  std::string error;
  std::mutex error_mu;
  auto worker = [&] {
    while (!failed.load()) {
      size_t i = next.fetch_add(1);
      if (i >= points.size()) break;
      try {
        outcomes[i] = exec_point(points[i], name, (uint32_t)i);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(error_mu);
        error = e.what();
        failed.store(true);
      }
    }
  };
  uint32_t n_workers = std::max<uint32_t>(1, jobs);
  n_workers = std::min<uint32_t>(n_workers, (uint32_t)points.size() ? (uint32_t)points.size() : 1);
  std::vector<std::thread> pool;
  for (uint32_t w = 1; w < n_workers; w++) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  if (failed.load()) throw std::runtime_error("experiment point failed: " + error);

  ExperimentOutput out;
  out.id = id;
  out.name = name;
  out.master_seed = master_seed;
  out.base_echo = base.echo();
  for (PointOutcome& po : outcomes) {
    out.rows.push_back(std::move(po.row));
    for (DeviceRow& dr : po.devices) out.device_rows.push_back(std::move(dr));
    for (RoundRow& rr : po.rounds) out.round_rows.push_back(std::move(rr));
  }
  if (id == ExperimentId::E6_XPBUFFER_INFER)
    out.xpbuffer_estimate_bytes = infer_xpbuffer_capacity(base, master_seed);
  return out;
}

std::string rows_csv_header() {
  return "run_id,experiment,grid_index,device,location,namespace,pattern,instr,"
         "flush_placement,threads,access_bytes,stride_bytes,hotspot_bytes,"
         "sfence_interval_bytes,read_fraction,delay_ns,dimm_fanout,probe_lines,"
         "ops_per_thread,seed,duration_ns,payload_bytes,bandwidth_MBps,lat_mean_ns,"
         "p50_ns,p99_ns,p999_ns,p9999_ns,max_ns,samples,ewr,imc_read_bytes,"
         "imc_write_bytes,media_read_bytes,media_write_bytes,outlier_events";
}

std::string row_to_csv(const ReportRow& r) {
  std::ostringstream s;
  s << r.run_id << "," << r.experiment << "," << r.grid_index << "," << r.device << ","
    << r.location << "," << r.ns << "," << r.pattern << "," << r.instr << ","
    << r.flush_placement << "," << r.threads << "," << r.access_bytes << "," << r.stride_bytes
    << "," << r.hotspot_bytes << "," << r.sfence_interval_bytes << ","
    << (r.read_fraction < 0 ? std::string("none") : format_double(r.read_fraction)) << ","
    << r.delay_ns << "," << r.dimm_fanout << "," << r.probe_lines << "," << r.ops_per_thread
    << "," << r.seed << "," << r.duration_ns << "," << r.payload_bytes << ","
    << r.bandwidth_str << "," << r.lat_mean_ns << "," << r.p50_ns << "," << r.p99_ns << ","
    << r.p999_ns << "," << r.p9999_ns << "," << r.max_ns << "," << r.samples << ","
    << (r.ewr ? format_fixed(*r.ewr, 6) : std::string("")) << "," << r.imc_read_bytes << ","
    << r.imc_write_bytes << "," << r.media_read_bytes << "," << r.media_write_bytes << ","
    << r.outlier_events;
  return s.str();
}

std::string devices_csv_header() {
  return "run_id,dimm_id,imc_read_bytes,imc_write_bytes,media_read_bytes,media_write_bytes,ewr";
}

std::string device_row_to_csv(const DeviceRow& r) {
  std::ostringstream s;
  auto e = effective_write_ratio(r.counters);
  s << r.run_id << "," << r.dimm_id << "," << r.counters.imc_read_bytes << ","
    << r.counters.imc_write_bytes << "," << r.counters.media_read_bytes << ","
    << r.counters.media_write_bytes << ","
    << (e ? format_ratio(r.counters.imc_write_bytes, r.counters.media_write_bytes, 6)
          : std::string(""));
  return s.str();
}

std::string rounds_csv_header() {
  return "run_id,probe_lines,round,imc_write_bytes,media_write_bytes,ewr";
}

std::string round_row_to_csv(const RoundRow& r) {
  std::ostringstream s;
  auto e = effective_write_ratio(r.delta);
  s << r.run_id << "," << r.probe_lines << "," << r.round << "," << r.delta.imc_write_bytes
    << "," << r.delta.media_write_bytes << ","
    << (e ? format_ratio(r.delta.imc_write_bytes, r.delta.media_write_bytes, 6)
          : std::string(""));
  return s.str();
}

std::optional<double> probe_round_ewr(const RunConfig& base, uint32_t n_lines, uint32_t rounds,
                                      uint64_t seed) {
  RunConfig cfg = base;
  use_xp_single(cfg);
  cfg.workload.threads = 1;
  cfg.workload.ops_per_thread = 1;
  cfg.workload.pattern = Pattern::SEQUENTIAL;
  cfg.workload.access_bytes = 64;
  fit_region(cfg, 256 * kMiB);
  cfg.run.seed = seed;
  if ((uint64_t)n_lines * kXpLineBytes > cfg.topology.total_capacity()) return std::nullopt;
  Simulation sim(cfg);
  std::vector<std::unique_ptr<StreamSource>> streams;
  streams.push_back(std::make_unique<ProbeStream>(n_lines, 0, rounds));
  sim.inject_streams(std::move(streams));
  EngineResult result = sim.run();
  double sum = 0;
  uint32_t n = 0;
  for (size_t r = 1; r < result.report.rounds.size(); r++) {
    auto e = effective_write_ratio(result.report.rounds[r].delta);
    if (e) {
      sum += *e;
      n++;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

uint64_t infer_xpbuffer_capacity(const RunConfig& base, uint64_t seed) {
  auto good = [&](uint32_t n) {
    auto e = probe_round_ewr(base, n, 4, derive_seed(seed, 0xe6000 + n));
    return e && *e >= 0.9;
  };
  if (!good(1)) return 0;
  uint32_t limit = (uint32_t)std::min<uint64_t>(
      1u << 20, base.topology.device_capacity / kXpLineBytes / 2);
  uint32_t lo = 1;
  uint32_t hi = 0;
  for (uint32_t n = 2; n <= limit; n *= 2) {
    if (good(n)) {
      lo = n;
    } else {
      hi = n;
      break;
    }
  }
  if (hi == 0) return (uint64_t)lo * kXpLineBytes;
  while (hi - lo > 1) {
    uint32_t mid = lo + (hi - lo) / 2;
    if (good(mid)) lo = mid;
    else hi = mid;
  }
  return (uint64_t)lo * kXpLineBytes;
}

std::vector<Finding> guideline_check(const std::vector<ReportRow>& rows) {
  std::vector<Finding> findings;
  auto is_write_row = [](const ReportRow& r) {
    return r.instr != "load" || (r.read_fraction >= 0 && r.read_fraction < 1.0);
  };

  // Guideline 1: random stores below the 256 B internal granularity run at
  // low EWR.
  for (const ReportRow& r : rows) {
    if (r.access_bytes < 256 && r.pattern == "random" && is_write_row(r) && r.ewr &&
        *r.ewr < 0.9) {
      findings.push_back(Finding{1, "flagged", r.run_id,
                                 "random " + std::to_string(r.access_bytes) +
                                     "B writes at EWR " + format_fixed(*r.ewr, 3)});
    }
  }

  // Guideline 2: cached writes with flushes where the non-temporal twin at
  // the same shape is faster, for accesses of 512 B and up.
  for (const ReportRow& r : rows) {
    if (r.instr != "store_clwb" || r.access_bytes < 512) continue;
    const ReportRow* twin = nullptr;
    for (const ReportRow& t : rows) {
      if (t.instr == "ntstore" && t.experiment == r.experiment && t.device == r.device &&
          t.ns == r.ns && t.location == r.location && t.pattern == r.pattern &&
          t.access_bytes == r.access_bytes && t.dimm_fanout == r.dimm_fanout) {
        twin = &t;
        break;
      }
    }
    if (!twin) {
      findings.push_back(
          Finding{2, "indeterminate", r.run_id, "no ntstore twin run for comparison"});
    } else if (twin->bandwidth_mbps > r.bandwidth_mbps) {
      findings.push_back(Finding{2, "flagged", r.run_id,
                                 "ntstore twin reaches " + twin->bandwidth_str +
                                     " MB/s vs " + r.bandwidth_str});
    }
  }

  // Guideline 3: more writers per DIMM than the bandwidth-peak thread count.
  {
    std::vector<const ReportRow*> sweep;
    for (const ReportRow& r : rows)
      if (r.instr == "ntstore" && r.device == "xpdimm" && r.ns != "interleaved" &&
          r.pattern == "sequential")
        sweep.push_back(&r);
    if (!sweep.empty()) {
      uint32_t peak_threads = 0;
      double peak_bw = -1;
      for (const ReportRow* r : sweep) {
        if (r->bandwidth_mbps > peak_bw) {
          peak_bw = r->bandwidth_mbps;
          peak_threads = r->threads;
        }
      }
      for (const ReportRow* r : sweep) {
        if (r->threads > peak_threads && r->bandwidth_mbps < peak_bw) {
          findings.push_back(Finding{3, "flagged", r->run_id,
                                     std::to_string(r->threads) +
                                         " writers on one DIMM; bandwidth peaks at " +
                                         std::to_string(peak_threads)});
        }
      }
    }
  }

  // Guideline 4: multi-threaded mixed traffic to the remote socket at under
  // half the local twin's bandwidth.
  for (const ReportRow& r : rows) {
    if (r.location != "remote" || r.threads < 2) continue;
    if (!(r.read_fraction > 0.0 && r.read_fraction < 1.0)) continue;
    const ReportRow* twin = nullptr;
    for (const ReportRow& t : rows) {
      if (t.location == "local" && t.experiment == r.experiment && t.device == r.device &&
          t.ns == r.ns && t.pattern == r.pattern && t.instr == r.instr &&
          t.threads == r.threads && t.access_bytes == r.access_bytes &&
          t.read_fraction == r.read_fraction) {
        twin = &t;
        break;
      }
    }
    if (!twin) {
      findings.push_back(
          Finding{4, "indeterminate", r.run_id, "no local twin run for comparison"});
    } else if (r.bandwidth_mbps < 0.5 * twin->bandwidth_mbps) {
      findings.push_back(Finding{4, "flagged", r.run_id,
                                 "remote mixed bandwidth " + r.bandwidth_str +
                                     " MB/s vs local " + twin->bandwidth_str});
    }
  }
  return findings;
}

std::string findings_csv_header() { return "guideline,status,run_id,detail"; }

std::string finding_to_csv(const Finding& f) {
  std::ostringstream s;
  s << f.guideline << "," << f.status << "," << f.run_id << ",\"" << f.detail << "\"";
  return s.str();
}

ReportRow run_single(const RunConfig& cfg, const std::string& run_id, uint32_t grid_index,
                     ExperimentReport* report_out) {
  Simulation sim(cfg);
  sim.set_planned_accesses((uint64_t)cfg.workload.threads * cfg.workload.ops_per_thread);
  EngineResult result = sim.run();
  ReportRow row = make_row(cfg, result.report, "adhoc", grid_index, 0);
  row.run_id = run_id;
  if (report_out) *report_out = std::move(result.report);
  return row;
}

ReportRow row_from_report(const RunConfig& cfg, const ExperimentReport& report,
                          const std::string& run_id, uint32_t grid_index) {
  ReportRow row = make_row(cfg, report, "adhoc", grid_index, 0);
  row.run_id = run_id;
  return row;
}

}  // namespace xpsim
