#pragma once

#include <cstdint>
#include <string>

#include "xpsim/cache.hpp"
#include "xpsim/devices.hpp"
#include "xpsim/imc.hpp"
#include "xpsim/topology.hpp"
#include "xpsim/workload.hpp"

namespace xpsim {

struct CpuParams {
  uint64_t op_cost_ns = 2;        // per retired micro-op
  uint64_t fence_ns = 30;         // sfence base cost
  uint64_t ntstore_drain_ns = 80;  // extra fence-visible cost of WC drains
  uint32_t mlp = 10;              // outstanding load misses per thread
  // Small deterministic spread added to write-access completion costs;
  // breaks the artificial lockstep that identical simulated threads
  // otherwise fall into.
  uint64_t jitter_ns = 4;
};

struct RemoteParams {
  uint64_t link_ns = 60;      // added latency per direction
  uint32_t credits = 8;       // shared in-flight pool per socket pair
  uint32_t write_credits = 3;  // writes hold this many until acceptance
};

struct RunParams {
  uint64_t seed = 42;
  uint64_t sample_cap = 10000000;  // above this, latency samples are 1-in-k
  bool track_data = false;
  bool flush_devices_at_end = false;
  bool dump_queue_depth = false;
  uint64_t queue_sample_interval_ns = 1000;
};

struct RunConfig {
  PlatformTopology topology;
  XpParams xp;
  DramParams dram;
  ImcParams imc;
  CacheParams cache;
  CpuParams cpu;
  RemoteParams remote;
  RunParams run;
  WorkloadSpec workload;
  uint32_t thread_socket = 0;

  // Empty when valid, else a message naming the offending key.
  std::string validate() const;
  // Canonical text form with every key materialized; parsing it back yields
  // an identical config.
  std::string echo() const;
};

// All return an empty string on success, or an error naming the bad
// key/line. Unknown keys are rejected.
std::string parse_config_text(const std::string& text, RunConfig* out);
std::string parse_config_file(const std::string& path, RunConfig* out);
std::string apply_override(const std::string& dotted_key, const std::string& value,
                           RunConfig* out);

}  // namespace xpsim
