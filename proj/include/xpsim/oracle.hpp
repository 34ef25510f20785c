#pragma once

#include <cstdint>
#include <vector>

#include "xpsim/devices.hpp"
#include "xpsim/trace.hpp"

namespace xpsim {

// Counter-only reference model of the on-DIMM buffer, kept deliberately
// simple (a flat line map plus an LRU list) and written independently of the
// timing simulator. Replays a device-request trace and reports the media
// byte counters the real model must match exactly.
struct OracleParams {
  uint32_t buffer_lines = 64;
  uint32_t writer_window = 32;
  uint32_t writer_threshold = 6;
  uint32_t victim_min_stale = 6;
};

DeviceCounters oracle_replay_dimm(const std::vector<TraceRecord>& records, uint32_t dimm,
                                  const OracleParams& params);

std::vector<DeviceCounters> oracle_replay(const std::vector<TraceRecord>& records,
                                          uint32_t n_dimms, const OracleParams& params);

}  // namespace xpsim
