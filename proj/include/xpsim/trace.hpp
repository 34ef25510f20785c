#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xpsim/engine.hpp"
#include "xpsim/workload.hpp"

namespace xpsim {

// One device-level request in iMC service order, or a flush marker.
struct TraceRecord {
  uint32_t dimm = 0;
  uint32_t thread = 0;
  bool is_write = false;
  bool is_flush = false;
  uint64_t offset = 0;
};

class VectorTraceSink : public TraceSink {
 public:
  void on_request(uint32_t dimm, uint32_t thread, bool is_write, uint64_t offset) override {
    records.push_back(TraceRecord{dimm, thread, is_write, false, offset});
  }
  void on_flush(uint32_t dimm) override {
    records.push_back(TraceRecord{dimm, 0, false, true, 0});
  }
  std::vector<TraceRecord> records;
};

// Text format, one record per line:
//   <index> <dimm> <thread> R|W <offset-hex>
//   <index> <dimm> - F 0        (flush marker)
std::string write_trace_file(const std::string& path, const std::vector<TraceRecord>& records);
// Returns an error naming the line on malformed input.
std::string load_trace_file(const std::string& path, std::vector<TraceRecord>* out);

// Workload-level dump: the generated op stream, one op per line
// (<index> <thread> <kind> <addr-hex> <size>), mainly for inspection.
std::string dump_workload_trace(const std::string& path, const WorkloadSpec& spec,
                                const PlatformTopology& topo, uint64_t seed);

}  // namespace xpsim
