#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "xpsim/config.hpp"
#include "xpsim/engine.hpp"

namespace xpsim {

enum class ExperimentId : uint8_t {
  E1_LATENCY,
  E2_TAIL,
  E3_BW_THREADS,
  E4_BW_SIZE,
  E5_LOADED_LATENCY,
  E6_XPBUFFER_INFER,
  E7_INSTR_AND_FENCE,
  E8_IMC_CONTENTION,
  E9_NUMA_MIX,
};

const char* to_string(ExperimentId id);
const char* experiment_description(ExperimentId id);
std::optional<ExperimentId> experiment_from_string(const std::string& s);
std::vector<ExperimentId> all_experiments();

// One result row per grid point; numeric fields kept raw so checks can run
// on them, with CSV rendering separate and byte-stable.
struct ReportRow {
  std::string run_id;
  std::string experiment;
  uint32_t grid_index = 0;
  std::string device;
  std::string location;  // local | remote
  std::string ns;        // interleaved | dimmN
  std::string pattern;
  std::string instr;
  std::string flush_placement;
  uint32_t threads = 0;
  uint64_t access_bytes = 0;
  uint64_t stride_bytes = 0;
  uint64_t hotspot_bytes = 0;
  uint64_t sfence_interval_bytes = 0;
  double read_fraction = -1.0;
  uint64_t delay_ns = 0;
  uint32_t dimm_fanout = 0;
  uint32_t probe_lines = 0;
  uint64_t ops_per_thread = 0;
  uint64_t seed = 0;
  uint64_t duration_ns = 0;
  uint64_t payload_bytes = 0;
  double bandwidth_mbps = 0.0;
  std::string bandwidth_str;
  uint64_t lat_mean_ns = 0;
  uint64_t p50_ns = 0;
  uint64_t p99_ns = 0;
  uint64_t p999_ns = 0;
  uint64_t p9999_ns = 0;
  uint64_t max_ns = 0;
  uint64_t samples = 0;
  std::optional<double> ewr;
  uint64_t imc_read_bytes = 0;
  uint64_t imc_write_bytes = 0;
  uint64_t media_read_bytes = 0;
  uint64_t media_write_bytes = 0;
  uint64_t outlier_events = 0;
};

struct DeviceRow {
  std::string run_id;
  uint32_t dimm_id = 0;
  DeviceCounters counters;
};

struct RoundRow {
  std::string run_id;
  uint32_t probe_lines = 0;
  uint64_t round = 0;
  DeviceCounters delta;
};

struct ExperimentOutput {
  ExperimentId id;
  std::string name;
  uint64_t master_seed = 0;
  std::string base_echo;
  std::vector<ReportRow> rows;
  std::vector<DeviceRow> device_rows;
  std::vector<RoundRow> round_rows;                 // E6 only
  std::optional<uint64_t> xpbuffer_estimate_bytes;  // E6 only
};

// Expands the experiment's default grid over the base config (per-point
// seeds derive from the master seed and grid index), runs every point, and
// merges the reports in grid order. jobs > 1 runs points concurrently;
// output is identical regardless.
ExperimentOutput run_experiment(ExperimentId id, const RunConfig& base, uint64_t master_seed,
                                uint32_t jobs);

std::string rows_csv_header();
std::string row_to_csv(const ReportRow& row);
std::string devices_csv_header();
std::string device_row_to_csv(const DeviceRow& row);
std::string rounds_csv_header();
std::string round_row_to_csv(const RoundRow& row);

// Runs the two-half probe protocol for one N and reports the mean EWR of the
// steady rounds (the first round is warm-up).
std::optional<double> probe_round_ewr(const RunConfig& base, uint32_t n_lines, uint32_t rounds,
                                      uint64_t seed);

// Doubling-then-bisect search for the largest N whose round EWR stays at
// unity; the returned estimate is 256 * N.
uint64_t infer_xpbuffer_capacity(const RunConfig& base, uint64_t seed);

struct Finding {
  uint32_t guideline = 0;  // 1..4
  std::string status;      // flagged | indeterminate
  std::string run_id;
  std::string detail;
};

// Post-hoc scan of a report set against the four tuning guidelines.
std::vector<Finding> guideline_check(const std::vector<ReportRow>& rows);
std::string findings_csv_header();
std::string finding_to_csv(const Finding& f);

// Convenience used by the CLI and tests: run one ad-hoc workload config.
ReportRow run_single(const RunConfig& cfg, const std::string& run_id, uint32_t grid_index,
                     ExperimentReport* report_out = nullptr);

// Row assembly from an existing report (same shape the grids produce).
ReportRow row_from_report(const RunConfig& cfg, const ExperimentReport& report,
                          const std::string& run_id, uint32_t grid_index);

}  // namespace xpsim
