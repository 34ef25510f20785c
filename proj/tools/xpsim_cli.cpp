#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "xpsim/config.hpp"
#include "xpsim/experiments.hpp"
#include "xpsim/oracle.hpp"
#include "xpsim/trace.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace xpsim;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitValidation = 2;

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<uint64_t> seed;
};

int load_config(const CommonOpts& opts, RunConfig* cfg) {
  if (!opts.config_path.empty()) {
    std::string err = parse_config_file(opts.config_path, cfg);
    if (!err.empty()) {
      std::cerr << "config error: " << err << "\n";
      return kExitValidation;
    }
  }
  for (const std::string& ov : opts.overrides) {
    size_t eq = ov.find('=');
    if (eq == std::string::npos) {
      std::cerr << "config error: override must be key=value: " << ov << "\n";
      return kExitValidation;
    }
    std::string err = apply_override(ov.substr(0, eq), ov.substr(eq + 1), cfg);
    if (!err.empty()) {
      std::cerr << "config error: " << err << "\n";
      return kExitValidation;
    }
  }
  if (opts.seed) cfg->run.seed = *opts.seed;
  return kExitOk;
}

bool write_file(const fs::path& path, const std::string& content, std::string* err) {
  std::ofstream out(path, std::ios::binary);
  out << content;
  if (!out.good()) {
    *err = "cannot write " + path.string();
    return false;
  }
  return true;
}

std::string hex_hash(const std::string& text) {
  uint64_t h = hash_str(text.c_str());
  std::ostringstream s;
  s << std::hex << h;
  return s.str();
}

int write_experiment_files(const ExperimentOutput& out, const fs::path& dir, json* manifest) {
  std::string err;
  std::ostringstream csv;
  csv << rows_csv_header() << "\n";
  for (const ReportRow& r : out.rows) csv << row_to_csv(r) << "\n";
  fs::path csv_path = dir / (out.name + ".csv");
  if (!write_file(csv_path, csv.str(), &err)) {
    std::cerr << err << "\n";
    return kExitInternal;
  }

  std::ostringstream dev;
  dev << devices_csv_header() << "\n";
  for (const DeviceRow& r : out.device_rows) dev << device_row_to_csv(r) << "\n";
  fs::path dev_path = dir / (out.name + "_devices.csv");
  if (!write_file(dev_path, dev.str(), &err)) {
    std::cerr << err << "\n";
    return kExitInternal;
  }

  fs::path config_path = dir / (out.name + ".config");
  if (!write_file(config_path, out.base_echo, &err)) {
    std::cerr << err << "\n";
    return kExitInternal;
  }

  json entry;
  entry["experiment"] = out.name;
  entry["config_hash"] = hex_hash(out.base_echo);
  entry["seed"] = out.master_seed;
  entry["rows"] = out.rows.size();
  entry["csv"] = csv_path.filename().string();
  entry["devices_csv"] = dev_path.filename().string();
  entry["config"] = config_path.filename().string();

  if (!out.round_rows.empty()) {
    std::ostringstream rounds;
    rounds << rounds_csv_header() << "\n";
    for (const RoundRow& r : out.round_rows) rounds << round_row_to_csv(r) << "\n";
    fs::path rounds_path = dir / (out.name + "_rounds.csv");
    if (!write_file(rounds_path, rounds.str(), &err)) {
      std::cerr << err << "\n";
      return kExitInternal;
    }
    entry["rounds_csv"] = rounds_path.filename().string();
  }
  if (out.xpbuffer_estimate_bytes)
    entry["xpbuffer_estimate_bytes"] = *out.xpbuffer_estimate_bytes;
  (*manifest)["experiments"].push_back(entry);
  return kExitOk;
}

int cmd_run(const CommonOpts& common, const std::string& experiment, const std::string& out_dir,
            uint32_t jobs, const std::string& dump_trace, const std::string& dump_workload) {
  RunConfig cfg;
  int rc = load_config(common, &cfg);
  if (rc != kExitOk) return rc;
  std::string verr = cfg.validate();
  if (!verr.empty()) {
    std::cerr << "config error: " << verr << "\n";
    return kExitValidation;
  }

  fs::path dir(out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    std::cerr << "cannot create output directory " << dir << "\n";
    return kExitInternal;
  }

  json manifest;
  manifest["seed"] = cfg.run.seed;
  manifest["experiments"] = json::array();

  if (!dump_workload.empty()) {
    std::string err = dump_workload_trace(dump_workload, cfg.workload, cfg.topology,
                                          cfg.run.seed);
    if (!err.empty()) {
      std::cerr << err << "\n";
      return kExitInternal;
    }
  }

  if (experiment.empty()) {
    // Ad-hoc single workload run from the config's workload section.
    Simulation sim(cfg);
    sim.set_planned_accesses((uint64_t)cfg.workload.threads * cfg.workload.ops_per_thread);
    VectorTraceSink sink;
    if (!dump_trace.empty()) sim.set_trace_sink(&sink);
    EngineResult result = sim.run();
    if (!dump_trace.empty()) {
      std::string err = write_trace_file(dump_trace, sink.records);
      if (!err.empty()) {
        std::cerr << err << "\n";
        return kExitInternal;
      }
    }
    ReportRow row = row_from_report(cfg, result.report, "run-0", 0);
    std::ostringstream csv;
    csv << rows_csv_header() << "\n" << row_to_csv(row) << "\n";
    std::string err;
    if (!write_file(dir / "run.csv", csv.str(), &err)) {
      std::cerr << err << "\n";
      return kExitInternal;
    }
    std::ostringstream dev;
    dev << devices_csv_header() << "\n";
    for (uint32_t d = 0; d < result.report.dimm_counters.size(); d++) {
      DeviceRow dr;
      dr.run_id = "run-0";
      dr.dimm_id = d;
      dr.counters = result.report.dimm_counters[d];
      dev << device_row_to_csv(dr) << "\n";
    }
    if (!write_file(dir / "run_devices.csv", dev.str(), &err)) {
      std::cerr << err << "\n";
      return kExitInternal;
    }
    if (!write_file(dir / "run.config", cfg.echo(), &err)) {
      std::cerr << err << "\n";
      return kExitInternal;
    }
    json entry;
    entry["experiment"] = "adhoc";
    entry["config_hash"] = hex_hash(cfg.echo());
    entry["seed"] = cfg.run.seed;
    entry["rows"] = 1;
    entry["csv"] = "run.csv";
    entry["config"] = "run.config";
    manifest["experiments"].push_back(entry);
    if (!write_file(dir / "manifest.json", manifest.dump(2) + "\n", &err)) {
      std::cerr << err << "\n";
      return kExitInternal;
    }
    std::cout << rows_csv_header() << "\n" << row_to_csv(row) << "\n";
    return kExitOk;
  }

  std::vector<ExperimentId> ids;
  if (experiment == "all") {
    ids = all_experiments();
  } else {
    auto id = experiment_from_string(experiment);
    if (!id) {
      std::cerr << "config error: unknown experiment '" << experiment << "'\n";
      return kExitValidation;
    }
    ids.push_back(*id);
  }

  std::vector<ReportRow> all_rows;
  for (ExperimentId id : ids) {
    ExperimentOutput out = run_experiment(id, cfg, cfg.run.seed, jobs);
    int wrc = write_experiment_files(out, dir, &manifest);
    if (wrc != kExitOk) return wrc;
    std::cout << out.name << ": " << out.rows.size() << " rows";
    if (out.xpbuffer_estimate_bytes)
      std::cout << ", xpbuffer estimate " << format_bytes(*out.xpbuffer_estimate_bytes);
    std::cout << "\n";
    for (ReportRow& r : out.rows) all_rows.push_back(std::move(r));
  }

  if (experiment == "all") {
    std::vector<Finding> findings = guideline_check(all_rows);
    std::ostringstream fcsv;
    fcsv << findings_csv_header() << "\n";
    for (const Finding& f : findings) fcsv << finding_to_csv(f) << "\n";
    std::string err;
    if (!write_file(dir / "findings.csv", fcsv.str(), &err)) {
      std::cerr << err << "\n";
      return kExitInternal;
    }
    std::cout << "findings: " << findings.size() << "\n";
  }

  std::string err;
  if (!write_file(dir / "manifest.json", manifest.dump(2) + "\n", &err)) {
    std::cerr << err << "\n";
    return kExitInternal;
  }
  return kExitOk;
}

int cmd_oracle_replay(const CommonOpts& common, const std::string& trace_path) {
  RunConfig cfg;
  int rc = load_config(common, &cfg);
  if (rc != kExitOk) return rc;
  std::vector<TraceRecord> records;
  std::string err = load_trace_file(trace_path, &records);
  if (!err.empty()) {
    std::cerr << err << "\n";
    return kExitValidation;
  }
  uint32_t n_dimms = 0;
  for (const TraceRecord& r : records) n_dimms = std::max(n_dimms, r.dimm + 1);
  if (n_dimms == 0) n_dimms = 1;
  OracleParams params;
  params.buffer_lines = cfg.xp.buffer_lines;
  params.writer_window = cfg.xp.writer_window;
  params.writer_threshold = cfg.xp.writer_threshold;
  params.victim_min_stale = cfg.xp.victim_min_stale;
  std::vector<DeviceCounters> counters = oracle_replay(records, n_dimms, params);
  std::cout << devices_csv_header() << "\n";
  for (uint32_t d = 0; d < counters.size(); d++) {
    DeviceRow row;
    row.run_id = "oracle";
    row.dimm_id = d;
    row.counters = counters[d];
    std::cout << device_row_to_csv(row) << "\n";
  }
  return kExitOk;
}

struct CalMetric {
  std::string name;
  double value;
  double lo, hi;
  std::string note;
};

int cmd_calibrate(const CommonOpts& common, const std::vector<std::string>& sweeps) {
  RunConfig base;
  int rc = load_config(common, &base);
  if (rc != kExitOk) return rc;

  // Expand sweep lists (key=v1,v2,...) into a cartesian set of override
  // combinations; empty means a single run with the base config.
  std::vector<std::vector<std::pair<std::string, std::string>>> combos = {{}};
  for (const std::string& sweep : sweeps) {
    size_t eq = sweep.find('=');
    if (eq == std::string::npos) {
      std::cerr << "config error: sweep must be key=v1,v2,...\n";
      return kExitValidation;
    }
    std::string key = sweep.substr(0, eq);
    std::vector<std::string> values;
    std::stringstream vs(sweep.substr(eq + 1));
    std::string v;
    while (std::getline(vs, v, ',')) values.push_back(v);
    std::vector<std::vector<std::pair<std::string, std::string>>> expanded;
    for (const auto& combo : combos) {
      for (const std::string& value : values) {
        auto next = combo;
        next.emplace_back(key, value);
        expanded.push_back(std::move(next));
      }
    }
    combos = std::move(expanded);
  }

  auto run_point = [](RunConfig cfg, uint64_t salt) {
    cfg.run.seed = derive_seed(cfg.run.seed, salt);
    ExperimentReport rep;
    run_single(cfg, "cal", 0, &rep);
    return rep;
  };

  for (const auto& combo : combos) {
    RunConfig cfg = base;
    for (const auto& [k, v] : combo) {
      std::string err = apply_override(k, v, &cfg);
      if (!err.empty()) {
        std::cerr << "config error: " << err << "\n";
        return kExitValidation;
      }
    }
    std::vector<CalMetric> metrics;

    auto latency_cfg = [&](DeviceKind kind, Pattern pattern) {
      RunConfig p = cfg;
      p.topology.device_kind = kind;
      p.topology.ns_dimm.reset();
      p.workload = WorkloadSpec{};
      p.workload.pattern = pattern;
      p.workload.instr = InstrSeq::LOAD;
      p.workload.access_bytes = 64;
      p.workload.threads = 1;
      p.workload.delay_ns = 1000;
      p.workload.ops_per_thread = 30000;
      p.workload.region_len = 256 * kMiB;
      return p;
    };
    auto mean_lat = [&](const ExperimentReport& rep) {
      LatencyHistogram merged;
      for (const LatencyHistogram& h : rep.latency) merged.merge(h);
      return (double)merged.mean().value_or(0);
    };
    double xp_seq = mean_lat(run_point(latency_cfg(DeviceKind::XPDIMM, Pattern::SEQUENTIAL), 1));
    double xp_rnd =
        mean_lat(run_point(latency_cfg(DeviceKind::XPDIMM, Pattern::RANDOM_UNIFORM), 2));
    double dr_seq = mean_lat(run_point(latency_cfg(DeviceKind::DRAM, Pattern::SEQUENTIAL), 3));
    double dr_rnd =
        mean_lat(run_point(latency_cfg(DeviceKind::DRAM, Pattern::RANDOM_UNIFORM), 4));
    metrics.push_back({"xp_rnd_over_seq_read_lat", xp_rnd / xp_seq, 1.6, 2.0, ""});
    metrics.push_back({"dram_rnd_over_seq_read_lat", dr_rnd / dr_seq, 1.1, 1.3, ""});

    auto bw_cfg = [&](bool single, InstrSeq instr, uint32_t threads) {
      RunConfig p = cfg;
      p.topology.device_kind = DeviceKind::XPDIMM;
      if (single) p.topology.ns_dimm = 0;
      else p.topology.ns_dimm.reset();
      p.workload = WorkloadSpec{};
      p.workload.pattern = Pattern::SEQUENTIAL;
      p.workload.instr = instr;
      p.workload.access_bytes = 256;
      p.workload.threads = threads;
      p.workload.ops_per_thread = 150000 / threads + 2000;
      p.workload.region_len = 192 * kMiB;
      return p;
    };
    auto peak_bw = [&](bool single, InstrSeq instr, std::vector<uint32_t> counts,
                       uint64_t salt) {
      double best = 0;
      for (uint32_t t : counts) {
        ExperimentReport rep = run_point(bw_cfg(single, instr, t), salt + t);
        best = std::max(best, rep.bandwidth_mbps_value());
      }
      return best / 1000.0;  // GB/s
    };
    double rd1 = peak_bw(true, InstrSeq::LOAD, {1, 2, 4, 8, 16}, 100);
    double wr1 = peak_bw(true, InstrSeq::NTSTORE_SFENCE, {1, 2, 4}, 200);
    double rd6 = peak_bw(false, InstrSeq::LOAD, {8, 16, 24}, 300);
    double wr6 = peak_bw(false, InstrSeq::NTSTORE_SFENCE, {4, 6, 12}, 400);
    metrics.push_back({"xp_single_read_GBps", rd1, 6.2, 7.0, ""});
    metrics.push_back({"xp_single_ntstore_GBps", wr1, 2.1, 2.5, ""});
    metrics.push_back({"xp_read_over_write", rd1 / wr1, 2.6, 3.2, ""});
    metrics.push_back({"xp_interleave_read_scale", rd6 / rd1, 5.2, 6.0, ""});
    metrics.push_back({"xp_interleave_write_scale", wr6 / wr1, 5.2, 6.0, ""});

    std::cout << "# calibration";
    for (const auto& [k, v] : combo) std::cout << " " << k << "=" << v;
    std::cout << "\n";
    bool all_ok = true;
    for (const CalMetric& m : metrics) {
      bool ok = m.value >= m.lo && m.value <= m.hi;
      all_ok = all_ok && ok;
      std::cout << (ok ? "  ok   " : "  OFF  ") << m.name << " = " << format_fixed(m.value, 3)
                << "  target [" << format_fixed(m.lo, 2) << ", " << format_fixed(m.hi, 2)
                << "]\n";
    }
    std::cout << (all_ok ? "  all targets met\n" : "  some targets missed\n");
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"xpsim: workload-driven simulator of a persistent-memory hierarchy"};
  app.require_subcommand(1);

  CommonOpts common;
  std::string experiment;
  std::string out_dir = "out";
  uint32_t jobs = 1;
  std::string dump_trace, dump_workload, trace_path;
  std::vector<std::string> sweeps;

  auto add_common = [&common](CLI::App* cmd) {
    cmd->add_option("--config", common.config_path, "config file path");
    cmd->add_option("--override", common.overrides, "override section.key=value")
        ->take_all();
    cmd->add_option_function<uint64_t>(
        "--seed", [&common](const uint64_t& s) { common.seed = s; }, "master seed");
  };

  CLI::App* run = app.add_subcommand("run", "run an experiment suite or ad-hoc workload");
  add_common(run);
  run->add_option("--experiment", experiment, "experiment id (E1..E9, full name, or 'all')");
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--jobs", jobs, "worker threads for grid points");
  run->add_option("--dump-trace", dump_trace, "dump the device request trace (ad-hoc runs)");
  run->add_option("--dump-workload", dump_workload, "dump the generated op stream");

  CLI::App* oracle = app.add_subcommand("oracle-replay",
                                        "replay a device trace through the counter oracle");
  add_common(oracle);
  oracle->add_option("trace", trace_path, "device trace file")->required();

  CLI::App* list = app.add_subcommand("list-experiments", "list the experiment catalog");

  CLI::App* dump = app.add_subcommand("dump-config-defaults",
                                      "print the fully materialized default config");

  CLI::App* cal = app.add_subcommand("calibrate",
                                     "check (or sweep) device constants against the "
                                     "characterization targets");
  add_common(cal);
  cal->add_option("--sweep", sweeps, "sweep a key over values: section.key=v1,v2,...")
      ->take_all();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed())
      return cmd_run(common, experiment, out_dir, jobs, dump_trace, dump_workload);
    if (oracle->parsed()) return cmd_oracle_replay(common, trace_path);
    if (list->parsed()) {
      for (ExperimentId id : all_experiments())
        std::cout << to_string(id) << "  " << experiment_description(id) << "\n";
      return kExitOk;
    }
    if (dump->parsed()) {
      RunConfig cfg;
      std::cout << cfg.echo();
      return kExitOk;
    }
    if (cal->parsed()) return cmd_calibrate(common, sweeps);
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitOk;
}
