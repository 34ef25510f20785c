#include "xpsim/config.hpp"

#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

namespace xpsim {

namespace {

struct KeyDef {
  const char* section;
  const char* key;
  std::function<bool(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

bool set_bytes(uint64_t* field, const std::string& v) {
  auto parsed = parse_bytes(v);
  if (!parsed) return false;
  *field = *parsed;
  return true;
}

bool set_ns(uint64_t* field, const std::string& v) {
  auto parsed = parse_ns(v);
  if (!parsed) return false;
  *field = *parsed;
  return true;
}

bool set_u64(uint64_t* field, const std::string& v) {
  auto parsed = parse_u64(v);
  if (!parsed) return false;
  *field = *parsed;
  return true;
}

bool set_u32(uint32_t* field, const std::string& v) {
  auto parsed = parse_u64(v);
  if (!parsed || *parsed > UINT32_MAX) return false;
  *field = (uint32_t)*parsed;
  return true;
}

bool set_prob(double* field, const std::string& v) {
  auto parsed = parse_double(v);
  if (!parsed || *parsed < 0.0 || *parsed > 1.0) return false;
  *field = *parsed;
  return true;
}

bool set_bool(bool* field, const std::string& v) {
  if (v == "true") *field = true;
  else if (v == "false") *field = false;
  else return false;
  return true;
}

std::string bool_str(bool b) { return b ? "true" : "false"; }

const std::vector<KeyDef>& key_table() {
  static const std::vector<KeyDef> table = [] {
    std::vector<KeyDef> t;
    auto add = [&t](const char* sec, const char* key, auto set, auto get) {
      t.push_back(KeyDef{sec, key, set, get});
    };

    add("topology", "sockets",
        [](RunConfig& c, const std::string& v) { return set_u32(&c.topology.sockets, v); },
        [](const RunConfig& c) { return std::to_string(c.topology.sockets); });
    add("topology", "imcs_per_socket",
        [](RunConfig& c, const std::string& v) { return set_u32(&c.topology.imcs_per_socket, v); },
        [](const RunConfig& c) { return std::to_string(c.topology.imcs_per_socket); });
    add("topology", "channels_per_imc",
        [](RunConfig& c, const std::string& v) { return set_u32(&c.topology.channels_per_imc, v); },
        [](const RunConfig& c) { return std::to_string(c.topology.channels_per_imc); });
    add("topology", "dimms_per_channel",
        [](RunConfig& c, const std::string& v) { return set_u32(&c.topology.dimms_per_channel, v); },
        [](const RunConfig& c) { return std::to_string(c.topology.dimms_per_channel); });
    add("topology", "interleave",
        [](RunConfig& c, const std::string& v) { return set_bytes(&c.topology.interleave_bytes, v); },
        [](const RunConfig& c) { return format_bytes(c.topology.interleave_bytes); });
    add("topology", "device",
        [](RunConfig& c, const std::string& v) {
          auto kind = device_kind_from_string(v);
          if (!kind) return false;
          c.topology.device_kind = *kind;
          return true;
        },
        [](const RunConfig& c) { return std::string(to_string(c.topology.device_kind)); });
    add("topology", "device_capacity",
        [](RunConfig& c, const std::string& v) { return set_bytes(&c.topology.device_capacity, v); },
        [](const RunConfig& c) { return format_bytes(c.topology.device_capacity); });
    add("topology", "socket",
        [](RunConfig& c, const std::string& v) { return set_u32(&c.topology.ns_socket, v); },
        [](const RunConfig& c) { return std::to_string(c.topology.ns_socket); });
    add("topology", "namespace",
        [](RunConfig& c, const std::string& v) {
          if (v == "interleaved") {
            c.topology.ns_dimm.reset();
            return true;
          }
          if (v.rfind("dimm", 0) == 0) {
            auto idx = parse_u64(v.substr(4));
            if (!idx) return false;
            c.topology.ns_dimm = (uint32_t)*idx;
            return true;
          }
          return false;
        },
        [](const RunConfig& c) {
          return c.topology.ns_dimm ? "dimm" + std::to_string(*c.topology.ns_dimm)
                                    : std::string("interleaved");
        });

    add("xpdimm", "xpbuffer_capacity",
        [](RunConfig& c, const std::string& v) {
          auto parsed = parse_bytes(v);
          if (!parsed || *parsed % kXpLineBytes != 0 || *parsed == 0) return false;
          c.xp.buffer_lines = (uint32_t)(*parsed / kXpLineBytes);
          return true;
        },
        [](const RunConfig& c) { return format_bytes((uint64_t)c.xp.buffer_lines * kXpLineBytes); });
    add("xpdimm", "buffer_hit",
        [](RunConfig& c, const std::string& v) { return set_ns(&c.xp.buffer_hit_ns, v); },
        [](const RunConfig& c) { return format_ns(c.xp.buffer_hit_ns); });
    add("xpdimm", "media_read",
        [](RunConfig& c, const std::string& v) { return set_ns(&c.xp.media_read_ns, v); },
        [](const RunConfig& c) { return format_ns(c.xp.media_read_ns); });
    add("xpdimm", "media_write",
        [](RunConfig& c, const std::string& v) { return set_ns(&c.xp.media_write_ns, v); },
        [](const RunConfig& c) { return format_ns(c.xp.media_write_ns); });
    add("xpdimm", "read_hit_occ",
        [](RunConfig& c, const std::string& v) { return set_ns(&c.xp.read_hit_occ_ns, v); },
        [](const RunConfig& c) { return format_ns(c.xp.read_hit_occ_ns); });
    add("xpdimm", "read_miss_occ",
        [](RunConfig& c, const std::string& v) { return set_ns(&c.xp.read_miss_occ_ns, v); },
        [](const RunConfig& c) { return format_ns(c.xp.read_miss_occ_ns); });
    add("xpdimm", "write_hit_occ",
        [](RunConfig& c, const std::string& v) { return set_ns(&c.xp.write_hit_occ_ns, v); },
        [](const RunConfig& c) { return format_ns(c.xp.write_hit_occ_ns); });
    add("xpdimm", "write_miss_occ",
        [](RunConfig& c, const std::string& v) { return set_ns(&c.xp.write_miss_occ_ns, v); },
        [](const RunConfig& c) { return format_ns(c.xp.write_miss_occ_ns); });
    add("xpdimm", "outlier_prob",
        [](RunConfig& c, const std::string& v) { return set_prob(&c.xp.outlier_prob, v); },
        [](const RunConfig& c) { return format_double(c.xp.outlier_prob); });
    add("xpdimm", "outlier_stall_min",
        [](RunConfig& c, const std::string& v) { return set_ns(&c.xp.outlier_min_ns, v); },
        [](const RunConfig& c) { return format_ns(c.xp.outlier_min_ns); });
    add("xpdimm", "outlier_stall_max",
        [](RunConfig& c, const std::string& v) { return set_ns(&c.xp.outlier_max_ns, v); },
        [](const RunConfig& c) { return format_ns(c.xp.outlier_max_ns); });
    add("xpdimm", "writer_window",
        [](RunConfig& c, const std::string& v) { return set_u32(&c.xp.writer_window, v); },
        [](const RunConfig& c) { return std::to_string(c.xp.writer_window); });
    add("xpdimm", "writer_threshold",
        [](RunConfig& c, const std::string& v) { return set_u32(&c.xp.writer_threshold, v); },
        [](const RunConfig& c) { return std::to_string(c.xp.writer_threshold); });
    add("xpdimm", "victim_min_stale",
        [](RunConfig& c, const std::string& v) { return set_u32(&c.xp.victim_min_stale, v); },
        [](const RunConfig& c) { return std::to_string(c.xp.victim_min_stale); });

    add("dram", "row_bytes",
        [](RunConfig& c, const std::string& v) { return set_bytes(&c.dram.row_bytes, v); },
        [](const RunConfig& c) { return format_bytes(c.dram.row_bytes); });
    add("dram", "row_hit",
        [](RunConfig& c, const std::string& v) { return set_ns(&c.dram.row_hit_ns, v); },
        [](const RunConfig& c) { return format_ns(c.dram.row_hit_ns); });
    add("dram", "row_miss",
        [](RunConfig& c, const std::string& v) { return set_ns(&c.dram.row_miss_ns, v); },
        [](const RunConfig& c) { return format_ns(c.dram.row_miss_ns); });
    add("dram", "read_occ",
        [](RunConfig& c, const std::string& v) { return set_ns(&c.dram.read_occ_ns, v); },
        [](const RunConfig& c) { return format_ns(c.dram.read_occ_ns); });
    add("dram", "write_occ",
        [](RunConfig& c, const std::string& v) { return set_ns(&c.dram.write_occ_ns, v); },
        [](const RunConfig& c) { return format_ns(c.dram.write_occ_ns); });

    add("imc", "wpq_capacity",
        [](RunConfig& c, const std::string& v) { return set_bytes(&c.imc.wpq_capacity_bytes, v); },
        [](const RunConfig& c) { return format_bytes(c.imc.wpq_capacity_bytes); });
    add("imc", "wpq_thread_cap",
        [](RunConfig& c, const std::string& v) { return set_bytes(&c.imc.wpq_thread_cap_bytes, v); },
        [](const RunConfig& c) { return format_bytes(c.imc.wpq_thread_cap_bytes); });
    add("imc", "rpq_outstanding",
        [](RunConfig& c, const std::string& v) { return set_u32(&c.imc.rpq_max_outstanding, v); },
        [](const RunConfig& c) { return std::to_string(c.imc.rpq_max_outstanding); });
    add("imc", "traversal",
        [](RunConfig& c, const std::string& v) { return set_ns(&c.imc.traversal_ns, v); },
        [](const RunConfig& c) { return format_ns(c.imc.traversal_ns); });
    add("imc", "write_watermark",
        [](RunConfig& c, const std::string& v) { return set_u32(&c.imc.write_watermark_entries, v); },
        [](const RunConfig& c) { return std::to_string(c.imc.write_watermark_entries); });

    add("cache", "capacity",
        [](RunConfig& c, const std::string& v) { return set_bytes(&c.cache.capacity_bytes, v); },
        [](const RunConfig& c) { return format_bytes(c.cache.capacity_bytes); });
    add("cache", "ways",
        [](RunConfig& c, const std::string& v) { return set_u32(&c.cache.ways, v); },
        [](const RunConfig& c) { return std::to_string(c.cache.ways); });
    add("cache", "hit_latency",
        [](RunConfig& c, const std::string& v) { return set_ns(&c.cache.hit_ns, v); },
        [](const RunConfig& c) { return format_ns(c.cache.hit_ns); });

    add("cpu", "op_cost",
        [](RunConfig& c, const std::string& v) { return set_ns(&c.cpu.op_cost_ns, v); },
        [](const RunConfig& c) { return format_ns(c.cpu.op_cost_ns); });
    add("cpu", "fence",
        [](RunConfig& c, const std::string& v) { return set_ns(&c.cpu.fence_ns, v); },
        [](const RunConfig& c) { return format_ns(c.cpu.fence_ns); });
    add("cpu", "ntstore_drain",
        [](RunConfig& c, const std::string& v) { return set_ns(&c.cpu.ntstore_drain_ns, v); },
        [](const RunConfig& c) { return format_ns(c.cpu.ntstore_drain_ns); });
    add("cpu", "mlp",
        [](RunConfig& c, const std::string& v) { return set_u32(&c.cpu.mlp, v); },
        [](const RunConfig& c) { return std::to_string(c.cpu.mlp); });
    add("cpu", "jitter",
        [](RunConfig& c, const std::string& v) { return set_ns(&c.cpu.jitter_ns, v); },
        [](const RunConfig& c) { return format_ns(c.cpu.jitter_ns); });

    add("remote", "link_latency",
        [](RunConfig& c, const std::string& v) { return set_ns(&c.remote.link_ns, v); },
        [](const RunConfig& c) { return format_ns(c.remote.link_ns); });
    add("remote", "credits",
        [](RunConfig& c, const std::string& v) { return set_u32(&c.remote.credits, v); },
        [](const RunConfig& c) { return std::to_string(c.remote.credits); });
    add("remote", "write_credits",
        [](RunConfig& c, const std::string& v) { return set_u32(&c.remote.write_credits, v); },
        [](const RunConfig& c) { return std::to_string(c.remote.write_credits); });

    add("run", "seed",
        [](RunConfig& c, const std::string& v) { return set_u64(&c.run.seed, v); },
        [](const RunConfig& c) { return std::to_string(c.run.seed); });
    add("run", "sample_cap",
        [](RunConfig& c, const std::string& v) { return set_u64(&c.run.sample_cap, v); },
        [](const RunConfig& c) { return std::to_string(c.run.sample_cap); });
    add("run", "track_data",
        [](RunConfig& c, const std::string& v) { return set_bool(&c.run.track_data, v); },
        [](const RunConfig& c) { return bool_str(c.run.track_data); });
    add("run", "flush_devices_at_end",
        [](RunConfig& c, const std::string& v) { return set_bool(&c.run.flush_devices_at_end, v); },
        [](const RunConfig& c) { return bool_str(c.run.flush_devices_at_end); });
    add("run", "dump_queue_depth",
        [](RunConfig& c, const std::string& v) { return set_bool(&c.run.dump_queue_depth, v); },
        [](const RunConfig& c) { return bool_str(c.run.dump_queue_depth); });
    add("run", "queue_sample_interval",
        [](RunConfig& c, const std::string& v) { return set_ns(&c.run.queue_sample_interval_ns, v); },
        [](const RunConfig& c) { return format_ns(c.run.queue_sample_interval_ns); });

    add("workload", "pattern",
        [](RunConfig& c, const std::string& v) {
          auto p = pattern_from_string(v);
          if (!p) return false;
          c.workload.pattern = *p;
          return true;
        },
        [](const RunConfig& c) { return std::string(to_string(c.workload.pattern)); });
    add("workload", "region_base",
        [](RunConfig& c, const std::string& v) { return set_bytes(&c.workload.region_base, v); },
        [](const RunConfig& c) { return format_bytes(c.workload.region_base); });
    add("workload", "region_len",
        [](RunConfig& c, const std::string& v) { return set_bytes(&c.workload.region_len, v); },
        [](const RunConfig& c) { return format_bytes(c.workload.region_len); });
    add("workload", "access",
        [](RunConfig& c, const std::string& v) { return set_bytes(&c.workload.access_bytes, v); },
        [](const RunConfig& c) { return format_bytes(c.workload.access_bytes); });
    add("workload", "stride",
        [](RunConfig& c, const std::string& v) { return set_bytes(&c.workload.stride_bytes, v); },
        [](const RunConfig& c) { return format_bytes(c.workload.stride_bytes); });
    add("workload", "hotspot",
        [](RunConfig& c, const std::string& v) { return set_bytes(&c.workload.hotspot_bytes, v); },
        [](const RunConfig& c) { return format_bytes(c.workload.hotspot_bytes); });
    add("workload", "instr",
        [](RunConfig& c, const std::string& v) {
          auto i = instr_from_string(v);
          if (!i) return false;
          c.workload.instr = *i;
          return true;
        },
        [](const RunConfig& c) { return std::string(to_string(c.workload.instr)); });
    add("workload", "flush_placement",
        [](RunConfig& c, const std::string& v) {
          auto f = flush_placement_from_string(v);
          if (!f) return false;
          c.workload.flush_placement = *f;
          return true;
        },
        [](const RunConfig& c) { return std::string(to_string(c.workload.flush_placement)); });
    add("workload", "sfence_interval",
        [](RunConfig& c, const std::string& v) {
          return set_bytes(&c.workload.sfence_interval_bytes, v);
        },
        [](const RunConfig& c) { return format_bytes(c.workload.sfence_interval_bytes); });
    add("workload", "read_fraction",
        [](RunConfig& c, const std::string& v) {
          if (v == "none") {
            c.workload.read_fraction = -1.0;
            return true;
          }
          return set_prob(&c.workload.read_fraction, v);
        },
        [](const RunConfig& c) {
          return c.workload.read_fraction < 0 ? std::string("none")
                                              : format_double(c.workload.read_fraction);
        });
    add("workload", "delay",
        [](RunConfig& c, const std::string& v) { return set_ns(&c.workload.delay_ns, v); },
        [](const RunConfig& c) { return format_ns(c.workload.delay_ns); });
    add("workload", "threads",
        [](RunConfig& c, const std::string& v) { return set_u32(&c.workload.threads, v); },
        [](const RunConfig& c) { return std::to_string(c.workload.threads); });
    add("workload", "region_policy",
        [](RunConfig& c, const std::string& v) {
          auto r = region_policy_from_string(v);
          if (!r) return false;
          c.workload.region_policy = *r;
          return true;
        },
        [](const RunConfig& c) { return std::string(to_string(c.workload.region_policy)); });
    add("workload", "dimm_fanout",
        [](RunConfig& c, const std::string& v) { return set_u32(&c.workload.dimm_fanout, v); },
        [](const RunConfig& c) { return std::to_string(c.workload.dimm_fanout); });
    add("workload", "ops",
        [](RunConfig& c, const std::string& v) { return set_u64(&c.workload.ops_per_thread, v); },
        [](const RunConfig& c) { return std::to_string(c.workload.ops_per_thread); });
    add("workload", "thread_socket",
        [](RunConfig& c, const std::string& v) { return set_u32(&c.thread_socket, v); },
        [](const RunConfig& c) { return std::to_string(c.thread_socket); });
    return t;
  }();
  return table;
}

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::string RunConfig::validate() const {
  std::string err = topology.validate();
  if (!err.empty()) return "topology: " + err;
  err = workload.validate(topology);
  if (!err.empty()) return "workload: " + err;
  if (thread_socket >= topology.sockets) return "workload.thread_socket: socket out of range";
  if (cache.ways == 0 || cache.capacity_bytes < kCacheLineBytes * cache.ways)
    return "cache: capacity must hold at least one set";
  if (imc.wpq_capacity_bytes < kCacheLineBytes || imc.wpq_thread_cap_bytes < kCacheLineBytes)
    return "imc: WPQ capacities must hold at least one 64B entry";
  if (imc.rpq_max_outstanding == 0) return "imc: rpq_outstanding must be nonzero";
  if (xp.buffer_lines == 0) return "xpdimm: xpbuffer_capacity must be nonzero";
  if (xp.outlier_min_ns > xp.outlier_max_ns)
    return "xpdimm: outlier_stall_min must not exceed outlier_stall_max";
  if (dram.row_bytes == 0 || dram.row_bytes % kCacheLineBytes != 0)
    return "dram: row_bytes must be a nonzero multiple of 64";
  if (cpu.mlp == 0) return "cpu: mlp must be nonzero";
  if (remote.credits == 0 || remote.write_credits == 0 || remote.write_credits > remote.credits)
    return "remote: credits must be nonzero and write_credits within the pool";
  return "";
}

std::string RunConfig::echo() const {
  std::ostringstream out;
  const char* current = "";
  for (const KeyDef& def : key_table()) {
    if (std::string_view(current) != def.section) {
      if (*current) out << "\n";
      out << "[" << def.section << "]\n";
      current = def.section;
    }
    out << def.key << " = " << def.get(*this) << "\n";
  }
  return out.str();
}

std::string parse_config_text(const std::string& text, RunConfig* out) {
  std::istringstream in(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    line_no++;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[') {
      if (t.back() != ']') return "line " + std::to_string(line_no) + ": malformed section";
      section = t.substr(1, t.size() - 2);
      continue;
    }
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      return "line " + std::to_string(line_no) + ": expected key = value";
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (section.empty())
      return "line " + std::to_string(line_no) + ": key '" + key + "' outside any section";
    std::string err = apply_override(section + "." + key, value, out);
    if (!err.empty()) return "line " + std::to_string(line_no) + ": " + err;
  }
  return "";
}

std::string parse_config_file(const std::string& path, RunConfig* out) {
  std::ifstream in(path);
  if (!in) return "cannot open config file: " + path;
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), out);
}

std::string apply_override(const std::string& dotted_key, const std::string& value,
                           RunConfig* out) {
  size_t dot = dotted_key.find('.');
  if (dot == std::string::npos) return "override key must be section.key: " + dotted_key;
  std::string section = dotted_key.substr(0, dot);
  std::string key = dotted_key.substr(dot + 1);
  for (const KeyDef& def : key_table()) {
    if (section == def.section && key == def.key) {
      if (!def.set(*out, value))
        return "invalid value '" + value + "' for " + dotted_key;
      return "";
    }
  }
  return "unknown config key: " + dotted_key;
}

}  // namespace xpsim
