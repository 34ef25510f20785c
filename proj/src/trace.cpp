#include "xpsim/trace.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace xpsim {

namespace {

std::string hex(uint64_t v) {
  char buf[20];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, 16);
  return std::string(buf, res.ptr);
}

}  // namespace

std::string write_trace_file(const std::string& path, const std::vector<TraceRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) return "cannot open trace file for writing: " + path;
  out << "# xpsim device trace v1\n";
  uint64_t idx = 0;
  for (const TraceRecord& r : records) {
    if (r.is_flush)
      out << idx << " " << r.dimm << " - F 0\n";
    else
      out << idx << " " << r.dimm << " " << r.thread << " " << (r.is_write ? "W" : "R") << " "
          << hex(r.offset) << "\n";
    idx++;
  }
  return out.good() ? "" : "write error on trace file: " + path;
}

std::string load_trace_file(const std::string& path, std::vector<TraceRecord>* out) {
  std::ifstream in(path);
  if (!in) return "cannot open trace file: " + path;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    line_no++;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    uint64_t idx;
    uint32_t dimm;
    std::string thread_s, kind, offset_s;
    if (!(ls >> idx >> dimm >> thread_s >> kind >> offset_s))
      return "trace parse error at line " + std::to_string(line_no);
    TraceRecord rec;
    rec.dimm = dimm;
    if (kind == "F") {
      rec.is_flush = true;
    } else if (kind == "R" || kind == "W") {
      rec.is_write = kind == "W";
      auto thread = parse_u64(thread_s);
      if (!thread) return "trace parse error at line " + std::to_string(line_no) + ": thread";
      rec.thread = (uint32_t)*thread;
      uint64_t offset = 0;
      auto res = std::from_chars(offset_s.data(), offset_s.data() + offset_s.size(), offset, 16);
      if (res.ec != std::errc() || res.ptr != offset_s.data() + offset_s.size())
        return "trace parse error at line " + std::to_string(line_no) + ": offset";
      rec.offset = offset;
    } else {
      return "trace parse error at line " + std::to_string(line_no) + ": kind '" + kind + "'";
    }
    out->push_back(rec);
  }
  return "";
}

std::string dump_workload_trace(const std::string& path, const WorkloadSpec& spec,
                                const PlatformTopology& topo, uint64_t seed) {
  std::ofstream out(path, std::ios::binary);
  if (!out) return "cannot open trace file for writing: " + path;
  out << "# xpsim workload trace v1\n";
  uint64_t idx = 0;
  for (uint32_t t = 0; t < spec.threads; t++) {
    WorkloadStream stream(spec, topo, seed, t);
    while (auto item = stream.next()) {
      out << idx << " " << t << " " << to_string(item->kind) << " " << hex(item->addr) << " "
          << item->size << "\n";
      idx++;
    }
  }
  return out.good() ? "" : "write error on trace file: " + path;
}

}  // namespace xpsim
