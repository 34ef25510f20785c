#include "xpsim/topology.hpp"

#include <stdexcept>

namespace xpsim {

const char* to_string(DeviceKind kind) {
  return kind == DeviceKind::XPDIMM ? "xpdimm" : "dram";
}

std::optional<DeviceKind> device_kind_from_string(const std::string& s) {
  if (s == "xpdimm") return DeviceKind::XPDIMM;
  if (s == "dram") return DeviceKind::DRAM;
  return std::nullopt;
}

DimmLocation PlatformTopology::location_of_flat(uint32_t flat_dimm, uint64_t offset) const {
  DimmLocation loc;
  loc.socket = ns_socket;
  loc.imc = flat_dimm / (channels_per_imc * dimms_per_channel);
  loc.channel = (flat_dimm / dimms_per_channel) % channels_per_imc;
  loc.dimm = flat_dimm % dimms_per_channel;
  loc.offset = offset;
  return loc;
}

uint32_t PlatformTopology::flat_index(const DimmLocation& loc) const {
  return loc.imc * channels_per_imc * dimms_per_channel + loc.channel * dimms_per_channel +
         loc.dimm;
}

DimmLocation PlatformTopology::decode_address(uint64_t addr) const {
  if (addr >= total_capacity()) throw std::out_of_range("address beyond namespace capacity");
  if (!interleaved()) return location_of_flat(*ns_dimm, addr);
  uint64_t chunk = addr / interleave_bytes;
  uint32_t flat = (uint32_t)(chunk % dimms_per_socket());
  uint64_t offset = (chunk / dimms_per_socket()) * interleave_bytes + addr % interleave_bytes;
  return location_of_flat(flat, offset);
}

uint64_t PlatformTopology::encode_address(const DimmLocation& loc) const {
  if (loc.socket != ns_socket || loc.imc >= imcs_per_socket || loc.channel >= channels_per_imc ||
      loc.dimm >= dimms_per_channel || loc.offset >= device_capacity)
    throw std::out_of_range("location outside topology bounds");
  uint32_t flat = flat_index(loc);
  if (!interleaved()) {
    if (flat != *ns_dimm) throw std::out_of_range("location outside single-DIMM namespace");
    return loc.offset;
  }
  uint64_t chunk = (loc.offset / interleave_bytes) * dimms_per_socket() + flat;
  return chunk * interleave_bytes + loc.offset % interleave_bytes;
}

PlatformTopology PlatformTopology::non_interleaved_view(uint32_t flat_dimm) const {
  if (flat_dimm >= dimms_per_socket()) throw std::out_of_range("dimm index out of range");
  PlatformTopology view = *this;
  view.ns_dimm = flat_dimm;
  return view;
}

std::string PlatformTopology::validate() const {
  if (sockets == 0 || imcs_per_socket == 0 || channels_per_imc == 0 || dimms_per_channel == 0)
    return "topology counts must be nonzero";
  if (!is_power_of_two(interleave_bytes) || interleave_bytes < kCacheLineBytes)
    return "interleave must be a power of two and at least 64B";
  if (device_capacity == 0 || device_capacity % interleave_bytes != 0)
    return "device_capacity must be a nonzero multiple of interleave";
  if (ns_socket >= sockets) return "namespace socket out of range";
  if (ns_dimm && *ns_dimm >= dimms_per_socket()) return "namespace dimm out of range";
  return "";
}

}  // namespace xpsim
