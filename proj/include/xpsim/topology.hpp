#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "xpsim/units.hpp"

namespace xpsim {

enum class DeviceKind { XPDIMM, DRAM };

const char* to_string(DeviceKind kind);
std::optional<DeviceKind> device_kind_from_string(const std::string& s);

// Position of one DIMM plus a byte offset inside it. `dimm` is the slot
// within the channel; `flat` addressing within a socket is
// imc * channels * dimms_per_channel + channel * dimms_per_channel + dimm.
struct DimmLocation {
  uint32_t socket = 0;
  uint32_t imc = 0;
  uint32_t channel = 0;
  uint32_t dimm = 0;
  uint64_t offset = 0;

  bool operator==(const DimmLocation&) const = default;
};

// Platform description plus the namespace view used by a run. The default
// view stripes the address space round-robin across all DIMMs of one socket
// in interleave_bytes chunks; a non-interleaved view maps linearly onto a
// single DIMM. Immutable after construction, shareable across runs.
struct PlatformTopology {
  uint32_t sockets = 2;
  uint32_t imcs_per_socket = 2;
  uint32_t channels_per_imc = 3;
  uint32_t dimms_per_channel = 1;
  uint64_t interleave_bytes = 4 * kKiB;
  DeviceKind device_kind = DeviceKind::XPDIMM;
  uint64_t device_capacity = 1 * kGiB;

  uint32_t ns_socket = 0;
  // When set, the namespace maps linearly onto this flat dimm index.
  std::optional<uint32_t> ns_dimm;

  uint32_t dimms_per_socket() const {
    return imcs_per_socket * channels_per_imc * dimms_per_channel;
  }
  uint64_t stripe_bytes() const { return interleave_bytes * dimms_per_socket(); }
  bool interleaved() const { return !ns_dimm.has_value(); }
  uint64_t total_capacity() const {
    return interleaved() ? device_capacity * dimms_per_socket() : device_capacity;
  }

  DimmLocation location_of_flat(uint32_t flat_dimm, uint64_t offset) const;
  uint32_t flat_index(const DimmLocation& loc) const;

  // Round-robin chunk assignment; bijective onto (device, offset).
  // Throws std::out_of_range for addresses beyond the namespace capacity.
  DimmLocation decode_address(uint64_t addr) const;
  // Exact inverse of decode_address.
  uint64_t encode_address(const DimmLocation& loc) const;

  PlatformTopology non_interleaved_view(uint32_t flat_dimm) const;

  // Returns an error message, or empty string when the topology is valid.
  std::string validate() const;
};

}  // namespace xpsim
