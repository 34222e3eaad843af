// SPDX-License-Identifier: Apache-2.0
//
// Recorded kernel argument blocks and the simulated address space they hold.
// Every parameter occupies one 8-byte slot: pointers as addresses, scalars as
// the bit pattern of their double value.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "graphcap/ids.hpp"

namespace graphcap {

struct ParamBufferImage {
  NodeId node;
  std::vector<std::uint8_t> bytes;

  static constexpr std::size_t kSlotBytes = 8;

  std::size_t slot_count() const { return bytes.size() / kSlotBytes; }
  std::uint64_t read_u64(std::size_t offset) const;
  void write_u64(std::size_t offset, std::uint64_t value);
  void push_u64(std::uint64_t value);
  void push_f64(double value);
  double read_f64(std::size_t offset) const;

  bool operator==(const ParamBufferImage&) const = default;
};

// Returns the unique 8-byte-aligned offset at which `pattern` occurs.
// Throws NotFound (no match), OffsetAmbiguous (two or more) or BadPattern
// (pattern not 8 bytes long).
std::size_t find_param_offset(const ParamBufferImage& image, std::span<const std::uint8_t> pattern);
std::size_t find_param_offset(const ParamBufferImage& image, std::uint64_t pattern);

// Little-endian bytes of a 64-bit value.
std::vector<std::uint8_t> pattern_bytes(std::uint64_t value);

namespace addr {

enum class Space { Host, Device, Cell, StandIn, Invalid };

inline constexpr std::uint64_t kDeviceBase = 0x00007e0000000000ULL;
inline constexpr std::uint64_t kHostBase = 0x00007f0000000000ULL;
inline constexpr std::uint64_t kCellBase = 0x00007d0000000000ULL;
// Symbolic addresses used when no machine exists (static images built by the
// indirection pass): one per tensor or cell id.
inline constexpr std::uint64_t kStandInBase = 0x00007c0000000000ULL;
inline constexpr std::uint64_t kSpaceMask = 0xffffff0000000000ULL;

constexpr std::uint64_t device(std::uint32_t buffer) { return kDeviceBase | (std::uint64_t{buffer} << 8); }
constexpr std::uint64_t host(std::uint32_t buffer) { return kHostBase | (std::uint64_t{buffer} << 8); }
constexpr std::uint64_t cell(std::uint32_t index) { return kCellBase | (std::uint64_t{index} << 8); }
constexpr std::uint64_t stand_in(TensorId t) { return kStandInBase | (std::uint64_t{t.value} << 8); }
constexpr std::uint64_t stand_in_cell(CellId c) { return kStandInBase | 0x8000000000ULL | (std::uint64_t{c.value} << 8); }

constexpr Space space_of(std::uint64_t a) {
  switch (a & kSpaceMask) {
    case kDeviceBase: return Space::Device;
    case kHostBase: return Space::Host;
    case kCellBase: return Space::Cell;
    case kStandInBase: return Space::StandIn;
    default: return Space::Invalid;
  }
}
constexpr std::uint32_t index_of(std::uint64_t a) { return static_cast<std::uint32_t>((a & ~kSpaceMask) >> 8); }

}  // namespace addr

}  // namespace graphcap
