// SPDX-License-Identifier: Apache-2.0

#include "graphcap/param_buffer.hpp"

#include <bit>
#include <cstring>
#include <string>

#include "graphcap/error.hpp"

namespace graphcap {

std::uint64_t ParamBufferImage::read_u64(std::size_t offset) const {
  if (offset + kSlotBytes > bytes.size()) {
    throw Error(ErrorCode::InternalInvariant, "parameter image read past end");
  }
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < kSlotBytes; ++i) v |= std::uint64_t{bytes[offset + i]} << (8 * i);
  return v;
}

void ParamBufferImage::write_u64(std::size_t offset, std::uint64_t value) {
  if (offset + kSlotBytes > bytes.size()) {
    throw Error(ErrorCode::InternalInvariant, "parameter image write past end");
  }
  for (std::size_t i = 0; i < kSlotBytes; ++i) bytes[offset + i] = static_cast<std::uint8_t>(value >> (8 * i));
}

void ParamBufferImage::push_u64(std::uint64_t value) {
  bytes.resize(bytes.size() + kSlotBytes);
  write_u64(bytes.size() - kSlotBytes, value);
}

void ParamBufferImage::push_f64(double value) { push_u64(std::bit_cast<std::uint64_t>(value)); }

double ParamBufferImage::read_f64(std::size_t offset) const { return std::bit_cast<double>(read_u64(offset)); }

std::vector<std::uint8_t> pattern_bytes(std::uint64_t value) {
  std::vector<std::uint8_t> out(8);
  for (std::size_t i = 0; i < 8; ++i) out[i] = static_cast<std::uint8_t>(value >> (8 * i));
  return out;
}

std::size_t find_param_offset(const ParamBufferImage& image, std::span<const std::uint8_t> pattern) {
  if (pattern.size() != ParamBufferImage::kSlotBytes) {
    throw Error(ErrorCode::BadPattern, "pattern must be 8 bytes, got " + std::to_string(pattern.size()));
  }
  std::size_t found = 0;
  std::size_t hits = 0;
  for (std::size_t off = 0; off + 8 <= image.bytes.size(); off += 8) {
    if (std::memcmp(image.bytes.data() + off, pattern.data(), 8) == 0) {
      if (hits++ == 0) found = off;
    }
  }
  if (hits == 0) {
    throw Error(ErrorCode::NotFound, "pattern not present in parameter buffer of node " +
                                         std::to_string(image.node.value));
  }
  if (hits > 1) {
    throw Error(ErrorCode::OffsetAmbiguous, "pattern occurs " + std::to_string(hits) +
                                                " times in parameter buffer of node " +
                                                std::to_string(image.node.value));
  }
  return found;
}

std::size_t find_param_offset(const ParamBufferImage& image, std::uint64_t pattern) {
  const auto bytes = pattern_bytes(pattern);
  return find_param_offset(image, std::span<const std::uint8_t>(bytes));
}

}  // namespace graphcap
