// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <ostream>

namespace graphcap {

// Integer identifier tagged by the entity it names, so a TensorId can never be
// passed where a NodeId is expected.
template <class Tag>
struct Id {
  std::uint32_t value = 0;

  constexpr Id() = default;
  constexpr explicit Id(std::uint32_t v) : value(v) {}

  constexpr auto operator<=>(const Id&) const = default;
};

template <class Tag>
std::ostream& operator<<(std::ostream& os, Id<Tag> id) {
  return os << id.value;
}

struct TensorTag {};
struct NodeTag {};
struct BlockTag {};
struct ScalarTag {};
struct CellTag {};
struct PlaceholderTag {};

using TensorId = Id<TensorTag>;
using NodeId = Id<NodeTag>;
using BlockId = Id<BlockTag>;
using ScalarId = Id<ScalarTag>;
using CellId = Id<CellTag>;
using PlaceholderId = Id<PlaceholderTag>;

}  // namespace graphcap

template <class Tag>
struct std::hash<graphcap::Id<Tag>> {
  std::size_t operator()(graphcap::Id<Tag> id) const noexcept {
    return std::hash<std::uint32_t>{}(id.value);
  }
};
