// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "graphcap/ir.hpp"

namespace graphcap {

enum class ViolationKind {
  BadTensor,          // elem_size / num_elems / is_scalar inconsistent
  DuplicateId,        // node, block or tensor id reused
  DanglingTensor,     // referenced tensor never allocated anywhere
  UseBeforeDef,       // referenced before the Alloc that defines it
  UseAfterFree,
  Cycle,
  BadBinding,         // binding kind vs. tensor placement, unknown scalar, stray PtrCell
  BadKernel,          // arity, slot order, shapes, duration
  UndeclaredInPlace,  // reads and writes overlap without the in-place flag
  WriteToConstant,
  OutputNotProduced,
  BadInput,           // iteration input / prologue stage malformed
};

std::string_view to_string(ViolationKind k);

struct Violation {
  ViolationKind kind;
  std::optional<BlockId> block;
  std::optional<NodeId> node;
  std::optional<TensorId> tensor;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

// Returns every invariant violation; never throws on malformed programs.
ValidationReport validate(const Program& program);

// Deterministic dependency-respecting order of a block's nodes, smallest node id
// first among ready nodes. Throws Error(CycleDetected).
std::vector<NodeId> topo_order(const Block& block);

// Dependency edges (from, to) between node positions of a block: Alloc precedes
// every other user of its tensor, every user precedes the Free, and other
// conflicting accesses follow list order.
std::vector<std::pair<std::size_t, std::size_t>> dependency_edges(const Block& block);

}  // namespace graphcap
