// SPDX-License-Identifier: Apache-2.0
//
// Captured graphs: frozen node lists whose external parameters are rebound to
// static placeholders refreshed by a per-replay copy plan.

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "graphcap/ir.hpp"

namespace graphcap {

enum class PlaceholderRole { Data, PointerCell };
enum class CopyDirection { D2D, H2D };

std::string_view to_string(PlaceholderRole r);
std::string_view to_string(CopyDirection d);

struct Placeholder {
  PlaceholderId id;
  // Graph-local device tensor backing a Data placeholder. Kept for PointerCell
  // placeholders that replaced a Data one, so the old id still resolves.
  TensorId tensor;
  TensorId source;  // the external tensor this placeholder stands for
  std::uint64_t size_bytes = 0;
  PlaceholderRole role = PlaceholderRole::Data;
  CellId cell;  // PointerCell only
  // Data placeholder kept only as an address anchor for prelude patching: it is
  // never refreshed because every consumer is patched or dereferences a cell.
  bool anchor = false;

  bool operator==(const Placeholder&) const = default;
};

struct CopyAction {
  PlaceholderId target;
  TensorId source;
  std::uint64_t bytes = 0;
  CopyDirection direction = CopyDirection::D2D;

  bool operator==(const CopyAction&) const = default;
};

struct PointerCell {
  CellId id;
  TensorId target;               // current target; refreshed every replay
  std::uint64_t recorded_address = 0;  // symbolic address baked into rewritten kernels

  bool operator==(const PointerCell&) const = default;
};

struct Patch {
  NodeId kernel;
  std::uint64_t offset = 0;  // byte offset in the kernel's parameter buffer
  CellId cell;

  bool operator==(const Patch&) const = default;
};

struct PreludePlan {
  NodeId node;
  std::vector<Patch> patches;
  double per_patch_cost_us = 0.0;

  bool operator==(const PreludePlan&) const = default;
};

// A placeholder the indirection pass left as a Data copy.
struct PiFallback {
  PlaceholderId placeholder;
  NodeId node;
  std::string reason;  // "OffsetAmbiguous", "NotFound" or "MemCopyConsumer"

  bool operator==(const PiFallback&) const = default;
};

struct CaptureStats {
  std::size_t external_param_count = 0;  // distinct external tensors (one placeholder each)
  std::size_t internal_param_count = 0;  // distinct tensors produced inside the graph and read later
  std::size_t static_param_count = 0;    // distinct persistent tensors referenced by address
  std::size_t by_value_param_count = 0;  // scalar or host arguments frozen at capture time
  std::size_t indirected_param_count = 0;
  std::uint64_t bytes_copied_per_replay = 0;

  bool operator==(const CaptureStats&) const = default;
};

struct CapturedGraph {
  BlockId block;
  std::vector<Node> nodes;  // frozen order; bindings rebound to placeholders
  std::vector<Placeholder> placeholders;
  std::vector<CopyAction> copy_plan;
  std::vector<PointerCell> cells;
  std::optional<PreludePlan> prelude;
  std::vector<PiFallback> fallbacks;
  CaptureStats stats;
  // Graph-local tensors (placeholder backings); looked up before the program's.
  std::map<TensorId, TensorDesc> local_tensors;
  // Carried from the block: they run outside the graph on every replay.
  std::vector<ScalarStage> prologue;
  std::vector<Node> epilogue;
  std::vector<TensorId> outputs;
  bool eligible_at_capture = true;

  const Placeholder* find_placeholder(PlaceholderId id) const;
  const Placeholder* placeholder_for_tensor(TensorId local) const;
  const TensorDesc* find_tensor(const Program& program, TensorId id) const;

  bool operator==(const CapturedGraph&) const = default;
};

struct CaptureOptions {
  // When false the block is captured even if ineligible, reproducing a naive
  // stream capture (scalars and host pointers frozen by value).
  bool require_eligible = true;
};

// Throws NotEligible when options.require_eligible and the block has causes.
CapturedGraph capture(const Program& program, const Block& block, const CaptureOptions& options = {});

// Captures every eligible block.
std::map<BlockId, CapturedGraph> capture_eligible(const Program& program);

struct Coverage {
  std::size_t kernels_in_graphs = 0;
  std::size_t total_kernels = 0;
  double percent = 0.0;
};

Coverage coverage(const Program& program, const std::map<BlockId, CapturedGraph>& captured);

}  // namespace graphcap
