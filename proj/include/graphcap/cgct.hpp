// SPDX-License-Identifier: Apache-2.0
//
// Rewrites that remove capture blockers while preserving program semantics:
// scalar arguments become staged 1-element device tensors, copies of constant
// host data move to the init section, and host outputs move to the device
// with an explicit copy back after the block.

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "graphcap/eligibility.hpp"
#include "graphcap/ir.hpp"

namespace graphcap {

enum class Action { ScalarCast, MemcopyHoist, OutputRelocate };

std::string_view to_string(Action a);

struct Applied {
  BlockId block;
  Cause cause;
  Action action = Action::ScalarCast;
  std::vector<NodeId> affected_nodes;
  std::vector<TensorId> new_tensors;
  std::vector<NodeId> new_nodes;
};

struct TransformLog {
  std::vector<Applied> entries;
};

struct Irreparable {
  BlockId block;
  Cause cause;
  std::string reason;  // "InputMutation", "DeviceSync", "NotHoistable: ..." ...
};

struct ScalarCastResult {
  Program program;
  ScalarStage stage;  // the pre-replay host-to-device copy
  TensorId tensor;
  NodeId alloc_node;
};

// Throws NotAScalarCause when `cause` is not a CpuScalarParam on `block`.
ScalarCastResult scalar_to_device_tensor(const Program& program, BlockId block, const Cause& cause);

// Throws NotHoistable when the host data is not declared constant, is not a
// persistent init allocation, or the copy's destination is written elsewhere.
Program hoist_memcopy(const Program& program, BlockId block, const Cause& cause);

// Throws NotHostOutput when `cause` does not name a host output of `block`.
Program relocate_output_to_device(const Program& program, BlockId block, const Cause& cause);

struct TransformResult {
  Program program;
  TransformLog log;
  std::vector<EligibilityReport> reports;  // final verdict per block
  std::vector<Irreparable> irreparable;
  int max_passes = 0;  // largest pass count any block needed
};

inline constexpr int kMaxTransformPasses = 8;

TransformResult transform_until_eligible(const Program& program);

}  // namespace graphcap
