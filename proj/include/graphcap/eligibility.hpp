// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "graphcap/ir.hpp"

namespace graphcap {

enum class CauseKind { CpuScalarParam, CpuTensorParam, SyncMemcopy, DeviceSync, HostOutput, InputMutation };

std::string_view to_string(CauseKind k);
std::optional<CauseKind> parse_cause_kind(std::string_view s);

struct Cause {
  NodeId node;
  std::optional<std::uint32_t> slot;
  CauseKind kind = CauseKind::CpuScalarParam;
  // The host tensor, output or mutated input involved, when there is one.
  std::optional<TensorId> tensor;
  std::optional<ScalarId> scalar;

  auto operator<=>(const Cause&) const = default;
};

struct EligibilityReport {
  BlockId block;
  bool eligible = true;
  std::vector<Cause> causes;  // in node order, then slot, then kind
};

// Every rule hit for the block's captured region (prologue and epilogue run
// outside any graph and are not inspected).
EligibilityReport analyze(const Block& block, const Program& program);

std::vector<EligibilityReport> analyze_program(const Program& program);

}  // namespace graphcap
