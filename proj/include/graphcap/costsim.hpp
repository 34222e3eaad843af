// SPDX-License-Identifier: Apache-2.0
//
// Timing model. Eager execution is a two-resource pipeline (CPU issue, GPU
// execution); a replay is a closed-form sum of copy, launch, prelude, per-node
// and fixed overheads.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "graphcap/capture.hpp"
#include "graphcap/cost_model.hpp"
#include "graphcap/ir.hpp"

namespace graphcap {

struct Breakdown {
  double cpu_launch_us = 0.0;  // time the GPU sits idle waiting on CPU issue
  double gpu_compute_us = 0.0;
  double copy_us = 0.0;
  double prelude_us = 0.0;
  double fixed_overhead_us = 0.0;

  double sum() const { return cpu_launch_us + gpu_compute_us + copy_us + prelude_us + fixed_overhead_us; }
};

struct TimelineEntry {
  std::string label;  // "node:<id>", "stage:<tensor>", "copy:<placeholder>", "graph_launch", ...
  double start_us = 0.0;
  double end_us = 0.0;
};

struct SimResult {
  double total_us = 0.0;
  Breakdown breakdown;
  std::vector<TimelineEntry> timeline;
};

SimResult simulate_eager(const Program& program, const Block& block, const CostModel& cost);
SimResult simulate_replay(const Program& program, const CapturedGraph& graph, const CostModel& cost);

struct VariantProfiles {
  SimResult eager;
  std::optional<SimResult> graph;     // present when the block is eligible
  std::optional<SimResult> graph_pi;  // present when indirection changed at least one copy
  std::optional<CapturedGraph> captured;
  std::optional<CapturedGraph> captured_pi;
};

VariantProfiles compare(const Program& program, const Block& block, const CostModel& cost);

// Copy time of one transfer between tensors of the given placements.
double transfer_us(const CostModel& cost, Placement src, Placement dst, std::uint64_t bytes);

}  // namespace graphcap
