// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <string_view>

#include "graphcap/costsim.hpp"

namespace graphcap {

enum class Choice { NoGraph, Graph, GraphWithPI };

std::string_view to_string(Choice c);

struct SelectionDecision {
  BlockId block;
  Choice choice = Choice::NoGraph;
  SimResult eager;
  std::optional<SimResult> graph;
  std::optional<SimResult> graph_pi;
  double margin_us = 0.0;  // runner-up total minus chosen total; 0 with a single profile

  double chosen_total() const;
};

// Minimum simulated total wins; ties go to the variant with fewer mechanisms
// (NoGraph, then Graph, then GraphWithPI).
SelectionDecision select(const Block& block, const Program& program, const CostModel& cost);

struct SelectionSummary {
  std::size_t candidates = 0;  // eligible blocks
  std::size_t enabled = 0;     // Graph or GraphWithPI chosen
  std::size_t pi_enabled = 0;  // of which GraphWithPI
  std::size_t disabled = 0;    // eligible, NoGraph chosen
  std::size_t ineligible = 0;
  double selected_total_us = 0.0;
  double eager_total_us = 0.0;
  double always_graph_total_us = 0.0;  // naive graph wherever eligible
};

struct ProgramSelection {
  std::map<BlockId, SelectionDecision> decisions;
  SelectionSummary summary;
};

ProgramSelection select_program(const Program& program, const CostModel& cost);

}  // namespace graphcap
