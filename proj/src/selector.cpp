// SPDX-License-Identifier: Apache-2.0

#include "graphcap/selector.hpp"

#include <vector>

namespace graphcap {

std::string_view to_string(Choice c) {
  switch (c) {
    case Choice::NoGraph: return "NoGraph";
    case Choice::Graph: return "Graph";
    case Choice::GraphWithPI: return "GraphWithPI";
  }
  return "?";
}

double SelectionDecision::chosen_total() const {
  switch (choice) {
    case Choice::Graph: return graph->total_us;
    case Choice::GraphWithPI: return graph_pi->total_us;
    case Choice::NoGraph: break;
  }
  return eager.total_us;
}

SelectionDecision select(const Block& block, const Program& program, const CostModel& cost) {
  VariantProfiles v = compare(program, block, cost);
  SelectionDecision d;
  d.block = block.id;
  d.eager = std::move(v.eager);
  d.graph = std::move(v.graph);
  d.graph_pi = std::move(v.graph_pi);

  // Preference order doubles as the tie-break: a later variant must be
  // strictly faster to win.
  std::vector<std::pair<Choice, double>> options{{Choice::NoGraph, d.eager.total_us}};
  if (d.graph) options.emplace_back(Choice::Graph, d.graph->total_us);
  if (d.graph_pi) options.emplace_back(Choice::GraphWithPI, d.graph_pi->total_us);
  std::size_t best = 0;
  for (std::size_t i = 1; i < options.size(); ++i) {
    if (options[i].second < options[best].second) best = i;
  }
  d.choice = options[best].first;
  if (options.size() > 1) {
    double runner_up = 0.0;
    bool have = false;
    for (std::size_t i = 0; i < options.size(); ++i) {
      if (i == best) continue;
      if (!have || options[i].second < runner_up) runner_up = options[i].second;
      have = true;
    }
    d.margin_us = runner_up - options[best].second;
  }
  return d;
}

ProgramSelection select_program(const Program& program, const CostModel& cost) {
  ProgramSelection out;
  auto& s = out.summary;
  for (const auto& b : program.blocks) {
    SelectionDecision d = select(b, program, cost);
    s.eager_total_us += d.eager.total_us;
    s.selected_total_us += d.chosen_total();
    s.always_graph_total_us += d.graph ? d.graph->total_us : d.eager.total_us;
    if (!d.graph) {
      ++s.ineligible;
    } else {
      ++s.candidates;
      if (d.choice == Choice::NoGraph) {
        ++s.disabled;
      } else {
        ++s.enabled;
        if (d.choice == Choice::GraphWithPI) ++s.pi_enabled;
      }
    }
    out.decisions.emplace(b.id, std::move(d));
  }
  return out;
}

}  // namespace graphcap
