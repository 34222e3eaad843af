// SPDX-License-Identifier: Apache-2.0
//
// JSON documents and text renderings for each pipeline stage. The CLI prints
// these; `report_json` nests the same documents so that a full report equals
// the stage-by-stage outputs byte for byte.

#pragma once

#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "graphcap/capture.hpp"
#include "graphcap/cgct.hpp"
#include "graphcap/costsim.hpp"
#include "graphcap/eligibility.hpp"
#include "graphcap/selector.hpp"

namespace graphcap {

using json = nlohmann::json;

json to_json(const Cause& cause);
json to_json(const EligibilityReport& report);
json to_json(const Applied& entry);
json to_json(const CapturedGraph& graph);
json to_json(const SimResult& result, bool timeline = false);
json to_json(const SelectionDecision& decision);
json to_json(const SelectionSummary& summary);

json analyze_json(const Program& program);
json transform_json(const Program& program, const TransformResult& result);
json capture_json(const Program& program, const std::map<BlockId, CapturedGraph>& captured);
json pi_json(const Program& program, const std::map<BlockId, CapturedGraph>& captured);
json simulate_json(const Program& program, const CostModel& cost, bool timeline = false);
json select_json(const Program& program, const ProgramSelection& selection);
json coverage_json(const Program& program, const std::map<BlockId, CapturedGraph>& captured);

// analyze and transform on `program`; every later stage on the transformed program.
json report_json(const Program& program, const CostModel& cost);

std::string analyze_text(const json& doc);
std::string transform_text(const json& doc);
std::string capture_text(const json& doc);
std::string pi_text(const json& doc);
std::string simulate_text(const json& doc);
std::string select_text(const json& doc);
std::string report_text(const json& doc);

// One sweep row per block of the transformed program.
struct SweepRow {
  std::string workload;
  BlockId block;
  double eager_us = 0.0;
  std::optional<double> graph_us;
  std::optional<double> graph_pi_us;
  Choice chosen = Choice::NoGraph;
  double speedup = 1.0;  // eager / chosen
};

std::vector<SweepRow> sweep_rows(const Program& program, const CostModel& cost);
std::string sweep_csv_header();
std::string to_csv(const SweepRow& row);

}  // namespace graphcap
