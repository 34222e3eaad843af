// SPDX-License-Identifier: Apache-2.0

#include "graphcap/report.hpp"

#include <cstdio>
#include <sstream>

#include "graphcap/indirection.hpp"
#include "graphcap/workload_io.hpp"

namespace graphcap {
namespace {

std::string fmt(double v, int prec = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

json opt_total(const std::optional<SimResult>& r) {
  return r ? json(r->total_us) : json(nullptr);
}

json breakdown_json(const Breakdown& b) {
  return json{{"cpu_launch_us", b.cpu_launch_us},
              {"gpu_compute_us", b.gpu_compute_us},
              {"copy_us", b.copy_us},
              {"prelude_us", b.prelude_us},
              {"fixed_overhead_us", b.fixed_overhead_us}};
}

}  // namespace

json to_json(const Cause& c) {
  json j{{"node", c.node.value}, {"kind", std::string(to_string(c.kind))}};
  j["slot"] = c.slot ? json(*c.slot) : json(nullptr);
  j["tensor"] = c.tensor ? json(c.tensor->value) : json(nullptr);
  j["scalar"] = c.scalar ? json(c.scalar->value) : json(nullptr);
  return j;
}

json to_json(const EligibilityReport& r) {
  json causes = json::array();
  for (const auto& c : r.causes) causes.push_back(to_json(c));
  return json{{"block", r.block.value}, {"eligible", r.eligible}, {"causes", causes}};
}

json to_json(const Applied& a) {
  auto ids = [](const auto& v) {
    json out = json::array();
    for (auto id : v) out.push_back(id.value);
    return out;
  };
  return json{{"block", a.block.value},
              {"cause", to_json(a.cause)},
              {"action", std::string(to_string(a.action))},
              {"affected_nodes", ids(a.affected_nodes)},
              {"new_tensors", ids(a.new_tensors)},
              {"new_nodes", ids(a.new_nodes)}};
}

json to_json(const CapturedGraph& g) {
  json nodes = json::array();
  for (const auto& n : g.nodes) nodes.push_back(to_json(n));
  json placeholders = json::array();
  for (const auto& p : g.placeholders) {
    placeholders.push_back(json{{"id", p.id.value},
                                {"tensor", p.tensor.value},
                                {"source", p.source.value},
                                {"size_bytes", p.size_bytes},
                                {"role", std::string(to_string(p.role))},
                                {"cell", p.role == PlaceholderRole::PointerCell ? json(p.cell.value) : json(nullptr)},
                                {"anchor", p.anchor}});
  }
  json plan = json::array();
  for (const auto& c : g.copy_plan) {
    plan.push_back(json{{"target", c.target.value},
                        {"source", c.source.value},
                        {"bytes", c.bytes},
                        {"direction", std::string(to_string(c.direction))}});
  }
  json cells = json::array();
  for (const auto& c : g.cells) {
    cells.push_back(json{{"id", c.id.value}, {"target", c.target.value}, {"recorded_address", c.recorded_address}});
  }
  json prelude = nullptr;
  if (g.prelude) {
    json patches = json::array();
    for (const auto& p : g.prelude->patches) {
      patches.push_back(json{{"kernel", p.kernel.value}, {"offset", p.offset}, {"cell", p.cell.value}});
    }
    prelude = json{{"node", g.prelude->node.value},
                   {"patches", patches},
                   {"per_patch_cost_us", g.prelude->per_patch_cost_us}};
  }
  json fallbacks = json::array();
  for (const auto& f : g.fallbacks) {
    fallbacks.push_back(json{{"placeholder", f.placeholder.value}, {"node", f.node.value}, {"reason", f.reason}});
  }
  json stages = json::array();
  for (const auto& s : g.prologue) stages.push_back(json{{"scalar", s.scalar.value}, {"tensor", s.tensor.value}});
  json epilogue = json::array();
  for (const auto& n : g.epilogue) epilogue.push_back(to_json(n));
  json outputs = json::array();
  for (auto t : g.outputs) outputs.push_back(t.value);
  const auto& s = g.stats;
  return json{{"block", g.block.value},
              {"nodes", nodes},
              {"placeholders", placeholders},
              {"copy_plan", plan},
              {"cells", cells},
              {"prelude", prelude},
              {"fallbacks", fallbacks},
              {"prologue", stages},
              {"epilogue", epilogue},
              {"outputs", outputs},
              {"eligible_at_capture", g.eligible_at_capture},
              {"stats", json{{"external_param_count", s.external_param_count},
                             {"internal_param_count", s.internal_param_count},
                             {"static_param_count", s.static_param_count},
                             {"by_value_param_count", s.by_value_param_count},
                             {"indirected_param_count", s.indirected_param_count},
                             {"bytes_copied_per_replay", s.bytes_copied_per_replay}}}};
}

json to_json(const SimResult& r, bool timeline) {
  json j{{"total_us", r.total_us}, {"breakdown", breakdown_json(r.breakdown)}};
  if (timeline) {
    json t = json::array();
    for (const auto& e : r.timeline) t.push_back(json{{"label", e.label}, {"start_us", e.start_us}, {"end_us", e.end_us}});
    j["timeline"] = t;
  }
  return j;
}

json to_json(const SelectionDecision& d) {
  return json{{"block", d.block.value},
              {"choice", std::string(to_string(d.choice))},
              {"eager_us", d.eager.total_us},
              {"graph_us", opt_total(d.graph)},
              {"graph_pi_us", opt_total(d.graph_pi)},
              {"chosen_us", d.chosen_total()},
              {"margin_us", d.margin_us}};
}

json to_json(const SelectionSummary& s) {
  return json{{"candidates", s.candidates},
              {"enabled", s.enabled},
              {"pi_enabled", s.pi_enabled},
              {"disabled", s.disabled},
              {"ineligible", s.ineligible},
              {"selected_total_us", s.selected_total_us},
              {"eager_total_us", s.eager_total_us},
              {"always_graph_total_us", s.always_graph_total_us}};
}

json analyze_json(const Program& program) {
  json blocks = json::array();
  json causes = json::array();
  bool all = true;
  for (const auto& r : analyze_program(program)) {
    blocks.push_back(to_json(r));
    all = all && r.eligible;
    for (const auto& c : r.causes) {
      json j = to_json(c);
      j["block"] = r.block.value;
      causes.push_back(j);
    }
  }
  return json{{"workload", program.name}, {"eligible", all}, {"causes", causes}, {"blocks", blocks}};
}

json coverage_json(const Program& program, const std::map<BlockId, CapturedGraph>& captured) {
  Coverage c = coverage(program, captured);
  return json{{"kernels_in_graphs", c.kernels_in_graphs},
              {"total_kernels", c.total_kernels},
              {"percent", c.percent}};
}

json transform_json(const Program& program, const TransformResult& result) {
  json log = json::array();
  for (const auto& e : result.log.entries) log.push_back(to_json(e));
  json irreparable = json::array();
  for (const auto& i : result.irreparable) {
    irreparable.push_back(json{{"block", i.block.value}, {"cause", to_json(i.cause)}, {"reason", i.reason}});
  }
  json reports = json::array();
  for (const auto& r : result.reports) reports.push_back(to_json(r));
  return json{{"workload", program.name},
              {"log", log},
              {"irreparable", irreparable},
              {"reports", reports},
              {"max_passes", result.max_passes},
              {"coverage_before", coverage_json(program, capture_eligible(program))},
              {"coverage_after", coverage_json(result.program, capture_eligible(result.program))}};
}

json capture_json(const Program& program, const std::map<BlockId, CapturedGraph>& captured) {
  json graphs = json::array();
  for (const auto& [id, g] : captured) graphs.push_back(to_json(g));
  return json{{"workload", program.name}, {"graphs", graphs}};
}

json pi_json(const Program& program, const std::map<BlockId, CapturedGraph>& captured) {
  json graphs = json::array();
  std::uint64_t before_total = 0;
  std::uint64_t after_total = 0;
  for (const auto& [id, g] : captured) {
    CapturedGraph pi = apply_pi(program, g);
    before_total += g.stats.bytes_copied_per_replay;
    after_total += pi.stats.bytes_copied_per_replay;
    json fallbacks = json::array();
    for (const auto& f : pi.fallbacks) {
      fallbacks.push_back(json{{"placeholder", f.placeholder.value}, {"node", f.node.value}, {"reason", f.reason}});
    }
    graphs.push_back(json{{"block", id.value},
                          {"external_params", g.stats.external_param_count},
                          {"indirected_params", pi.stats.indirected_param_count},
                          {"bytes_before", g.stats.bytes_copied_per_replay},
                          {"bytes_after", pi.stats.bytes_copied_per_replay},
                          {"patches", pi.prelude ? pi.prelude->patches.size() : std::size_t{0}},
                          {"fallbacks", fallbacks}});
  }
  return json{{"workload", program.name},
              {"graphs", graphs},
              {"bytes_before", before_total},
              {"bytes_after", after_total}};
}

json simulate_json(const Program& program, const CostModel& cost, bool timeline) {
  json blocks = json::array();
  for (const auto& b : program.blocks) {
    VariantProfiles v = compare(program, b, cost);
    const double total = v.eager.total_us;
    blocks.push_back(json{{"block", b.id.value},
                          {"kernels", kernel_count(b)},
                          {"eager", to_json(v.eager, timeline)},
                          {"graph", v.graph ? to_json(*v.graph, timeline) : json(nullptr)},
                          {"graph_pi", v.graph_pi ? to_json(*v.graph_pi, timeline) : json(nullptr)},
                          {"launch_bound_fraction", total > 0.0 ? v.eager.breakdown.cpu_launch_us / total : 0.0}});
  }
  return json{{"workload", program.name}, {"cost_model", to_json(cost)}, {"blocks", blocks}};
}

json select_json(const Program& program, const ProgramSelection& selection) {
  json decisions = json::array();
  for (const auto& [id, d] : selection.decisions) decisions.push_back(to_json(d));
  return json{{"workload", program.name}, {"decisions", decisions}, {"summary", to_json(selection.summary)}};
}

json report_json(const Program& program, const CostModel& cost) {
  TransformResult t = transform_until_eligible(program);
  const Program& w = t.program;
  auto captured = capture_eligible(w);
  return json{{"workload", program.name},
              {"analyze", analyze_json(program)},
              {"transform", transform_json(program, t)},
              {"capture", capture_json(w, captured)},
              {"pi", pi_json(w, captured)},
              {"simulate", simulate_json(w, cost)},
              {"select", select_json(w, select_program(w, cost))},
              {"coverage", coverage_json(w, captured)}};
}

// ---- text ---------------------------------------------------------------------

namespace {

std::string cause_line(const json& c) {
  std::ostringstream os;
  os << "  node " << c["node"].get<std::uint32_t>();
  if (!c["slot"].is_null()) os << " slot " << c["slot"].get<std::uint32_t>();
  os << ": " << c["kind"].get<std::string>();
  if (!c["tensor"].is_null()) os << " (tensor " << c["tensor"].get<std::uint32_t>() << ")";
  if (!c["scalar"].is_null()) os << " (scalar " << c["scalar"].get<std::uint32_t>() << ")";
  return os.str();
}

std::string us(const json& v) { return v.is_null() ? "-" : fmt(v.get<double>()); }

}  // namespace

std::string analyze_text(const json& doc) {
  std::ostringstream os;
  os << "workload " << doc["workload"].get<std::string>() << "\n";
  for (const auto& b : doc["blocks"]) {
    os << "block " << b["block"].get<std::uint32_t>() << ": "
       << (b["eligible"].get<bool>() ? "eligible" : "not eligible") << "\n";
    for (const auto& c : b["causes"]) os << cause_line(c) << "\n";
  }
  return os.str();
}

std::string transform_text(const json& doc) {
  std::ostringstream os;
  os << "workload " << doc["workload"].get<std::string>() << "\n";
  for (const auto& e : doc["log"]) {
    os << "block " << e["block"].get<std::uint32_t>() << ": " << e["action"].get<std::string>() << " for "
       << e["cause"]["kind"].get<std::string>() << " at node " << e["cause"]["node"].get<std::uint32_t>() << "\n";
  }
  for (const auto& i : doc["irreparable"]) {
    os << "block " << i["block"].get<std::uint32_t>() << ": irreparable "
       << i["cause"]["kind"].get<std::string>() << " (" << i["reason"].get<std::string>() << ")\n";
  }
  os << "coverage " << fmt(doc["coverage_before"]["percent"].get<double>(), 2) << "% -> "
     << fmt(doc["coverage_after"]["percent"].get<double>(), 2) << "%\n";
  return os.str();
}

std::string capture_text(const json& doc) {
  std::ostringstream os;
  os << "workload " << doc["workload"].get<std::string>() << "\n";
  for (const auto& g : doc["graphs"]) {
    const auto& s = g["stats"];
    os << "graph " << g["block"].get<std::uint32_t>() << ": " << g["nodes"].size() << " nodes, "
       << s["external_param_count"].get<std::size_t>() << " external, "
       << s["internal_param_count"].get<std::size_t>() << " internal, "
       << s["static_param_count"].get<std::size_t>() << " static, "
       << s["bytes_copied_per_replay"].get<std::uint64_t>() << " B copied per replay\n";
  }
  return os.str();
}

std::string pi_text(const json& doc) {
  std::ostringstream os;
  os << "workload " << doc["workload"].get<std::string>() << "\n";
  os << "graph  params  bytes_before  bytes_after\n";
  for (const auto& g : doc["graphs"]) {
    os << g["block"].get<std::uint32_t>() << "  " << g["indirected_params"].get<std::size_t>() << "  "
       << g["bytes_before"].get<std::uint64_t>() << "  " << g["bytes_after"].get<std::uint64_t>() << "\n";
  }
  os << "total  " << doc["bytes_before"].get<std::uint64_t>() << " -> " << doc["bytes_after"].get<std::uint64_t>()
     << " B\n";
  return os.str();
}

std::string simulate_text(const json& doc) {
  std::ostringstream os;
  os << "workload " << doc["workload"].get<std::string>() << "\n";
  os << "block  kernels  eager_us  graph_us  graph_pi_us  launch_bound\n";
  for (const auto& b : doc["blocks"]) {
    os << b["block"].get<std::uint32_t>() << "  " << b["kernels"].get<std::size_t>() << "  "
       << us(b["eager"]["total_us"]) << "  " << (b["graph"].is_null() ? "-" : us(b["graph"]["total_us"])) << "  "
       << (b["graph_pi"].is_null() ? "-" : us(b["graph_pi"]["total_us"])) << "  "
       << fmt(100.0 * b["launch_bound_fraction"].get<double>(), 1) << "%\n";
  }
  return os.str();
}

std::string select_text(const json& doc) {
  std::ostringstream os;
  os << "workload " << doc["workload"].get<std::string>() << "\n";
  for (const auto& d : doc["decisions"]) {
    os << "block " << d["block"].get<std::uint32_t>() << ": " << d["choice"].get<std::string>() << " ("
       << us(d["chosen_us"]) << " us; eager " << us(d["eager_us"]) << ", graph " << us(d["graph_us"])
       << ", graph+pi " << us(d["graph_pi_us"]) << ")\n";
  }
  const auto& s = doc["summary"];
  os << "candidates " << s["candidates"].get<std::size_t>() << ", enabled " << s["enabled"].get<std::size_t>()
     << " (pi " << s["pi_enabled"].get<std::size_t>() << "), disabled " << s["disabled"].get<std::size_t>()
     << ", ineligible " << s["ineligible"].get<std::size_t>() << "\n";
  return os.str();
}

std::string report_text(const json& doc) {
  std::ostringstream os;
  os << analyze_text(doc["analyze"]) << transform_text(doc["transform"]) << pi_text(doc["pi"])
     << simulate_text(doc["simulate"]) << select_text(doc["select"]);
  os << "coverage " << fmt(doc["coverage"]["percent"].get<double>(), 2) << "%\n";
  return os.str();
}

// ---- sweep --------------------------------------------------------------------

std::vector<SweepRow> sweep_rows(const Program& program, const CostModel& cost) {
  const Program w = transform_until_eligible(program).program;
  std::vector<SweepRow> rows;
  for (const auto& [id, d] : select_program(w, cost).decisions) {
    SweepRow r;
    r.workload = program.name;
    r.block = id;
    r.eager_us = d.eager.total_us;
    if (d.graph) r.graph_us = d.graph->total_us;
    if (d.graph_pi) r.graph_pi_us = d.graph_pi->total_us;
    r.chosen = d.choice;
    const double chosen = d.chosen_total();
    r.speedup = chosen > 0.0 ? d.eager.total_us / chosen : 1.0;
    rows.push_back(r);
  }
  return rows;
}

std::string sweep_csv_header() { return "workload,graph_id,eager_us,graph_us,graph_pi_us,chosen,speedup"; }

std::string to_csv(const SweepRow& r) {
  std::ostringstream os;
  os << r.workload << "," << r.block.value << "," << fmt(r.eager_us, 6) << ","
     << (r.graph_us ? fmt(*r.graph_us, 6) : "") << "," << (r.graph_pi_us ? fmt(*r.graph_pi_us, 6) : "") << ","
     << to_string(r.chosen) << "," << fmt(r.speedup, 6);
  return os.str();
}

}  // namespace graphcap
