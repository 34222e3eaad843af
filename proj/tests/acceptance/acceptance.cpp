// SPDX-License-Identifier: Apache-2.0
//
// One PASS/FAIL line per acceptance criterion. Exit status is nonzero when any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "graphcap/capture.hpp"
#include "graphcap/cgct.hpp"
#include "graphcap/costsim.hpp"
#include "graphcap/error.hpp"
#include "graphcap/fixtures.hpp"
#include "graphcap/indirection.hpp"
#include "graphcap/interpreter.hpp"
#include "graphcap/param_buffer.hpp"
#include "graphcap/report.hpp"
#include "graphcap/selector.hpp"
#include "graphcap/workload_io.hpp"

using namespace graphcap;

namespace {

// Collects failed checks for one criterion.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok && failures_.size() < 5) failures_.push_back(what);
    if (!ok) ++count_;
  }
  void note(const std::string& s) { notes_ += (notes_.empty() ? "" : "; ") + s; }
  bool ok() const { return count_ == 0; }
  std::string summary() const {
    if (ok()) return notes_;
    std::string s = std::to_string(count_) + " failed check(s): ";
    for (std::size_t i = 0; i < failures_.size(); ++i) s += (i ? " | " : "") + failures_[i];
    return s;
  }

 private:
  std::vector<std::string> failures_;
  std::size_t count_ = 0;
  std::string notes_;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::map<BlockId, CapturedGraph> with_pi(const Program& p, const std::map<BlockId, CapturedGraph>& g) {
  std::map<BlockId, CapturedGraph> out;
  for (const auto& [id, c] : g) out.emplace(id, apply_pi(p, c));
  return out;
}

std::uint64_t copy_bytes(const std::map<BlockId, CapturedGraph>& g) {
  std::uint64_t s = 0;
  for (const auto& [id, c] : g) s += c.stats.bytes_copied_per_replay;
  return s;
}

double chosen_total(const SelectionDecision& d) {
  switch (d.choice) {
    case Choice::Graph: return d.graph->total_us;
    case Choice::GraphWithPI: return d.graph_pi->total_us;
    default: return d.eager.total_us;
  }
}

void c1_staleness(Check& c) {
  const Program p = build_fixture("fig2");
  const RunResult eager = run_eager(p);
  CaptureOptions naive;
  naive.require_eligible = false;
  std::map<BlockId, CapturedGraph> frozen{{p.blocks[0].id, capture(p, p.blocks[0], naive)}};
  const auto stale = compare_outputs(eager, run_replay(p, frozen));
  c.expect(stale.has_value() && stale->iteration == 1, "naive replay must first diverge on iteration 2");

  const TransformResult t = transform_until_eligible(p);
  c.expect(t.log.entries.size() == 1 && t.log.entries[0].action == Action::ScalarCast, "one ScalarCast expected");
  const auto graphs = capture_eligible(t.program);
  c.expect(graphs.size() == 1, "transformed block must be captured");
  c.expect(p.iterations == 100, "fixture runs 100 iterations");
  c.expect(!compare_outputs(eager, run_replay(t.program, graphs), 0.0).has_value(), "replay != eager after cast");
  if (stale) c.note("naive diverges at iteration " + std::to_string(stale->iteration + 1));
  c.note("cast replay bit-exact over " + std::to_string(p.iterations) + " iterations");
}

void c2_semantics(Check& c) {
  constexpr double kTol = 1e-12;
  std::set<CauseKind> kinds;
  std::size_t graphs = 0;
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    const Program p = random_program(seed);
    for (const auto& b : p.blocks) {
      for (const auto& cause : analyze(b, p).causes) kinds.insert(cause.kind);
    }
    const Program w = transform_until_eligible(p).program;
    const RunResult eager = run_eager(p);
    const std::string tag = "seed " + std::to_string(seed);
    c.expect(!compare_outputs(eager, run_eager(w), kTol).has_value(), tag + ": transformed eager differs");
    const auto g = capture_eligible(w);
    graphs += g.size();
    c.expect(!compare_outputs(eager, run_replay(w, g), kTol).has_value(), tag + ": graph replay differs");
    c.expect(!compare_outputs(eager, run_replay(w, with_pi(w, g)), kTol).has_value(), tag + ": PI replay differs");
  }
  c.expect(kinds.size() == 6, "random programs must span all six cause kinds");
  c.note("200 programs, " + std::to_string(graphs) + " graphs, " + std::to_string(kinds.size()) + " cause kinds");
}

void c3_copy_bytes(Check& c) {
  struct Row {
    const char* name;
    std::uint64_t before;
    std::size_t graphs;
  };
  const Row rows[] = {{"dr_i", 3221225472ULL, 1}, {"xlnet_i", 8192, 1}, {"st", 1376256, 3}};
  for (const Row& r : rows) {
    const Program w = transform_until_eligible(build_fixture(r.name)).program;
    std::map<BlockId, CapturedGraph> g;
    for (auto& [id, cg] : capture_eligible(w)) {
      if (!cg.copy_plan.empty()) g.emplace(id, cg);
    }
    const auto gp = with_pi(w, g);
    std::size_t pointers = 0;
    for (const auto& [id, cg] : gp) pointers += cg.stats.indirected_param_count;
    const std::uint64_t before = copy_bytes(g), after = copy_bytes(gp);
    c.expect(g.size() == r.graphs, std::string(r.name) + ": graph count");
    c.expect(before == r.before, std::string(r.name) + ": before " + std::to_string(before));
    c.expect(after == 8 * pointers, std::string(r.name) + ": after " + std::to_string(after) + " != 8 x pointers");
    c.note(std::string(r.name) + " " + std::to_string(before) + " -> " + std::to_string(after) + " B");
  }
}

void c4_coverage(Check& c) {
  auto pct = [](const Program& p) { return coverage(p, capture_eligible(p)).percent; };
  auto two = [](double v) { return std::round(v * 100.0) / 100.0; };
  const Program st = build_fixture("st");
  const double st0 = pct(st), st1 = pct(transform_until_eligible(st).program);
  c.expect(two(st0) == 5.14, "st before " + fmt("%.4f", st0));
  c.expect(two(st1) == 74.22, "st after " + fmt("%.4f", st1));
  const Program xl = build_fixture("xlnet_i");
  const TransformResult xt = transform_until_eligible(xl);
  const double x0 = pct(xl), x1 = pct(xt.program);
  c.expect(two(x0) == 0.0, "xlnet before " + fmt("%.4f", x0));
  c.expect(x1 >= 99.0, "xlnet after " + fmt("%.4f", x1));
  c.expect(xt.log.entries.size() == 1 && xt.log.entries[0].action == Action::MemcopyHoist, "xlnet: one hoist");
  c.note("st " + fmt("%.2f", st0) + "% -> " + fmt("%.2f", st1) + "%, xlnet " + fmt("%.2f", x0) + "% -> " +
         fmt("%.2f", x1) + "%");
}

void c5_launch_bound(Check& c) {
  Program p = build_fixture("dalle2");
  p.cost.launch_latency_us = 14000.0 / 740.0;
  const CostModel& k = p.cost;
  const Block& b = p.blocks[0];
  const SelectionDecision d = select(b, p, k);
  const double eager = d.eager.total_us;
  c.expect(std::abs(eager - 14000.0) <= 0.02 * 14000.0, "eager " + fmt("%.1f", eager));

  // Overheads on top of 3.4 ms of kernels, from the cost constants alone.
  std::size_t kernels = 0;
  for (const auto& n : b.nodes) kernels += n.kernel() ? 1 : 0;
  double copies = 0.0;
  for (const auto& in : b.inputs) copies += k.d2d_copy_us(p.tensor(in.tensor).total_bytes());
  const double overheads = k.graph_launch_us + static_cast<double>(kernels) * k.device_dispatch_us + copies +
                           static_cast<double>(b.outputs.size()) * k.host_obj_rebuild_us;
  const double target = 3400.0 + overheads;
  const double best = chosen_total(d);
  c.expect(d.choice != Choice::NoGraph, "a graph variant must win");
  c.expect(std::abs(best - target) <= 0.10 * target, "replay " + fmt("%.1f", best) + " vs " + fmt("%.1f", target));
  const double frac = d.eager.breakdown.cpu_launch_us / eager;
  c.expect(frac >= 0.73, "launch-bound fraction " + fmt("%.3f", frac));
  c.note("eager " + fmt("%.1f", eager) + " us, replay " + fmt("%.1f", best) + " us (target " + fmt("%.1f", target) +
         "), launch-bound " + fmt("%.1f", 100.0 * frac) + "%");
}

void c6_never_worse(Check& c) {
  std::size_t blocks = 0;
  auto sweep = [&](const Program& raw, const std::string& tag) {
    const Program p = transform_until_eligible(raw).program;
    for (const auto& b : p.blocks) {
      const SelectionDecision d = select(b, p, p.cost);
      const double chosen = chosen_total(d);
      c.expect(chosen <= d.eager.total_us, tag + ": worse than eager");
      if (d.graph) c.expect(chosen <= d.graph->total_us, tag + ": worse than naive graph");
      ++blocks;
    }
  };
  for (const auto& name : fixture_names()) sweep(build_fixture(name), name);
  for (std::uint64_t seed = 1; seed <= 500; ++seed) sweep(random_program(seed), "seed " + std::to_string(seed));

  const Program eos = build_fixture("eos");
  c.expect(select(eos.blocks[0], eos, eos.cost).choice == Choice::NoGraph, "eos must choose NoGraph");
  const Program vm = build_fixture("vm");
  const SelectionSummary s = select_program(vm, vm.cost).summary;
  c.expect(s.enabled == 4 && s.disabled == 17,
           "vm summary {" + std::to_string(s.enabled) + ", " + std::to_string(s.disabled) + "}");
  c.note(std::to_string(blocks) + " blocks never worse; eos NoGraph; vm {enabled: " + std::to_string(s.enabled) +
         ", disabled: " + std::to_string(s.disabled) + "}");
}

void c7_pi_subtlety(Check& c) {
  const Program tiny = transform_until_eligible(build_fixture("tiny_tensor")).program;
  const Program dr = transform_until_eligible(build_fixture("dr_i")).program;
  const SelectionDecision t = select(tiny.blocks[0], tiny, tiny.cost);
  const SelectionDecision d = select(dr.blocks[0], dr, dr.cost);
  c.expect(tiny.cost.h2d_fixed_us > tiny.cost.d2d_copy_us(tiny.tensor(tiny.blocks[0].inputs[0].tensor).total_bytes()),
           "tiny fixture premise: pointer upload costs more than the data copy");
  c.expect(t.choice == Choice::Graph, "tiny chose " + std::string(to_string(t.choice)));
  c.expect(d.choice == Choice::GraphWithPI, "dr_i chose " + std::string(to_string(d.choice)));
  c.note("tiny -> " + std::string(to_string(t.choice)) + ", dr_i -> " + std::string(to_string(d.choice)));
}

void c8_offsets(Check& c) {
  std::mt19937_64 rng(2024);
  std::size_t found = 0, ambiguous = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::uint64_t pattern = rng();
    const std::size_t slots = 2 + rng() % 31;
    ParamBufferImage img;
    for (std::size_t s = 0; s < slots; ++s) {
      std::uint64_t w = rng();
      while (w == pattern) w = rng();
      img.push_u64(w);
    }
    const std::size_t at = rng() % slots;
    img.write_u64(at * 8, pattern);
    try {
      const std::size_t off = find_param_offset(img, pattern);
      c.expect(off == at * 8, "trial " + std::to_string(trial) + ": wrong offset");
      found += off == at * 8;
    } catch (const Error& e) {
      c.expect(false, "trial " + std::to_string(trial) + ": " + e.what());
    }
    std::size_t again = rng() % slots;
    if (again == at) again = (at + 1) % slots;
    img.write_u64(again * 8, pattern);
    try {
      find_param_offset(img, pattern);
      c.expect(false, "trial " + std::to_string(trial) + ": duplicate not reported");
    } catch (const Error& e) {
      c.expect(e.code() == ErrorCode::OffsetAmbiguous, "trial " + std::to_string(trial) + ": " + e.what());
      ambiguous += e.code() == ErrorCode::OffsetAmbiguous;
    }
  }
  // Fallback graphs: the duplicated-operand fixture plus random programs biased
  // toward opaque kernels with repeated operands.
  std::size_t fallbacks = 0;
  std::vector<Program> programs{build_fixture("ambiguous_offset")};
  RandomSpec rs;
  rs.p_opaque = 1.0;
  rs.p_duplicate_operand = 0.5;
  for (std::uint64_t seed = 1; seed <= 40; ++seed) programs.push_back(random_program(seed, rs));
  for (const Program& raw : programs) {
    const Program p = transform_until_eligible(raw).program;
    const auto g = with_pi(p, capture_eligible(p));
    for (const auto& [id, cg] : g) {
      for (const auto& f : cg.fallbacks) fallbacks += f.reason == "OffsetAmbiguous";
    }
    c.expect(!compare_outputs(run_eager(raw), run_replay(p, g)).has_value(), p.name + ": fallback graph differs");
  }
  c.expect(fallbacks >= 1, "no OffsetAmbiguous fallback exercised");
  c.note(std::to_string(found) + "/1000 found, " + std::to_string(ambiguous) + "/1000 ambiguous, " +
         std::to_string(fallbacks) + " fallback params replay correctly");
}

void c9_determinism(Check& c) {
  std::size_t results = 0;
  auto conserved = [&](const SimResult& r, const std::string& tag) {
    c.expect(std::abs(r.breakdown.sum() - r.total_us) <= 1e-9, tag + ": breakdown does not sum to total");
    ++results;
  };
  std::vector<Program> programs;
  for (const auto& name : fixture_names()) programs.push_back(build_fixture(name));
  for (std::uint64_t seed = 1; seed <= 100; ++seed) programs.push_back(random_program(seed));
  for (const Program& p : programs) {
    const std::string a = dump(report_json(p, p.cost));
    const std::string b = dump(report_json(p, p.cost));
    c.expect(a == b, p.name + ": report differs between runs");
    const Program w = transform_until_eligible(p).program;
    for (const auto& blk : w.blocks) {
      const SelectionDecision d = select(blk, w, w.cost);
      conserved(d.eager, p.name);
      if (d.graph) conserved(*d.graph, p.name);
      if (d.graph_pi) conserved(*d.graph_pi, p.name);
    }
  }
  const std::string r1 = dump_workload(random_program(77)), r2 = dump_workload(random_program(77));
  c.expect(r1 == r2, "seeded generator not byte-identical");
  c.note(std::to_string(programs.size()) + " reports byte-identical; " + std::to_string(results) +
         " breakdowns conserved");
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<void(Check&)> run;
};

}  // namespace

int main() {
  const Criterion criteria[] = {
      {1, "staleness oracle", 1.0, c1_staleness},
      {2, "semantics preservation", 60.0, c2_semantics},
      {3, "copy-byte reduction", 1.0, c3_copy_bytes},
      {4, "coverage uplift", 1.0, c4_coverage},
      {5, "launch-bound reproduction", 1.0, c5_launch_bound},
      {6, "selector never-worse", 60.0, c6_never_worse},
      {7, "indirection cost subtlety", 1.0, c7_pi_subtlety},
      {8, "offset discovery", 5.0, c8_offsets},
      {9, "determinism and conservation", 60.0, c9_determinism},
  };
  int failed = 0;
  for (const Criterion& cr : criteria) {
    Check check;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      cr.run(check);
    } catch (const std::exception& e) {
      check.expect(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    check.expect(secs < cr.budget_s, "runtime " + fmt("%.3f", secs) + " s over budget");
    const bool ok = check.ok();
    failed += ok ? 0 : 1;
    std::printf("%s criterion %d (%s) [%.3f s]: %s\n", ok ? "PASS" : "FAIL", cr.id, cr.name, secs,
                check.summary().c_str());
  }
  std::fflush(stdout);
  return failed == 0 ? 0 : 1;
}
