// SPDX-License-Identifier: Apache-2.0

#include "graphcap/costsim.hpp"

#include <algorithm>

#include "graphcap/eligibility.hpp"
#include "graphcap/indirection.hpp"

namespace graphcap {

double transfer_us(const CostModel& cost, Placement src, Placement dst, std::uint64_t bytes) {
  if (src == Placement::Device && dst == Placement::Device) return cost.d2d_copy_us(bytes);
  return cost.h2d_copy_us(bytes);
}

namespace {

double copy_node_us(const Program& p, const CostModel& cost, const MemCopy& c) {
  const TensorDesc& s = p.tensor(c.src);
  const TensorDesc& d = p.tensor(c.dst);
  return transfer_us(cost, s.device, d.device, s.total_bytes());
}

double stage_us(const Program& p, const CostModel& cost, const ScalarStage& st) {
  return cost.h2d_copy_us(p.tensor(st.tensor).total_bytes());
}

std::string node_label(NodeId id) { return "node:" + std::to_string(id.value); }

class EagerPipeline {
 public:
  EagerPipeline(const Program& p, const CostModel& c) : p_(p), c_(c) {}

  void launch(const std::string& label, double duration, bool is_copy) {
    cpu_ += c_.launch_latency_us;
    const double start = std::max(gpu_free_, cpu_);
    gpu_free_ = start + duration;
    (is_copy ? copy_ : compute_) += duration;
    r_.timeline.push_back({label, start, gpu_free_});
  }

  void sync() { cpu_ = std::max(cpu_, gpu_free_); }

  void node(const Node& n) {
    if (const auto* k = n.kernel()) {
      launch(node_label(n.id), k->duration_us, false);
    } else if (const auto* c = n.copy()) {
      launch(node_label(n.id), copy_node_us(p_, c_, *c), true);
      if (c->sync) sync();
    } else if (std::holds_alternative<DeviceSync>(n.op)) {
      sync();
    } else if (const auto* pk = std::get_if<PreludeKernel>(&n.op)) {
      launch(node_label(n.id), pk->duration_us, false);
    }
  }

  SimResult finish() {
    r_.total_us = std::max(gpu_free_, cpu_);
    r_.breakdown.gpu_compute_us = compute_;
    r_.breakdown.copy_us = copy_;
    r_.breakdown.cpu_launch_us = std::max(0.0, r_.total_us - compute_ - copy_);
    // Re-derive the total from its parts so the breakdown sums exactly.
    r_.total_us = r_.breakdown.sum();
    return std::move(r_);
  }

 private:
  const Program& p_;
  const CostModel& c_;
  double cpu_ = 0.0;
  double gpu_free_ = 0.0;
  double compute_ = 0.0;
  double copy_ = 0.0;
  SimResult r_;
};

}  // namespace

SimResult simulate_eager(const Program& program, const Block& block, const CostModel& cost) {
  EagerPipeline pipe(program, cost);
  for (const auto& st : block.prologue) {
    pipe.launch("stage:" + std::to_string(st.tensor.value), stage_us(program, cost, st), true);
  }
  for (const Node& n : block.nodes) pipe.node(n);
  for (const Node& n : block.epilogue) pipe.node(n);
  return pipe.finish();
}

SimResult simulate_replay(const Program& program, const CapturedGraph& g, const CostModel& cost) {
  SimResult r;
  double t = 0.0;
  auto step = [&](const std::string& label, double dur, double Breakdown::*bucket) {
    r.timeline.push_back({label, t, t + dur});
    t += dur;
    r.breakdown.*bucket += dur;
  };

  for (const auto& st : g.prologue) {
    step("stage:" + std::to_string(st.tensor.value), stage_us(program, cost, st), &Breakdown::copy_us);
  }
  for (const auto& a : g.copy_plan) {
    const double d = a.direction == CopyDirection::D2D ? cost.d2d_copy_us(a.bytes) : cost.h2d_copy_us(a.bytes);
    step("copy:" + std::to_string(a.target.value), d, &Breakdown::copy_us);
  }
  step("graph_launch", cost.graph_launch_us, &Breakdown::fixed_overhead_us);

  if (g.prelude) step("prelude", cost.prelude_us(g.prelude->patches.size()), &Breakdown::prelude_us);
  std::size_t deref_kernels = 0;
  bool rng = false;
  for (const Node& n : g.nodes) {
    if (const auto* k = n.kernel()) {
      const bool derefs = std::any_of(k->params.begin(), k->params.end(),
                                      [](const ParamBinding& p) { return p.kind == BindingKind::PtrCell; });
      if (derefs) ++deref_kernels;
      rng = rng || k->uses_rng;
    }
  }
  if (deref_kernels > 0) {
    step("deref", cost.deref_per_kernel_us * static_cast<double>(deref_kernels), &Breakdown::prelude_us);
  }

  for (const Node& n : g.nodes) {
    if (const auto* k = n.kernel()) {
      step("dispatch:" + std::to_string(n.id.value), cost.device_dispatch_us, &Breakdown::fixed_overhead_us);
      step(node_label(n.id), k->duration_us, &Breakdown::gpu_compute_us);
    } else if (const auto* c = n.copy()) {
      const TensorDesc* s = g.find_tensor(program, c->src);
      const TensorDesc* d = g.find_tensor(program, c->dst);
      step("dispatch:" + std::to_string(n.id.value), cost.device_dispatch_us, &Breakdown::fixed_overhead_us);
      step(node_label(n.id), transfer_us(cost, s->device, d->device, s->total_bytes()), &Breakdown::copy_us);
    }
  }
  if (rng) step("rng_reset", cost.rng_reset_us, &Breakdown::fixed_overhead_us);
  if (!g.outputs.empty()) {
    step("host_obj_rebuild", cost.host_obj_rebuild_us * static_cast<double>(g.outputs.size()),
         &Breakdown::fixed_overhead_us);
  }
  for (const Node& n : g.epilogue) {
    if (const auto* c = n.copy()) step(node_label(n.id), copy_node_us(program, cost, *c), &Breakdown::copy_us);
  }
  r.total_us = r.breakdown.sum();
  return r;
}

VariantProfiles compare(const Program& program, const Block& block, const CostModel& cost) {
  VariantProfiles v;
  v.eager = simulate_eager(program, block, cost);
  if (!analyze(block, program).eligible) return v;
  v.captured = capture(program, block);
  v.graph = simulate_replay(program, *v.captured, cost);
  CapturedGraph pi = apply_pi(program, *v.captured);
  if (pi.stats.indirected_param_count > 0) {
    v.graph_pi = simulate_replay(program, pi, cost);
    v.captured_pi = std::move(pi);
  }
  return v;
}

}  // namespace graphcap
