// SPDX-License-Identifier: Apache-2.0

#include "graphcap/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <random>

#include "graphcap/error.hpp"

namespace graphcap {
namespace {

ValueRule fill(double v) {
  ValueRule r;
  r.kind = RuleKind::Fill;
  r.value = v;
  return r;
}

ValueRule uniform(double lo, double hi) {
  ValueRule r;
  r.kind = RuleKind::Uniform;
  r.lo = lo;
  r.hi = hi;
  return r;
}

class Builder {
 public:
  explicit Builder(std::string name, int iterations = 4) {
    p_.name = std::move(name);
    p_.iterations = iterations;
  }

  TensorId tensor(Placement where, std::uint64_t elems, std::uint32_t elem_size = 8,
                  bool constant = false, std::optional<ValueRule> init = std::nullopt) {
    TensorDesc t;
    t.id = TensorId{next_tensor_++};
    t.device = where;
    t.num_elems = elems;
    t.elem_size = elem_size;
    t.constant = constant;
    t.init = std::move(init);
    p_.tensors.emplace(t.id, t);
    return t.id;
  }

  // Persistent tensor allocated once in the init section.
  TensorId persistent(Placement where, std::uint64_t elems, ValueRule init, bool constant = true) {
    TensorId t = tensor(where, elems, 8, constant, std::move(init));
    if (elems == 1) p_.tensors.at(t).is_scalar = true;
    p_.init_nodes.push_back(make_alloc(node_id(), t));
    return t;
  }

  // Fresh device buffer every iteration, filled from a seeded draw.
  TensorId iteration_tensor(Placement where, std::uint64_t elems, std::uint32_t elem_size = 8,
                            ValueRule rule = uniform(-1.0, 1.0)) {
    TensorId t = tensor(where, elems, elem_size);
    IterationInput in;
    in.tensor = t;
    in.rule = std::move(rule);
    p_.iteration_inputs.push_back(in);
    return t;
  }

  ScalarId scalar(const std::string& name, ValueRule rule = uniform(0.5, 2.0)) {
    ScalarVar s;
    s.id = ScalarId{next_scalar_++};
    s.name = name;
    p_.scalars.emplace(s.id, s);
    IterationInput in;
    in.scalar = s.id;
    in.rule = std::move(rule);
    p_.iteration_inputs.push_back(in);
    return s.id;
  }

  Block& block() {
    Block b;
    b.id = BlockId{next_block_++};
    p_.blocks.push_back(std::move(b));
    return p_.blocks.back();
  }

  NodeId node_id() { return NodeId{next_node_++}; }

  Node kernel(Opcode op, std::vector<ParamBinding> params, double dur, bool rewritable = true) {
    const std::uint32_t n = next_node_;
    return make_kernel(node_id(), std::string(to_string(op)) + "_" + std::to_string(n), op,
                       std::move(params), dur, rewritable);
  }

  // out = a + b over device tensors.
  Node add(TensorId out, TensorId a, TensorId b, double dur) {
    return kernel(Opcode::ElemAdd,
                  {ParamBinding::device(0, out), ParamBinding::device(1, a), ParamBinding::device(2, b)},
                  dur);
  }

  Node scale(TensorId out, TensorId x, TensorId s, double dur) {
    return kernel(Opcode::ScaleByScalar,
                  {ParamBinding::device(0, out), ParamBinding::device(1, x), ParamBinding::device(2, s)},
                  dur);
  }

  const TensorDesc& desc(TensorId t) const { return p_.tensors.at(t); }
  Program& program() { return p_; }
  Program take() { return std::move(p_); }

 private:
  Program p_;
  std::uint32_t next_tensor_ = 1;
  std::uint32_t next_node_ = 1;
  std::uint32_t next_scalar_ = 1;
  std::uint32_t next_block_ = 1;
};

// Blockers a chain may carry, each placed on one kernel.
struct ChainOptions {
  std::optional<ScalarId> by_value;   // one ScaleByScalar reads this scalar by value
  std::optional<TensorId> host_read;  // one ElemAdd reads this host tensor
  bool mutate_input = false;          // last kernel updates the first external in place
  bool rng = false;
  bool opaque = false;
  bool sync = false;                  // DeviceSync in the middle of the block
  std::function<double(std::size_t)> duration = [](std::size_t) { return 5.0; };
};

// Appends `kernels` kernels that consume every external once and alternate
// between two internal buffers, with a 0.5 scale every other step to keep
// values bounded. Returns the tensor holding the final result.
TensorId chain(Builder& bld, Block& b, const std::vector<TensorId>& ext, std::size_t kernels,
               TensorId half, const ChainOptions& opt = {}) {
  const std::uint64_t n = bld.desc(ext.front()).num_elems;
  for (TensorId e : ext) b.inputs.push_back(ParamBinding::device(0, e));
  if (opt.by_value) b.inputs.push_back(ParamBinding::by_value(0, *opt.by_value));
  if (opt.host_read && !bld.desc(*opt.host_read).constant) {
    b.inputs.push_back(ParamBinding::host(0, *opt.host_read));
  }
  const TensorId buf[2] = {bld.tensor(Placement::Device, n), bld.tensor(Placement::Device, n)};
  b.nodes.push_back(make_alloc(bld.node_id(), buf[0]));
  b.nodes.push_back(make_alloc(bld.node_id(), buf[1]));

  const std::size_t budget = kernels - (opt.mutate_input ? 1 : 0);
  TensorId cur{};
  bool scalar_used = false;
  bool host_used = false;
  for (std::size_t i = 0; i < budget; ++i) {
    const TensorId out = buf[i % 2];
    const double dur = opt.duration(i);
    Node node;
    if (i == 0) {
      node = bld.add(out, ext[0], ext[ext.size() > 1 ? 1 : 0], dur);
    } else if (i + 1 < ext.size()) {
      node = bld.add(out, cur, ext[i + 1], dur);
    } else if (opt.host_read && !host_used) {
      node = bld.kernel(Opcode::ElemAdd,
                        {ParamBinding::device(0, out), ParamBinding::device(1, cur),
                         ParamBinding::host(2, *opt.host_read)},
                        dur);
      host_used = true;
    } else if (i % 2 == 1) {
      node = bld.scale(out, cur, half, dur);
      if (opt.by_value && !scalar_used) {
        node.kernel()->params[2] = ParamBinding::by_value(2, *opt.by_value);
        scalar_used = true;
      }
    } else {
      node = bld.add(out, cur, ext[i % ext.size()], dur);
    }
    if (opt.rng && i == 0) node.kernel()->uses_rng = true;
    if (opt.opaque) node.kernel()->rewritable = false;
    b.nodes.push_back(std::move(node));
    cur = out;
    if (opt.sync && i == budget / 2) b.nodes.push_back(make_sync(bld.node_id()));
  }
  if (opt.mutate_input) {
    Node node = bld.add(ext[0], ext[0], cur, opt.duration(budget));
    node.kernel()->in_place = true;
    b.nodes.push_back(std::move(node));
  }
  b.outputs.push_back(cur);
  return cur;
}

// ---- named analogs ------------------------------------------------------------

// bmm(q, k^T) followed by a division by a per-iteration temperature.
Program fig2() {
  Builder bld("fig2", 100);
  const std::uint32_t d = 4;
  TensorId q = bld.iteration_tensor(Placement::Device, d * d);
  TensorId key = bld.iteration_tensor(Placement::Device, d * d);
  ScalarId temp = bld.scalar("temperature", uniform(0.5, 2.0));
  Block& b = bld.block();
  b.inputs = {ParamBinding::device(0, q), ParamBinding::device(0, key), ParamBinding::by_value(0, temp)};
  TensorId s = bld.tensor(Placement::Device, d * d);
  TensorId o = bld.tensor(Placement::Device, d * d);
  b.nodes.push_back(make_alloc(bld.node_id(), s));
  Node mm = bld.kernel(Opcode::MatMulLite,
                       {ParamBinding::device(0, s), ParamBinding::device(1, q), ParamBinding::device(2, key)},
                       12.0, /*rewritable=*/false);
  mm.kernel()->attrs = KernelAttrs{d, d, d, true, false};
  b.nodes.push_back(std::move(mm));
  b.nodes.push_back(make_alloc(bld.node_id(), o));
  Node div = bld.kernel(Opcode::ScaleByScalar,
                        {ParamBinding::device(0, o), ParamBinding::device(1, s),
                         ParamBinding::by_value(2, temp)},
                        3.0);
  div.kernel()->attrs.divide = true;
  b.nodes.push_back(std::move(div));
  b.outputs = {o};
  return bld.take();
}

std::vector<TensorId> externals(Builder& bld, std::size_t count, std::uint64_t bytes_each,
                                std::uint32_t elem_size = 8) {
  std::vector<TensorId> out;
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(bld.iteration_tensor(Placement::Device, bytes_each / elem_size, elem_size));
  }
  return out;
}

Program st() {
  using namespace analog;
  Builder bld("st", 2);
  TensorId half = bld.persistent(Placement::Device, 1, fill(0.5));
  ScalarId alpha = bld.scalar("alpha");
  {
    // Reads only persistent weights, so its graph has no per-replay copies.
    TensorId w = bld.persistent(Placement::Device, 64, uniform(-1.0, 1.0));
    Block& b = bld.block();
    chain(bld, b, {w}, kStEligibleKernels, half);
    b.inputs.clear();
  }
  const std::size_t blocked[3] = {229, 229, 228};
  for (std::size_t k : blocked) {
    auto ext = externals(bld, kStExternalsPerGraph, kStExternalBytes);
    Block& b = bld.block();
    ChainOptions o;
    o.by_value = alpha;
    chain(bld, b, ext, k, half, o);
  }
  const std::size_t mutating[3] = {86, 85, 85};
  for (std::size_t k : mutating) {
    auto ext = externals(bld, 2, 512);
    Block& b = bld.block();
    ChainOptions o;
    o.mutate_input = true;
    chain(bld, b, ext, k, half, o);
  }
  return bld.take();
}

Program xlnet_i() {
  using namespace analog;
  Builder bld("xlnet_i", 2);
  TensorId half = bld.persistent(Placement::Device, 1, fill(0.5));
  TensorId mask = bld.persistent(Placement::Host, kXlnetExternalBytes / 8, uniform(0.0, 1.0));
  {
    auto ext = externals(bld, 2, kXlnetExternalBytes);
    Block& b = bld.block();
    ChainOptions o;
    o.host_read = mask;
    chain(bld, b, ext, kXlnetBlockKernels, half, o);
  }
  {
    auto ext = externals(bld, 1, 512);
    Block& b = bld.block();
    ChainOptions o;
    o.sync = true;
    chain(bld, b, ext, kXlnetOtherKernels, half, o);
  }
  return bld.take();
}

Program dalle2() {
  using namespace analog;
  Builder bld("dalle2", 2);
  bld.program().cost.launch_latency_us = kDalleEagerUs / static_cast<double>(kDalleKernels);
  TensorId half = bld.persistent(Placement::Device, 1, fill(0.5));
  auto ext = externals(bld, 2, 2048);
  Block& b = bld.block();
  ChainOptions o;
  o.duration = [](std::size_t) { return kDalleComputeUs / static_cast<double>(kDalleKernels); };
  chain(bld, b, ext, kDalleKernels, half, o);
  return bld.take();
}

// A block whose only blocker is one blocking upload of constant host data.
Program dalle2_hoist() {
  using namespace analog;
  Builder bld("dalle2_hoist", 3);
  TensorId half = bld.persistent(Placement::Device, 1, fill(0.5));
  TensorId table = bld.persistent(Placement::Host, 256, uniform(-1.0, 1.0));
  auto ext = externals(bld, 1, 2048);
  Block& b = bld.block();
  TensorId staged = bld.tensor(Placement::Device, 256);
  b.nodes.push_back(make_alloc(bld.node_id(), staged));
  b.nodes.push_back(make_copy(bld.node_id(), table, staged, /*sync=*/true));
  chain(bld, b, {ext[0], staged}, kDalleHoistKernels, half);
  // `staged` is produced inside the block, not an input.
  b.inputs.erase(std::remove_if(b.inputs.begin(), b.inputs.end(),
                                [&](const ParamBinding& p) { return p.tensor == staged; }),
                 b.inputs.end());
  return bld.take();
}

// One enormous external: copying it dominates, an 8-byte pointer update does not.
Program dr_i() {
  using namespace analog;
  Builder bld("dr_i", 3);
  TensorId half = bld.persistent(Placement::Device, 1, fill(0.5));
  const std::uint32_t elem_size = 805306368;  // 4 elements = 3 GiB
  TensorId big = bld.iteration_tensor(Placement::Device, kDrExternalBytes / elem_size, elem_size);
  Block& b = bld.block();
  chain(bld, b, {big}, 40, half);
  return bld.take();
}

// Short launch-bound regions where per-replay overheads exceed eager launches.
Program eos() {
  using namespace analog;
  Builder bld("eos", 3);
  const CostModel& c = bld.program().cost;
  TensorId half = bld.persistent(Placement::Device, 1, fill(0.5));
  auto ext = externals(bld, 3, 1433600);
  // replay = copies + graph launch + dispatch + d + rng reset + one rebuild;
  // eager = launch + d. Solve replay = 1.29 * eager for d.
  double copies = 3.0 * c.d2d_copy_us(1433600);
  double fixed = copies + c.graph_launch_us + 3 * c.device_dispatch_us + c.rng_reset_us +
                 c.host_obj_rebuild_us;
  // Three kernels of d: eager = L + 3d (launch-hidden when d >= L).
  double d = (fixed - kEosRegression * c.launch_latency_us) / (3.0 * (kEosRegression - 1.0));
  Block& b = bld.block();
  ChainOptions o;
  o.rng = true;
  o.duration = [d](std::size_t) { return d; };
  chain(bld, b, ext, 3, half, o);
  return bld.take();
}

// Launch-bound: many 1 us kernels. Graph replay wins.
void beneficial_block(Builder& bld, TensorId half, std::size_t kernels = 20) {
  auto ext = externals(bld, 1, 512);
  Block& b = bld.block();
  ChainOptions o;
  o.duration = [](std::size_t) { return 1.0; };
  chain(bld, b, ext, kernels, half, o);
}

// One long random-number kernel: eager launch is hidden, replay pays reset,
// launch and rebuild.
void harmful_block(Builder& bld, TensorId half) {
  auto ext = externals(bld, 1, 512);
  Block& b = bld.block();
  ChainOptions o;
  o.rng = true;
  o.duration = [](std::size_t) { return 40.0; };
  chain(bld, b, ext, 1, half, o);
}

Program mixed(const std::string& name, std::size_t blocks, std::size_t beneficial, std::uint64_t seed) {
  Builder bld(name, 2);
  TensorId half = bld.persistent(Placement::Device, 1, fill(0.5));
  std::vector<bool> good(blocks, false);
  std::fill(good.begin(), good.begin() + static_cast<std::ptrdiff_t>(beneficial), true);
  std::mt19937_64 rng(seed);
  for (std::size_t i = blocks; i > 1; --i) std::swap(good[i - 1], good[rng() % i]);
  for (bool g : good) {
    if (g) {
      beneficial_block(bld, half);
    } else {
      harmful_block(bld, half);
    }
  }
  return bld.take();
}

Program vm() { return mixed("vm", analog::kVmBlocks, analog::kVmBeneficial, 21); }
Program selection_corpus() {
  return mixed("selection_corpus", analog::kCorpusBlocks, analog::kCorpusBeneficial, 123);
}

// A one-element external: copying it is cheaper than a host-to-device pointer update.
Program tiny_tensor() {
  Builder bld("tiny_tensor", 3);
  TensorId half = bld.persistent(Placement::Device, 1, fill(0.5));
  TensorId x = bld.iteration_tensor(Placement::Device, 1);
  Block& b = bld.block();
  ChainOptions o;
  o.duration = [](std::size_t) { return 1.0; };
  chain(bld, b, {x}, 20, half, o);
  return bld.take();
}

// Sized so copies are 24% of the graph replay time.
Program copy_fraction() {
  using namespace analog;
  Builder bld("copy_fraction_24", 2);
  const CostModel& c = bld.program().cost;
  TensorId half = bld.persistent(Placement::Device, 1, fill(0.5));
  const std::size_t kernels = 10;
  const double dur = 20.0;
  const double rest = c.graph_launch_us + kernels * (c.device_dispatch_us + dur) + c.host_obj_rebuild_us;
  const double copy = kCopyFraction / (1.0 - kCopyFraction) * rest;
  const std::uint32_t elem_size = 4096;
  const double bytes = (copy - c.d2d_fixed_us) * c.d2d_bandwidth_GBps * 1e3;
  const auto elems = static_cast<std::uint64_t>(std::llround(bytes / elem_size));
  TensorId x = bld.iteration_tensor(Placement::Device, elems, elem_size);
  Block& b = bld.block();
  ChainOptions o;
  o.duration = [dur](std::size_t) { return dur; };
  chain(bld, b, {x}, kernels, half, o);
  return bld.take();
}

// ---- one fixture per blocker ----------------------------------------------------

Program cause_scalar() {
  Builder bld("cause_cpu_scalar", 6);
  TensorId half = bld.persistent(Placement::Device, 1, fill(0.5));
  ScalarId s = bld.scalar("lr");
  auto ext = externals(bld, 2, 64);
  Block& b = bld.block();
  ChainOptions o;
  o.by_value = s;
  chain(bld, b, ext, 4, half, o);
  return bld.take();
}

Program cause_host_tensor() {
  Builder bld("cause_cpu_tensor", 4);
  TensorId half = bld.persistent(Placement::Device, 1, fill(0.5));
  TensorId h = bld.persistent(Placement::Host, 8, uniform(-1.0, 1.0));
  auto ext = externals(bld, 2, 64);
  Block& b = bld.block();
  ChainOptions o;
  o.host_read = h;
  chain(bld, b, ext, 4, half, o);
  return bld.take();
}

Program cause_sync_copy() {
  Builder bld("cause_sync_memcopy", 4);
  TensorId half = bld.persistent(Placement::Device, 1, fill(0.5));
  TensorId h = bld.persistent(Placement::Host, 8, uniform(-1.0, 1.0));
  TensorId x = bld.iteration_tensor(Placement::Device, 8);
  Block& b = bld.block();
  TensorId d = bld.tensor(Placement::Device, 8);
  b.nodes.push_back(make_alloc(bld.node_id(), d));
  b.nodes.push_back(make_copy(bld.node_id(), h, d, true));
  chain(bld, b, {x, d}, 4, half);
  b.inputs.erase(std::remove_if(b.inputs.begin(), b.inputs.end(),
                                [&](const ParamBinding& p) { return p.tensor == d; }),
                 b.inputs.end());
  return bld.take();
}

Program cause_device_sync() {
  Builder bld("cause_device_sync", 4);
  TensorId half = bld.persistent(Placement::Device, 1, fill(0.5));
  auto ext = externals(bld, 1, 64);
  Block& b = bld.block();
  ChainOptions o;
  o.sync = true;
  chain(bld, b, ext, 4, half, o);
  return bld.take();
}

// Block 1 writes a host tensor that block 2 reads through a host pointer.
Program cause_host_output() {
  Builder bld("cause_host_output", 4);
  TensorId half = bld.persistent(Placement::Device, 1, fill(0.5));
  auto ext = externals(bld, 1, 64);
  TensorId oh = bld.tensor(Placement::Host, 8);
  {
    Block& b = bld.block();
    TensorId last = chain(bld, b, ext, 3, half);
    b.nodes.push_back(make_alloc(bld.node_id(), oh));
    b.nodes.push_back(make_copy(bld.node_id(), last, oh, false));  // async: the host output is the only cause
    b.outputs.push_back(oh);
  }
  {
    auto ext2 = externals(bld, 1, 64);
    Block& b = bld.block();
    ChainOptions o;
    o.host_read = oh;
    chain(bld, b, ext2, 3, half, o);
  }
  return bld.take();
}

Program cause_input_mutation() {
  Builder bld("cause_input_mutation", 4);
  TensorId half = bld.persistent(Placement::Device, 1, fill(0.5));
  auto ext = externals(bld, 2, 64);
  Block& b = bld.block();
  ChainOptions o;
  o.mutate_input = true;
  chain(bld, b, ext, 4, half, o);
  return bld.take();
}

// A blocking upload and a by-value scalar in the same block.
Program cause_combo() {
  Builder bld("cause_combo", 6);
  TensorId half = bld.persistent(Placement::Device, 1, fill(0.5));
  TensorId h = bld.persistent(Placement::Host, 8, uniform(-1.0, 1.0));
  ScalarId s = bld.scalar("eps");
  TensorId x = bld.iteration_tensor(Placement::Device, 8);
  Block& b = bld.block();
  TensorId d = bld.tensor(Placement::Device, 8);
  b.nodes.push_back(make_alloc(bld.node_id(), d));
  b.nodes.push_back(make_copy(bld.node_id(), h, d, true));
  ChainOptions o;
  o.by_value = s;
  chain(bld, b, {x, d}, 4, half, o);
  b.inputs.erase(std::remove_if(b.inputs.begin(), b.inputs.end(),
                                [&](const ParamBinding& p) {
                                  return p.kind == BindingKind::DevicePtr && p.tensor == d;
                                }),
                 b.inputs.end());
  return bld.take();
}

// A per-iteration host tensor read by pointer: not hoistable, and a capture
// that ignores the blocker keeps a pointer to a released buffer.
Program dangling_host() {
  Builder bld("dangling_host", 4);
  TensorId half = bld.persistent(Placement::Device, 1, fill(0.5));
  TensorId h = bld.iteration_tensor(Placement::Host, 8);
  auto ext = externals(bld, 1, 64);
  Block& b = bld.block();
  ChainOptions o;
  o.host_read = h;
  chain(bld, b, ext, 3, half, o);
  return bld.take();
}

// An opaque kernel reading the same external through two slots.
Program ambiguous_offset() {
  Builder bld("ambiguous_offset", 4);
  TensorId x = bld.iteration_tensor(Placement::Device, 8);
  Block& b = bld.block();
  b.inputs.push_back(ParamBinding::device(0, x));
  TensorId o = bld.tensor(Placement::Device, 8);
  b.nodes.push_back(make_alloc(bld.node_id(), o));
  b.nodes.push_back(bld.kernel(Opcode::ElemMul,
                               {ParamBinding::device(0, o), ParamBinding::device(1, x),
                                ParamBinding::device(2, x)},
                               4.0, /*rewritable=*/false));
  b.outputs = {o};
  return bld.take();
}

// ---- random programs -------------------------------------------------------------

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : g_(seed) {}
  double u01() { return static_cast<double>(g_() >> 11) * 0x1.0p-53; }
  bool chance(double p) { return u01() < p; }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(g_() % n); }
  int between(int lo, int hi) { return lo + static_cast<int>(below(static_cast<std::size_t>(hi - lo + 1))); }
  template <class T>
  const T& pick(const std::vector<T>& v) { return v[below(v.size())]; }

 private:
  std::mt19937_64 g_;
};

void check(const RandomSpec& s) {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  const double ps[] = {s.p_scalar, s.p_host_tensor, s.p_not_hoistable, s.p_sync_copy,
                       s.p_async_host_copy, s.p_device_sync, s.p_host_output, s.p_input_mutation,
                       s.p_rng, s.p_opaque, s.p_duplicate_operand, s.p_free, s.p_pass_output};
  if (!std::all_of(std::begin(ps), std::end(ps), prob)) {
    throw Error(ErrorCode::InvalidSpec, "probabilities must lie in [0, 1]");
  }
  if (s.min_blocks < 0 || s.max_blocks < s.min_blocks || s.max_blocks > 64) {
    throw Error(ErrorCode::InvalidSpec, "block count range invalid");
  }
  if (s.min_kernels < 1 || s.max_kernels < s.min_kernels || s.max_kernels > 256) {
    throw Error(ErrorCode::InvalidSpec, "kernel count range invalid");
  }
  if (s.iterations < 1 || s.iterations > 1000000) {
    throw Error(ErrorCode::InvalidSpec, "iterations out of range");
  }
}

}  // namespace

Program random_program(std::uint64_t seed, const RandomSpec& spec) {
  check(spec);
  Rng r(seed);
  const std::uint32_t sizes[] = {1, 4, 9, 16};
  const std::uint32_t n = sizes[r.below(4)];
  const auto side = static_cast<std::uint32_t>(std::lround(std::sqrt(static_cast<double>(n))));

  Builder bld("random_" + std::to_string(seed), spec.iterations);
  bld.program().seed = seed;
  TensorId half = bld.persistent(Placement::Device, 1, fill(0.5));
  TensorId weight = bld.persistent(Placement::Device, n, uniform(-1.0, 1.0));
  TensorId host_const = bld.persistent(Placement::Host, n, uniform(-1.0, 1.0));
  std::vector<ScalarId> scalars{bld.scalar("s1"), bld.scalar("s2")};

  std::vector<TensorId> device_outputs;  // Alloc'd by earlier blocks, n elements
  std::vector<TensorId> host_outputs;

  const int blocks = r.between(spec.min_blocks, spec.max_blocks);
  for (int bi = 0; bi < blocks; ++bi) {
    std::vector<TensorId> ext;
    const int ext_count = r.between(1, 2);
    for (int i = 0; i < ext_count; ++i) ext.push_back(bld.iteration_tensor(Placement::Device, n));
    std::optional<TensorId> passed;
    if (!device_outputs.empty() && r.chance(spec.p_pass_output)) passed = r.pick(device_outputs);
    std::optional<TensorId> volatile_host;
    if (r.chance(spec.p_not_hoistable)) volatile_host = bld.iteration_tensor(Placement::Host, n);
    std::optional<TensorId> host_in;
    if (!host_outputs.empty() && r.chance(spec.p_pass_output)) host_in = r.pick(host_outputs);

    Block& b = bld.block();
    for (TensorId e : ext) b.inputs.push_back(ParamBinding::device(0, e));
    if (passed) b.inputs.push_back(ParamBinding::device(0, *passed));
    if (volatile_host) b.inputs.push_back(ParamBinding::host(0, *volatile_host));
    if (host_in) b.inputs.push_back(ParamBinding::host(0, *host_in));

    std::vector<TensorId> vecs = ext;
    vecs.push_back(weight);
    if (passed) vecs.push_back(*passed);
    std::vector<TensorId> ones{half};
    std::vector<TensorId> host_reads{host_const};
    if (volatile_host) host_reads.push_back(*volatile_host);
    if (host_in) host_reads.push_back(*host_in);
    std::vector<TensorId> temps;
    std::vector<ScalarId> scalars_used;

    auto alloc = [&](std::uint64_t elems) {
      TensorId t = bld.tensor(Placement::Device, elems);
      b.nodes.push_back(make_alloc(bld.node_id(), t));
      temps.push_back(t);
      return t;
    };

    if (r.chance(spec.p_sync_copy) || r.chance(spec.p_async_host_copy)) {
      const bool sync = r.chance(spec.p_sync_copy / (spec.p_sync_copy + spec.p_async_host_copy + 1e-12));
      TensorId d = alloc(n);
      b.nodes.push_back(make_copy(bld.node_id(), host_const, d, sync));
      vecs.push_back(d);
    }

    const int kernels = r.between(spec.min_kernels, spec.max_kernels);
    const int sync_at = r.chance(spec.p_device_sync) ? r.between(0, kernels - 1) : -1;
    TensorId last_vec = ext.front();
    for (int k = 0; k < kernels; ++k) {
      if (k == sync_at) b.nodes.push_back(make_sync(bld.node_id()));
      const double dur = 1.0 + 49.0 * r.u01();
      const std::size_t roll = r.below(100);
      Node node;
      if (roll < 30) {
        const Opcode op = r.chance(0.5) ? Opcode::ElemAdd : Opcode::ElemMul;
        TensorId a = r.pick(vecs);
        TensorId c = r.chance(spec.p_duplicate_operand) ? a : r.pick(vecs);
        TensorId out = alloc(n);
        std::vector<ParamBinding> ps{ParamBinding::device(0, out), ParamBinding::device(1, a),
                                     ParamBinding::device(2, c)};
        if (r.chance(spec.p_host_tensor)) ps[2] = ParamBinding::host(2, r.pick(host_reads));
        node = bld.kernel(op, std::move(ps), dur);
        vecs.push_back(out);
        last_vec = out;
      } else if (roll < 55) {
        TensorId x = r.pick(vecs);
        TensorId out = alloc(n);
        ParamBinding s = ParamBinding::device(2, r.pick(ones));
        if (r.chance(spec.p_scalar)) {
          ScalarId id = r.pick(scalars);
          s = ParamBinding::by_value(2, id);
          scalars_used.push_back(id);
        }
        node = bld.kernel(Opcode::ScaleByScalar, {ParamBinding::device(0, out), ParamBinding::device(1, x), s},
                          dur);
        if (s.kind == BindingKind::ScalarByValue) node.kernel()->attrs.divide = r.chance(0.5);
        vecs.push_back(out);
        last_vec = out;
      } else if (roll < 65) {
        TensorId out = alloc(n);
        ParamBinding src = r.chance(spec.p_host_tensor) ? ParamBinding::host(1, r.pick(host_reads))
                                                        : ParamBinding::device(1, r.pick(vecs));
        node = bld.kernel(Opcode::Copy, {ParamBinding::device(0, out), src}, dur);
        vecs.push_back(out);
        last_vec = out;
      } else if (roll < 77) {
        TensorId out = alloc(1);
        bld.program().tensors.at(out).is_scalar = true;
        node = bld.kernel(Opcode::ReduceSum, {ParamBinding::device(0, out), ParamBinding::device(1, r.pick(vecs))},
                          dur);
        ones.push_back(out);
      } else if (roll < 92) {
        TensorId a = r.pick(vecs);
        TensorId c = r.pick(vecs);
        TensorId out = alloc(n);
        node = bld.kernel(Opcode::MatMulLite,
                          {ParamBinding::device(0, out), ParamBinding::device(1, a), ParamBinding::device(2, c)},
                          dur);
        node.kernel()->attrs = KernelAttrs{side, side, side, r.chance(0.5), false};
        vecs.push_back(out);
        last_vec = out;
      } else {
        const int replicas = r.between(2, 3);
        TensorId out = alloc(n);
        std::vector<ParamBinding> ps{ParamBinding::device(0, out)};
        for (int i = 0; i < replicas; ++i) {
          ps.push_back(ParamBinding::device(static_cast<std::uint32_t>(i + 1), r.pick(vecs)));
        }
        node = bld.kernel(Opcode::CollectiveAllReduce, std::move(ps), dur);
        vecs.push_back(out);
        last_vec = out;
      }
      node.kernel()->rewritable = !r.chance(spec.p_opaque);
      node.kernel()->uses_rng = r.chance(spec.p_rng);
      b.nodes.push_back(std::move(node));
    }
    for (ScalarId s : scalars_used) {
      const bool listed = std::any_of(b.inputs.begin(), b.inputs.end(), [&](const ParamBinding& p) {
        return p.kind == BindingKind::ScalarByValue && p.scalar == s;
      });
      if (!listed) b.inputs.push_back(ParamBinding::by_value(0, s));
    }

    if (r.chance(spec.p_input_mutation)) {
      TensorId e = ext.front();
      Node node = bld.add(e, e, last_vec, 1.0 + 9.0 * r.u01());
      node.kernel()->in_place = true;
      b.nodes.push_back(std::move(node));
    }

    std::vector<TensorId> outputs;
    if (last_vec != ext.front()) outputs.push_back(last_vec);
    if (ones.size() > 1 && r.chance(0.5)) outputs.push_back(ones.back());

    // Free a temporary nothing else reads afterwards.
    if (r.chance(spec.p_free)) {
      std::vector<TensorId> freeable;
      for (TensorId t : temps) {
        if (std::find(outputs.begin(), outputs.end(), t) == outputs.end()) freeable.push_back(t);
      }
      if (!freeable.empty()) b.nodes.push_back(make_free(bld.node_id(), r.pick(freeable)));
    }

    if (outputs.empty()) {
      TensorId out = alloc(n);
      b.nodes.push_back(bld.add(out, ext.front(), weight, 1.0));
      outputs.push_back(out);
      last_vec = out;
    }

    if (r.chance(spec.p_host_output)) {
      TensorId oh = bld.tensor(Placement::Host, n);
      b.nodes.push_back(make_alloc(bld.node_id(), oh));
      b.nodes.push_back(make_copy(bld.node_id(), outputs.front(), oh, true));
      outputs.push_back(oh);
      host_outputs.push_back(oh);
    }
    b.outputs = outputs;
    for (TensorId t : outputs) {
      if (bld.desc(t).device == Placement::Device && bld.desc(t).num_elems == n) device_outputs.push_back(t);
    }
  }
  return bld.take();
}

namespace {

using Factory = Program (*)();

const std::map<std::string, Factory>& registry() {
  static const std::map<std::string, Factory> r{
      {"fig2", fig2},
      {"st", st},
      {"xlnet_i", xlnet_i},
      {"dalle2", dalle2},
      {"dalle2_hoist", dalle2_hoist},
      {"dr_i", dr_i},
      {"eos", eos},
      {"vm", vm},
      {"selection_corpus", selection_corpus},
      {"tiny_tensor", tiny_tensor},
      {"copy_fraction_24", copy_fraction},
      {"cause_cpu_scalar", cause_scalar},
      {"cause_cpu_tensor", cause_host_tensor},
      {"cause_sync_memcopy", cause_sync_copy},
      {"cause_device_sync", cause_device_sync},
      {"cause_host_output", cause_host_output},
      {"cause_input_mutation", cause_input_mutation},
      {"cause_combo", cause_combo},
      {"dangling_host", dangling_host},
      {"ambiguous_offset", ambiguous_offset},
  };
  return r;
}

}  // namespace

std::vector<std::string> fixture_names() {
  std::vector<std::string> out;
  for (const auto& [name, f] : registry()) out.push_back(name);
  return out;
}

Program build_fixture(const std::string& name) {
  auto it = registry().find(name);
  if (it == registry().end()) throw Error(ErrorCode::InvalidSpec, "unknown fixture '" + name + "'");
  return it->second();
}

Program build(const FixtureSpec& spec) {
  if (spec.iterations && (*spec.iterations < 1 || *spec.iterations > 1000000)) {
    throw Error(ErrorCode::InvalidSpec, "iterations out of range");
  }
  Program p;
  if (spec.name.empty()) {
    p.iterations = spec.iterations.value_or(1);
    return p;
  }
  if (spec.name == "random") {
    RandomSpec rs = spec.random;
    if (spec.iterations) rs.iterations = *spec.iterations;
    return random_program(spec.seed, rs);
  }
  p = build_fixture(spec.name);
  if (spec.iterations) p.iterations = *spec.iterations;
  if (spec.seed != 0) p.seed = spec.seed;
  return p;
}

}  // namespace graphcap
