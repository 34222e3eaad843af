// SPDX-License-Identifier: Apache-2.0
//
// Generator-driven checks of cross-module invariants.

#include <gtest/gtest.h>

#include <random>
#include <set>

#include "graphcap/capture.hpp"
#include "graphcap/cgct.hpp"
#include "graphcap/fixtures.hpp"
#include "graphcap/indirection.hpp"
#include "graphcap/interpreter.hpp"
#include "graphcap/validate.hpp"
#include "helpers.hpp"

using namespace gt;

namespace {

RandomSpec device_only() {
  RandomSpec s;
  s.p_scalar = s.p_host_tensor = s.p_not_hoistable = s.p_sync_copy = s.p_async_host_copy = 0.0;
  s.p_host_output = 0.0;
  s.iterations = 100;
  return s;
}

// A chain of elementwise kernels over one device input where exactly one link
// scales by a by-value scalar redrawn every iteration. Every link feeds the
// output, so a frozen scalar must show.
Program scalar_chain(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::uint32_t len = 1 + static_cast<std::uint32_t>(rng() % 6);
  const std::uint32_t at = static_cast<std::uint32_t>(rng() % len);
  const std::uint64_t n = 1 + rng() % 8;
  Program p;
  p.iterations = 3 + static_cast<int>(rng() % 5);
  p.seed = seed;
  add_tensor(p, desc(1, Placement::Device, n));
  add_tensor(p, desc(2, Placement::Device, n));
  add_input(p, T(1), uniform());
  add_input(p, T(2), uniform(0.5, 1.5));
  add_scalar(p, 1, uniform(0.5, 2.0));
  Block b;
  b.id = B(1);
  b.inputs = {ParamBinding::device(0, T(1)), ParamBinding::device(0, T(2)), ParamBinding::by_value(0, S(1))};
  std::uint32_t cur = 1, node = 1;
  for (std::uint32_t i = 0; i < len; ++i) {
    const std::uint32_t out = 10 + i;
    add_tensor(p, desc(out, Placement::Device, n));
    b.nodes.push_back(make_alloc(N(node++), T(out)));
    if (i == at) {
      Node k = make_kernel(N(node++), "scale", Opcode::ScaleByScalar,
                           {ParamBinding::device(0, T(out)), ParamBinding::device(1, T(cur)),
                            ParamBinding::by_value(2, S(1))},
                           1.0);
      k.kernel()->attrs.divide = rng() % 2 == 0;
      b.nodes.push_back(k);
    } else {
      b.nodes.push_back(add3(node++, rng() % 2 ? Opcode::ElemAdd : Opcode::ElemMul, out, cur, 2));
    }
    cur = out;
  }
  b.outputs = {T(cur)};
  p.blocks.push_back(b);
  return p;
}

std::size_t cause_count(const Program& p) {
  std::size_t n = 0;
  for (const auto& b : p.blocks) n += analyze(b, p).causes.size();
  return n;
}

std::set<TensorId> allocated_in(const Block& b) {
  std::set<TensorId> out;
  for (const auto& n : b.nodes) {
    if (const auto* a = std::get_if<Alloc>(&n.op)) out.insert(a->tensor);
  }
  return out;
}

}  // namespace

// Blocks without by-value scalars or host tensors replay bit-exactly.
TEST(Properties, DeviceOnlyBlocksReplayBitExactly) {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    Program p = random_program(seed, device_only());
    auto g = capture_eligible(p);
    auto m = compare_outputs(run_eager(p), run_replay(p, g), 0.0);
    EXPECT_FALSE(m.has_value()) << "seed " << seed << ": " << (m ? m->detail : "");
  }
}

TEST(Properties, FrozenScalarAlwaysShows) {
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    Program p = scalar_chain(seed);
    ASSERT_TRUE(validate(p).ok()) << seed;
    CaptureOptions naive;
    naive.require_eligible = false;
    std::map<BlockId, CapturedGraph> g{{p.blocks[0].id, capture(p, p.blocks[0], naive)}};
    EXPECT_TRUE(compare_outputs(run_eager(p), run_replay(p, g)).has_value()) << seed;
    Program t = transform_until_eligible(p).program;
    EXPECT_FALSE(compare_outputs(run_eager(p), run_replay(t, capture_eligible(t))).has_value()) << seed;
  }
}

// Every fixture, large analogs included: transformed eager, graph replay and
// PI replay all agree with the original eager run.
TEST(Properties, TransformPreservesEveryFixture) {
  for (const auto& name : fixture_names()) {
    Program p = build_fixture(name);
    p.iterations = std::min(p.iterations, 5);
    Program w = transform_until_eligible(p).program;
    ASSERT_TRUE(validate(w).ok()) << name;
    const RunResult eager = run_eager(p);
    auto g = capture_eligible(w);
    std::map<BlockId, CapturedGraph> pi;
    for (const auto& [id, c] : g) pi.emplace(id, apply_pi(w, c));
    EXPECT_FALSE(compare_outputs(eager, run_eager(w), 1e-12).has_value()) << name;
    EXPECT_FALSE(compare_outputs(eager, run_replay(w, g), 1e-12).has_value()) << name;
    EXPECT_FALSE(compare_outputs(eager, run_replay(w, pi), 1e-12).has_value()) << name;
  }
}

// Causes are only ever removed: initial = repaired + remaining.
TEST(Properties, TransformOnlyRemovesCauses) {
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    Program p = random_program(seed);
    TransformResult r = transform_until_eligible(p);
    std::size_t remaining = 0;
    for (const auto& rep : r.reports) remaining += rep.causes.size();
    EXPECT_EQ(cause_count(p), r.log.entries.size() + remaining) << seed;
    EXPECT_EQ(remaining, cause_count(r.program)) << seed;
    EXPECT_LE(r.max_passes, kMaxTransformPasses);
  }
}

TEST(Properties, CaptureAndIndirectionStructure) {
  for (std::uint64_t seed = 1; seed <= 120; ++seed) {
    RandomSpec rs;
    rs.p_opaque = 0.6;
    rs.p_duplicate_operand = 0.3;
    Program p = transform_until_eligible(random_program(seed, rs)).program;
    for (const auto& [id, base] : capture_eligible(p)) {
      const Block& b = *std::find_if(p.blocks.begin(), p.blocks.end(), [&](const Block& x) { return x.id == id; });
      const auto internal = allocated_in(b);
      for (const auto& c : base.copy_plan) EXPECT_FALSE(internal.count(c.source)) << seed;

      CapturedGraph g = apply_pi(p, base);
      if (g.prelude) {
        std::map<NodeId, std::size_t> pos;
        for (std::size_t i = 0; i < g.nodes.size(); ++i) pos[g.nodes[i].id] = i;
        for (const auto& patch : g.prelude->patches) EXPECT_LT(pos.at(g.prelude->node), pos.at(patch.kernel)) << seed;
      }
      for (const auto& f : g.fallbacks) {
        const Placeholder* ph = g.find_placeholder(f.placeholder);
        ASSERT_NE(ph, nullptr);
        EXPECT_EQ(ph->role, PlaceholderRole::Data) << seed;
        const bool copied = std::any_of(g.copy_plan.begin(), g.copy_plan.end(),
                                        [&](const CopyAction& c) { return c.target == f.placeholder; });
        EXPECT_TRUE(copied) << seed;
      }
      if (g.fallbacks.empty()) EXPECT_EQ(g.stats.bytes_copied_per_replay, 8 * g.stats.indirected_param_count);
    }
  }
}
