// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "graphcap/cgct.hpp"
#include "graphcap/fixtures.hpp"
#include "graphcap/selector.hpp"
#include "helpers.hpp"

using namespace gt;

namespace {

bool uses_rng(const Block& b) {
  return std::any_of(b.nodes.begin(), b.nodes.end(), [](const Node& n) { return n.kernel() && n.kernel()->uses_rng; });
}

Choice only_choice(const std::string& fixture) {
  Program p = transform_until_eligible(build_fixture(fixture)).program;
  return select(p.blocks.at(0), p, p.cost).choice;
}

}  // namespace

TEST(Select, EosAnalogAvoidsTheRegression) {
  Program p = build_fixture("eos");
  SelectionDecision d = select(p.blocks[0], p, p.cost);
  EXPECT_EQ(d.choice, Choice::NoGraph);
  ASSERT_TRUE(d.graph.has_value());
  EXPECT_NEAR(d.graph->total_us / d.eager.total_us, analog::kEosRegression, 1e-3);
}

TEST(Select, TinyTensorKeepsTheDataCopy) {
  EXPECT_EQ(only_choice("tiny_tensor"), Choice::Graph);
}

TEST(Select, LargeCopyTakesIndirection) {
  EXPECT_EQ(only_choice("dr_i"), Choice::GraphWithPI);
}

TEST(Select, IneligibleBlockHasOnlyEager) {
  Program p = build_fixture("cause_device_sync");
  SelectionDecision d = select(p.blocks[0], p, p.cost);
  EXPECT_EQ(d.choice, Choice::NoGraph);
  EXPECT_FALSE(d.graph.has_value());
  EXPECT_EQ(d.margin_us, 0.0);
}

TEST(SelectProgram, VmAnalogEnablesFour) {
  Program p = build_fixture("vm");
  ProgramSelection s = select_program(p, p.cost);
  EXPECT_EQ(s.summary.enabled, analog::kVmBeneficial);
  EXPECT_EQ(s.summary.disabled, analog::kVmBlocks - analog::kVmBeneficial);
  EXPECT_EQ(s.summary.candidates, analog::kVmBlocks);
}

TEST(SelectProgram, CorpusEnables97Of123) {
  Program p = build_fixture("selection_corpus");
  ProgramSelection s = select_program(p, p.cost);
  EXPECT_EQ(s.summary.candidates, analog::kCorpusBlocks);
  EXPECT_EQ(s.summary.enabled, analog::kCorpusBeneficial);
}

TEST(SelectProgram, AllBeneficialCorpusDisablesNothing) {
  Program p = build_fixture("selection_corpus");
  std::erase_if(p.blocks, uses_rng);
  ASSERT_EQ(p.blocks.size(), analog::kCorpusBeneficial);
  EXPECT_EQ(select_program(p, p.cost).summary.disabled, 0u);
}

TEST(SelectProgram, SummaryCountsMatchDecisions) {
  Program p = transform_until_eligible(build_fixture("st")).program;
  ProgramSelection s = select_program(p, p.cost);
  std::size_t enabled = 0, pi = 0, disabled = 0, ineligible = 0;
  for (const auto& [id, d] : s.decisions) {
    if (!d.graph) {
      ++ineligible;
    } else if (d.choice == Choice::NoGraph) {
      ++disabled;
    } else {
      ++enabled;
      if (d.choice == Choice::GraphWithPI) ++pi;
    }
  }
  EXPECT_EQ(s.summary.enabled, enabled);
  EXPECT_EQ(s.summary.pi_enabled, pi);
  EXPECT_EQ(s.summary.disabled, disabled);
  EXPECT_EQ(s.summary.ineligible, ineligible);
  EXPECT_EQ(s.decisions.size(), p.blocks.size());
}

// Never-worse, determinism and composition over random programs.
TEST(SelectProperties, HoldOnRandomPrograms) {
  for (std::uint64_t seed = 1; seed <= 120; ++seed) {
    Program p = transform_until_eligible(random_program(seed)).program;
    ProgramSelection s = select_program(p, p.cost);
    ProgramSelection again = select_program(p, p.cost);
    for (const auto& [id, d] : s.decisions) {
      const double chosen = d.choice == Choice::NoGraph  ? d.eager.total_us
                            : d.choice == Choice::Graph ? d.graph->total_us
                                                        : d.graph_pi->total_us;
      EXPECT_LE(chosen, d.eager.total_us) << seed;
      if (d.graph) EXPECT_LE(chosen, d.graph->total_us) << seed;
      if (d.graph_pi) EXPECT_LE(chosen, d.graph_pi->total_us) << seed;
      EXPECT_GE(d.margin_us, 0.0);
      EXPECT_EQ(again.decisions.at(id).choice, d.choice);
    }
    EXPECT_LE(s.summary.selected_total_us, s.summary.eager_total_us + 1e-9) << seed;
    EXPECT_LE(s.summary.selected_total_us, s.summary.always_graph_total_us + 1e-9) << seed;
  }
}

// Equal totals resolve toward fewer mechanisms.
TEST(Select, TiesPreferFewerMechanisms) {
  Program p = build_fixture("tiny_tensor");
  CostModel c = p.cost;
  c.h2d_fixed_us = 0.0;
  c.h2d_bandwidth_GBps = 1e12;
  c.d2d_fixed_us = 0.0;
  c.d2d_bandwidth_GBps = 1e12;
  c.deref_per_kernel_us = 0.0;
  c.prelude_base_us = 0.0;
  c.prelude_per_patch_us = 0.0;
  SelectionDecision d = select(p.blocks[0], p, c);
  ASSERT_TRUE(d.graph && d.graph_pi);
  if (d.graph->total_us == d.graph_pi->total_us) EXPECT_EQ(d.choice, Choice::Graph);
}
