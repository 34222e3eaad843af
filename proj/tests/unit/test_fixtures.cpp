// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "graphcap/eligibility.hpp"
#include "graphcap/fixtures.hpp"
#include "graphcap/validate.hpp"
#include "graphcap/workload_io.hpp"
#include "helpers.hpp"

using namespace gt;

namespace {

RandomSpec quiet() {
  RandomSpec s;
  s.p_scalar = s.p_host_tensor = s.p_not_hoistable = s.p_sync_copy = s.p_async_host_copy = 0.0;
  s.p_device_sync = s.p_host_output = s.p_input_mutation = 0.0;
  return s;
}

std::set<CauseKind> kinds_in(const Program& p) {
  std::set<CauseKind> out;
  for (const auto& b : p.blocks) {
    for (const auto& c : analyze(b, p).causes) out.insert(c.kind);
  }
  return out;
}

}  // namespace

TEST(Fixtures, DalleAnalogCounts) {
  Program p = build_fixture("dalle2");
  ASSERT_EQ(p.blocks.size(), 1u);
  EXPECT_EQ(kernel_count(p), analog::kDalleKernels);
  double sum = 0.0;
  for (const auto& n : p.blocks[0].nodes) {
    if (const auto* k = n.kernel()) sum += k->duration_us;
  }
  EXPECT_NEAR(sum, analog::kDalleComputeUs, 1e-6);
  EXPECT_NEAR(p.cost.launch_latency_us * analog::kDalleKernels, analog::kDalleEagerUs, 1e-6);
}

TEST(Fixtures, StAnalogCounts) {
  Program p = build_fixture("st");
  EXPECT_EQ(kernel_count(p), analog::kStTotalKernels);
  EXPECT_EQ(p.blocks.size(), 7u);
}

TEST(Fixtures, XlnetAnalogCounts) {
  Program p = build_fixture("xlnet_i");
  EXPECT_EQ(kernel_count(p.blocks[0]), analog::kXlnetBlockKernels);
  EXPECT_EQ(kernel_count(p), analog::kXlnetBlockKernels + analog::kXlnetOtherKernels);
}

TEST(Fixtures, EveryNamedFixtureValidates) {
  for (const auto& name : fixture_names()) {
    auto r = validate(build_fixture(name));
    EXPECT_TRUE(r.ok()) << name << ": " << (r.ok() ? "" : r.violations[0].message);
  }
}

TEST(Fixtures, EmptySpecGivesEmptyValidProgram) {
  Program p = build(FixtureSpec{});
  EXPECT_TRUE(p.blocks.empty());
  EXPECT_TRUE(p.tensors.empty());
  EXPECT_TRUE(validate(p).ok());
}

TEST(Fixtures, SeededRandomIsByteIdentical) {
  FixtureSpec s;
  s.name = "random";
  s.seed = 1234;
  EXPECT_EQ(dump_workload(build(s)), dump_workload(build(s)));
  FixtureSpec t = s;
  t.seed = 1235;
  EXPECT_NE(dump_workload(build(s)), dump_workload(build(t)));
}

TEST(Fixtures, BadSpecsAreRejected) {
  FixtureSpec unknown;
  unknown.name = "nope";
  EXPECT_EQ(error_of([&] { build(unknown); }), ErrorCode::InvalidSpec);
  FixtureSpec zero;
  zero.name = "fig2";
  zero.iterations = 0;
  EXPECT_EQ(error_of([&] { build(zero); }), ErrorCode::InvalidSpec);
  RandomSpec bad;
  bad.p_scalar = 1.5;
  EXPECT_EQ(error_of([&] { random_program(1, bad); }), ErrorCode::InvalidSpec);
  RandomSpec range;
  range.min_kernels = 5;
  range.max_kernels = 2;
  EXPECT_EQ(error_of([&] { random_program(1, range); }), ErrorCode::InvalidSpec);
}

// Each isolating fixture exhibits exactly its own cause kind.
TEST(Fixtures, CauseFixturesIsolateOneKind) {
  const std::map<std::string, CauseKind> expect{
      {"cause_cpu_scalar", CauseKind::CpuScalarParam}, {"cause_cpu_tensor", CauseKind::CpuTensorParam},
      {"cause_sync_memcopy", CauseKind::SyncMemcopy},  {"cause_device_sync", CauseKind::DeviceSync},
      {"cause_input_mutation", CauseKind::InputMutation},
  };
  for (const auto& [name, kind] : expect) EXPECT_EQ(kinds_in(build_fixture(name)), std::set<CauseKind>{kind}) << name;
  Program h = build_fixture("cause_host_output");
  EXPECT_EQ(kinds_in(h).count(CauseKind::HostOutput), 1u);
  std::set<CauseKind> first;
  for (const auto& c : analyze(h.blocks[0], h).causes) first.insert(c.kind);
  EXPECT_EQ(first, std::set<CauseKind>{CauseKind::HostOutput});
}

// Generator knobs control which causes appear: zero removes a kind, one makes
// it show up in most programs.
TEST(Fixtures, RandomCauseFrequenciesAreControllable) {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    Program p = random_program(seed, quiet());
    ASSERT_TRUE(validate(p).ok()) << seed;
    EXPECT_TRUE(kinds_in(p).empty()) << seed;
  }
  const std::pair<double RandomSpec::*, CauseKind> knobs[] = {
      {&RandomSpec::p_scalar, CauseKind::CpuScalarParam},   {&RandomSpec::p_host_tensor, CauseKind::CpuTensorParam},
      {&RandomSpec::p_sync_copy, CauseKind::SyncMemcopy},   {&RandomSpec::p_device_sync, CauseKind::DeviceSync},
      {&RandomSpec::p_host_output, CauseKind::HostOutput},  {&RandomSpec::p_input_mutation, CauseKind::InputMutation},
  };
  for (const auto& [field, kind] : knobs) {
    RandomSpec s = quiet();
    s.*field = 1.0;
    std::size_t hits = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      Program p = random_program(seed, s);
      ASSERT_TRUE(validate(p).ok()) << seed;
      hits += kinds_in(p).count(kind);
    }
    // knobs are per-opportunity: a scalar cause needs a Scale kernel to be drawn
    EXPECT_GE(hits, 14u) << to_string(kind);
  }
}

// The default generator reaches every cause kind across a modest seed range.
TEST(Fixtures, DefaultGeneratorSpansAllCauseKinds) {
  std::set<CauseKind> seen;
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    for (auto k : kinds_in(random_program(seed))) seen.insert(k);
  }
  EXPECT_EQ(seen.size(), 6u);
}
