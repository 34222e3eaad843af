// SPDX-License-Identifier: Apache-2.0
//
// Workload builders: named analogs sized so their kernel counts, copy sizes
// and durations reproduce published ratios, one fixture per capture blocker,
// and a seeded random program generator.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "graphcap/ir.hpp"

namespace graphcap {

// Per-kernel or per-block probabilities of each ingredient.
struct RandomSpec {
  int min_blocks = 1;
  int max_blocks = 3;
  int min_kernels = 2;
  int max_kernels = 8;
  int iterations = 4;
  double p_scalar = 0.15;          // ScaleByScalar takes a host scalar by value
  double p_host_tensor = 0.08;     // kernel reads a constant host tensor
  double p_not_hoistable = 0.05;   // block reads a per-iteration host tensor
  double p_sync_copy = 0.15;       // blocking copy of constant host data
  double p_async_host_copy = 0.05;
  double p_device_sync = 0.05;
  double p_host_output = 0.15;
  double p_input_mutation = 0.05;
  double p_rng = 0.1;
  double p_opaque = 0.25;
  double p_duplicate_operand = 0.05;
  double p_free = 0.1;
  double p_pass_output = 0.5;  // later block consumes an earlier block's output
};

struct FixtureSpec {
  std::string name;  // a named fixture, "random", or empty for an empty program
  std::uint64_t seed = 0;
  std::optional<int> iterations;
  RandomSpec random;
};

// Throws InvalidSpec for unknown names or out-of-range parameters.
Program build(const FixtureSpec& spec);
Program build_fixture(const std::string& name);
Program random_program(std::uint64_t seed, const RandomSpec& spec = {});

// Named fixtures shipped as JSON.
std::vector<std::string> fixture_names();

// Constants the analogs are built from; tests check them against the
// published figures.
namespace analog {
inline constexpr std::size_t kStTotalKernels = 993;
inline constexpr std::size_t kStEligibleKernels = 51;
inline constexpr std::size_t kStScalarBlockedKernels = 686;
inline constexpr std::size_t kStExternalsPerGraph = 14;
inline constexpr std::uint64_t kStExternalBytes = 32768;
inline constexpr std::size_t kXlnetBlockKernels = 413;
inline constexpr std::size_t kXlnetOtherKernels = 3;
inline constexpr std::uint64_t kXlnetExternalBytes = 4096;
inline constexpr std::size_t kDalleKernels = 740;
inline constexpr double kDalleComputeUs = 3400.0;
inline constexpr double kDalleEagerUs = 14000.0;
inline constexpr std::size_t kDalleHoistKernels = 314;
inline constexpr std::uint64_t kDrExternalBytes = 3221225472ULL;
inline constexpr double kEosRegression = 1.29;
inline constexpr std::size_t kVmBlocks = 21;
inline constexpr std::size_t kVmBeneficial = 4;
inline constexpr std::size_t kCorpusBlocks = 123;
inline constexpr std::size_t kCorpusBeneficial = 97;
inline constexpr double kCopyFraction = 0.24;
}  // namespace analog

}  // namespace graphcap
