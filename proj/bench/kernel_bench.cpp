// SPDX-License-Identifier: Apache-2.0
//
// Serial reference kernels against their OpenMP counterparts, plus the
// interpreter end to end on both backends.

#include <benchmark/benchmark.h>

#include <random>

#include "graphcap/fixtures.hpp"
#include "graphcap/interpreter.hpp"
#include "graphcap/kernels.hpp"

using namespace graphcap;
using kernels::Vec;

namespace {

Vec random_vec(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vec v(n);
  for (double& x : v) x = u(rng);
  return v;
}

template <void (*F)(Vec&, const Vec&, const Vec&)>
void BM_Elementwise(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Vec a = random_vec(n, 1), b = random_vec(n, 2);
  Vec out(n);
  for (auto _ : state) {
    F(out, a, b);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * n * 3 * sizeof(double)));
}

template <void (*F)(Vec&, const Vec&)>
void BM_Reduce(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Vec x = random_vec(n, 3);
  Vec out(1);
  for (auto _ : state) {
    F(out, x);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * n * sizeof(double)));
}

template <void (*F)(Vec&, const Vec&, const Vec&, const KernelAttrs&)>
void BM_MatMul(benchmark::State& state) {
  const auto d = static_cast<std::uint32_t>(state.range(0));
  const Vec a = random_vec(std::size_t{d} * d, 4), b = random_vec(std::size_t{d} * d, 5);
  Vec out(std::size_t{d} * d);
  const KernelAttrs attrs{d, d, d, false, false};
  for (auto _ : state) {
    F(out, a, b, attrs);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * 2 * d * d * d);
}

void BM_Interpreter(benchmark::State& state) {
  RunOptions o;
  o.backend = state.range(0) == 0 ? kernels::Backend::Serial : kernels::Backend::Parallel;
  const Program p = build_fixture("fig2");
  for (auto _ : state) benchmark::DoNotOptimize(run_eager(p, o));
}

}  // namespace

BENCHMARK(BM_Elementwise<kernels::serial::elem_add>)->Name("elem_add/serial")->Range(1 << 10, 1 << 22);
BENCHMARK(BM_Elementwise<kernels::parallel::elem_add>)->Name("elem_add/parallel")->Range(1 << 10, 1 << 22);
BENCHMARK(BM_Reduce<kernels::serial::reduce_sum>)->Name("reduce_sum/serial")->Range(1 << 10, 1 << 22);
BENCHMARK(BM_Reduce<kernels::parallel::reduce_sum>)->Name("reduce_sum/parallel")->Range(1 << 10, 1 << 22);
BENCHMARK(BM_MatMul<kernels::serial::matmul>)->Name("matmul/serial")->RangeMultiplier(2)->Range(16, 256);
BENCHMARK(BM_MatMul<kernels::parallel::matmul>)->Name("matmul/parallel")->RangeMultiplier(2)->Range(16, 256);
BENCHMARK(BM_Interpreter)->Name("run_eager/fig2")->Arg(0)->Arg(1);

BENCHMARK_MAIN();
