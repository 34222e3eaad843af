// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>

#include "../oracles/oracles.hpp"
#include "graphcap/kernels.hpp"

using namespace graphcap;
using kernels::Vec;

namespace {

Vec random_vec(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vec v(n);
  for (double& x : v) x = u(rng);
  return v;
}

}  // namespace

TEST(Kernels, ElementwiseBackendsAreBitIdentical) {
  std::mt19937_64 rng(3);
  for (std::size_t n : {1u, 7u, 1000u, 100003u}) {
    const Vec a = random_vec(rng, n), b = random_vec(rng, n);
    Vec s(n), p(n);
    kernels::serial::elem_add(s, a, b);
    kernels::parallel::elem_add(p, a, b);
    EXPECT_EQ(s, p);
    for (std::size_t i = 0; i < n; ++i) ASSERT_EQ(s[i], a[i] + b[i]);
    kernels::serial::elem_mul(s, a, b);
    kernels::parallel::elem_mul(p, a, b);
    EXPECT_EQ(s, p);
    kernels::serial::scale(s, a, 3.0, true);
    kernels::parallel::scale(p, a, 3.0, true);
    EXPECT_EQ(s, p);
    EXPECT_EQ(s[0], a[0] / 3.0);
  }
}

TEST(Kernels, MatMulMatchesDenseOracle) {
  std::mt19937_64 rng(5);
  for (bool tb : {false, true}) {
    const std::uint32_t m = 13, k = 7, n = 11;
    const Vec a = random_vec(rng, m * k), b = random_vec(rng, k * n);
    KernelAttrs at{m, k, n, tb, false};
    Vec s(m * n), p(m * n);
    kernels::serial::matmul(s, a, b, at);
    kernels::parallel::matmul(p, a, b, at);
    EXPECT_EQ(s, p);
    const Vec o = oracle::matmul(a, b, m, k, n, tb);
    for (std::size_t i = 0; i < o.size(); ++i) EXPECT_DOUBLE_EQ(s[i], o[i]);
  }
}

TEST(Kernels, ReduceSumAgreesWithinRounding) {
  std::mt19937_64 rng(8);
  const Vec x = random_vec(rng, 50001);
  Vec s(1), p(1);
  kernels::serial::reduce_sum(s, x);
  kernels::parallel::reduce_sum(p, x);
  double ref = 0.0;
  for (double v : x) ref += v;
  EXPECT_EQ(s[0], ref);
  EXPECT_NEAR(p[0], ref, 1e-9);
}

TEST(Kernels, AllReduceSumsReplicas) {
  std::mt19937_64 rng(9);
  const Vec a = random_vec(rng, 64), b = random_vec(rng, 64), c = random_vec(rng, 64);
  Vec s(64), p(64);
  kernels::serial::all_reduce(s, {&a, &b, &c});
  kernels::parallel::all_reduce(p, {&a, &b, &c});
  EXPECT_EQ(s, p);
  for (std::size_t i = 0; i < 64; ++i) EXPECT_EQ(s[i], (a[i] + b[i]) + c[i]);
}
