// SPDX-License-Identifier: Apache-2.0
//
// Reference computations written independently of the library, used to freeze
// expected values in tests.

#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <vector>

namespace oracle {

// Kernel-only eager timeline: the CPU issues launch k at (k+1) * launch; the
// GPU runs each kernel after it is issued and after the previous one ends.
inline double eager_kernels_us(const std::vector<double>& durations, double launch) {
  double gpu_free = 0.0;
  for (std::size_t k = 0; k < durations.size(); ++k) {
    const double issued = static_cast<double>(k + 1) * launch;
    gpu_free = std::max(gpu_free, issued) + durations[k];
  }
  return gpu_free;
}

struct ReplayShape {
  std::vector<std::uint64_t> d2d_bytes;
  std::vector<std::uint64_t> h2d_bytes;
  std::vector<double> node_durations;  // kernels and in-graph copies
  std::size_t patches = 0;
  std::size_t deref_kernels = 0;
  bool rng = false;
  std::size_t outputs = 0;
};

struct Costs {
  double graph_launch = 7.5, dispatch = 0.5, d2d_gbps = 2000, d2d_fixed = 0.5, h2d_gbps = 25,
         h2d_fixed = 1.5, prelude_base = 2.0, prelude_patch = 0.25, deref = 0.05, rng = 5.0, rebuild = 2.0;
};

inline double replay_us(const ReplayShape& s, const Costs& c = {}) {
  double t = c.graph_launch;
  for (auto b : s.d2d_bytes) t += static_cast<double>(b) / (c.d2d_gbps * 1000.0) + c.d2d_fixed;
  for (auto b : s.h2d_bytes) t += static_cast<double>(b) / (c.h2d_gbps * 1000.0) + c.h2d_fixed;
  if (s.patches > 0) t += c.prelude_base + c.prelude_patch * static_cast<double>(s.patches);
  t += c.deref * static_cast<double>(s.deref_kernels);
  for (double d : s.node_durations) t += c.dispatch + d;
  if (s.rng) t += c.rng;
  t += c.rebuild * static_cast<double>(s.outputs);
  return t;
}

// Every byte offset (aligned or not) where `pattern` occurs.
inline std::vector<std::size_t> scan_all(const std::vector<std::uint8_t>& image, std::uint64_t pattern) {
  std::uint8_t p[8];
  for (int i = 0; i < 8; ++i) p[i] = static_cast<std::uint8_t>(pattern >> (8 * i));
  std::vector<std::size_t> hits;
  for (std::size_t off = 0; off + 8 <= image.size(); ++off) {
    if (std::memcmp(image.data() + off, p, 8) == 0) hits.push_back(off);
  }
  return hits;
}

inline std::vector<std::size_t> aligned(const std::vector<std::size_t>& hits) {
  std::vector<std::size_t> out;
  for (auto h : hits) {
    if (h % 8 == 0) out.push_back(h);
  }
  return out;
}

// Row-major dense product; b is [k,n], or [n,k] when transposed.
inline std::vector<double> matmul(const std::vector<double>& a, const std::vector<double>& b, std::size_t m,
                                  std::size_t k, std::size_t n, bool transpose_b) {
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t x = 0; x < k; ++x) acc += a[i * k + x] * (transpose_b ? b[j * k + x] : b[x * n + j]);
      out[i * n + j] = acc;
    }
  }
  return out;
}

// softmax-free attention scores: q k^T / temperature.
inline std::vector<double> scores(const std::vector<double>& q, const std::vector<double>& key, std::size_t d,
                                  double temperature) {
  auto s = matmul(q, key, d, d, d, true);
  for (double& v : s) v /= temperature;
  return s;
}

}  // namespace oracle
