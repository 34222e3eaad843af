// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

namespace graphcap {

// Latency and bandwidth constants for the launch simulator. Times are in
// microseconds, bandwidths in GB/s (1 GB = 1e9 bytes).
struct CostModel {
  double launch_latency_us = 7.5;   // CPU cost to issue one kernel or copy
  double graph_launch_us = 7.5;     // one per replay
  double device_dispatch_us = 0.5;  // per GPU node inside a graph
  double d2d_bandwidth_GBps = 2000.0;
  double d2d_fixed_us = 0.5;
  double h2d_bandwidth_GBps = 25.0;
  double h2d_fixed_us = 1.5;
  double prelude_base_us = 2.0;
  double prelude_per_patch_us = 0.25;
  double deref_per_kernel_us = 0.05;  // rewritten kernels dereferencing pointer cells
  double rng_reset_us = 5.0;          // per replay when any node draws random numbers
  double host_obj_rebuild_us = 2.0;   // per block output, per replay

  bool operator==(const CostModel&) const = default;

  double d2d_copy_us(std::uint64_t bytes) const {
    return static_cast<double>(bytes) / (d2d_bandwidth_GBps * 1e3) + d2d_fixed_us;
  }
  double h2d_copy_us(std::uint64_t bytes) const {
    return static_cast<double>(bytes) / (h2d_bandwidth_GBps * 1e3) + h2d_fixed_us;
  }
  double prelude_us(std::size_t patches) const {
    return patches == 0 ? 0.0 : prelude_base_us + prelude_per_patch_us * static_cast<double>(patches);
  }

  // True when every field is non-negative and both bandwidths are positive.
  bool valid() const;
};

}  // namespace graphcap
