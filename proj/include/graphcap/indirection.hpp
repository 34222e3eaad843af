// SPDX-License-Identifier: Apache-2.0
//
// Parameter indirection: replaces per-replay data copies into placeholders with
// 8-byte pointer-cell updates. Rewritable kernels read through the cell
// directly; opaque kernels get their recorded argument slot patched by a
// prelude node at the head of the graph.

#pragma once

#include "graphcap/capture.hpp"
#include "graphcap/param_buffer.hpp"

namespace graphcap {

// Argument image of a frozen node built from symbolic addresses (one per
// tensor, scalar or cell id); used to locate placeholder slots without a machine.
ParamBufferImage static_image(const Node& node);

// `program` supplies fresh node ids and the prelude cost constants. Parameters
// whose offset cannot be pinned down, or that feed a MemCopy, keep their Data
// copy and are listed in the result's `fallbacks`.
CapturedGraph apply_pi(const Program& program, const CapturedGraph& captured);

}  // namespace graphcap
