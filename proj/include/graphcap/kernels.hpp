// SPDX-License-Identifier: Apache-2.0
//
// Numeric bodies of the opcode algebra. `serial` is the reference; `parallel`
// splits work with OpenMP. Elementwise ops and MatMulLite are bit-identical
// across the two; ReduceSum in `parallel` sums fixed-size chunks left to right
// and then the partials left to right, so it can differ from `serial` in the
// last bits.

#pragma once

#include <cstddef>
#include <vector>

#include "graphcap/ir.hpp"

namespace graphcap::kernels {

using Vec = std::vector<double>;

enum class Backend { Serial, Parallel };

namespace serial {
void elem_add(Vec& out, const Vec& a, const Vec& b);
void elem_mul(Vec& out, const Vec& a, const Vec& b);
void scale(Vec& out, const Vec& x, double s, bool divide);
void reduce_sum(Vec& out, const Vec& x);
void matmul(Vec& out, const Vec& a, const Vec& b, const KernelAttrs& attrs);
void all_reduce(Vec& out, const std::vector<const Vec*>& replicas);
}  // namespace serial

namespace parallel {
void elem_add(Vec& out, const Vec& a, const Vec& b);
void elem_mul(Vec& out, const Vec& a, const Vec& b);
void scale(Vec& out, const Vec& x, double s, bool divide);
void reduce_sum(Vec& out, const Vec& x);
void matmul(Vec& out, const Vec& a, const Vec& b, const KernelAttrs& attrs);
void all_reduce(Vec& out, const std::vector<const Vec*>& replicas);
}  // namespace parallel

// Evaluates `op` over its input operands (slots 1..n-1, in order). For
// ScaleByScalar the second operand holds the scalar in element 0. Returns the
// new output contents; never aliases the inputs.
Vec evaluate(Opcode op, const KernelAttrs& attrs, const std::vector<const Vec*>& inputs,
             std::size_t out_elems, Backend backend = Backend::Serial);

}  // namespace graphcap::kernels
