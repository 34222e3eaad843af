// SPDX-License-Identifier: Apache-2.0
//
// Small hand-built programs for unit tests.

#pragma once

#include <gtest/gtest.h>

#include "graphcap/error.hpp"
#include "graphcap/ir.hpp"

namespace gt {

using namespace graphcap;

inline TensorId T(std::uint32_t v) { return TensorId{v}; }
inline NodeId N(std::uint32_t v) { return NodeId{v}; }
inline BlockId B(std::uint32_t v) { return BlockId{v}; }
inline ScalarId S(std::uint32_t v) { return ScalarId{v}; }

inline TensorDesc desc(std::uint32_t id, Placement where, std::uint64_t elems, bool constant = false) {
  TensorDesc t;
  t.id = TensorId{id};
  t.device = where;
  t.num_elems = elems;
  t.constant = constant;
  return t;
}

inline ValueRule values(std::vector<double> v) {
  ValueRule r;
  r.kind = RuleKind::Values;
  r.values = std::move(v);
  return r;
}

inline ValueRule sequence(std::vector<double> v) {
  ValueRule r;
  r.kind = RuleKind::Sequence;
  r.values = std::move(v);
  return r;
}

inline ValueRule uniform(double lo = -1.0, double hi = 1.0) {
  ValueRule r;
  r.kind = RuleKind::Uniform;
  r.lo = lo;
  r.hi = hi;
  return r;
}

inline void add_tensor(Program& p, TensorDesc t) { p.tensors.emplace(t.id, std::move(t)); }

inline void add_input(Program& p, TensorId t, ValueRule rule) {
  IterationInput in;
  in.tensor = t;
  in.rule = std::move(rule);
  p.iteration_inputs.push_back(in);
}

inline void add_scalar(Program& p, std::uint32_t id, ValueRule rule) {
  ScalarVar s;
  s.id = ScalarId{id};
  s.name = "s" + std::to_string(id);
  p.scalars.emplace(s.id, s);
  IterationInput in;
  in.scalar = s.id;
  in.rule = std::move(rule);
  p.iteration_inputs.push_back(in);
}

inline Node add3(std::uint32_t id, Opcode op, std::uint32_t out, std::uint32_t a, std::uint32_t b,
                 double dur = 1.0) {
  return make_kernel(NodeId{id}, "k" + std::to_string(id), op,
                     {ParamBinding::device(0, TensorId{out}), ParamBinding::device(1, TensorId{a}),
                      ParamBinding::device(2, TensorId{b})},
                     dur);
}

inline Node copyk(std::uint32_t id, std::uint32_t out, std::uint32_t in, double dur = 1.0) {
  return make_kernel(NodeId{id}, "k" + std::to_string(id), Opcode::Copy,
                     {ParamBinding::device(0, TensorId{out}), ParamBinding::device(1, TensorId{in})}, dur);
}

// One block: out(3) = x(1) + y(2), both device iteration inputs of `n` elements.
inline Program simple_add(std::uint64_t n = 4, int iterations = 3) {
  Program p;
  p.name = "simple_add";
  p.iterations = iterations;
  add_tensor(p, desc(1, Placement::Device, n));
  add_tensor(p, desc(2, Placement::Device, n));
  add_tensor(p, desc(3, Placement::Device, n));
  add_input(p, T(1), uniform());
  add_input(p, T(2), uniform());
  Block b;
  b.id = B(1);
  b.inputs = {ParamBinding::device(0, T(1)), ParamBinding::device(0, T(2))};
  b.nodes = {make_alloc(N(1), T(3)), add3(2, Opcode::ElemAdd, 3, 1, 2, 10.0)};
  b.outputs = {T(3)};
  p.blocks.push_back(b);
  return p;
}

template <class F>
ErrorCode error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::InternalInvariant;
}

}  // namespace gt
