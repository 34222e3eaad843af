// SPDX-License-Identifier: Apache-2.0

#include "graphcap/kernels.hpp"

#include <algorithm>

#include "graphcap/error.hpp"

namespace graphcap::kernels {

namespace {

void require_same(const Vec& a, const Vec& b, const char* op) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::InternalInvariant, std::string(op) + ": operand sizes differ");
  }
}

double b_at(const Vec& b, const KernelAttrs& at, std::size_t p, std::size_t j) {
  return at.transpose_b ? b[j * at.k + p] : b[p * at.n + j];
}

void check_matmul(const Vec& a, const Vec& b, const KernelAttrs& at) {
  if (a.size() != std::size_t{at.m} * at.k || b.size() != std::size_t{at.k} * at.n) {
    throw Error(ErrorCode::InternalInvariant, "MatMulLite: operand sizes do not match m/k/n");
  }
}

constexpr std::size_t kReduceChunk = 4096;

}  // namespace

namespace serial {

void elem_add(Vec& out, const Vec& a, const Vec& b) {
  require_same(a, b, "ElemAdd");
  out.resize(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
}

void elem_mul(Vec& out, const Vec& a, const Vec& b) {
  require_same(a, b, "ElemMul");
  out.resize(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
}

void scale(Vec& out, const Vec& x, double s, bool divide) {
  out.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = divide ? x[i] / s : x[i] * s;
}

void reduce_sum(Vec& out, const Vec& x) {
  double acc = 0.0;
  for (double v : x) acc += v;
  out.assign(1, acc);
}

void matmul(Vec& out, const Vec& a, const Vec& b, const KernelAttrs& at) {
  check_matmul(a, b, at);
  out.assign(std::size_t{at.m} * at.n, 0.0);
  for (std::size_t i = 0; i < at.m; ++i) {
    for (std::size_t j = 0; j < at.n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < at.k; ++p) acc += a[i * at.k + p] * b_at(b, at, p, j);
      out[i * at.n + j] = acc;
    }
  }
}

void all_reduce(Vec& out, const std::vector<const Vec*>& replicas) {
  out = *replicas.front();
  for (std::size_t r = 1; r < replicas.size(); ++r) {
    require_same(out, *replicas[r], "CollectiveAllReduce");
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += (*replicas[r])[i];
  }
}

}  // namespace serial

namespace parallel {

void elem_add(Vec& out, const Vec& a, const Vec& b) {
  require_same(a, b, "ElemAdd");
  out.resize(a.size());
  const auto n = static_cast<std::ptrdiff_t>(a.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void elem_mul(Vec& out, const Vec& a, const Vec& b) {
  require_same(a, b, "ElemMul");
  out.resize(a.size());
  const auto n = static_cast<std::ptrdiff_t>(a.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void scale(Vec& out, const Vec& x, double s, bool divide) {
  out.resize(x.size());
  const auto n = static_cast<std::ptrdiff_t>(x.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = divide ? x[i] / s : x[i] * s;
}

void reduce_sum(Vec& out, const Vec& x) {
  const std::size_t chunks = (x.size() + kReduceChunk - 1) / kReduceChunk;
  std::vector<double> partial(chunks, 0.0);
  const auto nc = static_cast<std::ptrdiff_t>(chunks);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < nc; ++c) {
    const std::size_t lo = static_cast<std::size_t>(c) * kReduceChunk;
    const std::size_t hi = std::min(x.size(), lo + kReduceChunk);
    double acc = 0.0;
    for (std::size_t i = lo; i < hi; ++i) acc += x[i];
    partial[c] = acc;
  }
  double acc = 0.0;
  for (double v : partial) acc += v;
  out.assign(1, acc);
}

void matmul(Vec& out, const Vec& a, const Vec& b, const KernelAttrs& at) {
  check_matmul(a, b, at);
  out.assign(std::size_t{at.m} * at.n, 0.0);
  const auto rows = static_cast<std::ptrdiff_t>(at.m);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < at.n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < at.k; ++p) acc += a[i * at.k + p] * b_at(b, at, p, j);
      out[i * at.n + j] = acc;
    }
  }
}

void all_reduce(Vec& out, const std::vector<const Vec*>& replicas) {
  const Vec& first = *replicas.front();
  for (const Vec* r : replicas) require_same(first, *r, "CollectiveAllReduce");
  out.resize(first.size());
  const auto n = static_cast<std::ptrdiff_t>(first.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    double acc = first[i];
    for (std::size_t r = 1; r < replicas.size(); ++r) acc += (*replicas[r])[i];
    out[i] = acc;
  }
}

}  // namespace parallel

Vec evaluate(Opcode op, const KernelAttrs& attrs, const std::vector<const Vec*>& in,
             std::size_t out_elems, Backend backend) {
  const bool par = backend == Backend::Parallel;
  Vec out;
  auto need = [&](std::size_t n) {
    if (in.size() != n) throw Error(ErrorCode::InternalInvariant, "wrong operand count");
  };
  switch (op) {
    case Opcode::ElemAdd:
      need(2);
      par ? parallel::elem_add(out, *in[0], *in[1]) : serial::elem_add(out, *in[0], *in[1]);
      break;
    case Opcode::ElemMul:
      need(2);
      par ? parallel::elem_mul(out, *in[0], *in[1]) : serial::elem_mul(out, *in[0], *in[1]);
      break;
    case Opcode::ScaleByScalar:
      need(2);
      if (in[1]->empty()) throw Error(ErrorCode::MissingValue, "ScaleByScalar: empty scalar operand");
      par ? parallel::scale(out, *in[0], (*in[1])[0], attrs.divide)
          : serial::scale(out, *in[0], (*in[1])[0], attrs.divide);
      break;
    case Opcode::Copy:
      need(1);
      out = *in[0];
      break;
    case Opcode::ReduceSum:
      need(1);
      par ? parallel::reduce_sum(out, *in[0]) : serial::reduce_sum(out, *in[0]);
      break;
    case Opcode::MatMulLite:
      need(2);
      par ? parallel::matmul(out, *in[0], *in[1], attrs) : serial::matmul(out, *in[0], *in[1], attrs);
      break;
    case Opcode::CollectiveAllReduce:
      if (in.size() < 2) throw Error(ErrorCode::InternalInvariant, "all-reduce needs two replicas");
      par ? parallel::all_reduce(out, in) : serial::all_reduce(out, in);
      break;
  }
  if (out.size() != out_elems) {
    throw Error(ErrorCode::InternalInvariant, std::string(to_string(op)) + ": result has " +
                                                  std::to_string(out.size()) + " elements, output holds " +
                                                  std::to_string(out_elems));
  }
  return out;
}

}  // namespace graphcap::kernels
