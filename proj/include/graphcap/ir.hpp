// SPDX-License-Identifier: Apache-2.0
//
// Executable kernel-launch IR: tensors, parameter bindings, nodes, blocks and
// programs. Every value here is a plain value type; passes take a program by
// const reference and return a new one.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "graphcap/cost_model.hpp"
#include "graphcap/ids.hpp"

namespace graphcap {

enum class Placement { Host, Device };

// How a tensor or scalar obtains its values: at allocation time (TensorDesc::init)
// or at the start of every iteration (IterationInput).
enum class RuleKind {
  Fill,      // every element = value
  Values,    // explicit element list, length == num_elems
  Uniform,   // seeded uniform draw in [lo, hi)
  Ramp,      // start + step * iteration
  Sequence,  // values[iteration % values.size()]
};

struct ValueRule {
  RuleKind kind = RuleKind::Fill;
  double value = 0.0;
  double lo = -1.0;
  double hi = 1.0;
  double start = 0.0;
  double step = 1.0;
  std::vector<double> values;

  bool operator==(const ValueRule&) const = default;
};

struct TensorDesc {
  TensorId id;
  Placement device = Placement::Device;
  std::uint32_t elem_size = 8;
  std::uint64_t num_elems = 1;
  bool is_scalar = false;
  // Declared iteration-invariant: only its Alloc ever writes it.
  bool constant = false;
  std::optional<ValueRule> init;

  std::uint64_t total_bytes() const { return static_cast<std::uint64_t>(elem_size) * num_elems; }
  bool operator==(const TensorDesc&) const = default;
};

// A host-side scalar variable (a Python float analog). Kernels receive it by value.
struct ScalarVar {
  ScalarId id;
  std::string name;
  std::uint32_t elem_size = 8;

  bool operator==(const ScalarVar&) const = default;
};

enum class BindingKind { ScalarByValue, DevicePtr, HostPtr, PtrCell };

// Assigned by capture. Static covers persistent tensors (allocated once in the
// init section) whose address never changes between iterations.
enum class Mutability { Unassigned, External, Internal, Static };

struct ParamBinding {
  std::uint32_t slot = 0;
  BindingKind kind = BindingKind::DevicePtr;
  TensorId tensor;  // DevicePtr / HostPtr
  ScalarId scalar;  // ScalarByValue
  CellId cell;      // PtrCell
  Mutability mutability = Mutability::Unassigned;

  static ParamBinding device(std::uint32_t slot, TensorId t);
  static ParamBinding host(std::uint32_t slot, TensorId t);
  static ParamBinding by_value(std::uint32_t slot, ScalarId s);
  static ParamBinding ptr_cell(std::uint32_t slot, CellId c);

  bool is_pointer() const { return kind != BindingKind::ScalarByValue; }
  bool references_tensor() const {
    return kind == BindingKind::DevicePtr || kind == BindingKind::HostPtr;
  }
  bool operator==(const ParamBinding&) const = default;
};

enum class Opcode {
  ElemAdd,              // out = a + b
  ElemMul,              // out = a * b
  ScaleByScalar,        // out = x * s   (x / s when attrs.divide)
  Copy,                 // out = x
  ReduceSum,            // out[0] = sum(x), left to right
  MatMulLite,           // out[m,n] = a[m,k] * b[k,n]  (b given as [n,k] when transpose_b)
  CollectiveAllReduce,  // out = x_0 + x_1 + ... + x_{r-1}
};

struct KernelAttrs {
  std::uint32_t m = 0;
  std::uint32_t k = 0;
  std::uint32_t n = 0;
  bool transpose_b = false;
  bool divide = false;

  bool operator==(const KernelAttrs&) const = default;
};

// Slot 0 of every kernel is its output.
struct KernelLaunch {
  std::string kernel_id;
  Opcode opcode = Opcode::Copy;
  bool rewritable = true;  // JIT-generated; false for opaque vendor binaries
  bool uses_rng = false;
  bool in_place = false;
  std::vector<ParamBinding> params;
  KernelAttrs attrs;
  double duration_us = 1.0;

  bool operator==(const KernelLaunch&) const = default;
};

struct MemCopy {
  TensorId src;
  TensorId dst;
  bool sync = false;

  bool operator==(const MemCopy&) const = default;
};

struct Alloc {
  TensorId tensor;
  bool operator==(const Alloc&) const = default;
};

struct Free {
  TensorId tensor;
  bool operator==(const Free&) const = default;
};

struct DeviceSync {
  bool operator==(const DeviceSync&) const = default;
};

// Inserted by parameter indirection at the head of a captured graph.
struct PreludeKernel {
  double duration_us = 1.0;
  bool operator==(const PreludeKernel&) const = default;
};

enum class NodeKind { KernelLaunch, MemCopy, Alloc, Free, DeviceSync, PreludeKernel };

struct Node {
  NodeId id;
  std::variant<KernelLaunch, MemCopy, Alloc, Free, DeviceSync, PreludeKernel> op;

  NodeKind kind() const { return static_cast<NodeKind>(op.index()); }

  KernelLaunch* kernel() { return std::get_if<KernelLaunch>(&op); }
  const KernelLaunch* kernel() const { return std::get_if<KernelLaunch>(&op); }
  MemCopy* copy() { return std::get_if<MemCopy>(&op); }
  const MemCopy* copy() const { return std::get_if<MemCopy>(&op); }

  bool operator==(const Node&) const = default;
};

// Host scalar staged into a 1-element device tensor before the block runs.
// Executes outside any captured graph.
struct ScalarStage {
  ScalarId scalar;
  TensorId tensor;
  bool operator==(const ScalarStage&) const = default;
};

struct Block {
  BlockId id;
  std::vector<ParamBinding> inputs;  // per-iteration external values
  std::vector<ScalarStage> prologue;
  std::vector<Node> nodes;
  std::vector<Node> epilogue;  // post-replay MemCopy nodes, never captured
  std::vector<TensorId> outputs;

  bool operator==(const Block&) const = default;
};

struct IterationInput {
  std::optional<TensorId> tensor;
  std::optional<ScalarId> scalar;
  ValueRule rule;

  bool operator==(const IterationInput&) const = default;
};

struct Program {
  std::string name;
  CostModel cost;
  std::map<TensorId, TensorDesc> tensors;
  std::map<ScalarId, ScalarVar> scalars;
  std::vector<IterationInput> iteration_inputs;
  std::vector<Node> init_nodes;
  std::vector<Block> blocks;
  int iterations = 1;
  std::uint64_t seed = 0;

  const TensorDesc* find_tensor(TensorId id) const;
  const Block* find_block(BlockId id) const;
  Block* find_block(BlockId id);
  const TensorDesc& tensor(TensorId id) const;

  TensorId next_tensor_id() const;
  NodeId next_node_id() const;

  bool operator==(const Program&) const = default;
};

// Tensors a node reads and writes. Derived from the node's operands, never
// stored, so they cannot drift from the parameter list.
std::vector<TensorId> reads(const Node& node);
std::vector<TensorId> writes(const Node& node);

// Parameter layout of an opcode: number of parameter slots (0 means variadic,
// at least 3, for CollectiveAllReduce).
std::size_t opcode_arity(Opcode op);
// Only ScaleByScalar slot 2 may carry a scalar operand.
bool slot_accepts_scalar(Opcode op, std::uint32_t slot);
// Opaque vendor routines and collectives require device-resident operands.
bool opcode_requires_device_inputs(Opcode op);

std::size_t kernel_count(const Block& block);
std::size_t kernel_count(const Program& program);

std::string_view to_string(Placement p);
std::string_view to_string(RuleKind k);
std::string_view to_string(BindingKind k);
std::string_view to_string(Mutability m);
std::string_view to_string(Opcode op);
std::string_view to_string(NodeKind k);

std::optional<Placement> parse_placement(std::string_view s);
std::optional<RuleKind> parse_rule_kind(std::string_view s);
std::optional<BindingKind> parse_binding_kind(std::string_view s);
std::optional<Mutability> parse_mutability(std::string_view s);
std::optional<Opcode> parse_opcode(std::string_view s);
std::optional<NodeKind> parse_node_kind(std::string_view s);

// Convenience constructors used by fixtures and tests.
Node make_kernel(NodeId id, std::string kernel_id, Opcode op, std::vector<ParamBinding> params,
                 double duration_us, bool rewritable = true);
Node make_copy(NodeId id, TensorId src, TensorId dst, bool sync = false);
Node make_alloc(NodeId id, TensorId t);
Node make_free(NodeId id, TensorId t);
Node make_sync(NodeId id);

}  // namespace graphcap
