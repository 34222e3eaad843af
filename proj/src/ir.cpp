// SPDX-License-Identifier: Apache-2.0

#include "graphcap/ir.hpp"

#include <algorithm>
#include <array>

#include "graphcap/error.hpp"

namespace graphcap {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::CycleDetected: return "CycleDetected";
    case ErrorCode::InvalidProgram: return "InvalidProgram";
    case ErrorCode::MissingValue: return "MissingValue";
    case ErrorCode::DeviceMismatch: return "DeviceMismatch";
    case ErrorCode::DanglingHostRef: return "DanglingHostRef";
    case ErrorCode::DanglingDeviceRef: return "DanglingDeviceRef";
    case ErrorCode::MissingInput: return "MissingInput";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::NotAScalarCause: return "NotAScalarCause";
    case ErrorCode::NotHoistable: return "NotHoistable";
    case ErrorCode::NotHostOutput: return "NotHostOutput";
    case ErrorCode::NotEligible: return "NotEligible";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::OffsetAmbiguous: return "OffsetAmbiguous";
    case ErrorCode::BadPattern: return "BadPattern";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::Schema: return "SchemaError";
    case ErrorCode::InternalInvariant: return "InternalInvariant";
  }
  return "Unknown";
}

bool CostModel::valid() const {
  const std::array fields{launch_latency_us, graph_launch_us,   device_dispatch_us,
                          d2d_bandwidth_GBps, d2d_fixed_us,     h2d_bandwidth_GBps,
                          h2d_fixed_us,       prelude_base_us,  prelude_per_patch_us,
                          deref_per_kernel_us, rng_reset_us,    host_obj_rebuild_us};
  return std::all_of(fields.begin(), fields.end(), [](double v) { return v >= 0.0; }) &&
         d2d_bandwidth_GBps > 0.0 && h2d_bandwidth_GBps > 0.0;
}

ParamBinding ParamBinding::device(std::uint32_t slot, TensorId t) {
  ParamBinding b;
  b.slot = slot;
  b.kind = BindingKind::DevicePtr;
  b.tensor = t;
  return b;
}

ParamBinding ParamBinding::host(std::uint32_t slot, TensorId t) {
  ParamBinding b;
  b.slot = slot;
  b.kind = BindingKind::HostPtr;
  b.tensor = t;
  return b;
}

ParamBinding ParamBinding::by_value(std::uint32_t slot, ScalarId s) {
  ParamBinding b;
  b.slot = slot;
  b.kind = BindingKind::ScalarByValue;
  b.scalar = s;
  return b;
}

ParamBinding ParamBinding::ptr_cell(std::uint32_t slot, CellId c) {
  ParamBinding b;
  b.slot = slot;
  b.kind = BindingKind::PtrCell;
  b.cell = c;
  return b;
}

const TensorDesc* Program::find_tensor(TensorId id) const {
  auto it = tensors.find(id);
  return it == tensors.end() ? nullptr : &it->second;
}

const Block* Program::find_block(BlockId id) const {
  for (const auto& b : blocks) {
    if (b.id == id) return &b;
  }
  return nullptr;
}

Block* Program::find_block(BlockId id) {
  for (auto& b : blocks) {
    if (b.id == id) return &b;
  }
  return nullptr;
}

const TensorDesc& Program::tensor(TensorId id) const {
  const TensorDesc* t = find_tensor(id);
  if (t == nullptr) {
    throw Error(ErrorCode::InvalidProgram, "unknown tensor " + std::to_string(id.value));
  }
  return *t;
}

TensorId Program::next_tensor_id() const {
  return tensors.empty() ? TensorId{1} : TensorId{tensors.rbegin()->first.value + 1};
}

NodeId Program::next_node_id() const {
  std::uint32_t max_id = 0;
  auto scan = [&](const std::vector<Node>& nodes) {
    for (const auto& n : nodes) max_id = std::max(max_id, n.id.value);
  };
  scan(init_nodes);
  for (const auto& b : blocks) {
    scan(b.nodes);
    scan(b.epilogue);
  }
  return NodeId{max_id + 1};
}

std::vector<TensorId> reads(const Node& node) {
  std::vector<TensorId> out;
  if (const auto* k = node.kernel()) {
    for (const auto& p : k->params) {
      if (p.slot != 0 && p.references_tensor()) out.push_back(p.tensor);
    }
  } else if (const auto* c = node.copy()) {
    out.push_back(c->src);
  } else if (const auto* f = std::get_if<Free>(&node.op)) {
    out.push_back(f->tensor);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<TensorId> writes(const Node& node) {
  if (const auto* k = node.kernel()) {
    for (const auto& p : k->params) {
      if (p.slot == 0 && p.references_tensor()) return {p.tensor};
    }
    return {};
  }
  if (const auto* c = node.copy()) return {c->dst};
  if (const auto* a = std::get_if<Alloc>(&node.op)) return {a->tensor};
  return {};
}

std::size_t opcode_arity(Opcode op) {
  switch (op) {
    case Opcode::ElemAdd:
    case Opcode::ElemMul:
    case Opcode::ScaleByScalar:
    case Opcode::MatMulLite:
      return 3;
    case Opcode::Copy:
    case Opcode::ReduceSum:
      return 2;
    case Opcode::CollectiveAllReduce:
      return 0;
  }
  return 0;
}

bool slot_accepts_scalar(Opcode op, std::uint32_t slot) {
  return op == Opcode::ScaleByScalar && slot == 2;
}

bool opcode_requires_device_inputs(Opcode op) {
  return op == Opcode::MatMulLite || op == Opcode::CollectiveAllReduce;
}

std::size_t kernel_count(const Block& block) {
  return static_cast<std::size_t>(std::count_if(block.nodes.begin(), block.nodes.end(),
                                                [](const Node& n) { return n.kernel() != nullptr; }));
}

std::size_t kernel_count(const Program& program) {
  std::size_t total = 0;
  for (const auto& b : program.blocks) total += kernel_count(b);
  return total;
}

namespace {

template <class Enum, std::size_t N>
std::optional<Enum> parse_enum(std::string_view s, const std::array<Enum, N>& values) {
  for (Enum v : values) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

}  // namespace

std::string_view to_string(Placement p) { return p == Placement::Host ? "Host" : "Device"; }

std::string_view to_string(RuleKind k) {
  switch (k) {
    case RuleKind::Fill: return "fill";
    case RuleKind::Values: return "values";
    case RuleKind::Uniform: return "uniform";
    case RuleKind::Ramp: return "ramp";
    case RuleKind::Sequence: return "sequence";
  }
  return "?";
}

std::string_view to_string(BindingKind k) {
  switch (k) {
    case BindingKind::ScalarByValue: return "ScalarByValue";
    case BindingKind::DevicePtr: return "DevicePtr";
    case BindingKind::HostPtr: return "HostPtr";
    case BindingKind::PtrCell: return "PtrCell";
  }
  return "?";
}

std::string_view to_string(Mutability m) {
  switch (m) {
    case Mutability::Unassigned: return "Unassigned";
    case Mutability::External: return "External";
    case Mutability::Internal: return "Internal";
    case Mutability::Static: return "Static";
  }
  return "?";
}

std::string_view to_string(Opcode op) {
  switch (op) {
    case Opcode::ElemAdd: return "ElemAdd";
    case Opcode::ElemMul: return "ElemMul";
    case Opcode::ScaleByScalar: return "ScaleByScalar";
    case Opcode::Copy: return "Copy";
    case Opcode::ReduceSum: return "ReduceSum";
    case Opcode::MatMulLite: return "MatMulLite";
    case Opcode::CollectiveAllReduce: return "CollectiveAllReduce";
  }
  return "?";
}

std::string_view to_string(NodeKind k) {
  switch (k) {
    case NodeKind::KernelLaunch: return "KernelLaunch";
    case NodeKind::MemCopy: return "MemCopy";
    case NodeKind::Alloc: return "Alloc";
    case NodeKind::Free: return "Free";
    case NodeKind::DeviceSync: return "DeviceSync";
    case NodeKind::PreludeKernel: return "PreludeKernel";
  }
  return "?";
}

std::optional<Placement> parse_placement(std::string_view s) {
  return parse_enum(s, std::array{Placement::Host, Placement::Device});
}

std::optional<RuleKind> parse_rule_kind(std::string_view s) {
  return parse_enum(s, std::array{RuleKind::Fill, RuleKind::Values, RuleKind::Uniform,
                                  RuleKind::Ramp, RuleKind::Sequence});
}

std::optional<BindingKind> parse_binding_kind(std::string_view s) {
  return parse_enum(s, std::array{BindingKind::ScalarByValue, BindingKind::DevicePtr,
                                  BindingKind::HostPtr, BindingKind::PtrCell});
}

std::optional<Mutability> parse_mutability(std::string_view s) {
  return parse_enum(s, std::array{Mutability::Unassigned, Mutability::External,
                                  Mutability::Internal, Mutability::Static});
}

std::optional<Opcode> parse_opcode(std::string_view s) {
  return parse_enum(s, std::array{Opcode::ElemAdd, Opcode::ElemMul, Opcode::ScaleByScalar,
                                  Opcode::Copy, Opcode::ReduceSum, Opcode::MatMulLite,
                                  Opcode::CollectiveAllReduce});
}

std::optional<NodeKind> parse_node_kind(std::string_view s) {
  return parse_enum(s, std::array{NodeKind::KernelLaunch, NodeKind::MemCopy, NodeKind::Alloc,
                                  NodeKind::Free, NodeKind::DeviceSync, NodeKind::PreludeKernel});
}

Node make_kernel(NodeId id, std::string kernel_id, Opcode op, std::vector<ParamBinding> params,
                 double duration_us, bool rewritable) {
  KernelLaunch k;
  k.kernel_id = std::move(kernel_id);
  k.opcode = op;
  k.params = std::move(params);
  k.duration_us = duration_us;
  k.rewritable = rewritable;
  return Node{id, std::move(k)};
}

Node make_copy(NodeId id, TensorId src, TensorId dst, bool sync) {
  return Node{id, MemCopy{src, dst, sync}};
}

Node make_alloc(NodeId id, TensorId t) { return Node{id, Alloc{t}}; }
Node make_free(NodeId id, TensorId t) { return Node{id, Free{t}}; }
Node make_sync(NodeId id) { return Node{id, DeviceSync{}}; }

}  // namespace graphcap
