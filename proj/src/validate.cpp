// SPDX-License-Identifier: Apache-2.0

#include "graphcap/validate.hpp"

#include <algorithm>
#include <map>
#include <queue>
#include <set>

#include "graphcap/error.hpp"

namespace graphcap {

std::string_view to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::BadTensor: return "BadTensor";
    case ViolationKind::DuplicateId: return "DuplicateId";
    case ViolationKind::DanglingTensor: return "DanglingTensor";
    case ViolationKind::UseBeforeDef: return "UseBeforeDef";
    case ViolationKind::UseAfterFree: return "UseAfterFree";
    case ViolationKind::Cycle: return "Cycle";
    case ViolationKind::BadBinding: return "BadBinding";
    case ViolationKind::BadKernel: return "BadKernel";
    case ViolationKind::UndeclaredInPlace: return "UndeclaredInPlace";
    case ViolationKind::WriteToConstant: return "WriteToConstant";
    case ViolationKind::OutputNotProduced: return "OutputNotProduced";
    case ViolationKind::BadInput: return "BadInput";
  }
  return "?";
}

std::vector<std::pair<std::size_t, std::size_t>> dependency_edges(const Block& block) {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  const auto& nodes = block.nodes;

  std::map<TensorId, std::vector<std::size_t>> users;  // excluding Alloc/Free
  std::map<TensorId, std::vector<std::size_t>> allocs;
  std::map<TensorId, std::vector<std::size_t>> frees;

  std::map<TensorId, std::size_t> last_writer;
  std::map<TensorId, std::vector<std::size_t>> readers_since_write;

  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const Node& n = nodes[i];
    if (const auto* a = std::get_if<Alloc>(&n.op)) {
      allocs[a->tensor].push_back(i);
      continue;
    }
    if (const auto* f = std::get_if<Free>(&n.op)) {
      frees[f->tensor].push_back(i);
      continue;
    }
    const auto r = reads(n);
    const auto w = writes(n);
    for (TensorId t : r) {
      users[t].push_back(i);
      if (auto it = last_writer.find(t); it != last_writer.end() && it->second != i) {
        edges.emplace_back(it->second, i);
      }
    }
    for (TensorId t : w) {
      users[t].push_back(i);
      if (auto it = last_writer.find(t); it != last_writer.end() && it->second != i) {
        edges.emplace_back(it->second, i);
      }
      for (std::size_t reader : readers_since_write[t]) {
        if (reader != i) edges.emplace_back(reader, i);
      }
    }
    for (TensorId t : w) {
      last_writer[t] = i;
      readers_since_write[t].clear();
    }
    for (TensorId t : r) readers_since_write[t].push_back(i);
  }

  // Lifetime edges. An Alloc precedes the uses up to the next Free of the same
  // tensor and that Free; a Free precedes the next Alloc. Uses placed before
  // the first Alloc hang off it, which is the only backward edge and the only
  // way a block can become cyclic.
  for (const auto& [t, alloc_positions] : allocs) {
    const auto& us = users[t];
    const auto& fs = frees[t];
    for (std::size_t a : alloc_positions) {
      auto next_free = std::upper_bound(fs.begin(), fs.end(), a);
      const std::size_t end = next_free == fs.end() ? nodes.size() : *next_free;
      for (std::size_t u : us) {
        if (u > a && u < end) edges.emplace_back(a, u);
      }
      if (next_free != fs.end()) edges.emplace_back(a, *next_free);
    }
    for (std::size_t u : us) {
      if (u < alloc_positions.front()) edges.emplace_back(alloc_positions.front(), u);
    }
    for (std::size_t f : fs) {
      auto next_alloc = std::upper_bound(alloc_positions.begin(), alloc_positions.end(), f);
      if (next_alloc != alloc_positions.end()) edges.emplace_back(f, *next_alloc);
    }
  }
  for (const auto& [t, free_positions] : frees) {
    const auto& as = allocs[t];
    for (std::size_t f : free_positions) {
      auto prev_alloc = std::upper_bound(as.begin(), as.end(), f);
      const std::size_t begin = prev_alloc == as.begin() ? 0 : *std::prev(prev_alloc);
      for (std::size_t u : users[t]) {
        if (u < f && u >= begin) edges.emplace_back(u, f);
      }
    }
  }

  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

namespace {

// Kahn's algorithm with the smallest node id released first. Returns positions;
// shorter than the block when a cycle exists.
std::vector<std::size_t> kahn(const Block& block) {
  const std::size_t n = block.nodes.size();
  std::vector<std::vector<std::size_t>> succ(n);
  std::vector<std::size_t> indeg(n, 0);
  for (auto [from, to] : dependency_edges(block)) {
    succ[from].push_back(to);
    ++indeg[to];
  }
  using Entry = std::pair<std::uint32_t, std::size_t>;  // (node id, position)
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> ready;
  for (std::size_t i = 0; i < n; ++i) {
    if (indeg[i] == 0) ready.emplace(block.nodes[i].id.value, i);
  }
  std::vector<std::size_t> order;
  order.reserve(n);
  while (!ready.empty()) {
    auto [id, pos] = ready.top();
    ready.pop();
    order.push_back(pos);
    for (std::size_t s : succ[pos]) {
      if (--indeg[s] == 0) ready.emplace(block.nodes[s].id.value, s);
    }
  }
  return order;
}

class Validator {
 public:
  explicit Validator(const Program& p) : p_(p) {}

  ValidationReport run() {
    check_tensors();
    check_ids();
    check_iteration_inputs();

    std::set<TensorId> init_defined = walk_list(p_.init_nodes, {}, std::nullopt, /*in_block=*/false);

    std::set<TensorId> iteration_tensors;
    for (const auto& in : p_.iteration_inputs) {
      if (in.tensor) iteration_tensors.insert(*in.tensor);
    }
    std::set<TensorId> allocated_by_earlier_blocks;

    for (const auto& block : p_.blocks) {
      std::set<TensorId> defined = init_defined;
      for (const auto& in : block.inputs) check_block_input(block, in, init_defined,
                                                            iteration_tensors,
                                                            allocated_by_earlier_blocks, defined);
      for (const auto& st : block.prologue) check_stage(block, st, init_defined);

      defined = walk_list(block.nodes, defined, block.id, true);
      defined = walk_list(block.epilogue, defined, block.id, true);
      for (const auto& n : block.epilogue) {
        if (!n.copy()) add(ViolationKind::BadKernel, block.id, n.id, std::nullopt,
                           "epilogue may only contain MemCopy nodes");
      }
      for (TensorId t : block.outputs) {
        if (!defined.count(t)) {
          add(ViolationKind::OutputNotProduced, block.id, std::nullopt, t,
              "output tensor " + std::to_string(t.value) + " is not produced in block " +
                  std::to_string(block.id.value));
        }
      }
      for (const auto& n : block.nodes) {
        if (const auto* a = std::get_if<Alloc>(&n.op)) allocated_by_earlier_blocks.insert(a->tensor);
      }
      if (kahn(block).size() != block.nodes.size()) {
        add(ViolationKind::Cycle, block.id, std::nullopt, std::nullopt,
            "dependency cycle in block " + std::to_string(block.id.value));
      }
    }
    return std::move(report_);
  }

 private:
  void add(ViolationKind kind, std::optional<BlockId> b, std::optional<NodeId> n,
           std::optional<TensorId> t, std::string msg) {
    report_.violations.push_back(Violation{kind, b, n, t, std::move(msg)});
  }

  void check_rule(const ValueRule& rule, std::uint64_t elems, const std::string& what) {
    if (rule.kind == RuleKind::Values && rule.values.size() != elems) {
      add(ViolationKind::BadInput, std::nullopt, std::nullopt, std::nullopt,
          what + ": values length does not match element count");
    }
    if (rule.kind == RuleKind::Sequence && rule.values.empty()) {
      add(ViolationKind::BadInput, std::nullopt, std::nullopt, std::nullopt,
          what + ": empty sequence");
    }
    if (rule.kind == RuleKind::Uniform && !(rule.lo <= rule.hi)) {
      add(ViolationKind::BadInput, std::nullopt, std::nullopt, std::nullopt,
          what + ": uniform bounds reversed");
    }
  }

  void check_tensors() {
    for (const auto& [id, t] : p_.tensors) {
      if (t.id != id || t.elem_size < 1 || t.num_elems < 1 || (t.is_scalar && t.num_elems != 1)) {
        add(ViolationKind::BadTensor, std::nullopt, std::nullopt, id,
            "tensor " + std::to_string(id.value) + " has inconsistent shape");
      }
      if (t.init) check_rule(*t.init, t.num_elems, "tensor " + std::to_string(id.value) + " init");
    }
  }

  void check_ids() {
    std::set<NodeId> seen;
    auto scan = [&](const std::vector<Node>& nodes, std::optional<BlockId> b) {
      for (const auto& n : nodes) {
        if (!seen.insert(n.id).second) {
          add(ViolationKind::DuplicateId, b, n.id, std::nullopt,
              "node id " + std::to_string(n.id.value) + " reused");
        }
      }
    };
    scan(p_.init_nodes, std::nullopt);
    std::set<BlockId> blocks;
    for (const auto& b : p_.blocks) {
      if (!blocks.insert(b.id).second) {
        add(ViolationKind::DuplicateId, b.id, std::nullopt, std::nullopt,
            "block id " + std::to_string(b.id.value) + " reused");
      }
      scan(b.nodes, b.id);
      scan(b.epilogue, b.id);
    }
  }

  void check_iteration_inputs() {
    for (const auto& in : p_.iteration_inputs) {
      if (in.tensor.has_value() == in.scalar.has_value()) {
        add(ViolationKind::BadInput, std::nullopt, std::nullopt, in.tensor,
            "iteration input must name exactly one tensor or scalar");
        continue;
      }
      if (in.tensor) {
        const TensorDesc* t = p_.find_tensor(*in.tensor);
        if (t == nullptr) {
          add(ViolationKind::DanglingTensor, std::nullopt, std::nullopt, in.tensor,
              "iteration input names unknown tensor " + std::to_string(in.tensor->value));
          continue;
        }
        if (t->constant) {
          add(ViolationKind::WriteToConstant, std::nullopt, std::nullopt, in.tensor,
              "iteration input targets constant tensor " + std::to_string(t->id.value));
        }
        check_rule(in.rule, t->num_elems, "iteration input " + std::to_string(t->id.value));
      } else {
        if (!p_.scalars.count(*in.scalar)) {
          add(ViolationKind::BadInput, std::nullopt, std::nullopt, std::nullopt,
              "iteration input names unknown scalar " + std::to_string(in.scalar->value));
        }
        check_rule(in.rule, 1, "scalar input " + std::to_string(in.scalar->value));
      }
    }
  }

  void check_block_input(const Block& block, const ParamBinding& in,
                         const std::set<TensorId>& init_defined,
                         const std::set<TensorId>& iteration_tensors,
                         const std::set<TensorId>& earlier, std::set<TensorId>& defined) {
    if (in.kind == BindingKind::ScalarByValue) {
      if (!p_.scalars.count(in.scalar)) {
        add(ViolationKind::BadBinding, block.id, std::nullopt, std::nullopt,
            "block input names unknown scalar " + std::to_string(in.scalar.value));
      }
      return;
    }
    if (in.kind == BindingKind::PtrCell) {
      add(ViolationKind::BadBinding, block.id, std::nullopt, std::nullopt,
          "pointer cell as block input");
      return;
    }
    const TensorDesc* t = p_.find_tensor(in.tensor);
    if (t == nullptr || !(init_defined.count(in.tensor) || iteration_tensors.count(in.tensor) ||
                          earlier.count(in.tensor))) {
      add(ViolationKind::DanglingTensor, block.id, std::nullopt, in.tensor,
          "dangling tensor " + std::to_string(in.tensor.value) + " as input of block " +
              std::to_string(block.id.value));
      return;
    }
    check_placement(block.id, std::nullopt, in, *t);
    defined.insert(in.tensor);
  }

  void check_stage(const Block& block, const ScalarStage& st, const std::set<TensorId>& init_defined) {
    const TensorDesc* t = p_.find_tensor(st.tensor);
    if (!p_.scalars.count(st.scalar) || t == nullptr || t->device != Placement::Device ||
        t->num_elems != 1 || !init_defined.count(st.tensor)) {
      add(ViolationKind::BadInput, block.id, std::nullopt, st.tensor,
          "prologue stage must copy a known scalar into an init-allocated 1-element device tensor");
    }
  }

  void check_placement(BlockId b, std::optional<NodeId> n, const ParamBinding& p,
                       const TensorDesc& t) {
    if (p.kind == BindingKind::DevicePtr && t.device != Placement::Device) {
      add(ViolationKind::BadBinding, b, n, t.id,
          "DevicePtr bound to host tensor " + std::to_string(t.id.value));
    }
    if (p.kind == BindingKind::HostPtr && t.device != Placement::Host) {
      add(ViolationKind::BadBinding, b, n, t.id,
          "HostPtr bound to device tensor " + std::to_string(t.id.value));
    }
  }

  void check_kernel(std::optional<BlockId> b, const Node& node, const KernelLaunch& k) {
    const std::string where = "node " + std::to_string(node.id.value);
    auto bad = [&](const std::string& msg) {
      add(ViolationKind::BadKernel, b, node.id, std::nullopt, where + ": " + msg);
    };
    if (!(k.duration_us > 0.0)) bad("duration must be positive");
    for (std::size_t i = 0; i < k.params.size(); ++i) {
      if (k.params[i].slot != i) {
        bad("parameter slots must be numbered 0..n-1 in order");
        return;
      }
    }
    const std::size_t arity = opcode_arity(k.opcode);
    if ((arity != 0 && k.params.size() != arity) || (arity == 0 && k.params.size() < 3)) {
      bad("wrong parameter count for " + std::string(to_string(k.opcode)));
      return;
    }
    const TensorDesc* shape[16] = {};
    for (const auto& p : k.params) {
      if (p.kind == BindingKind::PtrCell) {
        add(ViolationKind::BadBinding, b, node.id, std::nullopt,
            where + ": pointer cells exist only inside captured graphs");
        continue;
      }
      if (p.kind == BindingKind::ScalarByValue) {
        if (!slot_accepts_scalar(k.opcode, p.slot)) {
          add(ViolationKind::BadBinding, b, node.id, std::nullopt,
              where + ": slot " + std::to_string(p.slot) + " cannot take a scalar by value");
        }
        if (!p_.scalars.count(p.scalar)) {
          add(ViolationKind::BadBinding, b, node.id, std::nullopt,
              where + ": unknown scalar " + std::to_string(p.scalar.value));
        }
        continue;
      }
      const TensorDesc* t = p_.find_tensor(p.tensor);
      if (t == nullptr) continue;  // reported as dangling by the def walk
      check_placement(b.value_or(BlockId{}), node.id, p, *t);
      if (p.slot == 0 && p.kind == BindingKind::HostPtr) {
        add(ViolationKind::BadBinding, b, node.id, t->id, where + ": kernel output must be device-resident");
      }
      if (p.slot < 16) shape[p.slot] = t;
    }
    auto elems = [&](std::size_t slot) -> std::optional<std::uint64_t> {
      if (slot >= 16 || shape[slot] == nullptr) return std::nullopt;
      return shape[slot]->num_elems;
    };
    auto same = [&](std::size_t a, std::size_t c) {
      auto x = elems(a), y = elems(c);
      return !x || !y || *x == *y;
    };
    switch (k.opcode) {
      case Opcode::ElemAdd:
      case Opcode::ElemMul:
        if (!same(0, 1) || !same(0, 2)) bad("elementwise operands differ in size");
        break;
      case Opcode::ScaleByScalar:
        if (!same(0, 1)) bad("scaled operand differs in size from output");
        if (auto s = elems(2); s && *s != 1) bad("scalar operand must hold one element");
        break;
      case Opcode::Copy:
        if (!same(0, 1)) bad("copy operands differ in size");
        break;
      case Opcode::ReduceSum:
        if (auto o = elems(0); o && *o != 1) bad("reduction output must hold one element");
        break;
      case Opcode::MatMulLite: {
        const auto& a = k.attrs;
        if (a.m == 0 || a.k == 0 || a.n == 0) {
          bad("matmul dimensions must be positive");
          break;
        }
        auto o = elems(0), x = elems(1), y = elems(2);
        if ((o && *o != std::uint64_t{a.m} * a.n) || (x && *x != std::uint64_t{a.m} * a.k) ||
            (y && *y != std::uint64_t{a.k} * a.n)) {
          bad("matmul operand sizes do not match m/k/n");
        }
        break;
      }
      case Opcode::CollectiveAllReduce:
        for (std::size_t i = 1; i < k.params.size(); ++i) {
          if (!same(0, i)) bad("all-reduce replicas differ in size");
        }
        break;
    }
    const auto r = reads(node);
    const auto w = writes(node);
    const bool overlap = std::any_of(w.begin(), w.end(), [&](TensorId t) {
      return std::binary_search(r.begin(), r.end(), t);
    });
    if (overlap && !k.in_place) {
      add(ViolationKind::UndeclaredInPlace, b, node.id, std::nullopt,
          where + ": reads and writes overlap but node is not flagged in-place");
    }
  }

  std::set<TensorId> walk_list(const std::vector<Node>& nodes, std::set<TensorId> defined,
                               std::optional<BlockId> b, bool in_block) {
    std::map<TensorId, std::size_t> alloc_pos;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (const auto* a = std::get_if<Alloc>(&nodes[i].op)) alloc_pos.emplace(a->tensor, i);
    }
    std::set<TensorId> freed;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const Node& n = nodes[i];
      if (const auto* k = n.kernel()) check_kernel(b, n, *k);
      if (std::holds_alternative<PreludeKernel>(n.op)) {
        add(ViolationKind::BadKernel, b, n.id, std::nullopt,
            "prelude kernels exist only inside captured graphs");
      }
      if (const auto* c = n.copy()) {
        const TensorDesc* s = p_.find_tensor(c->src);
        const TensorDesc* d = p_.find_tensor(c->dst);
        if (s && d && s->total_bytes() != d->total_bytes()) {
          add(ViolationKind::BadKernel, b, n.id, std::nullopt,
              "node " + std::to_string(n.id.value) + ": copy size mismatch");
        }
      }

      std::vector<TensorId> refs = reads(n);
      if (!std::holds_alternative<Alloc>(n.op)) {
        for (TensorId t : writes(n)) refs.push_back(t);
      }
      std::sort(refs.begin(), refs.end());
      refs.erase(std::unique(refs.begin(), refs.end()), refs.end());
      for (TensorId t : refs) {
        const std::string ts = std::to_string(t.value);
        const std::string ns = std::to_string(n.id.value);
        if (p_.find_tensor(t) == nullptr) {
          add(ViolationKind::DanglingTensor, b, n.id, t,
              "dangling tensor " + ts + " at node " + ns + " (not declared)");
        } else if (freed.count(t)) {
          add(ViolationKind::UseAfterFree, b, n.id, t, "use-after-free of tensor " + ts + " at node " + ns);
        } else if (!defined.count(t)) {
          auto it = alloc_pos.find(t);
          if (it != alloc_pos.end() && it->second > i) {
            add(ViolationKind::UseBeforeDef, b, n.id, t, "use-before-def at node " + ns);
          } else {
            add(ViolationKind::DanglingTensor, b, n.id, t,
                "dangling tensor " + ts + " at node " + ns);
          }
        }
      }
      if (in_block) {
        for (TensorId t : writes(n)) {
          const TensorDesc* td = p_.find_tensor(t);
          if (td && td->constant && !std::holds_alternative<Alloc>(n.op)) {
            add(ViolationKind::WriteToConstant, b, n.id, t,
                "node " + std::to_string(n.id.value) + " writes constant tensor " +
                    std::to_string(t.value));
          }
        }
      }
      if (const auto* a = std::get_if<Alloc>(&n.op)) {
        defined.insert(a->tensor);
        freed.erase(a->tensor);
      }
      if (const auto* f = std::get_if<Free>(&n.op)) {
        defined.erase(f->tensor);
        freed.insert(f->tensor);
      }
    }
    return defined;
  }

  const Program& p_;
  ValidationReport report_;
};

}  // namespace

ValidationReport validate(const Program& program) { return Validator(program).run(); }

std::vector<NodeId> topo_order(const Block& block) {
  const auto order = kahn(block);
  if (order.size() != block.nodes.size()) {
    throw Error(ErrorCode::CycleDetected, "block " + std::to_string(block.id.value) +
                                              " has cyclic dependencies");
  }
  std::vector<NodeId> ids;
  ids.reserve(order.size());
  for (std::size_t pos : order) ids.push_back(block.nodes[pos].id);
  return ids;
}

}  // namespace graphcap
