// SPDX-License-Identifier: Apache-2.0

#include "graphcap/cgct.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "graphcap/error.hpp"

namespace graphcap {

std::string_view to_string(Action a) {
  switch (a) {
    case Action::ScalarCast: return "ScalarCast";
    case Action::MemcopyHoist: return "MemcopyHoist";
    case Action::OutputRelocate: return "OutputRelocate";
  }
  return "?";
}

namespace {

Block& block_of(Program& p, BlockId id) {
  Block* b = p.find_block(id);
  if (b == nullptr) throw Error(ErrorCode::InvalidProgram, "unknown block " + std::to_string(id.value));
  return *b;
}

Node* node_in(Block& b, NodeId id) {
  for (auto& n : b.nodes) {
    if (n.id == id) return &n;
  }
  return nullptr;
}

TensorId add_tensor(Program& p, TensorDesc t) {
  t.id = p.next_tensor_id();
  p.tensors.emplace(t.id, t);
  return t.id;
}

NodeId append_init(Program& p, Node n) {
  n.id = p.next_node_id();
  p.init_nodes.push_back(n);
  return n.id;
}

template <class F>
void for_each_node(Program& p, F&& f) {
  for (auto& n : p.init_nodes) f(n, static_cast<const Block*>(nullptr));
  for (auto& b : p.blocks) {
    for (auto& n : b.nodes) f(n, &b);
    for (auto& n : b.epilogue) f(n, &b);
  }
}

bool references(const Node& n, TensorId t) {
  const auto r = reads(n);
  const auto w = writes(n);
  return std::find(r.begin(), r.end(), t) != r.end() || std::find(w.begin(), w.end(), t) != w.end();
}

[[noreturn]] void not_hoistable(TensorId t, const std::string& why) {
  throw Error(ErrorCode::NotHoistable, "tensor " + std::to_string(t.value) + " " + why);
}

// Host tensor whose contents can be copied once at init time.
void check_constant_host(const Program& p, TensorId h) {
  const TensorDesc* d = p.find_tensor(h);
  if (d == nullptr) not_hoistable(h, "is not declared");
  if (!d->constant) not_hoistable(h, "is not declared constant; its value may change per iteration");
  bool alloc_in_init = false;
  for (const auto& n : p.init_nodes) {
    if (const auto* a = std::get_if<Alloc>(&n.op); a && a->tensor == h) alloc_in_init = true;
    if (const auto* f = std::get_if<Free>(&n.op); f && f->tensor == h) not_hoistable(h, "is freed during init");
  }
  if (!alloc_in_init) not_hoistable(h, "is not allocated in the init section");
  for (const auto& b : p.blocks) {
    for (const auto& n : b.nodes) {
      if (const auto* f = std::get_if<Free>(&n.op); f && f->tensor == h) not_hoistable(h, "is freed in a block");
    }
  }
}

// Device copy of constant host tensor `h`, allocated and filled in init. An
// existing mirror made by an earlier hoist is reused.
TensorId device_mirror(Program& p, TensorId h, std::vector<TensorId>& new_tensors, std::vector<NodeId>& new_nodes) {
  std::set<TensorId> init_allocs;
  for (const auto& n : p.init_nodes) {
    if (const auto* a = std::get_if<Alloc>(&n.op)) init_allocs.insert(a->tensor);
    if (const auto* c = n.copy(); c && c->src == h && init_allocs.count(c->dst)) {
      const TensorDesc& d = p.tensor(c->dst);
      if (d.device == Placement::Device && d.constant) return d.id;
    }
  }
  const TensorDesc& src = p.tensor(h);
  TensorDesc m;
  m.device = Placement::Device;
  m.elem_size = src.elem_size;
  m.num_elems = src.num_elems;
  m.is_scalar = src.is_scalar;
  m.constant = true;
  const TensorId id = add_tensor(p, m);
  new_tensors.push_back(id);
  new_nodes.push_back(append_init(p, make_alloc(NodeId{}, id)));
  new_nodes.push_back(append_init(p, make_copy(NodeId{}, h, id, false)));
  return id;
}

// Whether the copy node can move to init as is: its destination must be
// touched by nothing except this copy, its own Alloc and later readers in the
// same block.
bool can_move_copy(const Program& p, const Block& block, const Node& copy_node) {
  const TensorId d = copy_node.copy()->dst;
  for (const auto& in : p.iteration_inputs) {
    if (in.tensor == d) return false;
  }
  for (const auto& b : p.blocks) {
    for (const auto& in : b.inputs) {
      if (in.references_tensor() && in.tensor == d) return false;
    }
    for (const auto& n : b.epilogue) {
      if (references(n, d)) return false;
    }
    if (b.id != block.id) {
      for (const auto& n : b.nodes) {
        if (references(n, d)) return false;
      }
    }
  }
  for (const auto& n : p.init_nodes) {
    if (references(n, d) && !std::holds_alternative<Alloc>(n.op)) return false;
  }
  bool seen_copy = false;
  for (const auto& n : block.nodes) {
    if (n.id == copy_node.id) {
      seen_copy = true;
      continue;
    }
    if (std::holds_alternative<Alloc>(n.op)) continue;
    if (std::holds_alternative<Free>(n.op) && references(n, d)) return false;
    const auto w = writes(n);
    if (std::find(w.begin(), w.end(), d) != w.end()) return false;
    if (!seen_copy && references(n, d)) return false;
  }
  return true;
}

}  // namespace

ScalarCastResult scalar_to_device_tensor(const Program& program, BlockId block_id, const Cause& cause) {
  if (cause.kind != CauseKind::CpuScalarParam || !cause.slot) {
    throw Error(ErrorCode::NotAScalarCause, "cause is " + std::string(to_string(cause.kind)));
  }
  ScalarCastResult r{program, {}, {}, {}};
  Program& p = r.program;
  Block& b = block_of(p, block_id);
  Node* n = node_in(b, cause.node);
  KernelLaunch* k = n ? n->kernel() : nullptr;
  ParamBinding* binding = nullptr;
  if (k != nullptr) {
    for (auto& pb : k->params) {
      if (pb.slot == *cause.slot) binding = &pb;
    }
  }
  if (binding == nullptr || binding->kind != BindingKind::ScalarByValue) {
    throw Error(ErrorCode::NotAScalarCause, "node " + std::to_string(cause.node.value) + " slot " +
                                                std::to_string(*cause.slot) + " takes no scalar by value");
  }
  const ScalarId s = binding->scalar;
  auto sit = p.scalars.find(s);
  if (sit == p.scalars.end()) throw Error(ErrorCode::InvalidProgram, "unknown scalar " + std::to_string(s.value));

  TensorDesc t;
  t.device = Placement::Device;
  t.elem_size = sit->second.elem_size;
  t.num_elems = 1;
  t.is_scalar = true;
  r.tensor = add_tensor(p, t);
  r.alloc_node = append_init(p, make_alloc(NodeId{}, r.tensor));
  r.stage = ScalarStage{s, r.tensor};

  Block& blk = block_of(p, block_id);  // append_init may not move blocks, but stay safe
  blk.prologue.push_back(r.stage);
  Node* node = node_in(blk, cause.node);
  for (auto& pb : node->kernel()->params) {
    if (pb.slot == *cause.slot) pb = ParamBinding::device(pb.slot, r.tensor);
  }
  bool still_used = false;
  for (const auto& nn : blk.nodes) {
    if (const auto* kk = nn.kernel()) {
      for (const auto& pb : kk->params) {
        if (pb.kind == BindingKind::ScalarByValue && pb.scalar == s) still_used = true;
      }
    }
  }
  if (!still_used) {
    std::erase_if(blk.inputs, [&](const ParamBinding& in) {
      return in.kind == BindingKind::ScalarByValue && in.scalar == s;
    });
  }
  return r;
}

namespace {

Program hoist_impl(const Program& program, BlockId block_id, const Cause& cause, std::vector<TensorId>& new_tensors,
                   std::vector<NodeId>& new_nodes) {
  if ((cause.kind != CauseKind::CpuTensorParam && cause.kind != CauseKind::SyncMemcopy) || !cause.tensor) {
    throw Error(ErrorCode::NotHoistable, std::string(to_string(cause.kind)) + " is not a copy or host-tensor cause");
  }
  Program p = program;
  const TensorId h = *cause.tensor;
  {
    const TensorDesc* d = p.find_tensor(h);
    if (d == nullptr || d->device != Placement::Host) not_hoistable(h, "is not host-resident");
  }
  check_constant_host(p, h);

  Block& b = block_of(p, block_id);
  Node* n = node_in(b, cause.node);
  if (n == nullptr) throw Error(ErrorCode::NotHoistable, "node " + std::to_string(cause.node.value) + " not in block");

  if (const MemCopy* c = n->copy()) {
    if (c->src != h) not_hoistable(h, "is not the copy's source");
    if (can_move_copy(p, b, *n)) {
      const TensorId dst = c->dst;
      std::vector<Node> moved;
      auto alloc_it = std::find_if(b.nodes.begin(), b.nodes.end(), [&](const Node& x) {
        const auto* a = std::get_if<Alloc>(&x.op);
        return a && a->tensor == dst;
      });
      if (alloc_it != b.nodes.end()) {
        moved.push_back(*alloc_it);
        b.nodes.erase(alloc_it);
      }
      auto copy_it = std::find_if(b.nodes.begin(), b.nodes.end(), [&](const Node& x) { return x.id == cause.node; });
      moved.push_back(*copy_it);
      b.nodes.erase(copy_it);
      for (auto& m : moved) p.init_nodes.push_back(m);
      p.tensors.at(dst).constant = true;
      return p;
    }
    // Destination is shared: keep the copy in the block but read a device
    // mirror made once at init.
    const TensorId m = device_mirror(p, h, new_tensors, new_nodes);
    Block& b2 = block_of(p, block_id);
    MemCopy* c2 = node_in(b2, cause.node)->copy();
    c2->src = m;
    c2->sync = false;
    return p;
  }

  if (n->kernel() == nullptr) throw Error(ErrorCode::NotHoistable, "cause does not name a kernel or copy");
  const TensorId m = device_mirror(p, h, new_tensors, new_nodes);
  Block& b2 = block_of(p, block_id);
  for (auto& node : b2.nodes) {
    if (auto* k = node.kernel()) {
      for (auto& pb : k->params) {
        if (pb.kind == BindingKind::HostPtr && pb.tensor == h) pb = ParamBinding::device(pb.slot, m);
      }
    }
  }
  for (auto& in : b2.inputs) {
    if (in.kind == BindingKind::HostPtr && in.tensor == h) in = ParamBinding::device(in.slot, m);
  }
  return p;
}

Program relocate_impl(const Program& program, BlockId block_id, const Cause& cause, std::vector<TensorId>& new_tensors,
                      std::vector<NodeId>& new_nodes) {
  if (cause.kind != CauseKind::HostOutput || !cause.tensor) {
    throw Error(ErrorCode::NotHostOutput, "cause is " + std::string(to_string(cause.kind)));
  }
  Program p = program;
  const TensorId t = *cause.tensor;
  Block& b = block_of(p, block_id);
  if (std::find(b.outputs.begin(), b.outputs.end(), t) == b.outputs.end() ||
      p.tensor(t).device != Placement::Host) {
    throw Error(ErrorCode::NotHostOutput, "tensor " + std::to_string(t.value) + " is not a host output of block " +
                                              std::to_string(block_id.value));
  }
  for (const auto& n : b.nodes) {
    if (const auto* c = n.copy(); c && c->dst == t && p.tensor(c->src).device == Placement::Host) {
      throw Error(ErrorCode::NotHostOutput, "tensor " + std::to_string(t.value) + " is produced from host data");
    }
  }

  p.tensors.at(t).device = Placement::Device;
  for (auto& n : b.nodes) {
    if (auto* c = n.copy(); c && c->dst == t) c->sync = false;
    if (auto* k = n.kernel()) {
      for (auto& pb : k->params) {
        if (pb.kind == BindingKind::HostPtr && pb.tensor == t) pb = ParamBinding::device(pb.slot, t);
      }
    }
  }
  for (auto& in : b.inputs) {
    if (in.kind == BindingKind::HostPtr && in.tensor == t) in = ParamBinding::device(in.slot, t);
  }

  // Host consumers elsewhere keep reading host memory through a mirror that
  // the block's epilogue refreshes.
  bool consumers = false;
  for (const auto& other : p.blocks) {
    if (other.id == block_id) continue;
    for (const auto& in : other.inputs) consumers |= in.kind == BindingKind::HostPtr && in.tensor == t;
    for (const auto& n : other.nodes) {
      if (const auto* k = n.kernel()) {
        for (const auto& pb : k->params) consumers |= pb.kind == BindingKind::HostPtr && pb.tensor == t;
      }
    }
  }
  if (!consumers) return p;

  TensorDesc mirror = p.tensor(t);
  mirror.device = Placement::Host;
  mirror.constant = false;
  const TensorId th = add_tensor(p, mirror);
  new_tensors.push_back(th);
  new_nodes.push_back(append_init(p, make_alloc(NodeId{}, th)));
  const NodeId copy_id = p.next_node_id();
  block_of(p, block_id).epilogue.push_back(make_copy(copy_id, t, th, true));
  new_nodes.push_back(copy_id);
  for (auto& other : p.blocks) {
    if (other.id == block_id) continue;
    for (auto& in : other.inputs) {
      if (in.kind == BindingKind::HostPtr && in.tensor == t) in.tensor = th;
    }
    for (auto& n : other.nodes) {
      if (auto* k = n.kernel()) {
        for (auto& pb : k->params) {
          if (pb.kind == BindingKind::HostPtr && pb.tensor == t) pb.tensor = th;
        }
      }
    }
  }
  return p;
}

std::optional<Action> action_for(const Program& p, const Block& b, const Cause& c) {
  switch (c.kind) {
    case CauseKind::CpuScalarParam: return Action::ScalarCast;
    case CauseKind::CpuTensorParam: return Action::MemcopyHoist;
    case CauseKind::HostOutput: return Action::OutputRelocate;
    case CauseKind::SyncMemcopy: {
      const TensorDesc* src = c.tensor ? p.find_tensor(*c.tensor) : nullptr;
      if (src != nullptr && src->device == Placement::Host) return Action::MemcopyHoist;
      // A blocking copy into a host output goes away once the output moves to
      // the device.
      for (const auto& n : b.nodes) {
        if (n.id != c.node) continue;
        const TensorId dst = n.copy()->dst;
        const TensorDesc* d = p.find_tensor(dst);
        if (d != nullptr && d->device == Placement::Host &&
            std::find(b.outputs.begin(), b.outputs.end(), dst) != b.outputs.end()) {
          return Action::OutputRelocate;
        }
      }
      return std::nullopt;
    }
    case CauseKind::DeviceSync:
    case CauseKind::InputMutation: return std::nullopt;
  }
  return std::nullopt;
}

std::string irreparable_reason(const Cause& c) {
  switch (c.kind) {
    case CauseKind::DeviceSync: return "DeviceSync";
    case CauseKind::InputMutation: return "InputMutation";
    case CauseKind::SyncMemcopy: return "SyncMemcopy: blocking copy between device buffers or into a non-output";
    default: return std::string(to_string(c.kind));
  }
}

// Multiset difference a - b over sorted cause lists.
std::vector<Cause> minus(std::vector<Cause> a, std::vector<Cause> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::vector<Cause> out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

}  // namespace

Program hoist_memcopy(const Program& program, BlockId block, const Cause& cause) {
  std::vector<TensorId> t;
  std::vector<NodeId> n;
  return hoist_impl(program, block, cause, t, n);
}

Program relocate_output_to_device(const Program& program, BlockId block, const Cause& cause) {
  std::vector<TensorId> t;
  std::vector<NodeId> n;
  return relocate_impl(program, block, cause, t, n);
}

TransformResult transform_until_eligible(const Program& program) {
  TransformResult r{program, {}, {}, {}, 0};
  Program& p = r.program;

  for (std::size_t bi = 0; bi < p.blocks.size(); ++bi) {
    const BlockId bid = p.blocks[bi].id;
    std::vector<Cause> stuck;  // causes an action refused
    auto is_stuck = [&](const Cause& c) { return std::find(stuck.begin(), stuck.end(), c) != stuck.end(); };

    int pass = 0;
    for (; pass < kMaxTransformPasses; ++pass) {
      bool progress = false;
      for (Action action : {Action::ScalarCast, Action::MemcopyHoist, Action::OutputRelocate}) {
        for (;;) {
          const EligibilityReport before = analyze(*p.find_block(bid), p);
          const Cause* target = nullptr;
          for (const auto& c : before.causes) {
            if (!is_stuck(c) && action_for(p, *p.find_block(bid), c) == action) {
              target = &c;
              break;
            }
          }
          if (target == nullptr) break;
          const Cause cause = *target;

          Applied entry;
          entry.block = bid;
          entry.action = action;
          entry.affected_nodes = {cause.node};
          Program next;
          try {
            switch (action) {
              case Action::ScalarCast: {
                ScalarCastResult sc = scalar_to_device_tensor(p, bid, cause);
                entry.new_tensors = {sc.tensor};
                entry.new_nodes = {sc.alloc_node};
                next = std::move(sc.program);
                break;
              }
              case Action::MemcopyHoist:
                next = hoist_impl(p, bid, cause, entry.new_tensors, entry.new_nodes);
                break;
              case Action::OutputRelocate:
                next = relocate_impl(p, bid, cause, entry.new_tensors, entry.new_nodes);
                break;
            }
          } catch (const Error& e) {
            if (e.code() != ErrorCode::NotHoistable && e.code() != ErrorCode::NotHostOutput) throw;
            stuck.push_back(cause);
            r.irreparable.push_back(Irreparable{bid, cause, e.what()});
            continue;
          }

          const EligibilityReport after = analyze(*next.find_block(bid), next);
          const auto introduced = minus(after.causes, before.causes);
          if (!introduced.empty()) {
            throw Error(ErrorCode::InternalInvariant,
                        std::string(to_string(action)) + " introduced a new " +
                            std::string(to_string(introduced.front().kind)) + " cause in block " +
                            std::to_string(bid.value));
          }
          const auto repaired = minus(before.causes, after.causes);
          if (repaired.empty()) {
            throw Error(ErrorCode::InternalInvariant, std::string(to_string(action)) + " made no progress");
          }
          for (const auto& c : repaired) {
            Applied a = entry;
            a.cause = c;
            r.log.entries.push_back(std::move(a));
          }
          p = std::move(next);
          progress = true;
        }
      }
      if (!progress) break;
    }
    r.max_passes = std::max(r.max_passes, pass);

    for (const auto& c : analyze(*p.find_block(bid), p).causes) {
      if (!is_stuck(c) && !action_for(p, *p.find_block(bid), c)) {
        r.irreparable.push_back(Irreparable{bid, c, irreparable_reason(c)});
      }
    }
  }
  r.reports = analyze_program(p);
  return r;
}

}  // namespace graphcap
