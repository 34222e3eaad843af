// SPDX-License-Identifier: Apache-2.0

#include "graphcap/interpreter.hpp"

#include <cmath>
#include <sstream>

#include "graphcap/error.hpp"

namespace graphcap {

// ---- MachineState ----------------------------------------------------------

std::uint32_t MachineState::allocate(Placement space, std::size_t elems) {
  Buffer b;
  b.space = space;
  b.data.assign(elems, 0.0);
  buffers_.push_back(std::move(b));
  return static_cast<std::uint32_t>(buffers_.size() - 1);
}

void MachineState::release(std::uint32_t id) {
  Buffer& b = buffers_.at(id);
  if (b.pinned) return;
  b.live = false;
  b.data.clear();
  b.data.shrink_to_fit();
}

void MachineState::bind(TensorId t, std::uint32_t buffer) {
  auto it = bindings_.find(t);
  if (it != bindings_.end()) {
    if (it->second == buffer) return;
    release(it->second);
    it->second = buffer;
  } else {
    bindings_.emplace(t, buffer);
  }
}

void MachineState::unbind(TensorId t) {
  auto it = bindings_.find(t);
  if (it == bindings_.end()) return;
  release(it->second);
  bindings_.erase(it);
}

std::optional<std::uint32_t> MachineState::binding(TensorId t) const {
  auto it = bindings_.find(t);
  if (it == bindings_.end()) return std::nullopt;
  return it->second;
}

const std::vector<double>& MachineState::values(TensorId t) const {
  auto b = binding(t);
  if (!b || !buffers_.at(*b).live) {
    throw Error(ErrorCode::MissingValue, "tensor " + std::to_string(t.value) + " has no value");
  }
  return buffers_.at(*b).data;
}

std::vector<double>& MachineState::mutable_values(TensorId t) {
  return const_cast<std::vector<double>&>(std::as_const(*this).values(t));
}

double MachineState::scalar(ScalarId s) const {
  auto it = scalars_.find(s);
  if (it == scalars_.end()) {
    throw Error(ErrorCode::MissingValue, "scalar " + std::to_string(s.value) + " has no value");
  }
  return it->second;
}

std::uint64_t MachineState::address_of(std::uint32_t buffer) const {
  return buffers_.at(buffer).space == Placement::Host ? addr::host(buffer) : addr::device(buffer);
}

std::uint32_t MachineState::resolve(std::uint64_t address) const {
  const addr::Space space = addr::space_of(address);
  const std::uint32_t idx = addr::index_of(address);
  if (space != addr::Space::Host && space != addr::Space::Device) {
    throw Error(ErrorCode::InternalInvariant, "not a buffer address");
  }
  const bool host = space == addr::Space::Host;
  if (idx >= buffers_.size() || !buffers_[idx].live) {
    std::ostringstream os;
    os << (host ? "host" : "device") << " buffer " << idx << " at 0x" << std::hex << address
       << " was released after capture";
    throw Error(host ? ErrorCode::DanglingHostRef : ErrorCode::DanglingDeviceRef, os.str());
  }
  return idx;
}

std::uint32_t MachineState::new_cell() {
  ptr_cells_.emplace_back(TensorId{}, 0);
  return static_cast<std::uint32_t>(ptr_cells_.size() - 1);
}

void MachineState::set_cell(std::uint32_t cell, TensorId target, std::uint32_t buffer) {
  ptr_cells_.at(cell) = {target, buffer};
}

std::uint32_t MachineState::cell_buffer(std::uint32_t cell) const {
  const std::uint32_t b = ptr_cells_.at(cell).second;
  if (b >= buffers_.size() || !buffers_[b].live) {
    throw Error(ErrorCode::DanglingDeviceRef, "pointer cell " + std::to_string(cell) + " targets a released buffer");
  }
  return b;
}

TensorId MachineState::cell_target(std::uint32_t cell) const { return ptr_cells_.at(cell).first; }

// ---- value generation ------------------------------------------------------

namespace {

constexpr std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t kScalarKey = std::uint64_t{1} << 32;
constexpr std::uint64_t kInitKey = std::uint64_t{2} << 32;
constexpr std::uint64_t kRngKey = std::uint64_t{3} << 32;

}  // namespace

double counter_uniform(std::uint64_t seed, std::uint64_t key, std::uint64_t iteration, std::uint64_t element) {
  const std::uint64_t h = splitmix(seed ^ splitmix(key ^ splitmix(iteration ^ splitmix(element))));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

std::vector<double> generate_values(const ValueRule& rule, std::uint64_t elems, std::uint64_t seed,
                                    std::uint64_t key, std::uint64_t iteration) {
  std::vector<double> v(elems, 0.0);
  switch (rule.kind) {
    case RuleKind::Fill:
      std::fill(v.begin(), v.end(), rule.value);
      break;
    case RuleKind::Values:
      if (rule.values.size() != elems) {
        throw Error(ErrorCode::InvalidProgram, "values rule length does not match element count");
      }
      v = rule.values;
      break;
    case RuleKind::Uniform:
      for (std::uint64_t e = 0; e < elems; ++e) {
        v[e] = rule.lo + (rule.hi - rule.lo) * counter_uniform(seed, key, iteration, e);
      }
      break;
    case RuleKind::Ramp:
      std::fill(v.begin(), v.end(), rule.start + rule.step * static_cast<double>(iteration));
      break;
    case RuleKind::Sequence:
      if (rule.values.empty()) throw Error(ErrorCode::InvalidProgram, "empty sequence rule");
      std::fill(v.begin(), v.end(), rule.values[iteration % rule.values.size()]);
      break;
  }
  return v;
}

InputSet materialize_inputs(const Program& program, int iterations) {
  InputSet out(static_cast<std::size_t>(std::max(iterations, 0)));
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (const auto& in : program.iteration_inputs) {
      if (in.tensor) {
        const TensorDesc& t = program.tensor(*in.tensor);
        out[i].tensors[t.id] = generate_values(in.rule, t.num_elems, program.seed, t.id.value, i);
      } else if (in.scalar) {
        out[i].scalars[*in.scalar] =
            generate_values(in.rule, 1, program.seed, kScalarKey | in.scalar->value, i).front();
      }
    }
  }
  return out;
}

// ---- execution -------------------------------------------------------------

namespace {

struct GraphRuntime {
  bool recorded = false;
  std::map<TensorId, std::uint32_t> local_buffers;  // placeholder tensor -> buffer
  std::map<CellId, std::uint32_t> cells;
  std::map<NodeId, ParamBufferImage> images;
  std::map<TensorId, std::uint32_t> alloc_buffers;
};

class Executor {
 public:
  Executor(const Program& p, const std::map<BlockId, CapturedGraph>* captured, const RunOptions& opt)
      : p_(p), captured_(captured), opt_(opt), st_(p.seed) {}

  RunResult run(const InputSet& inputs) {
    iteration_ = 0;
    for (const Node& n : p_.init_nodes) exec_live(n, nullptr, nullptr);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      iteration_ = i;
      apply_inputs(inputs[i]);
      OutputValues outs;
      for (const Block& b : p_.blocks) {
        const CapturedGraph* g = nullptr;
        if (captured_ != nullptr) {
          if (auto it = captured_->find(b.id); it != captured_->end()) g = &it->second;
        }
        if (g != nullptr) {
          replay(*g);
        } else {
          for (const auto& st : b.prologue) stage(st);
          for (const Node& n : b.nodes) exec_live(n, nullptr, nullptr);
          for (const Node& n : b.epilogue) exec_live(n, nullptr, nullptr);
        }
        for (TensorId t : b.outputs) outs[{b.id, t}] = st_.values(t);
      }
      res_.outputs.push_back(std::move(outs));
    }
    return std::move(res_);
  }

 private:
  void apply_inputs(const IterationValues& in) {
    for (const auto& [t, values] : in.tensors) {
      const TensorDesc& d = p_.tensor(t);
      check_size(d);
      if (values.size() != d.num_elems) {
        throw Error(ErrorCode::MissingInput, "input for tensor " + std::to_string(t.value) + " has wrong length");
      }
      const std::uint32_t b = st_.allocate(d.device, d.num_elems);
      st_.buffer(b).data = values;
      st_.bind(t, b);
    }
    for (const auto& [s, v] : in.scalars) st_.set_scalar(s, v);
  }

  void check_size(const TensorDesc& d) const {
    if (d.num_elems > opt_.max_elems) {
      throw Error(ErrorCode::TooLarge, "tensor " + std::to_string(d.id.value) + " has " +
                                           std::to_string(d.num_elems) + " elements");
    }
  }

  void stage(const ScalarStage& s) {
    auto& v = st_.mutable_values(s.tensor);
    v.assign(v.size(), 0.0);
    v.at(0) = st_.scalar(s.scalar);
  }

  // Buffer currently holding tensor `t`, honouring a graph's local tensors.
  std::uint32_t buffer_of(TensorId t, const GraphRuntime* rt) const {
    if (rt != nullptr) {
      if (auto it = rt->local_buffers.find(t); it != rt->local_buffers.end()) return it->second;
    }
    auto b = st_.binding(t);
    if (!b || !st_.buffer(*b).live) {
      throw Error(ErrorCode::MissingValue, "tensor " + std::to_string(t.value) + " has no value");
    }
    return *b;
  }

  ParamBufferImage build_image(const Node& n, const GraphRuntime* rt) const {
    ParamBufferImage img;
    img.node = n.id;
    if (const auto* k = n.kernel()) {
      for (const auto& p : k->params) {
        switch (p.kind) {
          case BindingKind::ScalarByValue: img.push_f64(st_.scalar(p.scalar)); break;
          case BindingKind::DevicePtr:
          case BindingKind::HostPtr: img.push_u64(st_.address_of(buffer_of(p.tensor, rt))); break;
          case BindingKind::PtrCell:
            if (rt == nullptr) throw Error(ErrorCode::InternalInvariant, "pointer cell outside a graph");
            img.push_u64(addr::cell(rt->cells.at(p.cell)));
            break;
        }
      }
    } else if (const auto* c = n.copy()) {
      img.push_u64(st_.address_of(buffer_of(c->src, rt)));
      img.push_u64(st_.address_of(buffer_of(c->dst, rt)));
    }
    return img;
  }

  std::uint32_t pointee(std::uint64_t address) const {
    if (addr::space_of(address) == addr::Space::Cell) return st_.cell_buffer(addr::index_of(address));
    return st_.resolve(address);
  }

  void exec_kernel(const Node& n, const KernelLaunch& k, const ParamBufferImage& img) {
    std::vector<std::vector<double>> scalars;
    scalars.reserve(k.params.size());
    std::vector<const kernels::Vec*> operands;
    std::uint32_t out = 0;
    for (std::size_t i = 0; i < k.params.size(); ++i) {
      const ParamBinding& p = k.params[i];
      const std::size_t off = i * ParamBufferImage::kSlotBytes;
      if (p.kind == BindingKind::ScalarByValue) {
        scalars.push_back({img.read_f64(off)});
        operands.push_back(&scalars.back());
        continue;
      }
      const std::uint32_t b = pointee(img.read_u64(off));
      const Buffer& buf = st_.buffer(b);
      if (i == 0) {
        if (buf.space != Placement::Device) {
          throw Error(ErrorCode::DeviceMismatch, "node " + std::to_string(n.id.value) + " writes host memory");
        }
        out = b;
        continue;
      }
      if (buf.space == Placement::Host && opcode_requires_device_inputs(k.opcode)) {
        throw Error(ErrorCode::DeviceMismatch, "node " + std::to_string(n.id.value) + " (" +
                                                   std::string(to_string(k.opcode)) +
                                                   ") received a host tensor in slot " + std::to_string(i));
      }
      operands.push_back(&buf.data);
    }
    auto result = kernels::evaluate(k.opcode, k.attrs, operands, st_.buffer(out).data.size(), opt_.backend);
    if (k.uses_rng) {
      for (std::size_t e = 0; e < result.size(); ++e) {
        result[e] += counter_uniform(st_.rng_seed(), kRngKey | n.id.value, iteration_, e);
      }
    }
    st_.buffer(out).data = std::move(result);
  }

  void exec_copy(const ParamBufferImage& img) {
    const std::uint32_t src = pointee(img.read_u64(0));
    const std::uint32_t dst = pointee(img.read_u64(8));
    if (st_.buffer(src).data.size() != st_.buffer(dst).data.size()) {
      throw Error(ErrorCode::InternalInvariant, "copy between buffers of different length");
    }
    st_.buffer(dst).data = st_.buffer(src).data;
  }

  void alloc(TensorId t) {
    const TensorDesc& d = p_.tensor(t);
    check_size(d);
    const std::uint32_t b = st_.allocate(d.device, d.num_elems);
    if (d.init) st_.buffer(b).data = generate_values(*d.init, d.num_elems, p_.seed, kInitKey | t.value, iteration_);
    st_.bind(t, b);
  }

  void free_tensor(TensorId t) {
    if (!st_.binding(t)) throw Error(ErrorCode::MissingValue, "free of unbound tensor " + std::to_string(t.value));
    st_.unbind(t);
  }

  // Executes a node against current bindings. In a capture run `rt` and
  // `patches` are set: the image is recorded and patched before use.
  void exec_live(const Node& n, GraphRuntime* rt, const std::vector<Patch>* patches) {
    ++res_.exec_counts[n.id];
    if (const auto* k = n.kernel()) {
      ParamBufferImage img = build_image(n, rt);
      if (rt != nullptr) {
        apply_patches(n.id, img, *rt, patches);
        rt->images[n.id] = img;
      }
      exec_kernel(n, *k, img);
    } else if (n.copy() != nullptr) {
      ParamBufferImage img = build_image(n, rt);
      if (rt != nullptr) rt->images[n.id] = img;
      exec_copy(img);
    } else if (const auto* a = std::get_if<Alloc>(&n.op)) {
      alloc(a->tensor);
      if (rt != nullptr) {
        const std::uint32_t b = *st_.binding(a->tensor);
        if (st_.buffer(b).space == Placement::Device) st_.pin(b);
        rt->alloc_buffers[a->tensor] = b;
      }
    } else if (const auto* f = std::get_if<Free>(&n.op)) {
      free_tensor(f->tensor);
      if (rt != nullptr) rt->alloc_buffers.erase(f->tensor);
    }
    // DeviceSync and PreludeKernel have no functional effect here.
  }

  void apply_patches(NodeId node, ParamBufferImage& img, const GraphRuntime& rt,
                     const std::vector<Patch>* patches) const {
    if (patches == nullptr) return;
    for (const Patch& p : *patches) {
      if (p.kernel != node) continue;
      img.write_u64(p.offset, st_.address_of(st_.cell_buffer(rt.cells.at(p.cell))));
    }
  }

  void replay(const CapturedGraph& g) {
    GraphRuntime& rt = runtimes_[g.block];
    for (const auto& s : g.prologue) stage(s);
    if (!rt.recorded) {
      for (const auto& [t, d] : g.local_tensors) {
        check_size(d);
        const std::uint32_t b = st_.allocate(Placement::Device, d.num_elems);
        st_.pin(b);
        rt.local_buffers[t] = b;
      }
      for (const auto& c : g.cells) rt.cells[c.id] = st_.new_cell();
    }

    // Copy plan: data copies into placeholders, then pointer refresh.
    for (const auto& a : g.copy_plan) {
      if (a.direction != CopyDirection::D2D) continue;
      const Placeholder* ph = g.find_placeholder(a.target);
      auto src = st_.binding(a.source);
      if (!src || !st_.buffer(*src).live) {
        throw Error(ErrorCode::MissingInput, "external tensor " + std::to_string(a.source.value) +
                                                 " has no value for this replay");
      }
      st_.buffer(rt.local_buffers.at(ph->tensor)).data = st_.buffer(*src).data;
    }
    refresh_pointers(g, rt.cells, st_);

    const std::vector<Patch>* patches = g.prelude ? &g.prelude->patches : nullptr;
    if (!rt.recorded) {
      for (const Node& n : g.nodes) exec_live(n, &rt, patches);
      rt.recorded = true;
    } else {
      for (const Node& n : g.nodes) {
        ++res_.exec_counts[n.id];
        if (const auto* k = n.kernel()) {
          exec_kernel(n, *k, rt.images.at(n.id));
        } else if (n.copy() != nullptr) {
          exec_copy(rt.images.at(n.id));
        } else if (std::holds_alternative<PreludeKernel>(n.op) && patches != nullptr) {
          for (const Patch& p : *patches) {
            rt.images.at(p.kernel).write_u64(p.offset, st_.address_of(st_.cell_buffer(rt.cells.at(p.cell))));
          }
        }
        // Alloc and Free are part of the recorded memory plan; nothing to do.
      }
      for (const auto& [t, b] : rt.alloc_buffers) st_.bind(t, b);
    }
    for (const Node& n : g.epilogue) exec_live(n, nullptr, nullptr);
  }

  const Program& p_;
  const std::map<BlockId, CapturedGraph>* captured_;
  RunOptions opt_;
  MachineState st_;
  RunResult res_;
  std::map<BlockId, GraphRuntime> runtimes_;
  std::uint64_t iteration_ = 0;
};

}  // namespace

void refresh_pointers(const CapturedGraph& graph, const std::map<CellId, std::uint32_t>& cells,
                      MachineState& state) {
  for (const auto& a : graph.copy_plan) {
    if (a.direction != CopyDirection::H2D) continue;
    const Placeholder* ph = graph.find_placeholder(a.target);
    if (ph == nullptr || ph->role != PlaceholderRole::PointerCell) {
      throw Error(ErrorCode::InternalInvariant, "H2D copy action without a pointer cell");
    }
    auto src = state.binding(a.source);
    if (!src || !state.buffer(*src).live) {
      throw Error(ErrorCode::MissingInput, "external tensor " + std::to_string(a.source.value) +
                                               " has no value for this replay");
    }
    state.set_cell(cells.at(ph->cell), a.source, *src);
  }
}

RunResult run_eager(const Program& program, const InputSet& inputs, const RunOptions& options) {
  return Executor(program, nullptr, options).run(inputs);
}

RunResult run_eager(const Program& program, const RunOptions& options) {
  return run_eager(program, materialize_inputs(program, program.iterations), options);
}

RunResult run_replay(const Program& program, const std::map<BlockId, CapturedGraph>& captured,
                     const InputSet& inputs, const RunOptions& options) {
  return Executor(program, &captured, options).run(inputs);
}

RunResult run_replay(const Program& program, const std::map<BlockId, CapturedGraph>& captured,
                     const RunOptions& options) {
  return run_replay(program, captured, materialize_inputs(program, program.iterations), options);
}

std::optional<Mismatch> compare_outputs(const RunResult& a, const RunResult& b, double rel_tol) {
  if (a.outputs.size() != b.outputs.size()) {
    return Mismatch{0, {}, "iteration counts differ"};
  }
  for (std::size_t i = 0; i < a.outputs.size(); ++i) {
    const auto& x = a.outputs[i];
    const auto& y = b.outputs[i];
    for (const auto& [key, xv] : x) {
      auto it = y.find(key);
      if (it == y.end()) return Mismatch{i, key, "output missing on the right"};
      const auto& yv = it->second;
      if (xv.size() != yv.size()) return Mismatch{i, key, "lengths differ"};
      for (std::size_t e = 0; e < xv.size(); ++e) {
        const double p = xv[e], q = yv[e];
        if (p == q || (std::isnan(p) && std::isnan(q))) continue;
        if (rel_tol > 0.0 && std::abs(p - q) <= rel_tol * std::max(std::abs(p), std::abs(q))) continue;
        std::ostringstream os;
        os.precision(17);
        os << "element " << e << ": " << p << " vs " << q;
        return Mismatch{i, key, os.str()};
      }
    }
    for (const auto& [key, yv] : y) {
      if (!x.count(key)) return Mismatch{i, key, "output missing on the left"};
    }
  }
  return std::nullopt;
}

}  // namespace graphcap
