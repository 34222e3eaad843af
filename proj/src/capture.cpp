// SPDX-License-Identifier: Apache-2.0

#include "graphcap/capture.hpp"

#include <set>

#include "graphcap/eligibility.hpp"
#include "graphcap/error.hpp"

namespace graphcap {

std::string_view to_string(PlaceholderRole r) { return r == PlaceholderRole::Data ? "Data" : "PointerCell"; }
std::string_view to_string(CopyDirection d) { return d == CopyDirection::D2D ? "D2D" : "H2D"; }

const Placeholder* CapturedGraph::find_placeholder(PlaceholderId id) const {
  for (const auto& p : placeholders) {
    if (p.id == id) return &p;
  }
  return nullptr;
}

const Placeholder* CapturedGraph::placeholder_for_tensor(TensorId local) const {
  for (const auto& p : placeholders) {
    if (p.tensor == local) return &p;
  }
  return nullptr;
}

const TensorDesc* CapturedGraph::find_tensor(const Program& program, TensorId id) const {
  if (auto it = local_tensors.find(id); it != local_tensors.end()) return &it->second;
  return program.find_tensor(id);
}

namespace {

class Capturer {
 public:
  Capturer(const Program& p, const Block& b) : p_(p), b_(b), next_tensor_(p.next_tensor_id().value) {
    for (const auto& in : b.inputs) {
      if (in.references_tensor()) inputs_.insert(in.tensor);
    }
  }

  CapturedGraph run(bool eligible) {
    g_.block = b_.id;
    g_.eligible_at_capture = eligible;
    g_.prologue = b_.prologue;
    g_.epilogue = b_.epilogue;
    g_.outputs = b_.outputs;
    for (const Node& src : b_.nodes) {
      Node n = src;
      if (auto* k = n.kernel()) {
        for (auto& p : k->params) {
          if (p.slot != 0) bind_read(p);
        }
        for (auto& p : k->params) {
          if (p.slot == 0) bind_write(p);
        }
      } else if (auto* c = n.copy()) {
        c->src = read_tensor(c->src, /*by_pointer=*/true);
        classify_write(c->dst);
      } else if (const auto* a = std::get_if<Alloc>(&n.op)) {
        written_.insert(a->tensor);
      }
      g_.nodes.push_back(std::move(n));
    }
    g_.stats.external_param_count = g_.placeholders.size();
    g_.stats.internal_param_count = internal_.size();
    g_.stats.static_param_count = static_.size();
    g_.stats.by_value_param_count = by_value_;
    for (const auto& c : g_.copy_plan) g_.stats.bytes_copied_per_replay += c.bytes;
    return std::move(g_);
  }

 private:
  bool is_host(TensorId t) const {
    const TensorDesc* d = p_.find_tensor(t);
    return d != nullptr && d->device == Placement::Host;
  }

  Mutability classify(TensorId t) const {
    if (written_.count(t)) return Mutability::Internal;
    if (inputs_.count(t)) return Mutability::External;
    return Mutability::Static;
  }

  TensorId placeholder(TensorId source) {
    if (auto it = by_source_.find(source); it != by_source_.end()) return it->second;
    const TensorDesc& s = p_.tensor(source);
    TensorDesc local;
    local.id = TensorId{next_tensor_++};
    local.device = Placement::Device;
    local.elem_size = s.elem_size;
    local.num_elems = s.num_elems;
    local.is_scalar = s.is_scalar;
    g_.local_tensors.emplace(local.id, local);

    Placeholder ph;
    ph.id = PlaceholderId{static_cast<std::uint32_t>(g_.placeholders.size() + 1)};
    ph.tensor = local.id;
    ph.source = source;
    ph.size_bytes = s.total_bytes();
    ph.role = PlaceholderRole::Data;
    g_.placeholders.push_back(ph);
    g_.copy_plan.push_back(CopyAction{ph.id, source, ph.size_bytes, CopyDirection::D2D});
    by_source_.emplace(source, local.id);
    return local.id;
  }

  // Returns the tensor the frozen node should reference.
  TensorId read_tensor(TensorId t, bool by_pointer) {
    const Mutability m = classify(t);
    if (m == Mutability::Internal) {
      internal_.insert(t);
      return t;
    }
    if (is_host(t)) {
      // A host address is baked into the graph; whatever lives there at
      // replay time is what the kernel sees.
      ++by_value_;
      return t;
    }
    if (m == Mutability::External && by_pointer) return placeholder(t);
    static_.insert(t);
    return t;
  }

  void bind_read(ParamBinding& p) {
    switch (p.kind) {
      case BindingKind::ScalarByValue:
        ++by_value_;
        p.mutability = Mutability::External;
        return;
      case BindingKind::PtrCell:
        throw Error(ErrorCode::InternalInvariant, "pointer cell in a block being captured");
      case BindingKind::DevicePtr:
      case BindingKind::HostPtr:
        p.mutability = classify(p.tensor);
        p.tensor = read_tensor(p.tensor, true);
        return;
    }
  }

  void classify_write(TensorId t) {
    if (!written_.count(t)) static_.insert(t);
    written_.insert(t);
  }

  void bind_write(ParamBinding& p) {
    if (!p.references_tensor()) return;
    p.mutability = classify(p.tensor);
    classify_write(p.tensor);
  }

  const Program& p_;
  const Block& b_;
  std::uint32_t next_tensor_;
  std::set<TensorId> inputs_;
  std::set<TensorId> written_;
  std::set<TensorId> internal_;
  std::set<TensorId> static_;
  std::size_t by_value_ = 0;
  std::map<TensorId, TensorId> by_source_;
  CapturedGraph g_;
};

}  // namespace

CapturedGraph capture(const Program& program, const Block& block, const CaptureOptions& options) {
  const EligibilityReport report = analyze(block, program);
  if (options.require_eligible && !report.eligible) {
    throw Error(ErrorCode::NotEligible, "block " + std::to_string(block.id.value) + " has " +
                                            std::to_string(report.causes.size()) + " capture blockers");
  }
  return Capturer(program, block).run(report.eligible);
}

std::map<BlockId, CapturedGraph> capture_eligible(const Program& program) {
  std::map<BlockId, CapturedGraph> out;
  for (const auto& b : program.blocks) {
    if (analyze(b, program).eligible) out.emplace(b.id, capture(program, b));
  }
  return out;
}

Coverage coverage(const Program& program, const std::map<BlockId, CapturedGraph>& captured) {
  Coverage c;
  for (const auto& b : program.blocks) {
    const std::size_t k = kernel_count(b);
    c.total_kernels += k;
    if (captured.count(b.id)) c.kernels_in_graphs += k;
  }
  c.percent = c.total_kernels == 0 ? 0.0
                                   : 100.0 * static_cast<double>(c.kernels_in_graphs) /
                                         static_cast<double>(c.total_kernels);
  return c;
}

}  // namespace graphcap
