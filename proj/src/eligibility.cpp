// SPDX-License-Identifier: Apache-2.0

#include "graphcap/eligibility.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <set>

namespace graphcap {

std::string_view to_string(CauseKind k) {
  switch (k) {
    case CauseKind::CpuScalarParam: return "CpuScalarParam";
    case CauseKind::CpuTensorParam: return "CpuTensorParam";
    case CauseKind::SyncMemcopy: return "SyncMemcopy";
    case CauseKind::DeviceSync: return "DeviceSync";
    case CauseKind::HostOutput: return "HostOutput";
    case CauseKind::InputMutation: return "InputMutation";
  }
  return "?";
}

std::optional<CauseKind> parse_cause_kind(std::string_view s) {
  for (CauseKind k : {CauseKind::CpuScalarParam, CauseKind::CpuTensorParam, CauseKind::SyncMemcopy,
                      CauseKind::DeviceSync, CauseKind::HostOutput, CauseKind::InputMutation}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

namespace {

bool is_host(const Program& p, TensorId t) {
  const TensorDesc* d = p.find_tensor(t);
  return d != nullptr && d->device == Placement::Host;
}

}  // namespace

EligibilityReport analyze(const Block& block, const Program& program) {
  EligibilityReport r;
  r.block = block.id;

  std::set<TensorId> inputs;
  for (const auto& in : block.inputs) {
    if (in.references_tensor()) inputs.insert(in.tensor);
  }
  std::set<TensorId> host_outputs;
  for (TensorId t : block.outputs) {
    if (is_host(program, t)) host_outputs.insert(t);
  }

  for (const Node& n : block.nodes) {
    std::vector<Cause> here;
    if (const auto* k = n.kernel()) {
      for (const auto& p : k->params) {
        if (p.kind == BindingKind::ScalarByValue) {
          here.push_back(Cause{n.id, p.slot, CauseKind::CpuScalarParam, std::nullopt, p.scalar});
        } else if (p.kind == BindingKind::HostPtr) {
          here.push_back(Cause{n.id, p.slot, CauseKind::CpuTensorParam, p.tensor, std::nullopt});
        }
      }
    } else if (const auto* c = n.copy()) {
      if (c->sync) {
        here.push_back(Cause{n.id, std::nullopt, CauseKind::SyncMemcopy, c->src, std::nullopt});
      } else if (is_host(program, c->src)) {
        here.push_back(Cause{n.id, std::nullopt, CauseKind::CpuTensorParam, c->src, std::nullopt});
      }
    } else if (std::holds_alternative<DeviceSync>(n.op)) {
      here.push_back(Cause{n.id, std::nullopt, CauseKind::DeviceSync, std::nullopt, std::nullopt});
    }

    if (!std::holds_alternative<Alloc>(n.op)) {
      for (TensorId t : writes(n)) {
        // Attributed to every writer, so deleting one writer never moves the
        // cause onto a different node.
        if (host_outputs.count(t)) {
          here.push_back(Cause{n.id, std::nullopt, CauseKind::HostOutput, t, std::nullopt});
        }
        if (inputs.count(t)) {
          std::optional<std::uint32_t> slot;
          if (n.kernel()) slot = 0;
          here.push_back(Cause{n.id, slot, CauseKind::InputMutation, t, std::nullopt});
        }
      }
    }
    std::sort(here.begin(), here.end(), [](const Cause& a, const Cause& b) {
      if (a.slot != b.slot) return a.slot < b.slot;
      return a.kind < b.kind;
    });
    r.causes.insert(r.causes.end(), here.begin(), here.end());
  }
  r.eligible = r.causes.empty();
  return r;
}

std::vector<EligibilityReport> analyze_program(const Program& program) {
  std::vector<EligibilityReport> out;
  out.reserve(program.blocks.size());
  for (const auto& b : program.blocks) out.push_back(analyze(b, program));
  return out;
}

}  // namespace graphcap
