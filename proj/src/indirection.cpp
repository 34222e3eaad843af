// SPDX-License-Identifier: Apache-2.0

#include "graphcap/indirection.hpp"

#include <algorithm>

#include "graphcap/error.hpp"

namespace graphcap {

namespace {

constexpr std::uint64_t stand_in_scalar(ScalarId s) {
  return addr::kStandInBase | 0x4000000000ULL | (std::uint64_t{s.value} << 8);
}

struct Consumer {
  std::size_t position;
  bool opaque;
};

}  // namespace

ParamBufferImage static_image(const Node& node) {
  ParamBufferImage img;
  img.node = node.id;
  if (const auto* k = node.kernel()) {
    for (const auto& p : k->params) {
      switch (p.kind) {
        case BindingKind::ScalarByValue: img.push_u64(stand_in_scalar(p.scalar)); break;
        case BindingKind::DevicePtr:
        case BindingKind::HostPtr: img.push_u64(addr::stand_in(p.tensor)); break;
        case BindingKind::PtrCell: img.push_u64(addr::stand_in_cell(p.cell)); break;
      }
    }
  } else if (const auto* c = node.copy()) {
    img.push_u64(addr::stand_in(c->src));
    img.push_u64(addr::stand_in(c->dst));
  }
  return img;
}

CapturedGraph apply_pi(const Program& program, const CapturedGraph& captured) {
  CapturedGraph g = captured;
  std::uint32_t next_cell = 1;
  for (const auto& c : g.cells) next_cell = std::max(next_cell, c.id.value + 1);
  std::uint32_t next_ph = 1;
  for (const auto& p : g.placeholders) next_ph = std::max(next_ph, p.id.value + 1);

  std::vector<Patch> patches = g.prelude ? g.prelude->patches : std::vector<Patch>{};
  std::vector<Placeholder> added;
  std::vector<PlaceholderId> dropped_copies;
  std::vector<CopyAction> added_copies;

  for (auto& ph : g.placeholders) {
    if (ph.role != PlaceholderRole::Data || ph.anchor) continue;

    std::vector<Consumer> consumers;
    const Node* memcopy_consumer = nullptr;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
      const Node& n = g.nodes[i];
      if (const auto* k = n.kernel()) {
        const bool uses = std::any_of(k->params.begin(), k->params.end(), [&](const ParamBinding& p) {
          return p.references_tensor() && p.tensor == ph.tensor;
        });
        if (uses) consumers.push_back({i, !k->rewritable});
      } else if (const auto* c = n.copy()) {
        if ((c->src == ph.tensor || c->dst == ph.tensor) && memcopy_consumer == nullptr) memcopy_consumer = &n;
      }
    }
    if (memcopy_consumer != nullptr) {
      g.fallbacks.push_back(PiFallback{ph.id, memcopy_consumer->id, "MemCopyConsumer"});
      continue;
    }
    if (consumers.empty()) continue;

    std::vector<Patch> mine;
    std::optional<PiFallback> failure;
    const CellId cell{next_cell};
    for (const auto& c : consumers) {
      if (!c.opaque) continue;
      const Node& n = g.nodes[c.position];
      try {
        mine.push_back(Patch{n.id, find_param_offset(static_image(n), addr::stand_in(ph.tensor)), cell});
      } catch (const Error& e) {
        if (e.code() != ErrorCode::OffsetAmbiguous && e.code() != ErrorCode::NotFound) throw;
        failure = PiFallback{ph.id, n.id, std::string(to_string(e.code()))};
        break;
      }
    }
    if (failure) {
      g.fallbacks.push_back(*failure);
      continue;
    }

    ++next_cell;
    g.cells.push_back(PointerCell{cell, ph.source, addr::stand_in_cell(cell)});
    for (const auto& c : consumers) {
      if (c.opaque) continue;
      for (auto& p : g.nodes[c.position].kernel()->params) {
        if (p.references_tensor() && p.tensor == ph.tensor) {
          const Mutability m = p.mutability;
          p = ParamBinding::ptr_cell(p.slot, cell);
          p.mutability = m;
        }
      }
    }
    if (mine.empty()) {
      ph.role = PlaceholderRole::PointerCell;
      ph.size_bytes = 8;
      ph.cell = cell;
      for (auto& a : g.copy_plan) {
        if (a.target == ph.id) {
          a.bytes = 8;
          a.direction = CopyDirection::H2D;
        }
      }
    } else {
      // Opaque consumers keep reading the Data placeholder's slot, which the
      // prelude overwrites; the placeholder itself is never refreshed again.
      ph.anchor = true;
      dropped_copies.push_back(ph.id);
      Placeholder q;
      q.id = PlaceholderId{next_ph++};
      q.source = ph.source;
      q.size_bytes = 8;
      q.role = PlaceholderRole::PointerCell;
      q.cell = cell;
      added.push_back(q);
      added_copies.push_back(CopyAction{q.id, q.source, 8, CopyDirection::H2D});
      patches.insert(patches.end(), mine.begin(), mine.end());
    }
  }

  g.placeholders.insert(g.placeholders.end(), added.begin(), added.end());
  g.copy_plan.erase(std::remove_if(g.copy_plan.begin(), g.copy_plan.end(),
                                   [&](const CopyAction& a) {
                                     return std::find(dropped_copies.begin(), dropped_copies.end(), a.target) !=
                                            dropped_copies.end();
                                   }),
                    g.copy_plan.end());
  g.copy_plan.insert(g.copy_plan.end(), added_copies.begin(), added_copies.end());

  if (!patches.empty()) {
    const double cost = program.cost.prelude_us(patches.size());
    if (!g.prelude) {
      std::uint32_t next_node = program.next_node_id().value;
      for (const auto& n : g.nodes) next_node = std::max(next_node, n.id.value + 1);
      g.prelude = PreludePlan{NodeId{next_node}, {}, program.cost.prelude_per_patch_us};
      g.nodes.insert(g.nodes.begin(), Node{NodeId{next_node}, PreludeKernel{cost}});
    } else {
      for (auto& n : g.nodes) {
        if (n.id == g.prelude->node) n.op = PreludeKernel{cost};
      }
    }
    g.prelude->patches = patches;
  }

  g.stats.bytes_copied_per_replay = 0;
  g.stats.indirected_param_count = 0;
  for (const auto& a : g.copy_plan) {
    g.stats.bytes_copied_per_replay += a.bytes;
    if (a.direction == CopyDirection::H2D) ++g.stats.indirected_param_count;
  }
  return g;
}

}  // namespace graphcap
