// SPDX-License-Identifier: Apache-2.0

#include "graphcap/workload_io.hpp"

#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include "graphcap/error.hpp"

namespace graphcap {

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw Error(ErrorCode::Schema, path + ": " + msg);
}

// A JSON object plus the path it was reached by. Every accessor records which
// keys were consumed so leftovers can be reported as unknown fields.
class Obj {
 public:
  Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "expected an object");
  }

  std::string at(const std::string& key) const { return path_ + "." + key; }
  const std::string& path() const { return path_; }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& get(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) fail(at(key), "missing required field");
    return *it;
  }

  std::uint64_t u64(const std::string& key) {
    const json& v = get(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
      fail(at(key), "expected a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }
  std::uint64_t u64(const std::string& key, std::uint64_t dflt) { return has(key) ? u64(key) : dflt; }

  std::uint32_t u32(const std::string& key) {
    const std::uint64_t v = u64(key);
    if (v > 0xffffffffULL) fail(at(key), "value out of range");
    return static_cast<std::uint32_t>(v);
  }
  std::uint32_t u32(const std::string& key, std::uint32_t dflt) { return has(key) ? u32(key) : dflt; }

  double num(const std::string& key) {
    const json& v = get(key);
    if (!v.is_number()) fail(at(key), "expected a number");
    return v.get<double>();
  }
  double num(const std::string& key, double dflt) { return has(key) ? num(key) : dflt; }

  bool boolean(const std::string& key, bool dflt) {
    if (!has(key)) return dflt;
    const json& v = get(key);
    if (!v.is_boolean()) fail(at(key), "expected a boolean");
    return v.get<bool>();
  }

  std::string str(const std::string& key) {
    const json& v = get(key);
    if (!v.is_string()) fail(at(key), "expected a string");
    return v.get<std::string>();
  }

  const json& arr(const std::string& key) {
    const json& v = get(key);
    if (!v.is_array()) fail(at(key), "expected an array");
    return v;
  }
  const json* opt_arr(const std::string& key) { return has(key) ? &arr(key) : nullptr; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) fail(at(it.key()), "unknown field");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::string idx(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

template <class T, class ParseFn>
T parse_enum_field(Obj& o, const std::string& key, ParseFn fn, const char* what) {
  const std::string s = o.str(key);
  auto v = fn(s);
  if (!v) fail(o.at(key), std::string("unknown ") + what + " '" + s + "'");
  return *v;
}

ValueRule parse_rule(const json& j, const std::string& path) {
  Obj o(j, path);
  ValueRule r;
  r.kind = parse_enum_field<RuleKind>(o, "rule", parse_rule_kind, "rule");
  switch (r.kind) {
    case RuleKind::Fill:
      r.value = o.num("value");
      break;
    case RuleKind::Values:
    case RuleKind::Sequence: {
      const json& a = o.arr("values");
      for (std::size_t i = 0; i < a.size(); ++i) {
        if (!a[i].is_number()) fail(idx(o.at("values"), i), "expected a number");
        r.values.push_back(a[i].get<double>());
      }
      break;
    }
    case RuleKind::Uniform:
      r.lo = o.num("lo");
      r.hi = o.num("hi");
      break;
    case RuleKind::Ramp:
      r.start = o.num("start");
      r.step = o.num("step");
      break;
  }
  o.finish();
  return r;
}

TensorDesc parse_tensor(const json& j, const std::string& path) {
  Obj o(j, path);
  TensorDesc t;
  t.id = TensorId{o.u32("id")};
  t.device = parse_enum_field<Placement>(o, "device", parse_placement, "placement");
  t.elem_size = o.u32("elem_size");
  t.num_elems = o.u64("num_elems");
  t.is_scalar = o.boolean("is_scalar", false);
  t.constant = o.boolean("constant", false);
  if (o.has("init")) t.init = parse_rule(o.get("init"), o.at("init"));
  if (t.elem_size < 1) fail(o.at("elem_size"), "must be at least 1");
  if (t.num_elems < 1) fail(o.at("num_elems"), "must be at least 1");
  o.finish();
  return t;
}

ParamBinding parse_binding(const json& j, const std::string& path) {
  Obj o(j, path);
  ParamBinding b;
  b.slot = o.u32("slot");
  b.kind = parse_enum_field<BindingKind>(o, "kind", parse_binding_kind, "binding kind");
  switch (b.kind) {
    case BindingKind::ScalarByValue:
      b.scalar = ScalarId{o.u32("scalar")};
      break;
    case BindingKind::DevicePtr:
    case BindingKind::HostPtr:
      b.tensor = TensorId{o.u32("tensor")};
      break;
    case BindingKind::PtrCell:
      b.cell = CellId{o.u32("cell")};
      break;
  }
  if (o.has("mutability")) {
    b.mutability = parse_enum_field<Mutability>(o, "mutability", parse_mutability, "mutability");
  }
  o.finish();
  return b;
}

std::vector<TensorId> parse_ids(const json& a, const std::string& path) {
  std::vector<TensorId> out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_number_unsigned()) fail(idx(path, i), "expected a tensor id");
    out.push_back(TensorId{a[i].get<std::uint32_t>()});
  }
  return out;
}

Node parse_node(const json& j, const std::string& path) {
  Obj o(j, path);
  Node n;
  n.id = NodeId{o.u32("id")};
  const NodeKind kind = parse_enum_field<NodeKind>(o, "kind", parse_node_kind, "node kind");
  switch (kind) {
    case NodeKind::KernelLaunch: {
      KernelLaunch k;
      k.kernel_id = o.str("kernel_id");
      k.opcode = parse_enum_field<Opcode>(o, "opcode", parse_opcode, "opcode");
      k.rewritable = o.boolean("rewritable", true);
      k.uses_rng = o.boolean("uses_rng", false);
      k.in_place = o.boolean("in_place", false);
      k.duration_us = o.num("duration_us");
      const json& params = o.arr("params");
      for (std::size_t i = 0; i < params.size(); ++i) {
        k.params.push_back(parse_binding(params[i], idx(o.at("params"), i)));
      }
      if (o.has("attrs")) {
        Obj a(o.get("attrs"), o.at("attrs"));
        k.attrs.m = a.u32("m", 0);
        k.attrs.k = a.u32("k", 0);
        k.attrs.n = a.u32("n", 0);
        k.attrs.transpose_b = a.boolean("transpose_b", false);
        k.attrs.divide = a.boolean("divide", false);
        a.finish();
      }
      n.op = std::move(k);
      break;
    }
    case NodeKind::MemCopy:
      n.op = MemCopy{TensorId{o.u32("src")}, TensorId{o.u32("dst")}, o.boolean("sync", false)};
      break;
    case NodeKind::Alloc:
      n.op = Alloc{TensorId{o.u32("tensor")}};
      break;
    case NodeKind::Free:
      n.op = Free{TensorId{o.u32("tensor")}};
      break;
    case NodeKind::DeviceSync:
      n.op = DeviceSync{};
      break;
    case NodeKind::PreludeKernel:
      n.op = PreludeKernel{o.num("duration_us")};
      break;
  }
  // reads/writes are derived; when present they must agree with the operands.
  for (const char* key : {"reads", "writes"}) {
    if (const json* a = o.opt_arr(key)) {
      auto given = parse_ids(*a, o.at(key));
      std::sort(given.begin(), given.end());
      const auto derived = std::string(key) == "reads" ? reads(n) : writes(n);
      if (given != derived) fail(o.at(key), "does not match the node's operands");
    }
  }
  o.finish();
  return n;
}

std::vector<Node> parse_nodes(const json& a, const std::string& path) {
  std::vector<Node> out;
  for (std::size_t i = 0; i < a.size(); ++i) out.push_back(parse_node(a[i], idx(path, i)));
  return out;
}

Block parse_block(const json& j, const std::string& path) {
  Obj o(j, path);
  Block b;
  b.id = BlockId{o.u32("id")};
  if (const json* a = o.opt_arr("inputs")) {
    for (std::size_t i = 0; i < a->size(); ++i) b.inputs.push_back(parse_binding((*a)[i], idx(o.at("inputs"), i)));
  }
  if (const json* a = o.opt_arr("prologue")) {
    for (std::size_t i = 0; i < a->size(); ++i) {
      Obj s((*a)[i], idx(o.at("prologue"), i));
      b.prologue.push_back(ScalarStage{ScalarId{s.u32("scalar")}, TensorId{s.u32("tensor")}});
      s.finish();
    }
  }
  b.nodes = parse_nodes(o.arr("nodes"), o.at("nodes"));
  if (const json* a = o.opt_arr("epilogue")) b.epilogue = parse_nodes(*a, o.at("epilogue"));
  if (const json* a = o.opt_arr("outputs")) b.outputs = parse_ids(*a, o.at("outputs"));
  o.finish();
  return b;
}

IterationInput parse_iteration_input(const json& j, const std::string& path) {
  Obj o(j, path);
  IterationInput in;
  if (o.has("tensor")) in.tensor = TensorId{o.u32("tensor")};
  if (o.has("scalar")) in.scalar = ScalarId{o.u32("scalar")};
  if (in.tensor.has_value() == in.scalar.has_value()) fail(path, "exactly one of tensor or scalar is required");
  in.rule = parse_rule(o.get("value"), o.at("value"));
  o.finish();
  return in;
}

json rule_json(const ValueRule& r) {
  json j;
  j["rule"] = std::string(to_string(r.kind));
  switch (r.kind) {
    case RuleKind::Fill: j["value"] = r.value; break;
    case RuleKind::Values:
    case RuleKind::Sequence: j["values"] = r.values; break;
    case RuleKind::Uniform:
      j["lo"] = r.lo;
      j["hi"] = r.hi;
      break;
    case RuleKind::Ramp:
      j["start"] = r.start;
      j["step"] = r.step;
      break;
  }
  return j;
}

json ids_json(const std::vector<TensorId>& ids) {
  json a = json::array();
  for (TensorId t : ids) a.push_back(t.value);
  return a;
}

json nodes_json(const std::vector<Node>& nodes) {
  json a = json::array();
  for (const auto& n : nodes) a.push_back(to_json(n));
  return a;
}

}  // namespace

json to_json(const ValueRule& rule) { return rule_json(rule); }

json to_json(const CostModel& c) {
  return json{{"launch_latency_us", c.launch_latency_us},
              {"graph_launch_us", c.graph_launch_us},
              {"device_dispatch_us", c.device_dispatch_us},
              {"d2d_bandwidth_GBps", c.d2d_bandwidth_GBps},
              {"d2d_fixed_us", c.d2d_fixed_us},
              {"h2d_bandwidth_GBps", c.h2d_bandwidth_GBps},
              {"h2d_fixed_us", c.h2d_fixed_us},
              {"prelude_base_us", c.prelude_base_us},
              {"prelude_per_patch_us", c.prelude_per_patch_us},
              {"deref_per_kernel_us", c.deref_per_kernel_us},
              {"rng_reset_us", c.rng_reset_us},
              {"host_obj_rebuild_us", c.host_obj_rebuild_us}};
}

CostModel parse_cost_model(const json& doc, const CostModel& base, const std::string& path) {
  Obj o(doc, path);
  CostModel c = base;
  c.launch_latency_us = o.num("launch_latency_us", c.launch_latency_us);
  c.graph_launch_us = o.num("graph_launch_us", c.graph_launch_us);
  c.device_dispatch_us = o.num("device_dispatch_us", c.device_dispatch_us);
  c.d2d_bandwidth_GBps = o.num("d2d_bandwidth_GBps", c.d2d_bandwidth_GBps);
  c.d2d_fixed_us = o.num("d2d_fixed_us", c.d2d_fixed_us);
  c.h2d_bandwidth_GBps = o.num("h2d_bandwidth_GBps", c.h2d_bandwidth_GBps);
  c.h2d_fixed_us = o.num("h2d_fixed_us", c.h2d_fixed_us);
  c.prelude_base_us = o.num("prelude_base_us", c.prelude_base_us);
  c.prelude_per_patch_us = o.num("prelude_per_patch_us", c.prelude_per_patch_us);
  c.deref_per_kernel_us = o.num("deref_per_kernel_us", c.deref_per_kernel_us);
  c.rng_reset_us = o.num("rng_reset_us", c.rng_reset_us);
  c.host_obj_rebuild_us = o.num("host_obj_rebuild_us", c.host_obj_rebuild_us);
  o.finish();
  if (!c.valid()) fail(path, "costs must be non-negative and bandwidths positive");
  return c;
}

CostModel load_cost_model(const std::filesystem::path& path, const CostModel& base) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Schema, path.string() + ": cannot open file");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    fail("$", std::string("malformed JSON: ") + e.what());
  }
  return parse_cost_model(doc, base);
}

json to_json(const ParamBinding& b) {
  json j{{"slot", b.slot}, {"kind", std::string(to_string(b.kind))}};
  switch (b.kind) {
    case BindingKind::ScalarByValue: j["scalar"] = b.scalar.value; break;
    case BindingKind::DevicePtr:
    case BindingKind::HostPtr: j["tensor"] = b.tensor.value; break;
    case BindingKind::PtrCell: j["cell"] = b.cell.value; break;
  }
  if (b.mutability != Mutability::Unassigned) j["mutability"] = std::string(to_string(b.mutability));
  return j;
}

json to_json(const Node& n) {
  json j{{"id", n.id.value}, {"kind", std::string(to_string(n.kind()))}};
  if (const auto* k = n.kernel()) {
    j["kernel_id"] = k->kernel_id;
    j["opcode"] = std::string(to_string(k->opcode));
    j["rewritable"] = k->rewritable;
    j["uses_rng"] = k->uses_rng;
    j["in_place"] = k->in_place;
    j["duration_us"] = k->duration_us;
    json params = json::array();
    for (const auto& p : k->params) params.push_back(to_json(p));
    j["params"] = std::move(params);
    if (k->attrs != KernelAttrs{}) {
      j["attrs"] = json{{"m", k->attrs.m},
                        {"k", k->attrs.k},
                        {"n", k->attrs.n},
                        {"transpose_b", k->attrs.transpose_b},
                        {"divide", k->attrs.divide}};
    }
  } else if (const auto* c = n.copy()) {
    j["src"] = c->src.value;
    j["dst"] = c->dst.value;
    j["sync"] = c->sync;
  } else if (const auto* a = std::get_if<Alloc>(&n.op)) {
    j["tensor"] = a->tensor.value;
  } else if (const auto* f = std::get_if<Free>(&n.op)) {
    j["tensor"] = f->tensor.value;
  } else if (const auto* p = std::get_if<PreludeKernel>(&n.op)) {
    j["duration_us"] = p->duration_us;
  }
  j["reads"] = ids_json(reads(n));
  j["writes"] = ids_json(writes(n));
  return j;
}

json to_json(const Program& p) {
  json tensors = json::array();
  for (const auto& [id, t] : p.tensors) {
    json tj{{"id", id.value},
            {"device", std::string(to_string(t.device))},
            {"elem_size", t.elem_size},
            {"num_elems", t.num_elems},
            {"is_scalar", t.is_scalar},
            {"constant", t.constant}};
    if (t.init) tj["init"] = rule_json(*t.init);
    tensors.push_back(std::move(tj));
  }
  json scalars = json::array();
  for (const auto& [id, s] : p.scalars) {
    scalars.push_back(json{{"id", id.value}, {"name", s.name}, {"elem_size", s.elem_size}});
  }
  json inputs = json::array();
  for (const auto& in : p.iteration_inputs) {
    json ij{{"value", rule_json(in.rule)}};
    if (in.tensor) ij["tensor"] = in.tensor->value;
    if (in.scalar) ij["scalar"] = in.scalar->value;
    inputs.push_back(std::move(ij));
  }
  json blocks = json::array();
  for (const auto& b : p.blocks) {
    json bj;
    bj["id"] = b.id.value;
    json bin = json::array();
    for (const auto& in : b.inputs) bin.push_back(to_json(in));
    bj["inputs"] = std::move(bin);
    json pro = json::array();
    for (const auto& st : b.prologue) pro.push_back(json{{"scalar", st.scalar.value}, {"tensor", st.tensor.value}});
    bj["prologue"] = std::move(pro);
    bj["nodes"] = nodes_json(b.nodes);
    bj["epilogue"] = nodes_json(b.epilogue);
    bj["outputs"] = ids_json(b.outputs);
    blocks.push_back(std::move(bj));
  }
  return json{{"name", p.name},
              {"cost_model", to_json(p.cost)},
              {"tensors", std::move(tensors)},
              {"scalars", std::move(scalars)},
              {"iteration_inputs", std::move(inputs)},
              {"init", nodes_json(p.init_nodes)},
              {"blocks", std::move(blocks)},
              {"iterations", p.iterations},
              {"seed", p.seed}};
}

Program parse_workload(const json& doc) {
  Obj o(doc, "$");
  Program p;
  p.name = o.has("name") ? o.str("name") : std::string();
  if (o.has("cost_model")) p.cost = parse_cost_model(o.get("cost_model"), CostModel{}, o.at("cost_model"));
  const json& tensors = o.arr("tensors");
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    TensorDesc t = parse_tensor(tensors[i], idx(o.at("tensors"), i));
    if (!p.tensors.emplace(t.id, t).second) fail(idx(o.at("tensors"), i) + ".id", "duplicate tensor id");
  }
  if (const json* a = o.opt_arr("scalars")) {
    for (std::size_t i = 0; i < a->size(); ++i) {
      Obj s((*a)[i], idx(o.at("scalars"), i));
      ScalarVar v;
      v.id = ScalarId{s.u32("id")};
      v.name = s.has("name") ? s.str("name") : std::string();
      v.elem_size = s.u32("elem_size", 8);
      s.finish();
      if (!p.scalars.emplace(v.id, v).second) fail(idx(o.at("scalars"), i) + ".id", "duplicate scalar id");
    }
  }
  if (const json* a = o.opt_arr("iteration_inputs")) {
    for (std::size_t i = 0; i < a->size(); ++i) {
      p.iteration_inputs.push_back(parse_iteration_input((*a)[i], idx(o.at("iteration_inputs"), i)));
    }
  }
  if (const json* a = o.opt_arr("init")) p.init_nodes = parse_nodes(*a, o.at("init"));
  const json& blocks = o.arr("blocks");
  for (std::size_t i = 0; i < blocks.size(); ++i) p.blocks.push_back(parse_block(blocks[i], idx(o.at("blocks"), i)));
  const std::uint64_t iters = o.u64("iterations", 1);
  if (iters < 1 || iters > 1000000) fail(o.at("iterations"), "must be between 1 and 1000000");
  p.iterations = static_cast<int>(iters);
  p.seed = o.u64("seed", 0);
  o.finish();
  return p;
}

Program parse_workload_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    fail("$", std::string("malformed JSON: ") + e.what());
  }
  return parse_workload(doc);
}

Program load_workload(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Schema, path.string() + ": cannot open file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_workload_text(ss.str());
}

std::string dump(const json& doc) { return doc.dump(2) + "\n"; }

std::string dump_workload(const Program& program) { return dump(to_json(program)); }

}  // namespace graphcap
