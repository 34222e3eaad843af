// SPDX-License-Identifier: Apache-2.0
//
// Workload JSON reader and writer. Parse failures throw Error(Schema) whose
// message starts with the JSON path of the offending field, e.g.
// "$.blocks[0].nodes[3].opcode: unknown opcode 'Foo'".

#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "graphcap/ir.hpp"

namespace graphcap {

using json = nlohmann::json;

Program parse_workload(const json& doc);
Program parse_workload_text(const std::string& text);
Program load_workload(const std::filesystem::path& path);

json to_json(const Program& program);
// Pretty-printed with sorted keys and a trailing newline; byte-stable.
std::string dump_workload(const Program& program);

json to_json(const CostModel& cost);
// Field-wise merge of `doc` over `base`; unknown fields are schema errors.
CostModel parse_cost_model(const json& doc, const CostModel& base = {}, const std::string& path = "$");
CostModel load_cost_model(const std::filesystem::path& path, const CostModel& base = {});

json to_json(const Node& node);
json to_json(const ParamBinding& binding);
json to_json(const ValueRule& rule);

std::string dump(const json& doc);

}  // namespace graphcap
