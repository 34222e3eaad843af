// SPDX-License-Identifier: Apache-2.0
//
// graphcap: command-line driver for the capture pipeline.
//
// Exit status: 0 success, 1 bad input (schema, validation, usage), 2 internal
// invariant violation.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "graphcap/capture.hpp"
#include "graphcap/cgct.hpp"
#include "graphcap/error.hpp"
#include "graphcap/fixtures.hpp"
#include "graphcap/interpreter.hpp"
#include "graphcap/report.hpp"
#include "graphcap/selector.hpp"
#include "graphcap/validate.hpp"
#include "graphcap/workload_io.hpp"

namespace fs = std::filesystem;
using namespace graphcap;

namespace {

struct RunConfig {
  std::vector<std::string> inputs;
  std::string cost_model;
  std::string format = "json";
  std::optional<std::uint64_t> seed;
  int verbosity = 0;
  std::string output;
  // subcommand-specific
  std::string emit_workload;
  bool verify = false;
  bool timeline = false;
  std::string fixture_name;
  std::string fixture_dir;
};

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void log(const RunConfig& cfg, const std::string& msg) {
  if (cfg.verbosity > 0) std::cerr << "graphcap: " << msg << "\n";
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError(path.string() + ": cannot open file");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Workload cost model, defaulted from $GRAPHCAP_CONFIG_DIR/cost_model.json when
// the workload carries none, then overridden field-wise by --cost-model.
Program load(const RunConfig& cfg, const fs::path& path) {
  const std::string text = read_file(path);
  Program p;
  try {
    p = parse_workload_text(text);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Schema) throw InputError(path.string() + ": " + e.what());
    throw;
  }
  const json raw = json::parse(text, nullptr, false);
  if (const char* dir = std::getenv("GRAPHCAP_CONFIG_DIR"); dir && !raw.contains("cost_model")) {
    fs::path cfg_path = fs::path(dir) / "cost_model.json";
    if (fs::exists(cfg_path)) p.cost = load_cost_model(cfg_path);
  }
  if (!cfg.cost_model.empty()) p.cost = load_cost_model(cfg.cost_model, p.cost);
  if (cfg.seed) p.seed = *cfg.seed;
  ValidationReport v = validate(p);
  if (!v.ok()) {
    std::string msg = path.string() + ": invalid program";
    for (const auto& viol : v.violations) msg += "\n  " + std::string(to_string(viol.kind)) + ": " + viol.message;
    throw InputError(msg);
  }
  log(cfg, "loaded " + path.string() + " (" + std::to_string(kernel_count(p)) + " kernels)");
  return p;
}

void emit(const RunConfig& cfg, const std::string& text) {
  if (cfg.output.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(cfg.output);
  if (!out) throw InputError(cfg.output + ": cannot write");
  out << text;
}

void emit_doc(const RunConfig& cfg, const json& doc, std::string (*text)(const json&)) {
  if (cfg.format == "text") {
    emit(cfg, text(doc));
  } else if (cfg.format == "json") {
    emit(cfg, dump(doc));
  } else {
    throw InputError("format '" + cfg.format + "' is not supported by this subcommand");
  }
}

const std::string& single_input(const RunConfig& cfg) {
  if (cfg.inputs.size() != 1) throw InputError("expected exactly one input workload");
  return cfg.inputs.front();
}

int cmd_analyze(const RunConfig& cfg) {
  emit_doc(cfg, analyze_json(load(cfg, single_input(cfg))), analyze_text);
  return 0;
}

int cmd_transform(const RunConfig& cfg) {
  Program p = load(cfg, single_input(cfg));
  TransformResult t = transform_until_eligible(p);
  if (cfg.verify) {
    auto m = compare_outputs(run_eager(p), run_eager(t.program));
    if (m) throw Error(ErrorCode::InternalInvariant, "transformed program diverges: " + m->detail);
    log(cfg, "verified " + std::to_string(p.iterations) + " iterations");
  }
  if (!cfg.emit_workload.empty()) {
    std::ofstream out(cfg.emit_workload);
    if (!out) throw InputError(cfg.emit_workload + ": cannot write");
    out << dump_workload(t.program);
  }
  emit_doc(cfg, transform_json(p, t), transform_text);
  return 0;
}

int cmd_capture(const RunConfig& cfg) {
  Program p = load(cfg, single_input(cfg));
  emit_doc(cfg, capture_json(p, capture_eligible(p)), capture_text);
  return 0;
}

int cmd_pi(const RunConfig& cfg) {
  Program p = load(cfg, single_input(cfg));
  emit_doc(cfg, pi_json(p, capture_eligible(p)), pi_text);
  return 0;
}

int cmd_simulate(const RunConfig& cfg) {
  Program p = load(cfg, single_input(cfg));
  emit_doc(cfg, simulate_json(p, p.cost, cfg.timeline), simulate_text);
  return 0;
}

int cmd_select(const RunConfig& cfg) {
  Program p = load(cfg, single_input(cfg));
  emit_doc(cfg, select_json(p, select_program(p, p.cost)), select_text);
  return 0;
}

int cmd_report(const RunConfig& cfg) {
  Program p = load(cfg, single_input(cfg));
  emit_doc(cfg, report_json(p, p.cost), report_text);
  return 0;
}

std::vector<fs::path> expand_inputs(const std::vector<std::string>& inputs) {
  std::vector<fs::path> files;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      for (const auto& e : fs::directory_iterator(in)) {
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
      }
    } else {
      files.emplace_back(in);
    }
  }
  return files;
}

int cmd_sweep(const RunConfig& cfg) {
  const auto files = expand_inputs(cfg.inputs);
  if (files.empty()) throw InputError("sweep needs at least one workload");
  std::vector<Program> programs;
  for (const auto& f : files) programs.push_back(load(cfg, f));
  std::vector<std::vector<SweepRow>> rows(programs.size());
  std::vector<std::string> errors(programs.size());
  const auto n = static_cast<std::ptrdiff_t>(programs.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      rows[i] = sweep_rows(programs[i], programs[i].cost);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i].empty()) throw Error(ErrorCode::InternalInvariant, files[i].string() + ": " + errors[i]);
  }
  // Order by workload name, then file path, independent of completion order.
  std::vector<std::size_t> order(programs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::tie(programs[a].name, files[a]) < std::tie(programs[b].name, files[b]);
  });
  if (cfg.format == "json") {
    json doc = json::array();
    for (std::size_t i : order) {
      for (const auto& r : rows[i]) {
        doc.push_back(json{{"workload", r.workload},
                           {"graph_id", r.block.value},
                           {"eager_us", r.eager_us},
                           {"graph_us", r.graph_us ? json(*r.graph_us) : json(nullptr)},
                           {"graph_pi_us", r.graph_pi_us ? json(*r.graph_pi_us) : json(nullptr)},
                           {"chosen", std::string(to_string(r.chosen))},
                           {"speedup", r.speedup}});
      }
    }
    emit(cfg, dump(doc));
    return 0;
  }
  std::string out = sweep_csv_header() + "\n";
  for (std::size_t i : order) {
    for (const auto& r : rows[i]) out += to_csv(r) + "\n";
  }
  emit(cfg, out);
  return 0;
}

int cmd_fixture(const RunConfig& cfg) {
  if (!cfg.fixture_dir.empty()) {
    fs::create_directories(cfg.fixture_dir);
    for (const auto& name : fixture_names()) {
      std::ofstream out(fs::path(cfg.fixture_dir) / (name + ".json"));
      if (!out) throw InputError(cfg.fixture_dir + ": cannot write");
      out << dump_workload(build_fixture(name));
    }
    return 0;
  }
  if (cfg.fixture_name.empty()) {
    std::string names;
    for (const auto& n : fixture_names()) names += n + "\n";
    emit(cfg, names + "random\n");
    return 0;
  }
  FixtureSpec spec;
  spec.name = cfg.fixture_name;
  spec.seed = cfg.seed.value_or(0);
  try {
    emit(cfg, dump_workload(build(spec)));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidSpec) throw InputError(e.what());
    throw;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"graphcap: graph-capture compiler passes and launch simulator"};
  app.require_subcommand(1, 1);
  app.fallthrough();
  RunConfig cfg;
  app.add_option("--cost-model", cfg.cost_model, "Cost-model JSON merged over the workload's own")
      ->check(CLI::ExistingFile);
  app.add_option("--format", cfg.format, "Output format")->check(CLI::IsMember({"json", "text", "csv"}));
  app.add_option("--seed", cfg.seed, "Seed for generated values and random fixtures");
  app.add_flag("-v,--verbose", cfg.verbosity, "Log progress to stderr");
  app.add_option("-o,--output", cfg.output, "Write the result to a file instead of stdout");

  auto input_cmd = [&](const char* name, const char* help) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("input", cfg.inputs, "Workload JSON")->required();
    return sub;
  };
  CLI::App* analyze = input_cmd("analyze", "Report capture blockers per block");
  CLI::App* transform = input_cmd("transform", "Repair blockers; print the transform log");
  transform->add_option("--emit-workload", cfg.emit_workload, "Write the transformed workload here");
  transform->add_flag("--verify", cfg.verify, "Check eager outputs are unchanged by the transform");
  CLI::App* capture = input_cmd("capture", "Capture every eligible block");
  CLI::App* pi = input_cmd("pi", "Per-replay copy bytes before and after parameter indirection");
  CLI::App* simulate = input_cmd("simulate", "Simulated eager and replay times per block");
  simulate->add_flag("--timeline", cfg.timeline, "Include per-event timelines");
  CLI::App* select = input_cmd("select", "Choose eager, graph or graph with indirection per block");
  CLI::App* report = input_cmd("report", "analyze + transform, then every later stage on the result");
  CLI::App* sweep = input_cmd("sweep", "Per-graph speedups over workloads or directories (CSV)");
  CLI::App* fixture = app.add_subcommand("fixture", "Print a built-in fixture as workload JSON");
  fixture->add_option("name", cfg.fixture_name, "Fixture name, or 'random' (uses --seed)");
  fixture->add_option("--all", cfg.fixture_dir, "Write every named fixture into this directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }
  if (sweep->parsed() && !app.get_option("--format")->count()) cfg.format = "csv";
  if (cfg.format == "csv" && !sweep->parsed()) {
    std::cerr << "graphcap: --format csv is only available for sweep\n";
    return 1;
  }

  try {
    if (analyze->parsed()) return cmd_analyze(cfg);
    if (transform->parsed()) return cmd_transform(cfg);
    if (capture->parsed()) return cmd_capture(cfg);
    if (pi->parsed()) return cmd_pi(cfg);
    if (simulate->parsed()) return cmd_simulate(cfg);
    if (select->parsed()) return cmd_select(cfg);
    if (report->parsed()) return cmd_report(cfg);
    if (sweep->parsed()) return cmd_sweep(cfg);
    if (fixture->parsed()) return cmd_fixture(cfg);
  } catch (const InputError& e) {
    std::cerr << "graphcap: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "graphcap: " << e.what() << "\n";
    return (e.code() == ErrorCode::Schema || e.code() == ErrorCode::InvalidSpec) ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "graphcap: internal error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
