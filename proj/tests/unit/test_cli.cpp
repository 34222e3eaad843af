// SPDX-License-Identifier: Apache-2.0
//
// Drives the graphcap binary as a subprocess.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Proc {
  int status = -1;
  std::string out;
};

Proc run(const std::string& args) {
  const std::string cmd = std::string(GRAPHCAP_CLI) + " " + args + " 2>&1";
  Proc r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int st = pclose(pipe);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / ("graphcap_cli_" + std::to_string(::getpid()));
    fs::create_directories(dir_);
    ASSERT_EQ(run("fixture --all " + dir_.string()).status, 0);
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }
  static std::string fx(const std::string& name) { return (dir_ / (name + ".json")).string(); }
  static fs::path dir_;
};

fs::path Cli::dir_;

}  // namespace

TEST_F(Cli, ReportShowsTheLaunchBoundEagerTime) {
  Proc r = run("report " + fx("dalle2"));
  ASSERT_EQ(r.status, 0) << r.out;
  json j = json::parse(r.out);
  const double eager = j["simulate"]["blocks"][0]["eager"]["total_us"].get<double>();
  EXPECT_NEAR(eager, 14000.0, 0.02 * 14000.0);
}

TEST_F(Cli, AnalyzeOnEligibleWorkload) {
  Proc r = run("analyze " + fx("dr_i"));
  ASSERT_EQ(r.status, 0) << r.out;
  json j = json::parse(r.out);
  EXPECT_EQ(j["eligible"], true);
  EXPECT_EQ(j["causes"], json::array());
}

TEST_F(Cli, MalformedInputExitsOneAndNamesTheFile) {
  const fs::path bad = dir_ / "broken.json";
  std::ofstream(bad) << "{\"blocks\": [";
  Proc r = run("analyze " + bad.string());
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.out.find(bad.string()), std::string::npos) << r.out;

  const fs::path wrong = dir_ / "wrong.json";
  std::ofstream(wrong) << R"({"tensors": [], "blocks": [], "iterations": "many"})";
  Proc w = run("analyze " + wrong.string());
  EXPECT_EQ(w.status, 1);
  EXPECT_NE(w.out.find("$.iterations"), std::string::npos) << w.out;
  fs::remove(bad);
  fs::remove(wrong);
}

TEST_F(Cli, ReportEqualsComposedStages) {
  const std::string in = fx("st");
  const fs::path transformed = dir_ / "st_transformed.json";
  Proc rep = run("report " + in);
  ASSERT_EQ(rep.status, 0) << rep.out;
  const json report = json::parse(rep.out);

  auto stage = [&](const std::string& args) {
    Proc r = run(args);
    EXPECT_EQ(r.status, 0) << args << ": " << r.out;
    return json::parse(r.out);
  };
  EXPECT_EQ(report["analyze"].dump(2), stage("analyze " + in).dump(2));
  EXPECT_EQ(report["transform"].dump(2), stage("transform " + in + " --emit-workload " + transformed.string()).dump(2));
  const std::string w = transformed.string();
  EXPECT_EQ(report["capture"].dump(2), stage("capture " + w).dump(2));
  EXPECT_EQ(report["pi"].dump(2), stage("pi " + w).dump(2));
  EXPECT_EQ(report["simulate"].dump(2), stage("simulate " + w).dump(2));
  EXPECT_EQ(report["select"].dump(2), stage("select " + w).dump(2));
  fs::remove(transformed);
}

TEST_F(Cli, OutputIsDeterministic) {
  for (const char* sub : {"report", "transform", "select"}) {
    Proc a = run(std::string(sub) + " " + fx("selection_corpus"));
    Proc b = run(std::string(sub) + " " + fx("selection_corpus"));
    ASSERT_EQ(a.status, 0);
    EXPECT_EQ(a.out, b.out) << sub;
  }
}

TEST_F(Cli, SweepWritesCsvOverADirectory) {
  Proc r = run("sweep " + dir_.string());
  ASSERT_EQ(r.status, 0) << r.out;
  std::istringstream lines(r.out);
  std::string header;
  std::getline(lines, header);
  EXPECT_EQ(header, "workload,graph_id,eager_us,graph_us,graph_pi_us,chosen,speedup");
  std::string row;
  std::size_t rows = 0;
  while (std::getline(lines, row)) {
    EXPECT_EQ(std::count(row.begin(), row.end(), ','), 6) << row;
    ++rows;
  }
  EXPECT_GT(rows, 20u);
}

TEST_F(Cli, TransformVerifyAndOutputFile) {
  const fs::path out = dir_ / "log.json";
  Proc r = run("transform " + fx("cause_combo") + " --verify -o " + out.string());
  ASSERT_EQ(r.status, 0) << r.out;
  json j = json::parse(slurp(out));
  EXPECT_EQ(j["log"].size(), 2u);
  fs::remove(out);
}

TEST_F(Cli, CostModelOverrideMerges) {
  const fs::path cm = dir_ / "cm.json";
  std::ofstream(cm) << R"({"launch_latency_us": 10.0})";
  Proc r = run("--cost-model " + cm.string() + " simulate " + fx("tiny_tensor"));
  ASSERT_EQ(r.status, 0) << r.out;
  json j = json::parse(r.out);
  EXPECT_EQ(j["cost_model"]["launch_latency_us"], 10.0);
  EXPECT_EQ(j["cost_model"]["graph_launch_us"], 7.5);
  fs::remove(cm);
}

TEST_F(Cli, UnknownFixtureIsAUsageError) {
  EXPECT_EQ(run("fixture no_such_thing").status, 1);
  EXPECT_EQ(run("frobnicate").status, 1);
}

// Shipped fixture files are exactly what the builders produce.
TEST_F(Cli, ShippedFixturesMatchTheBuilders) {
  const fs::path shipped = fs::path(GRAPHCAP_SOURCE_DIR) / "fixtures";
  std::size_t seen = 0;
  for (const auto& e : fs::directory_iterator(dir_)) {
    if (e.path().extension() != ".json") continue;
    const fs::path ref = shipped / e.path().filename();
    ASSERT_TRUE(fs::exists(ref)) << ref;
    EXPECT_EQ(slurp(ref), slurp(e.path())) << ref;
    ++seen;
  }
  EXPECT_GT(seen, 0u);
}
