// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fixture.hpp"
#include "servo/api.hpp"
#include "servo/cli.hpp"

using namespace servo;
using nlohmann::json;
namespace ts = testing_support;
namespace fs = std::filesystem;

namespace {

std::atomic<int> next_port_base{27000};

struct Outcome {
  int code;
  std::string out, err;
};

class CliTest : public ::testing::Test {
 protected:
  Outcome run(std::vector<std::string> args) {
    std::vector<std::string> full{"--data-root", (tmp_ / "datasets").string(),
                                  "--plugin-root", (tmp_ / "plugins").string(),
                                  "--board-store", (tmp_ / "boards").string(),
                                  "--port-base", std::to_string(port_base_),
                                  "--now", "1700000000"};
    full.insert(full.end(), args.begin(), args.end());
    std::ostringstream out, err;
    const int code = run_cli(full, out, err, [this](const char* name) -> const char* {
      auto it = env_.find(name);
      return it == env_.end() ? nullptr : it->second.c_str();
    });
    return {code, out.str(), err.str()};
  }

  void TearDown() override {
    const auto listed = run({"--json", "plugin", "list"});
    if (listed.code != 0) return;
    for (const auto& p : json::parse(listed.out))
      if (p["state"] != "Deleted") run({"plugin", "rm", p["id"]});
  }

  ts::TempDir tmp_{"servo-cli"};
  int port_base_ = next_port_base.fetch_add(50);
  std::map<std::string, std::string> env_;
};

}  // namespace

TEST(CliParity, EveryMutatingRouteHasACommand) {
  const auto paths = cli_command_paths();
  for (const auto& route : kRoutes) {
    if (!route.mutation) continue;
    EXPECT_NE(std::find(paths.begin(), paths.end(), std::string(route.cli)), paths.end())
        << route.method << " " << route.path << " -> " << route.cli;
  }
}

TEST_F(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"faults", "add", "--type"}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST_F(CliTest, TopologyValidate) {
  const auto file = tmp_ / "topo.yaml";
  auto shown = run({"topology", "show"});
  ASSERT_EQ(shown.code, 0);
  ts::write_file(file, shown.out);
  auto r = run({"--json", "topology", "validate", file.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json::parse(r.out)["pods"], 31);
  ts::write_file(file, "version: 1\nentry: nowhere\nnodes: [n]\nservices: []\npods: []\n");
  r = run({"topology", "validate", file.string()});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("ValidationError"), std::string::npos);
}

TEST_F(CliTest, FaultCommandsAndErrorCodes) {
  auto r = run({"faults", "add", "--type", "CpuStress", "--target", "cartservice", "--start", "1700000100",
                "--duration", "60", "--param", "load_pct=80"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "scheduled fault-0\n");
  r = run({"--json", "faults", "list"});
  EXPECT_EQ(json::parse(r.out).size(), 1u);
  r = run({"faults", "add", "--type", "CpuStress", "--target", "ghost", "--start", "1700000100",
           "--duration", "60", "--param", "load_pct=80"});
  EXPECT_EQ(r.code, 3);
  r = run({"faults", "add", "--type", "CpuStress", "--target", "frontend", "--duration", "60",
           "--param", "load_pct"});
  EXPECT_EQ(r.code, 2);
  r = run({"--json", "faults", "cancel", "nope"});
  EXPECT_EQ(r.code, 4);
  EXPECT_EQ(json::parse(r.err)["code"], "UnknownFault");
  EXPECT_EQ(run({"faults", "cancel", "fault-0"}).code, 0);

  const auto plan = tmp_ / "plan.yaml";
  ts::write_file(plan, "faults:\n  - {type: PodFailure, target: adservice-0, start: 1700000050, duration: 30}\n");
  r = run({"faults", "plan", plan.string(), "--check"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(json::parse(run({"--json", "faults", "list"}).out).empty());
  EXPECT_EQ(run({"faults", "plan", plan.string()}).code, 0);
  EXPECT_EQ(json::parse(run({"--json", "faults", "list"}).out).size(), 1u);
}

TEST_F(CliTest, SimulateDeterministicStandalone) {
  const auto a = tmp_ / "a", b = tmp_ / "b";
  ASSERT_EQ(run({"simulate", "--out", a.string(), "--horizon", "120", "--seed", "3"}).code, 0);
  ASSERT_EQ(run({"simulate", "--out", b.string(), "--horizon", "120", "--seed", "3"}).code, 0);
  EXPECT_EQ(ts::tree(a), ts::tree(b));
  EXPECT_EQ(run({"simulate", "--out", a.string(), "--horizon", "120"}).code, 5);
  EXPECT_EQ(run({"simulate", "--horizon", "120"}).code, 2);

  const auto part = tmp_ / "part";
  auto r = run({"--json", "dataset", "slice", "--in", a.string(), "--window", "1700000010:1700000070:10",
                "--modalities", "metrics", "--out", part.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json::parse(r.out)["step"], 10);
  r = run({"dataset", "slice", "--in", a.string(), "--window", "1700000010:1800000000", "--out", part.string()});
  EXPECT_EQ(r.code, 7);
}

TEST_F(CliTest, EnvironmentAndConfigFile) {
  const auto cfg = tmp_ / "servo.yaml";
  ts::write_file(cfg, "defaults: {seed: 11}\n");
  env_["SERVO_CONFIG"] = cfg.string();
  ASSERT_EQ(run({"simulate", "--out", (tmp_ / "x").string(), "--horizon", "60"}).code, 0);
  ASSERT_EQ(run({"simulate", "--out", (tmp_ / "y").string(), "--horizon", "60", "--seed", "11"}).code, 0);
  EXPECT_EQ(ts::tree(tmp_ / "x"), ts::tree(tmp_ / "y"));
  env_["SERVO_SEED"] = "12";
  ASSERT_EQ(run({"simulate", "--out", (tmp_ / "z").string(), "--horizon", "60"}).code, 0);
  EXPECT_NE(ts::tree(tmp_ / "x"), ts::tree(tmp_ / "z"));
  env_["SERVO_STEP"] = "zero";
  EXPECT_NE(run({"dataset", "list"}).code, 0);
}

TEST_F(CliTest, PluginExperimentBoardFlow) {
  ASSERT_EQ(run({"faults", "add", "--type", "CpuStress", "--target", "cartservice-0", "--start", "1700000200",
                 "--duration", "60", "--param", "load_pct=70"}).code, 0);
  auto r = run({"simulate", "--dataset", "d1", "--horizon", "400"});
  ASSERT_EQ(r.code, 0) << r.err;
  r = run({"plugin", "deploy", SERVO_NAIVE_BUNDLE, "--id", "nd"});
  ASSERT_EQ(r.code, 0) << r.err;
  r = run({"experiment", "run", "--plugin", "nd", "--dataset", "d1", "--window", "1700000200:1700000400",
           "--phase", "test"});
  EXPECT_EQ(r.code, 5);
  EXPECT_NE(r.err.find("PhaseOrderError"), std::string::npos);
  r = run({"experiment", "run", "--plugin", "nd", "--dataset", "d1", "--window", "1700000000:1700000200",
           "--phase", "train"});
  ASSERT_EQ(r.code, 0) << r.err;
  r = run({"--json", "experiment", "run", "--plugin", "nd", "--dataset", "d1", "--window",
           "1700000200:1700000400", "--phase", "test", "--id", "t1"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json::parse(r.out)["experiment_id"], "t1");
  EXPECT_EQ(run({"plugin", "clear", "nd", "t1"}).code, 0);

  const auto sc = tmp_ / "sc.yaml";
  ts::write_file(sc, "name: s1\ntask_type: AD\ndataset: d1\nwindow: {start: 1700000200, end: 1700000400}\n"
                     "train_window: {start: 1700000000, end: 1700000200}\n");
  ASSERT_EQ(run({"scenario", "add", sc.string()}).code, 0);
  r = run({"board", "create", "--id", "b1", "--scenario", "s1", "--plugin", "nd", "--metric", "PointPRF1"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("version 1"), std::string::npos);
  EXPECT_EQ(run({"board", "create", "--id", "b2", "--scenario", "s1", "--plugin", "nd", "--metric", "MAR"}).code, 3);
  ASSERT_EQ(run({"plugin", "deploy", SERVO_NAIVE_BUNDLE, "--id", "nd2"}).code, 0);
  r = run({"board", "add", "b1", "nd2"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("version 2"), std::string::npos);
  EXPECT_EQ(run({"board", "add", "b1", "nd2"}).code, 5);
  EXPECT_EQ(run({"board", "show", "missing"}).code, 4);
  const auto exported = tmp_ / "b1.json";
  ASSERT_EQ(run({"board", "export", "b1", "--out", exported.string()}).code, 0);
  EXPECT_EQ(json::parse(ts::slurp(exported))["rows"].size(), 2u);
  EXPECT_EQ(run({"plugin", "stop", "nd2"}).code, 0);
  EXPECT_EQ(run({"plugin", "stop", "nd2"}).code, 5);
}
