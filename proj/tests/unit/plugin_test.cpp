// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <thread>

#include "fixture.hpp"
#include "servo/error.hpp"
#include "servo/hash.hpp"
#include "servo/payload.hpp"
#include "servo/plugin.hpp"
#include "servo/telemetry.hpp"

using namespace servo;
namespace ts = testing_support;
namespace fs = std::filesystem;

namespace {

constexpr std::int64_t kT0 = 1700000000;

std::atomic<int> next_port_base{21000};

struct BundleSpec {
  std::string name = "probe";
  std::string task = "AD";
  std::string mode = "online";
  std::string metric = "PointPRF1";
  std::vector<std::string> extra_args;
  std::string config = "kpi: cpu_usage_pct\n  model_path: ${SANDBOX_DIR}/work/model.json";
};

fs::path write_bundle(const fs::path& dir, const BundleSpec& spec) {
  std::string entry = "[\"" SERVO_NAIVE_DETECTOR "\"";
  for (const auto& a : spec.extra_args) entry += ", \"" + a + "\"";
  entry += "]";
  ts::write_file(dir / "manifest.yaml", "name: " + spec.name + "\ntask_type: " + spec.task +
                                            "\nmode: " + spec.mode + "\nmetric_kind: " + spec.metric +
                                            "\nentry: " + entry + "\nconfig:\n  " + spec.config + "\n");
  return dir;
}

class PluginTest : public ::testing::Test {
 protected:
  void SetUp() override {
    ControllerConfig c;
    c.root = tmp_ / "root";
    c.port_base = next_port_base.fetch_add(50);
    c.startup_timeout_s = 10;
    c.phase_timeout_s = 60;
    config_ = c;
    controller_ = std::make_unique<PluginController>(config_);
  }

  void TearDown() override {
    for (const auto& i : controller_->list())
      if (i.state == PluginState::Running || i.state == PluginState::Stopped) {
        try {
          controller_->remove(i.id);
        } catch (const Error&) {
        }
      }
  }

  static const TelemetryBatch& data() {
    static const TelemetryBatch batch = [] {
      const auto cal = ts::calendar_of(
          {ts::fault("cpu-a", FaultType::CpuStress, "cartservice-0", kT0 + 200, 60, {{"load_pct", 70}}),
           ts::fault("cpu-b", FaultType::CpuStress, "adservice-2", kT0 + 320, 40, {{"load_pct", 70}})},
          0);
      return run_simulation(default_boutique_topology(), ts::profile(21), cal, SimClock{kT0, 1, 400});
    }();
    return batch;
  }

  ExperimentRequest request(const std::string& plugin, Phase phase, std::int64_t from, std::int64_t to,
                            const std::string& id = {}) {
    ExperimentRequest r;
    r.plugin_id = plugin;
    r.phase = phase;
    r.window = {kT0 + from, kT0 + to};
    r.experiment_id = id;
    return r;
  }

  ErrorCode code_of(const std::function<void()>& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    ADD_FAILURE() << "no error";
    return ErrorCode::ParseError;
  }

  ts::TempDir tmp_{"servo-plugin"};
  ControllerConfig config_;
  std::unique_ptr<PluginController> controller_;
};

}  // namespace

TEST(Manifest, ParsesReferenceBundle) {
  const auto m = parse_manifest(ts::slurp(fs::path(SERVO_NAIVE_BUNDLE) / "manifest.yaml"));
  EXPECT_EQ(m.name, "naive-detector");
  EXPECT_EQ(m.task_type, TaskType::AD);
  EXPECT_EQ(m.mode, DeploymentMode::Online);
  EXPECT_EQ(m.config.at("threshold_sigma"), 3);
  EXPECT_EQ(manifest_from_json(to_json(m)), m);
}

TEST(Manifest, ListsEveryViolation) {
  try {
    parse_manifest("name: 'bad name'\ntask_type: AD\nmode: sometimes\nmetric_kind: MAR\nentry: []\n"
                   "config:\n  data_dir: relative/path\n  nested: {a: 1}\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ManifestError);
    EXPECT_GE(e.detail().size(), 4u);
  }
  try {
    parse_manifest("task_type: AD\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ManifestError);
  }
}

TEST(Manifest, SandboxPathsExpand) {
  const nlohmann::json config{{"model_path", "${SANDBOX_DIR}/work/m.json"}, {"k", 1}};
  const auto out = expand_sandbox_paths(config, "/tmp/box");
  EXPECT_EQ(out["model_path"], "/tmp/box/work/m.json");
  EXPECT_EQ(out["k"], 1);
}

TEST(Lifecycle, TransitionTable) {
  using S = PluginState;
  EXPECT_TRUE(legal_transition(S::Created, S::Running));
  EXPECT_TRUE(legal_transition(S::Running, S::Stopped));
  EXPECT_TRUE(legal_transition(S::Stopped, S::Running));
  EXPECT_TRUE(legal_transition(S::Stopped, S::Deleted));
  EXPECT_FALSE(legal_transition(S::Deleted, S::Running));
  EXPECT_FALSE(legal_transition(S::Stopped, S::Stopped));
}

TEST(ContainerSandbox, BuildsRunCommand) {
  std::vector<std::vector<std::string>> calls;
  ContainerSandbox box("docker", "servo/plugin:1", [&](const std::vector<std::string>& argv, std::string& out) {
    calls.push_back(argv);
    out = "abc123\n";
    return 0;
  });
  SandboxSpec spec;
  spec.plugin_id = "p1";
  spec.sandbox_dir = "/srv/box";
  spec.command = {"/bundle/run"};
  spec.endpoint = {"127.0.0.1", 18003};
  spec.env = {{"SERVO_PORT", "18003"}, {"SERVO_PLUGIN_ID", "p1"}};
  const auto handle = box.start(spec);
  EXPECT_EQ(handle.container, "abc123");
  const std::vector<std::string> want{"docker", "run", "-d", "--name", "servo-p1", "-p",
                                      "127.0.0.1:18003:8000", "-v", "/srv/box:/sandbox", "-w",
                                      "/sandbox/work", "-e", "SERVO_PLUGIN_ID=p1", "-e",
                                      "SERVO_PORT=8000", "servo/plugin:1", "/bundle/run"};
  EXPECT_EQ(calls.at(0), want);
  box.stop(handle);
  EXPECT_EQ(calls.at(1).at(1), "rm");
}

TEST_F(PluginTest, DeployListAndDurability) {
  const auto i = controller_->deploy(SERVO_NAIVE_BUNDLE);
  EXPECT_EQ(i.id, "naive-detector");
  EXPECT_EQ(i.state, PluginState::Running);
  EXPECT_GE(i.endpoint.port, config_.port_base);
  EXPECT_TRUE(fs::exists(i.sandbox_dir / "bundle" / "manifest.yaml"));
  EXPECT_EQ(i.manifest.config["model_path"], (i.sandbox_dir / "work" / "model.json").string());

  const auto second = controller_->deploy(SERVO_NAIVE_BUNDLE);
  EXPECT_EQ(second.id, "naive-detector-2");
  EXPECT_NE(second.endpoint.port, i.endpoint.port);
  EXPECT_EQ(code_of([&] { controller_->deploy(SERVO_NAIVE_BUNDLE, "naive-detector"); }),
            ErrorCode::DuplicateId);

  PluginController reopened(config_);
  EXPECT_EQ(reopened.get("naive-detector").endpoint, i.endpoint);
  EXPECT_TRUE(reopened.reconcile().empty());
}

TEST_F(PluginTest, LifecycleTransitions) {
  controller_->deploy(SERVO_NAIVE_BUNDLE, "p");
  controller_->stop("p");
  EXPECT_EQ(controller_->get("p").state, PluginState::Stopped);
  EXPECT_EQ(code_of([&] { controller_->stop("p"); }), ErrorCode::IllegalTransition);
  controller_->restart("p");
  EXPECT_EQ(controller_->get("p").state, PluginState::Running);
  controller_->remove("p");
  EXPECT_EQ(controller_->get("p").state, PluginState::Deleted);
  EXPECT_FALSE(fs::exists(controller_->get("p").sandbox_dir));
  EXPECT_EQ(code_of([&] { controller_->restart("p"); }), ErrorCode::IllegalTransition);
  EXPECT_EQ(code_of([&] { controller_->get("ghost"); }), ErrorCode::UnknownPlugin);
}

TEST_F(PluginTest, BundleProblems) {
  EXPECT_EQ(code_of([&] { controller_->deploy(tmp_ / "missing"); }), ErrorCode::BundleError);
  const auto dir = tmp_ / "bad";
  ts::write_file(dir / "manifest.yaml",
                 "name: x\ntask_type: AD\nmode: online\nmetric_kind: PointPRF1\nentry: [./nope]\n");
  EXPECT_EQ(code_of([&] { controller_->deploy(dir); }), ErrorCode::BundleError);
  ts::write_file(dir / "manifest.yaml", "name: x\ntask_type: RCA\nmode: online\nmetric_kind: PointPRF1\nentry: [./nope]\n");
  EXPECT_EQ(code_of([&] { controller_->deploy(dir); }), ErrorCode::ManifestError);
  EXPECT_TRUE(controller_->list().empty());
}

TEST_F(PluginTest, TarBundle) {
  const auto tar = tmp_ / "bundle.tar";
  const std::string cmd = "tar -cf '" + tar.string() + "' -C '" SERVO_NAIVE_BUNDLE "' .";
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_EQ(controller_->deploy(tar, "from-tar").state, PluginState::Running);
}

TEST_F(PluginTest, StartupTimeout) {
  config_.startup_timeout_s = 1.0;
  controller_ = std::make_unique<PluginController>(config_);
  BundleSpec spec;
  spec.extra_args = {"--never-bind"};
  const auto dir = write_bundle(tmp_ / "sleepy", spec);
  const auto started = std::chrono::steady_clock::now();
  EXPECT_EQ(code_of([&] { controller_->deploy(dir); }), ErrorCode::StartupTimeout);
  EXPECT_LT(std::chrono::steady_clock::now() - started, std::chrono::seconds(5));
  EXPECT_TRUE(controller_->list().empty());
}

TEST_F(PluginTest, OnlineTrainThenTest) {
  controller_->deploy(SERVO_NAIVE_BUNDLE, "nd");
  EXPECT_EQ(code_of([&] { controller_->run_experiment(request("nd", Phase::Test, 200, 400), data()); }),
            ErrorCode::PhaseOrderError);
  EXPECT_EQ(code_of([&] { controller_->run_experiment(request("nd", Phase::Run, 200, 400), data()); }),
            ErrorCode::InvalidArgument);

  const auto train = controller_->run_experiment(request("nd", Phase::Train, 0, 200), data());
  EXPECT_EQ(train.status, ResultStatus::Ok);
  EXPECT_TRUE(controller_->get("nd").trained);

  const auto test = controller_->run_experiment(request("nd", Phase::Test, 200, 400, "exp-test"), data());
  EXPECT_EQ(test.experiment_id, "exp-test");
  EXPECT_EQ(test.algorithm, "naive-detector");
  EXPECT_NO_THROW(parse_result_payload(test.payload, MetricKind::PointPRF1));
  EXPECT_EQ(test.payload_hash, sha256_hex(test.payload.dump()));
  EXPECT_EQ(controller_->result("exp-test"), test);

  // The test slice reaches the sandbox without labels or case answers.
  const auto delivered = import_csv(controller_->get("nd").sandbox_dir / "data" / "exp-test");
  EXPECT_TRUE(delivered.ground_truth.labels.empty());
  ASSERT_FALSE(delivered.ground_truth.cases.empty());
  for (const auto& c : delivered.ground_truth.cases) {
    EXPECT_TRUE(c.fault_type.empty());
    EXPECT_TRUE(c.root_cause.empty());
  }
  const auto scores = score_payload(MetricKind::PointPRF1, test.payload, slice(data(), test.window));
  EXPECT_GT(scores.at("recall"), 0.5);

  EXPECT_EQ(code_of([&] { controller_->run_experiment(request("nd", Phase::Test, 200, 400, "exp-test"), data()); }),
            ErrorCode::DuplicateId);
}

TEST_F(PluginTest, BatchRunAndRankingPayload) {
  BundleSpec spec;
  spec.name = "ranker";
  spec.task = "RCA";
  spec.mode = "batch";
  spec.metric = "AccuracyAtK";
  spec.config = "task: RCA";
  controller_->deploy(write_bundle(tmp_ / "rca", spec));
  EXPECT_EQ(code_of([&] { controller_->run_experiment(request("ranker", Phase::Train, 0, 200), data()); }),
            ErrorCode::InvalidArgument);
  const auto r = controller_->run_experiment(request("ranker", Phase::Run, 0, 400), data());
  const auto values = score_payload(MetricKind::AccuracyAtK, r.payload, slice(data(), r.window));
  EXPECT_EQ(values.size(), 5u);
  EXPECT_GT(values.at("acc@5"), 0.0);
}

TEST_F(PluginTest, PluginFailureModes) {
  BundleSpec spec;
  spec.config = "behavior: fail";
  controller_->deploy(write_bundle(tmp_ / "fail", spec), "fails");
  controller_->run_experiment(request("fails", Phase::Train, 0, 200), data());
  EXPECT_EQ(code_of([&] { controller_->run_experiment(request("fails", Phase::Test, 200, 400, "e-fail"), data()); }),
            ErrorCode::PluginFailure);
  const auto stored = controller_->result("e-fail");
  ASSERT_TRUE(stored.has_value());
  EXPECT_EQ(stored->status, ResultStatus::Failed);
  EXPECT_NE(stored->failure_reason.find("configured to fail"), std::string::npos);

  spec.config = "behavior: bad_payload";
  controller_->deploy(write_bundle(tmp_ / "bad", spec), "bad");
  controller_->run_experiment(request("bad", Phase::Train, 0, 200), data());
  try {
    controller_->run_experiment(request("bad", Phase::Test, 200, 400), data());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::PayloadInvalid);
    EXPECT_NE(std::string(e.what()).find("predictions"), std::string::npos);
  }

  spec.config = "behavior: crash";
  controller_->deploy(write_bundle(tmp_ / "crash", spec), "crashes");
  controller_->run_experiment(request("crashes", Phase::Train, 0, 200), data());
  EXPECT_EQ(code_of([&] { controller_->run_experiment(request("crashes", Phase::Test, 200, 400), data()); }),
            ErrorCode::PluginFailure);
  EXPECT_EQ(controller_->get("crashes").state, PluginState::Stopped);
  EXPECT_EQ(code_of([&] { controller_->run_experiment(request("crashes", Phase::Test, 200, 400), data()); }),
            ErrorCode::PluginUnreachable);
  // Other instances are unaffected.
  EXPECT_EQ(controller_->get("fails").state, PluginState::Running);
}

TEST_F(PluginTest, ClearRemovesTemporaryFiles) {
  const auto i = controller_->deploy(SERVO_NAIVE_BUNDLE, "nd");
  controller_->run_experiment(request("nd", Phase::Train, 0, 200), data());
  controller_->run_experiment(request("nd", Phase::Test, 200, 400, "e1"), data());
  EXPECT_TRUE(fs::exists(i.sandbox_dir / "data" / "e1"));
  EXPECT_TRUE(fs::exists(i.sandbox_dir / "work" / "scratch" / "e1" / "payload.json"));
  controller_->clear("nd", "e1");
  EXPECT_FALSE(fs::exists(i.sandbox_dir / "data" / "e1"));
  EXPECT_FALSE(fs::exists(i.sandbox_dir / "work" / "scratch" / "e1"));
  EXPECT_NO_THROW(controller_->clear("nd", "e1"));
  EXPECT_TRUE(controller_->result("e1").has_value());
  controller_->stop("nd");
  EXPECT_EQ(code_of([&] { controller_->clear("nd", "e1"); }), ErrorCode::PluginUnreachable);
}

TEST_F(PluginTest, ConcurrentExperimentsStayIsolated) {
  const auto a = controller_->deploy(SERVO_NAIVE_BUNDLE, "a");
  const auto b = controller_->deploy(SERVO_NAIVE_BUNDLE, "b");
  controller_->run_experiment(request("a", Phase::Train, 0, 200), data());
  controller_->run_experiment(request("b", Phase::Train, 0, 150), data());
  std::vector<ExperimentResult> results(6);
  std::vector<std::thread> threads;
  for (int n = 0; n < 6; ++n)
    threads.emplace_back([&, n] {
      results[n] = controller_->run_experiment(request(n % 2 ? "b" : "a", Phase::Test, 200, 400), data());
    });
  for (auto& t : threads) t.join();
  std::set<std::string> ids;
  for (const auto& r : results) {
    EXPECT_EQ(r.status, ResultStatus::Ok);
    ids.insert(r.experiment_id);
    const auto& owner = r.plugin_id == "a" ? a : b;
    const auto& other = r.plugin_id == "a" ? b : a;
    EXPECT_TRUE(fs::exists(owner.sandbox_dir / "data" / r.experiment_id));
    EXPECT_FALSE(fs::exists(other.sandbox_dir / "data" / r.experiment_id));
  }
  EXPECT_EQ(ids.size(), 6u);
  EXPECT_EQ(controller_->results().size(), 8u);
}
