// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <atomic>

#include "fixture.hpp"
#include "servo/error.hpp"
#include "servo/leaderboard.hpp"
#include "servo/workspace.hpp"

using namespace servo;
namespace ts = testing_support;
namespace fs = std::filesystem;

namespace {

constexpr std::int64_t kT0 = 1700000000;
std::atomic<int> next_port_base{23000};

LeaderboardRow row(const std::string& algorithm, double f1, RowStatus status = RowStatus::Ok) {
  LeaderboardRow r;
  r.algorithm = algorithm;
  r.values[MetricKind::PointPRF1] = {{"precision", f1}, {"recall", f1}, {"f1", f1}};
  r.status = status;
  return r;
}

class BoardTest : public ::testing::Test {
 protected:
  void SetUp() override {
    WorkspaceConfig c;
    c.data_root = tmp_ / "datasets";
    c.plugin_root = tmp_ / "plugins";
    c.board_store = tmp_ / "boards";
    c.port_base = next_port_base.fetch_add(50);
    ws_ = std::make_unique<Workspace>(c, [] { return kT0; });
    ws_->schedule_fault(ts::fault("cpu-a", FaultType::CpuStress, "cartservice-0", kT0 + 200, 60, {{"load_pct", 70}}),
                        InjectionMode::Scheduled);
    ws_->simulate({"d1", SimClock{kT0, 1, 400}, ts::profile(5), std::nullopt, false});
    scenario_.name = "s1";
    scenario_.task_type = TaskType::AD;
    scenario_.dataset = "d1";
    scenario_.window = {kT0 + 150, kT0 + 400};
    scenario_.train_window = DatasetWindow{kT0, kT0 + 150};
  }

  void TearDown() override {
    for (const auto& i : ws_->plugins().list())
      if (i.state != PluginState::Deleted) {
        try {
          ws_->plugins().remove(i.id);
        } catch (const Error&) {
        }
      }
  }

  BoardRequest board(const std::string& id, std::vector<std::string> plugins) {
    BoardRequest r;
    r.id = id;
    r.scenario = scenario_;
    r.plugins = std::move(plugins);
    r.metrics = {MetricKind::PointPRF1, MetricKind::EventPRF1};
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

  ts::TempDir tmp_{"servo-board"};
  std::unique_ptr<Workspace> ws_;
  Scenario scenario_;
};

}  // namespace

TEST(Scenario, ParseAndValidate) {
  const auto s = parse_scenario(
      "name: net\ntask_type: RCA\ndataset: d\nwindow: {start: 10, end: 20, step: 2, modalities: [metrics, traces]}\n");
  EXPECT_EQ(s.task_type, TaskType::RCA);
  EXPECT_EQ(s.window.step, 2);
  EXPECT_EQ(s.window.modalities.size(), 2u);
  EXPECT_EQ(scenario_from_json(to_json(s)), s);
  EXPECT_THROW(parse_scenario("name: x\ntask_type: AD\ndataset: d\nwindow: {start: 20, end: 10}\n"), Error);
}

TEST(SortRows, PrimaryValueThenNameFailedLast) {
  Leaderboard b;
  b.primary_metric = MetricKind::PointPRF1;
  b.primary_key = "f1";
  b.rows = {row("z", 0.5), row("dead", 0.9, RowStatus::Failed), row("a", 0.5), row("top", 0.8)};
  sort_rows(b);
  std::vector<std::string> order;
  for (const auto& r : b.rows) order.push_back(r.algorithm);
  EXPECT_EQ(order, (std::vector<std::string>{"top", "a", "z", "dead"}));
}

TEST(SortRows, MarAscending) {
  Leaderboard b;
  b.primary_metric = MetricKind::MAR;
  b.primary_key = "mar";
  LeaderboardRow x, y;
  x.algorithm = "x";
  x.values[MetricKind::MAR] = {{"mar", 3.0}};
  y.algorithm = "y";
  y.values[MetricKind::MAR] = {{"mar", 1.5}};
  b.rows = {x, y};
  sort_rows(b);
  EXPECT_EQ(b.rows.front().algorithm, "y");
}

TEST(RenderTable, TwoDecimalHalfUp) {
  Leaderboard b;
  b.id = "t";
  b.scenario.name = "s";
  b.metrics = {MetricKind::PointPRF1};
  b.primary_key = "f1";
  b.version = 1;
  b.rows = {row("alg", 0.825)};
  const auto text = render_table(b);
  EXPECT_NE(text.find("PointPRF1.f1"), std::string::npos);
  EXPECT_NE(text.find("0.83"), std::string::npos);
}

TEST(JsonBoardStore, SaveFindIds) {
  ts::TempDir dir;
  JsonBoardStore store(dir.path());
  Leaderboard b;
  b.id = "one";
  b.scenario.name = "s";
  b.scenario.dataset = "d";
  b.scenario.window = {10, 20};
  b.rows = {row("a", 0.4)};
  b.version = 3;
  store.save(b);
  EXPECT_EQ(store.find("one"), b);
  EXPECT_EQ(store.ids(), std::vector<std::string>{"one"});
  EXPECT_FALSE(store.find("two").has_value());
  EXPECT_THROW(store.load("two"), Error);
}

TEST_F(BoardTest, CreateAddAndPersist) {
  ws_->plugins().deploy(SERVO_NAIVE_BUNDLE, "first");
  ws_->plugins().deploy(SERVO_NAIVE_BUNDLE, "second");
  const auto created = ws_->boards().create_leaderboard(board("b1", {"first"}));
  ASSERT_EQ(created.rows.size(), 1u);
  EXPECT_EQ(created.version, 1);
  EXPECT_EQ(created.rows[0].status, RowStatus::Ok);
  EXPECT_EQ(created.primary_key, "f1");
  EXPECT_TRUE(created.rows[0].values.count(MetricKind::EventPRF1));
  EXPECT_EQ(created.dataset_hash, content_hash(slice(ws_->load_dataset("d1"), scenario_.window)));

  const auto added = ws_->boards().add_algorithm("b1", "second");
  EXPECT_EQ(added.version, 2);
  ASSERT_EQ(added.rows.size(), 2u);
  const auto& kept = added.rows[0].algorithm == "first" ? added.rows[0] : added.rows[1];
  EXPECT_EQ(kept, created.rows[0]);

  EXPECT_EQ(code_of([&] { ws_->boards().add_algorithm("b1", "second"); }), ErrorCode::DuplicateAlgorithm);
  EXPECT_EQ(code_of([&] { ws_->boards().create_leaderboard(board("b1", {"first"})); }), ErrorCode::DuplicateId);
  EXPECT_EQ(code_of([&] { ws_->boards().get("nope"); }), ErrorCode::UnknownBoard);

  JsonBoardStore reopened(tmp_ / "boards");
  EXPECT_EQ(reopened.load("b1"), added);
}

TEST_F(BoardTest, RequestErrors) {
  ws_->plugins().deploy(SERVO_NAIVE_BUNDLE, "first");
  auto r = board("bad", {"first"});
  r.metrics = {MetricKind::MAR};
  EXPECT_EQ(code_of([&] { ws_->boards().create_leaderboard(r); }), ErrorCode::IncompatibleMetric);
  r = board("bad", {"first", "first"});
  EXPECT_EQ(code_of([&] { ws_->boards().create_leaderboard(r); }), ErrorCode::DuplicateAlgorithm);
  r = board("bad", {"first"});
  r.scenario.window.end = kT0 + 999;
  EXPECT_EQ(code_of([&] { ws_->boards().create_leaderboard(r); }), ErrorCode::WindowUnavailable);
  r = board("bad", {"first"});
  r.scenario.dataset = "missing";
  EXPECT_EQ(code_of([&] { ws_->boards().create_leaderboard(r); }), ErrorCode::WindowUnavailable);
  r = board("bad", {"ghost"});
  EXPECT_EQ(code_of([&] { ws_->boards().create_leaderboard(r); }), ErrorCode::UnknownPlugin);
  EXPECT_TRUE(ws_->boards().ids().empty());
}

TEST_F(BoardTest, FailedPluginBecomesFailedRow) {
  ws_->plugins().deploy(SERVO_NAIVE_BUNDLE, "good");
  const auto dir = tmp_ / "failing";
  ts::write_file(dir / "manifest.yaml",
                 "name: failing\ntask_type: AD\nmode: online\nmetric_kind: PointPRF1\nentry: [\"" SERVO_NAIVE_DETECTOR
                 "\"]\nconfig:\n  behavior: fail\n  model_path: ${SANDBOX_DIR}/work/m.json\n");
  ws_->plugins().deploy(dir, "bad");
  const auto b = ws_->boards().create_leaderboard(board("b2", {"bad", "good"}));
  ASSERT_EQ(b.rows.size(), 2u);
  EXPECT_EQ(b.rows[0].algorithm, "good");
  EXPECT_EQ(b.rows[1].status, RowStatus::Failed);
  EXPECT_NE(b.rows[1].failure_reason.find("PluginFailure"), std::string::npos);
  EXPECT_NE(render_table(b).find("failed"), std::string::npos);
}

TEST_F(BoardTest, DatasetChangeBlocksAdd) {
  ws_->plugins().deploy(SERVO_NAIVE_BUNDLE, "first");
  ws_->plugins().deploy(SERVO_NAIVE_BUNDLE, "second");
  ws_->boards().create_leaderboard(board("b3", {"first"}));
  ws_->simulate({"d1", SimClock{kT0, 1, 400}, ts::profile(6), std::nullopt, true});
  EXPECT_EQ(code_of([&] { ws_->boards().add_algorithm("b3", "second"); }), ErrorCode::WindowUnavailable);
  EXPECT_EQ(ws_->boards().get("b3").version, 1);
}

TEST_F(BoardTest, WorkspaceScenariosAndCalendar) {
  ws_->add_scenario(scenario_);
  EXPECT_EQ(ws_->scenario("s1"), scenario_);
  EXPECT_EQ(code_of([&] { ws_->add_scenario(scenario_); }), ErrorCode::DuplicateId);
  EXPECT_EQ(code_of([&] { ws_->scenario("nope"); }), ErrorCode::UnknownScenario);
  EXPECT_EQ(ws_->calendar().size(), 1u);
  ws_->cancel_fault("cpu-a");
  EXPECT_TRUE(ws_->calendar().empty());
  EXPECT_EQ(code_of([&] { ws_->load_dataset("nope"); }), ErrorCode::UnknownDataset);
  EXPECT_EQ(ws_->datasets().size(), 1u);
}

TEST(WorkspaceConfig, Precedence) {
  WorkspaceConfig c;
  c = merge_config_file(c, "paths: {data_root: /from/file}\ndefaults: {seed: 5, step: 2}\n");
  EXPECT_EQ(c.data_root, "/from/file");
  EXPECT_EQ(c.seed, 5u);
  c = merge_environment(c, [](const char* name) -> const char* {
    return std::string(name) == "SERVO_SEED" ? "9" : nullptr;
  });
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.step, 2);
  c.step = 0;
  EXPECT_FALSE(validate(c).empty());
}
