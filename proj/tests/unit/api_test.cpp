// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include "fixture.hpp"
#include "httplib.h"
#include "servo/api.hpp"
#include "servo/error.hpp"

using namespace servo;
using nlohmann::json;
namespace ts = testing_support;
namespace fs = std::filesystem;

namespace {

constexpr std::int64_t kT0 = 1700000000;
std::atomic<int> next_port_base{25000};

class ApiTest : public ::testing::Test {
 protected:
  void SetUp() override {
    WorkspaceConfig c;
    c.data_root = tmp_ / "datasets";
    c.plugin_root = tmp_ / "plugins";
    c.board_store = tmp_ / "boards";
    c.port_base = next_port_base.fetch_add(50);
    ws_ = std::make_unique<Workspace>(c, [] { return kT0; });
    register_routes(server_, *ws_);
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    client_->set_read_timeout(120, 0);
  }

  void TearDown() override {
    for (const auto& i : ws_->plugins().list())
      if (i.state != PluginState::Deleted) {
        try {
          ws_->plugins().remove(i.id);
        } catch (const Error&) {
        }
      }
    server_.stop();
    thread_.join();
  }

  std::pair<int, json> get(const std::string& path) {
    auto res = client_->Get(path);
    if (!res) return {0, json()};
    return {res->status, json::parse(res->body)};
  }
  std::pair<int, json> post(const std::string& path, const json& body) {
    auto res = client_->Post(path, body.dump(), "application/json");
    if (!res) return {0, json()};
    return {res->status, json::parse(res->body)};
  }
  std::pair<int, json> del(const std::string& path) {
    auto res = client_->Delete(path);
    if (!res) return {0, json()};
    return {res->status, json::parse(res->body)};
  }

  ts::TempDir tmp_{"servo-api"};
  std::unique_ptr<Workspace> ws_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  std::unique_ptr<httplib::Client> client_;
};

}  // namespace

TEST(ErrorMapping, StatusAndExitCodes) {
  EXPECT_EQ(http_status(ErrorCode::ParseError), 400);
  EXPECT_EQ(http_status(ErrorCode::InvalidCalendar), 422);
  EXPECT_EQ(http_status(ErrorCode::UnknownBoard), 404);
  EXPECT_EQ(http_status(ErrorCode::DuplicateAlgorithm), 409);
  EXPECT_EQ(http_status(ErrorCode::PluginUnreachable), 409);
  EXPECT_EQ(http_status(ErrorCode::StartupTimeout), 504);
  EXPECT_EQ(http_status(ErrorCode::PayloadInvalid), 502);
  EXPECT_EQ(exit_code(ErrorFamily::Usage), 2);
  EXPECT_EQ(exit_code(ErrorFamily::Plugin), 8);
  EXPECT_EQ(error_body(Error(ErrorCode::UnknownFault, "m", {"d"})),
            (json{{"code", "UnknownFault"}, {"message", "m"}, {"detail", {"d"}}}));
}

TEST_F(ApiTest, FaultCalendarRoundTrip) {
  auto [status, body] = post("/faults", {{"type", "CpuStress"}, {"target", "frontend"}, {"start", kT0 + 600},
                                         {"duration", 300}, {"params", {{"load_pct", 50}}}});
  ASSERT_EQ(status, 201) << body.dump();
  EXPECT_EQ(body["mode"], "scheduled");
  const auto id = body["id"].get<std::string>();
  std::tie(status, body) = get("/faults");
  ASSERT_EQ(body.size(), 1u);
  EXPECT_EQ(body[0]["end"], kT0 + 900);

  std::tie(status, body) = post("/faults", {{"type", "NetworkLoss"}, {"target", "frontend"}, {"start", kT0 + 1},
                                            {"duration", 10}, {"params", {{"loss_pct", 150}}}});
  EXPECT_EQ(status, 422);
  EXPECT_EQ(body["code"], "InvalidCalendar");

  std::tie(status, body) = post("/faults", {{"type", "HttpAbort"}, {"target", "frontend"}, {"duration", 10}});
  EXPECT_EQ(status, 400);

  std::tie(status, body) = del("/faults/" + id);
  EXPECT_EQ(status, 200);
  std::tie(status, body) = del("/faults/" + id);
  EXPECT_EQ(status, 404);
  EXPECT_EQ(body["code"], "UnknownFault");
  std::tie(status, body) = get("/faults");
  EXPECT_TRUE(body.empty());
}

TEST_F(ApiTest, MalformedBody) {
  auto res = client_->Post("/faults", "{not json", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
  EXPECT_EQ(json::parse(res->body)["code"], "ParseError");
}

TEST_F(ApiTest, EndToEndThroughRoutes) {
  auto [status, body] = post("/faults", {{"id", "cpu"}, {"type", "CpuStress"}, {"target", "cartservice-0"},
                                         {"start", kT0 + 200}, {"duration", 60}, {"params", {{"load_pct", 70}}}});
  ASSERT_EQ(status, 201);
  std::tie(status, body) = post("/simulate", {{"dataset", "d1"}, {"clock", {{"horizon", 400}}}, {"seed", 3}});
  ASSERT_EQ(status, 201) << body.dump();
  EXPECT_EQ(body["cases"], 1);
  std::tie(status, body) = post("/simulate", {{"dataset", "d1"}, {"clock", {{"horizon", 400}}}});
  EXPECT_EQ(status, 409);
  std::tie(status, body) = get("/datasets");
  EXPECT_EQ(body.size(), 1u);

  std::tie(status, body) = post("/plugins", {{"bundle", SERVO_NAIVE_BUNDLE}, {"id", "nd"}});
  ASSERT_EQ(status, 201) << body.dump();
  EXPECT_EQ(body["state"], "Running");
  std::tie(status, body) = get("/plugins");
  EXPECT_EQ(body.size(), 1u);

  const json window{{"start", kT0 + 200}, {"end", kT0 + 400}, {"step", 1}};
  std::tie(status, body) = post("/experiments", {{"plugin", "nd"}, {"dataset", "d1"}, {"window", window}, {"phase", "test"}});
  EXPECT_EQ(status, 409);
  EXPECT_EQ(body["code"], "PhaseOrderError");
  std::tie(status, body) = post("/experiments", {{"plugin", "nd"}, {"dataset", "d1"},
                                                 {"window", {{"start", kT0}, {"end", kT0 + 200}}}, {"phase", "train"}});
  ASSERT_EQ(status, 201) << body.dump();
  std::tie(status, body) = post("/experiments", {{"plugin", "nd"}, {"dataset", "d1"}, {"window", window},
                                                 {"phase", "test"}, {"experiment_id", "t1"}});
  ASSERT_EQ(status, 201) << body.dump();
  std::tie(status, body) = get("/experiments/t1");
  EXPECT_EQ(body["status"], "ok");
  std::tie(status, body) = get("/experiments/none");
  EXPECT_EQ(status, 404);

  std::tie(status, body) = post("/plugins/nd/clear", {{"experiment_id", "t1"}});
  EXPECT_EQ(status, 200);

  std::tie(status, body) = post("/scenarios", {{"name", "s1"}, {"task_type", "AD"}, {"dataset", "d1"}, {"window", window},
                                               {"train_window", {{"start", kT0}, {"end", kT0 + 200}}}});
  ASSERT_EQ(status, 201) << body.dump();
  std::tie(status, body) = post("/leaderboards", {{"id", "b1"}, {"scenario", "s1"}, {"plugins", {"nd"}},
                                                  {"metrics", {"PointPRF1", "RangePRF1"}}});
  ASSERT_EQ(status, 201) << body.dump();
  EXPECT_EQ(body["version"], 1);
  std::tie(status, body) = post("/leaderboards", {{"id", "b2"}, {"scenario", "s1"}, {"plugins", {"nd"}},
                                                  {"metrics", {"MAR"}}});
  EXPECT_EQ(status, 422);
  EXPECT_EQ(body["code"], "IncompatibleMetric");

  std::tie(status, body) = post("/plugins", {{"bundle", SERVO_NAIVE_BUNDLE}, {"id", "nd2"}});
  ASSERT_EQ(status, 201);
  std::tie(status, body) = post("/leaderboards/b1/algorithms", {{"plugin", "nd2"}});
  ASSERT_EQ(status, 200) << body.dump();
  EXPECT_EQ(body["version"], 2);
  std::tie(status, body) = post("/leaderboards/b1/algorithms", {{"plugin", "nd2"}});
  EXPECT_EQ(status, 409);
  std::tie(status, body) = get("/leaderboards");
  EXPECT_EQ(body, json::array({"b1"}));
  std::tie(status, body) = get("/leaderboards/b1");
  EXPECT_EQ(body["rows"].size(), 2u);
  std::tie(status, body) = get("/leaderboards/zzz");
  EXPECT_EQ(status, 404);

  std::tie(status, body) = post("/plugins/nd2/stop", json::object());
  EXPECT_EQ(body["state"], "Stopped");
  std::tie(status, body) = post("/plugins/nd2/stop", json::object());
  EXPECT_EQ(status, 409);
  std::tie(status, body) = post("/plugins/nd2/restart", json::object());
  EXPECT_EQ(body["state"], "Running");
  std::tie(status, body) = del("/plugins/nd2");
  EXPECT_EQ(body["state"], "Deleted");
  std::tie(status, body) = get("/scenarios");
  EXPECT_EQ(body.size(), 1u);
}

TEST(RouteTable, EveryRouteIsRegistered) {
  ts::TempDir tmp;
  WorkspaceConfig c;
  c.data_root = tmp / "d";
  c.plugin_root = tmp / "p";
  c.board_store = tmp / "b";
  Workspace ws(c);
  httplib::Server server;
  register_routes(server, ws);
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  httplib::Client client("127.0.0.1", port);
  for (const auto& route : kRoutes) {
    std::string path(route.path);
    for (auto at = path.find("{id}"); at != std::string::npos; at = path.find("{id}"))
      path.replace(at, 4, "x");
    httplib::Result res = route.method == "GET"    ? client.Get(path)
                          : route.method == "POST" ? client.Post(path, "{}", "application/json")
                                                   : client.Delete(path);
    ASSERT_TRUE(res) << path;
    // Unregistered routes fall through to httplib's empty 404.
    EXPECT_FALSE(res->body.empty()) << route.method << " " << path;
  }
  server.stop();
  t.join();
}
