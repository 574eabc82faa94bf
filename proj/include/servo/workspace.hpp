// SPDX-License-Identifier: Apache-2.0

#pragma once

// State shared by the CLI and the REST API: datasets, the fault calendar,
// scenarios, plugins and leaderboards, all under configured directories.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "servo/fault.hpp"
#include "servo/leaderboard.hpp"
#include "servo/plugin.hpp"
#include "servo/sim_clock.hpp"
#include "servo/simulation.hpp"
#include "servo/topology.hpp"

namespace servo {

namespace fs = std::filesystem;

struct WorkspaceConfig {
  fs::path data_root = "servo-data/datasets";
  fs::path plugin_root = "servo-data/plugins";
  fs::path board_store = "servo-data/boards";
  std::string bind = "127.0.0.1:8080";
  std::int64_t step = 1;
  int tolerance = kDefaultEventTolerance;
  int port_base = 18000;
  std::uint64_t seed = 42;
  std::string topology_file;  // empty: the default topology
  double startup_timeout_s = 10.0;
  double phase_timeout_s = 300.0;
};

// Problems with the config; empty when usable.
std::vector<std::string> validate(const WorkspaceConfig& config);
// Applies keys present in a YAML config document on top of `base`.
WorkspaceConfig merge_config_file(WorkspaceConfig base, const std::string& yaml_document);
// Applies SERVO_* variables found through `getenv` on top of `base`.
WorkspaceConfig merge_environment(WorkspaceConfig base,
                                  const std::function<const char*(const char*)>& getenv);
nlohmann::json to_json(const WorkspaceConfig& config);

inline constexpr std::int64_t kDefaultClockStart = 1700000000;  // 2023-11-14 22:13:20 UTC

struct SimulateRequest {
  std::string dataset;  // name under data_root
  SimClock clock;
  std::optional<WorkloadProfile> profile;  // default profile with the configured seed
  // When set, the plan replaces the stored calendar for this run.
  std::optional<std::vector<PlannedFault>> plan;
  bool overwrite = false;
};

class Workspace {
 public:
  using Clock = std::function<std::int64_t()>;
  explicit Workspace(WorkspaceConfig config, Clock now = {});

  const WorkspaceConfig& config() const noexcept { return config_; }
  std::int64_t now() const { return now_(); }
  const ServiceTopology& topology();

  FaultCalendar calendar() const;
  // Validates against the topology (InvalidCalendar) and persists.
  CalendarEntry schedule_fault(FaultDefinition fault, InjectionMode mode);
  void cancel_fault(const std::string& id);

  // Simulates and exports to data_root/<dataset>. Returns the summary.
  nlohmann::json simulate(const SimulateRequest& request);
  std::vector<nlohmann::json> datasets() const;
  // Throws UnknownDataset.
  TelemetryBatch load_dataset(const std::string& name);

  Scenario add_scenario(const Scenario& scenario);
  std::vector<Scenario> scenarios() const;
  Scenario scenario(const std::string& name) const;  // throws UnknownScenario

  PluginController& plugins() { return *controller_; }
  LeaderboardService& boards() { return *boards_; }
  BoardStore& board_store() { return *store_; }

 private:
  fs::path dataset_dir(const std::string& name) const;
  fs::path calendar_path() const;

  WorkspaceConfig config_;
  Clock now_;
  mutable std::mutex mutex_;
  std::optional<ServiceTopology> topology_;
  std::map<std::string, std::pair<fs::file_time_type, std::shared_ptr<const TelemetryBatch>>> cache_;
  std::unique_ptr<PluginController> controller_;
  std::unique_ptr<JsonBoardStore> store_;
  std::unique_ptr<LeaderboardService> boards_;
};

// Summary document of a batch as returned by simulate and GET /datasets.
nlohmann::json dataset_summary(const std::string& name, const TelemetryBatch& batch);

}  // namespace servo
