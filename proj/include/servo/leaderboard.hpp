// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "servo/metrics.hpp"
#include "servo/payload.hpp"
#include "servo/plugin.hpp"
#include "servo/telemetry.hpp"

namespace servo {

struct Scenario {
  std::string name;
  TaskType task_type = TaskType::AD;
  std::string dataset;  // dataset name under the data root
  DatasetWindow window;  // evaluation (test/run) window
  std::optional<DatasetWindow> train_window;  // used by online plugins
  std::string fault_plan;  // reference to the plan that produced the dataset
  std::string description;
  bool operator==(const Scenario&) const = default;
};

// Throws ParseError or ValidationError.
Scenario parse_scenario(const std::string& yaml_document);
std::vector<std::string> validate(const Scenario& scenario);
nlohmann::json to_json(const Scenario& scenario);
Scenario scenario_from_json(const nlohmann::json& doc);

enum class RowStatus { Ok, Failed };

struct LeaderboardRow {
  std::string algorithm;  // plugin instance id
  std::string plugin_name;
  std::map<MetricKind, ValueBundle> values;
  std::string experiment_id;
  std::string payload_hash;
  std::string computed_at;  // UTC "YYYY-MM-DD HH:MM:SS"
  RowStatus status = RowStatus::Ok;
  std::string failure_reason;
  bool operator==(const LeaderboardRow&) const = default;
};
nlohmann::json to_json(const LeaderboardRow& row);
LeaderboardRow row_from_json(const nlohmann::json& doc);

struct Leaderboard {
  std::string id;
  Scenario scenario;
  std::vector<MetricKind> metrics;
  MetricKind primary_metric = MetricKind::PointPRF1;
  std::string primary_key;  // entry of the primary metric's value bundle
  std::vector<LeaderboardRow> rows;
  std::int64_t version = 0;
  std::string dataset_hash;  // content hash of the sliced evaluation window
  int k_max = 5;
  int tolerance = kDefaultEventTolerance;
  bool operator==(const Leaderboard&) const = default;
};
nlohmann::json to_json(const Leaderboard& board);
Leaderboard leaderboard_from_json(const nlohmann::json& doc);

// Ok rows by the primary value (descending, ascending for MAR), then by
// algorithm; failed rows last.
void sort_rows(Leaderboard& board);

// Aligned text table with half-up 2-decimal values.
std::string render_table(const Leaderboard& board);

// Rewrites a payload produced for `from` into the shape expected by `to`
// (same task only). Throws IncompatibleMetric.
nlohmann::json convert_payload(const nlohmann::json& payload, MetricKind from, MetricKind to);

class BoardStore {
 public:
  virtual ~BoardStore() = default;
  virtual void save(const Leaderboard& board) = 0;
  virtual std::optional<Leaderboard> find(const std::string& id) const = 0;
  virtual std::vector<std::string> ids() const = 0;
  Leaderboard load(const std::string& id) const;  // throws UnknownBoard
};

// One JSON document per board in <root>/boards.
class JsonBoardStore final : public BoardStore {
 public:
  explicit JsonBoardStore(std::filesystem::path root);
  void save(const Leaderboard& board) override;
  std::optional<Leaderboard> find(const std::string& id) const override;
  std::vector<std::string> ids() const override;

 private:
  std::filesystem::path root_;
};

using DatasetLoader = std::function<TelemetryBatch(const std::string& name)>;

struct BoardRequest {
  std::string id;
  Scenario scenario;
  std::vector<std::string> plugins;
  std::vector<MetricKind> metrics;
  std::optional<MetricKind> primary_metric;
  int k_max = 5;
  int tolerance = kDefaultEventTolerance;
};

class LeaderboardService {
 public:
  LeaderboardService(PluginController& controller, BoardStore& store, DatasetLoader datasets);

  // Throws IncompatibleMetric, WindowUnavailable, DuplicateId. Plugin
  // failures become failed rows.
  Leaderboard create_leaderboard(const BoardRequest& request);
  // Throws UnknownBoard, DuplicateAlgorithm, WindowUnavailable (dataset
  // changed), PluginFailure (the failed row is still recorded).
  Leaderboard add_algorithm(const std::string& board_id, const std::string& plugin_id);
  Leaderboard get(const std::string& board_id) const;
  std::vector<std::string> ids() const;

 private:
  std::mutex& board_mutex(const std::string& id);
  TelemetryBatch window_data(const Scenario& scenario, TelemetryBatch* full) const;
  LeaderboardRow evaluate(const Leaderboard& board, const std::string& plugin_id,
                          const TelemetryBatch& full, const TelemetryBatch& truth);

  PluginController& controller_;
  BoardStore& store_;
  DatasetLoader datasets_;
  std::mutex locks_mutex_;
  std::map<std::string, std::unique_ptr<std::mutex>> board_locks_;
};

}  // namespace servo
