// SPDX-License-Identifier: Apache-2.0

#include "servo/leaderboard.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <regex>
#include <set>
#include <sstream>

#include "servo/error.hpp"
#include "servo/json_store.hpp"

namespace servo {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::regex kIdentifier("[A-Za-z0-9][A-Za-z0-9_.-]*");

std::string now_utc() {
  return format_utc_date(std::chrono::duration_cast<std::chrono::seconds>(
                             std::chrono::system_clock::now().time_since_epoch())
                             .count());
}

DatasetWindow yaml_window(const YAML::Node& node) {
  DatasetWindow w;
  w.start = node["start"].as<std::int64_t>();
  w.end = node["end"].as<std::int64_t>();
  if (node["step"]) w.step = node["step"].as<std::int64_t>();
  if (const auto m = node["modalities"]) {
    w.modalities.clear();
    if (m.IsSequence()) {
      for (const auto& x : m) w.modalities.insert(parse_modality(x.as<std::string>()));
    } else {
      w.modalities = parse_modalities(m.as<std::string>());
    }
  }
  return w;
}

std::vector<std::string> window_violations(const DatasetWindow& w, const std::string& name) {
  std::vector<std::string> v;
  if (w.start >= w.end) v.push_back(name + ": start must be before end");
  if (w.step < 1) v.push_back(name + ": step must be >= 1");
  if (w.modalities.empty()) v.push_back(name + ": at least one modality required");
  return v;
}

// Natural order of bundle keys: precision, recall, f1, then by k.
bool key_less(const std::string& a, const std::string& b) {
  static const std::vector<std::string> fixed{"precision", "recall", "f1", "mar"};
  auto fa = std::find(fixed.begin(), fixed.end(), a);
  auto fb = std::find(fixed.begin(), fixed.end(), b);
  if (fa != fixed.end() || fb != fixed.end()) return fa < fb;
  const auto at_a = a.find('@');
  const auto at_b = b.find('@');
  if (at_a != std::string::npos && at_b != std::string::npos && a.substr(0, at_a) == b.substr(0, at_b))
    return std::stoi(a.substr(at_a + 1)) < std::stoi(b.substr(at_b + 1));
  return a < b;
}

std::string format_2dp(double v) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.2f", round_half_up(v, 2));
  return buffer;
}

}  // namespace

std::vector<std::string> validate(const Scenario& s) {
  std::vector<std::string> v;
  if (!std::regex_match(s.name, kIdentifier)) v.push_back("name: must be an identifier");
  if (s.dataset.empty()) v.push_back("dataset: required");
  for (auto& x : window_violations(s.window, "window")) v.push_back(std::move(x));
  if (s.train_window)
    for (auto& x : window_violations(*s.train_window, "train_window")) v.push_back(std::move(x));
  return v;
}

Scenario parse_scenario(const std::string& document) {
  Scenario s;
  try {
    const auto root = YAML::Load(document);
    s.name = root["name"].as<std::string>();
    s.task_type = parse_task_type(root["task_type"].as<std::string>());
    s.dataset = root["dataset"].as<std::string>();
    s.window = yaml_window(root["window"]);
    if (root["train_window"]) s.train_window = yaml_window(root["train_window"]);
    if (root["fault_plan"]) s.fault_plan = root["fault_plan"].as<std::string>();
    if (root["description"]) s.description = root["description"].as<std::string>();
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::ParseError, std::string("scenario: ") + e.what());
  }
  if (auto v = validate(s); !v.empty())
    throw Error(ErrorCode::ValidationError, "scenario invalid: " + v.front(), v);
  return s;
}

json to_json(const Scenario& s) {
  json out{{"name", s.name},
           {"task_type", to_string(s.task_type)},
           {"dataset", s.dataset},
           {"window", to_json(s.window)},
           {"fault_plan", s.fault_plan},
           {"description", s.description}};
  out["train_window"] = s.train_window ? to_json(*s.train_window) : json();
  return out;
}

Scenario scenario_from_json(const json& doc) {
  Scenario s;
  try {
    s.name = doc.at("name").get<std::string>();
    s.task_type = parse_task_type(doc.at("task_type").get<std::string>());
    s.dataset = doc.at("dataset").get<std::string>();
    s.window = window_from_json(doc.at("window"));
    if (doc.contains("train_window") && !doc["train_window"].is_null())
      s.train_window = window_from_json(doc["train_window"]);
    s.fault_plan = doc.value("fault_plan", std::string());
    s.description = doc.value("description", std::string());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("scenario: ") + e.what());
  }
  if (auto v = validate(s); !v.empty())
    throw Error(ErrorCode::ValidationError, "scenario invalid: " + v.front(), v);
  return s;
}

json to_json(const LeaderboardRow& r) {
  json values = json::object();
  for (const auto& [kind, bundle] : r.values) values[std::string(to_string(kind))] = bundle;
  return {{"algorithm", r.algorithm},
          {"plugin_name", r.plugin_name},
          {"values", values},
          {"experiment_id", r.experiment_id},
          {"payload_hash", r.payload_hash},
          {"computed_at", r.computed_at},
          {"status", r.status == RowStatus::Ok ? "ok" : "failed"},
          {"failure_reason", r.failure_reason}};
}

LeaderboardRow row_from_json(const json& doc) {
  LeaderboardRow r;
  r.algorithm = doc.at("algorithm").get<std::string>();
  r.plugin_name = doc.value("plugin_name", std::string());
  for (const auto& [kind, bundle] : doc.at("values").items())
    r.values[parse_metric_kind(kind)] = bundle.get<ValueBundle>();
  r.experiment_id = doc.value("experiment_id", std::string());
  r.payload_hash = doc.value("payload_hash", std::string());
  r.computed_at = doc.value("computed_at", std::string());
  r.status = doc.at("status") == "ok" ? RowStatus::Ok : RowStatus::Failed;
  r.failure_reason = doc.value("failure_reason", std::string());
  return r;
}

json to_json(const Leaderboard& b) {
  json metrics = json::array();
  for (auto m : b.metrics) metrics.push_back(to_string(m));
  json rows = json::array();
  for (const auto& r : b.rows) rows.push_back(to_json(r));
  return {{"id", b.id},
          {"scenario", to_json(b.scenario)},
          {"metrics", metrics},
          {"primary_metric", to_string(b.primary_metric)},
          {"primary_key", b.primary_key},
          {"rows", rows},
          {"version", b.version},
          {"dataset_hash", b.dataset_hash},
          {"k_max", b.k_max},
          {"tolerance", b.tolerance}};
}

Leaderboard leaderboard_from_json(const json& doc) {
  Leaderboard b;
  try {
    b.id = doc.at("id").get<std::string>();
    b.scenario = scenario_from_json(doc.at("scenario"));
    for (const auto& m : doc.at("metrics")) b.metrics.push_back(parse_metric_kind(m.get<std::string>()));
    b.primary_metric = parse_metric_kind(doc.at("primary_metric").get<std::string>());
    b.primary_key = doc.at("primary_key").get<std::string>();
    for (const auto& r : doc.at("rows")) b.rows.push_back(row_from_json(r));
    b.version = doc.at("version").get<std::int64_t>();
    b.dataset_hash = doc.at("dataset_hash").get<std::string>();
    b.k_max = doc.value("k_max", 5);
    b.tolerance = doc.value("tolerance", kDefaultEventTolerance);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::IoError, std::string("board document: ") + e.what());
  }
  return b;
}

void sort_rows(Leaderboard& board) {
  const bool higher = higher_is_better(board.primary_metric);
  auto primary = [&](const LeaderboardRow& r) -> std::optional<double> {
    auto it = r.values.find(board.primary_metric);
    if (it == r.values.end()) return std::nullopt;
    auto v = it->second.find(board.primary_key);
    if (v == it->second.end()) return std::nullopt;
    return v->second;
  };
  std::stable_sort(board.rows.begin(), board.rows.end(), [&](const auto& a, const auto& b) {
    const bool ok_a = a.status == RowStatus::Ok, ok_b = b.status == RowStatus::Ok;
    if (ok_a != ok_b) return ok_a;
    if (ok_a) {
      const auto va = primary(a), vb = primary(b);
      if (va.has_value() != vb.has_value()) return va.has_value();
      if (va && *va != *vb) return higher ? *va > *vb : *va < *vb;
    }
    return a.algorithm < b.algorithm;
  });
}

std::string render_table(const Leaderboard& board) {
  std::vector<std::pair<MetricKind, std::string>> columns;
  for (auto kind : board.metrics) {
    std::set<std::string> keys;
    for (const auto& r : board.rows)
      if (auto it = r.values.find(kind); it != r.values.end())
        for (const auto& [k, v] : it->second) keys.insert(k);
    std::vector<std::string> ordered(keys.begin(), keys.end());
    std::sort(ordered.begin(), ordered.end(), key_less);
    for (auto& k : ordered) columns.emplace_back(kind, std::move(k));
  }

  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header{"#", "algorithm"};
  for (const auto& [kind, key] : columns) header.push_back(std::string(to_string(kind)) + "." + key);
  header.push_back("status");
  cells.push_back(header);
  int rank = 0;
  for (const auto& r : board.rows) {
    std::vector<std::string> line{r.status == RowStatus::Ok ? std::to_string(++rank) : "-", r.algorithm};
    for (const auto& [kind, key] : columns) {
      std::string cell = "-";
      if (auto it = r.values.find(kind); it != r.values.end())
        if (auto v = it->second.find(key); v != it->second.end()) cell = format_2dp(v->second);
      line.push_back(cell);
    }
    line.push_back(r.status == RowStatus::Ok ? "ok" : "failed: " + r.failure_reason);
    cells.push_back(std::move(line));
  }
  std::vector<std::size_t> widths(header.size(), 0);
  for (const auto& line : cells)
    for (std::size_t i = 0; i < line.size(); ++i) widths[i] = std::max(widths[i], line[i].size());

  std::ostringstream out;
  out << "board " << board.id << "  scenario " << board.scenario.name << "  version "
      << board.version << "  sorted by " << to_string(board.primary_metric) << "."
      << board.primary_key << '\n';
  for (const auto& line : cells) {
    std::string text;
    for (std::size_t i = 0; i < line.size(); ++i) {
      const bool last = i + 1 == line.size();
      const bool numeric = i >= 2 && !last;
      std::string cell = line[i];
      if (!last) {
        const auto pad = std::string(widths[i] - cell.size(), ' ');
        cell = numeric ? pad + cell : cell + pad;
      }
      text += cell;
      if (!last) text += "  ";
    }
    while (!text.empty() && text.back() == ' ') text.pop_back();
    out << text << '\n';
  }
  return out.str();
}

json convert_payload(const json& payload, MetricKind from, MetricKind to) {
  if (task_of(from) != task_of(to))
    throw Error(ErrorCode::IncompatibleMetric, std::string(to_string(from)) + " payload cannot score " +
                                                   std::string(to_string(to)));
  const bool from_top = from == MetricKind::TopAtK, to_top = to == MetricKind::TopAtK;
  if (task_of(from) != TaskType::FC || from_top == to_top) return payload;
  if (to_top) return {{"top@k", json::object()}, {"epoch", {{"1", payload.at("cases")}}}};
  const auto parsed = std::get<ClassificationPayload>(parse_result_payload(payload, from));
  const auto& last = std::to_string(parsed.epochs.back().first);
  return {{"cases", payload.at("epoch").at(last)}};
}

Leaderboard BoardStore::load(const std::string& id) const {
  auto board = find(id);
  if (!board) throw Error(ErrorCode::UnknownBoard, "unknown leaderboard '" + id + "'");
  return *board;
}

JsonBoardStore::JsonBoardStore(fs::path root) : root_(std::move(root)) {
  std::error_code ec;
  fs::create_directories(root_ / "boards", ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + (root_ / "boards").string());
}

void JsonBoardStore::save(const Leaderboard& board) {
  write_json_atomic(root_ / "boards" / (board.id + ".json"), to_json(board));
}

std::optional<Leaderboard> JsonBoardStore::find(const std::string& id) const {
  if (!std::regex_match(id, kIdentifier)) return std::nullopt;
  auto doc = read_json(root_ / "boards" / (id + ".json"));
  if (!doc) return std::nullopt;
  return leaderboard_from_json(*doc);
}

std::vector<std::string> JsonBoardStore::ids() const {
  std::vector<std::string> out;
  std::error_code ec;
  for (const auto& e : fs::directory_iterator(root_ / "boards", ec))
    if (e.path().extension() == ".json") out.push_back(e.path().stem().string());
  std::sort(out.begin(), out.end());
  return out;
}

LeaderboardService::LeaderboardService(PluginController& controller, BoardStore& store,
                                       DatasetLoader datasets)
    : controller_(controller), store_(store), datasets_(std::move(datasets)) {}

std::mutex& LeaderboardService::board_mutex(const std::string& id) {
  std::lock_guard lock(locks_mutex_);
  auto& slot = board_locks_[id];
  if (!slot) slot = std::make_unique<std::mutex>();
  return *slot;
}

TelemetryBatch LeaderboardService::window_data(const Scenario& scenario, TelemetryBatch* full) const {
  TelemetryBatch data;
  try {
    data = datasets_(scenario.dataset);
  } catch (const Error& e) {
    if (e.family() == ErrorFamily::NotFound || e.code() == ErrorCode::IoError)
      throw Error(ErrorCode::WindowUnavailable,
                  "dataset '" + scenario.dataset + "' unavailable: " + e.what());
    throw;
  }
  try {
    auto truth = slice(data, scenario.window);
    if (scenario.train_window) (void)slice(data, *scenario.train_window);
    if (full != nullptr) *full = std::move(data);
    return truth;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::WindowOutOfRange) throw Error(ErrorCode::WindowUnavailable, e.what());
    throw;
  }
}

LeaderboardRow LeaderboardService::evaluate(const Leaderboard& board, const std::string& plugin_id,
                                            const TelemetryBatch& full, const TelemetryBatch& truth) {
  LeaderboardRow row;
  row.algorithm = plugin_id;
  try {
    const auto instance = controller_.get(plugin_id);
    row.plugin_name = instance.manifest.name;
    if (instance.manifest.task_type != board.scenario.task_type)
      throw Error(ErrorCode::IncompatibleMetric,
                  "plugin task " + std::string(to_string(instance.manifest.task_type)) +
                      " differs from scenario task " + std::string(to_string(board.scenario.task_type)));
    ExperimentRequest request;
    request.plugin_id = plugin_id;
    if (instance.manifest.mode == DeploymentMode::Online) {
      if (board.scenario.train_window) {
        request.phase = Phase::Train;
        request.window = *board.scenario.train_window;
        controller_.run_experiment(request, full);
      }
      request.phase = Phase::Test;
    } else {
      request.phase = Phase::Run;
    }
    request.window = board.scenario.window;
    const auto result = controller_.run_experiment(request, full);
    row.experiment_id = result.experiment_id;
    row.payload_hash = result.payload_hash;
    ScoreOptions options{board.k_max, board.tolerance};
    for (auto kind : board.metrics)
      row.values[kind] = score_payload(
          kind, convert_payload(result.payload, instance.manifest.metric_kind, kind), truth, options);
    row.status = RowStatus::Ok;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::UnknownPlugin) throw;
    row.values.clear();
    row.status = RowStatus::Failed;
    row.failure_reason = std::string(error_name(e.code())) + ": " + e.what();
  }
  row.computed_at = now_utc();
  return row;
}

Leaderboard LeaderboardService::create_leaderboard(const BoardRequest& request) {
  if (!std::regex_match(request.id, kIdentifier))
    throw Error(ErrorCode::InvalidArgument, "board id '" + request.id + "' is not an identifier");
  if (auto v = validate(request.scenario); !v.empty())
    throw Error(ErrorCode::ValidationError, "scenario invalid: " + v.front(), v);
  if (request.metrics.empty()) throw Error(ErrorCode::InvalidArgument, "at least one metric required");
  if (request.k_max < 1) throw Error(ErrorCode::InvalidArgument, "k_max must be >= 1");
  std::vector<std::string> incompatible;
  for (auto kind : request.metrics)
    if (!compatible(request.scenario.task_type, kind))
      incompatible.push_back(std::string(to_string(kind)) + " is not a " +
                             std::string(to_string(request.scenario.task_type)) + " metric");
  const auto primary = request.primary_metric.value_or(request.metrics.front());
  if (std::find(request.metrics.begin(), request.metrics.end(), primary) == request.metrics.end())
    incompatible.push_back("primary metric " + std::string(to_string(primary)) + " is not among the metrics");
  if (!incompatible.empty())
    throw Error(ErrorCode::IncompatibleMetric, incompatible.front(), incompatible);
  std::set<std::string> unique(request.plugins.begin(), request.plugins.end());
  if (unique.size() != request.plugins.size())
    throw Error(ErrorCode::DuplicateAlgorithm, "a plugin is listed twice");
  for (const auto& p : request.plugins) (void)controller_.get(p);

  std::lock_guard lock(board_mutex(request.id));
  if (store_.find(request.id))
    throw Error(ErrorCode::DuplicateId, "leaderboard '" + request.id + "' already exists");
  TelemetryBatch full;
  const auto truth = window_data(request.scenario, &full);

  Leaderboard board;
  board.id = request.id;
  board.scenario = request.scenario;
  board.metrics = request.metrics;
  board.primary_metric = primary;
  board.primary_key = primary_value_key(primary, request.k_max);
  board.k_max = request.k_max;
  board.tolerance = request.tolerance;
  board.dataset_hash = content_hash(truth);
  for (const auto& p : request.plugins) board.rows.push_back(evaluate(board, p, full, truth));
  board.version = 1;
  sort_rows(board);
  store_.save(board);
  return board;
}

Leaderboard LeaderboardService::add_algorithm(const std::string& board_id, const std::string& plugin_id) {
  std::lock_guard lock(board_mutex(board_id));
  auto board = store_.load(board_id);
  for (const auto& r : board.rows)
    if (r.algorithm == plugin_id)
      throw Error(ErrorCode::DuplicateAlgorithm,
                  "leaderboard '" + board_id + "' already has a row for '" + plugin_id + "'");
  (void)controller_.get(plugin_id);
  TelemetryBatch full;
  const auto truth = window_data(board.scenario, &full);
  if (content_hash(truth) != board.dataset_hash)
    throw Error(ErrorCode::WindowUnavailable,
                "dataset window of '" + board_id + "' changed since the board was created");
  auto row = evaluate(board, plugin_id, full, truth);
  const bool failed = row.status == RowStatus::Failed;
  const auto reason = row.failure_reason;
  board.rows.push_back(std::move(row));
  ++board.version;
  sort_rows(board);
  store_.save(board);
  if (failed) throw Error(ErrorCode::PluginFailure, "plugin '" + plugin_id + "' failed: " + reason);
  return board;
}

Leaderboard LeaderboardService::get(const std::string& board_id) const { return store_.load(board_id); }

std::vector<std::string> LeaderboardService::ids() const { return store_.ids(); }

}  // namespace servo
