// SPDX-License-Identifier: Apache-2.0
//
// Reference plugin: a 3-sigma threshold detector over one KPI, with simple
// z-score rankers for RCA and FC payloads. Serves the plugin wire contract
// (docs/sdk_contract.md) on $SERVO_PORT.

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "httplib.h"
#include "servo/error.hpp"
#include "servo/telemetry.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Stats {
  double mean = 0.0;
  double sd = 0.0;
};

// (cmdb_id, kpi) -> stats
using Model = std::map<std::pair<std::string, std::string>, Stats>;

std::string env_or(const char* name, std::string fallback) {
  const char* v = std::getenv(name);
  return v != nullptr && *v != '\0' ? std::string(v) : fallback;
}

struct Settings {
  std::string task = "AD";
  std::string kpi = "cpu_usage_pct";
  double threshold = 3.0;
  fs::path model_path = "model.json";
  std::string behavior;
  std::set<std::string> behavior_phases{"test", "run"};
};

Settings settings_from(const json& config) {
  Settings s;
  s.task = config.value("task", s.task);
  s.kpi = config.value("kpi", s.kpi);
  if (config.contains("threshold_sigma")) s.threshold = config["threshold_sigma"].get<double>();
  s.model_path = config.value("model_path", s.model_path.string());
  s.behavior = config.value("behavior", std::string());
  if (config.contains("behavior_phases")) {
    s.behavior_phases.clear();
    std::string phases = config["behavior_phases"].get<std::string>();
    std::size_t pos = 0;
    while (pos <= phases.size()) {
      auto comma = phases.find(',', pos);
      if (comma == std::string::npos) comma = phases.size();
      s.behavior_phases.insert(phases.substr(pos, comma - pos));
      pos = comma + 1;
    }
  }
  return s;
}

bool in_any_case(const servo::TelemetryBatch& batch, std::int64_t t) {
  for (const auto& c : batch.ground_truth.cases)
    if (c.start <= t && t < c.end) return true;
  return false;
}

Model fit(const servo::TelemetryBatch& batch, bool skip_cases) {
  std::map<std::pair<std::string, std::string>, std::vector<double>> values;
  for (const auto& m : batch.metrics) {
    if (skip_cases && in_any_case(batch, m.timestamp)) continue;
    values[{m.cmdb_id, m.kpi_name}].push_back(m.value);
  }
  Model model;
  for (const auto& [key, xs] : values) {
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    model[key] = {mean, xs.size() > 1 ? std::sqrt(var / static_cast<double>(xs.size() - 1)) : 0.0};
  }
  return model;
}

json model_to_json(const Model& model) {
  json out = json::array();
  for (const auto& [key, s] : model)
    out.push_back({{"cmdb_id", key.first}, {"kpi", key.second}, {"mean", s.mean}, {"sd", s.sd}});
  return out;
}

Model model_from_json(const json& doc) {
  Model model;
  for (const auto& e : doc)
    model[{e.at("cmdb_id").get<std::string>(), e.at("kpi").get<std::string>()}] = {
        e.at("mean").get<double>(), e.at("sd").get<double>()};
  return model;
}

double zscore(const Stats& s, double value) {
  const double floor = std::max(1e-6, 1e-3 * std::abs(s.mean));
  return std::abs(value - s.mean) / std::max(s.sd, floor);
}

json detect(const servo::TelemetryBatch& batch, const Model& model, const Settings& s) {
  const auto step = batch.step;
  const auto n = (batch.end - batch.start + step - 1) / step;
  std::vector<int> predictions(static_cast<std::size_t>(n), 0);
  for (const auto& m : batch.metrics) {
    if (m.kpi_name != s.kpi) continue;
    auto it = model.find({m.cmdb_id, m.kpi_name});
    if (it == model.end() || it->second.sd <= 0.0) continue;
    if (std::abs(m.value - it->second.mean) > s.threshold * it->second.sd)
      predictions[static_cast<std::size_t>((m.timestamp - batch.start) / step)] = 1;
  }
  return {{"window", {{"start", batch.start}, {"end", batch.end}, {"step", step}}},
          {"predictions", predictions}};
}

// Max |z| per (entity, kpi) inside the case window, plus the share of ticks
// where an entity that reports elsewhere has no rows at all.
struct CaseScores {
  std::map<std::pair<std::string, std::string>, double> z;
  std::map<std::string, double> missing;
};

CaseScores score_case(const servo::TelemetryBatch& batch, const Model& model,
                      const servo::CaseRecord& c) {
  CaseScores out;
  std::map<std::string, std::set<std::int64_t>> seen;
  std::set<std::string> entities;
  for (const auto& m : batch.metrics) {
    entities.insert(m.cmdb_id);
    if (m.timestamp < c.start || m.timestamp >= c.end) continue;
    seen[m.cmdb_id].insert(m.timestamp);
    auto it = model.find({m.cmdb_id, m.kpi_name});
    if (it == model.end()) continue;
    auto& slot = out.z[{m.cmdb_id, m.kpi_name}];
    slot = std::max(slot, zscore(it->second, m.value));
  }
  std::set<std::int64_t> ticks;
  for (const auto& [entity, ts] : seen) ticks.insert(ts.begin(), ts.end());
  for (const auto& e : entities) {
    const auto have = seen.count(e) ? seen[e].size() : 0;
    if (!ticks.empty())
      out.missing[e] = 1.0 - static_cast<double>(have) / static_cast<double>(ticks.size());
  }
  return out;
}

template <typename Map>
std::vector<std::string> ranked_keys(const Map& scores) {
  std::vector<std::pair<std::string, double>> items(scores.begin(), scores.end());
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::vector<std::string> out;
  for (const auto& [k, v] : items) out.push_back(k);
  return out;
}

json rank_root_causes(const servo::TelemetryBatch& batch, const Model& model) {
  json cases = json::array();
  for (const auto& c : batch.ground_truth.cases) {
    const auto scores = score_case(batch, model, c);
    std::map<std::string, double> per_entity;
    for (const auto& [key, z] : scores.z) per_entity[key.first] = std::max(per_entity[key.first], z);
    for (const auto& [e, ratio] : scores.missing)
      per_entity[e] = std::max(per_entity[e], 100.0 * ratio);
    cases.push_back({{"case_id", c.case_id}, {"candidates", ranked_keys(per_entity)}});
  }
  return {{"cases", cases}};
}

json classify(const servo::TelemetryBatch& batch, const Model& model, bool top_at_k) {
  const std::vector<std::pair<std::string, std::string>> signature{
      {"CpuStress", "cpu_usage_pct"},
      {"MemoryStress", "mem_usage_bytes"},
      {"NetworkDelay", "p99_latency"},
      {"NetworkLoss", "net_drop_tx"}};
  json cases = json::array();
  for (const auto& c : batch.ground_truth.cases) {
    const auto scores = score_case(batch, model, c);
    std::map<std::string, double> per_class;
    for (const auto& [label, kpi] : signature) {
      double best = 0.0;
      for (const auto& [key, z] : scores.z)
        if (key.second == kpi) best = std::max(best, z);
      per_class[label] = best;
    }
    double missing = 0.0;
    for (const auto& [e, ratio] : scores.missing) missing = std::max(missing, ratio);
    per_class["PodFailure"] = 100.0 * missing;
    cases.push_back({{"case_id", c.case_id}, {"labels", ranked_keys(per_class)}});
  }
  if (top_at_k) return {{"top@k", {{"k", 5}}}, {"epoch", {{"1", cases}}}};
  return {{"cases", cases}};
}

json payload_for(const servo::TelemetryBatch& batch, const Model& model, const Settings& s,
                 const std::string& metric_kind) {
  if (s.task == "RCA") return rank_root_causes(batch, model);
  if (s.task == "FC") return classify(batch, model, metric_kind == "TopAtK");
  return detect(batch, model, s);
}

void reply(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

json failed(const std::string& reason) { return {{"status", "failed"}, {"reason", reason}}; }

// Applies a configured misbehaviour; returns true when the response is
// already written.
bool misbehave(const Settings& s, const std::string& phase, httplib::Response& res, json& payload) {
  if (s.behavior.empty() || !s.behavior_phases.count(phase)) return false;
  if (s.behavior == "crash") {
    std::cerr << "configured to crash during " << phase << std::endl;
    std::_Exit(3);
  }
  if (s.behavior == "fail") {
    reply(res, failed("configured to fail during " + phase));
    return true;
  }
  if (s.behavior == "bad_payload") {
    if (payload.contains("predictions")) payload.erase("predictions");
    else if (payload.contains("cases")) payload.erase("cases");
    else if (payload.contains("epoch")) payload.erase("epoch");
  }
  return false;
}

void handle_phase(const std::string& phase, const httplib::Request& req, httplib::Response& res) {
  json body;
  try {
    body = json::parse(req.body);
  } catch (const json::exception& e) {
    reply(res, failed(std::string("bad request body: ") + e.what()), 400);
    return;
  }
  const auto config = body.value("config", json::object());
  const auto settings = settings_from(config);
  const auto experiment_id = body.value("experiment_id", std::string("unnamed"));
  try {
    const auto batch = servo::import_csv(body.at("data_dir").get<std::string>());
    json payload;
    if (phase == "train") {
      const auto model = fit(batch, true);
      fs::create_directories(settings.model_path.parent_path().empty()
                                 ? fs::path(".")
                                 : settings.model_path.parent_path());
      std::ofstream(settings.model_path) << model_to_json(model).dump();
      payload = {{"series", model.size()}};
    } else {
      Model model;
      if (phase == "test") {
        std::ifstream in(settings.model_path);
        if (!in) {
          reply(res, failed("no trained model at " + settings.model_path.string()));
          return;
        }
        model = model_from_json(json::parse(in));
      } else {
        model = fit(batch, true);
      }
      payload = payload_for(batch, model, settings, config.value("metric_kind", std::string()));
      const fs::path scratch = fs::path("scratch") / experiment_id;
      fs::create_directories(scratch);
      std::ofstream(scratch / "payload.json") << payload.dump();
    }
    if (misbehave(settings, phase, res, payload)) return;
    reply(res, {{"status", "ok"}, {"payload", payload}});
  } catch (const std::exception& e) {
    reply(res, failed(e.what()));
  }
}

}  // namespace

int main(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    if (std::string(argv[i]) == "--never-bind") {
      for (;;) std::this_thread::sleep_for(std::chrono::seconds(60));
    }
  }
  const auto host = env_or("SERVO_HOST", "0.0.0.0");
  const int port = std::stoi(env_or("SERVO_PORT", "8000"));

  httplib::Server server;
  server.Get("/health", [](const httplib::Request&, httplib::Response& res) {
    reply(res, {{"status", "ok"}});
  });
  for (const std::string phase : {"train", "test", "run"}) {
    server.Post("/" + phase, [phase](const httplib::Request& req, httplib::Response& res) {
      handle_phase(phase, req, res);
    });
  }
  server.Post("/clear", [](const httplib::Request& req, httplib::Response& res) {
    try {
      const auto body = json::parse(req.body);
      const auto id = body.value("experiment_id", std::string());
      if (!id.empty() && id.find('/') == std::string::npos && id != "." && id != "..")
        fs::remove_all(fs::path("scratch") / id);
      reply(res, {{"status", "ok"}});
    } catch (const std::exception& e) {
      reply(res, failed(e.what()), 400);
    }
  });
  if (!server.listen(host, port)) {
    std::cerr << "cannot listen on " << host << ":" << port << std::endl;
    return 1;
  }
  return 0;
}
