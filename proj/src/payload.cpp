// SPDX-License-Identifier: Apache-2.0

#include "servo/payload.hpp"

#include <algorithm>
#include <charconv>
#include <set>

#include "servo/error.hpp"

namespace servo {

using nlohmann::json;

namespace {

[[noreturn]] void schema_error(const std::string& path, const std::string& what) {
  throw Error(ErrorCode::SchemaError, path + ": " + what, {path});
}

const json& require(const json& obj, const std::string& key, const std::string& path) {
  const auto full = path.empty() ? key : path + "." + key;
  if (!obj.is_object()) schema_error(path.empty() ? "$" : path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) schema_error(full, "missing required key");
  return *it;
}

std::int64_t require_int(const json& obj, const std::string& key, const std::string& path) {
  const auto& v = require(obj, key, path);
  if (!v.is_number_integer()) schema_error(path + "." + key, "expected an integer");
  return v.get<std::int64_t>();
}

std::string require_string(const json& v, const std::string& path) {
  if (!v.is_string() || v.get_ref<const std::string&>().empty())
    schema_error(path, "expected a non-empty string");
  return v.get<std::string>();
}

std::vector<std::string> string_list(const json& v, const std::string& path) {
  if (!v.is_array()) schema_error(path, "expected an array");
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto item_path = path + "[" + std::to_string(i) + "]";
    auto s = require_string(v[i], item_path);
    if (!seen.insert(s).second) schema_error(item_path, "duplicate entry '" + s + "'");
    out.push_back(std::move(s));
  }
  return out;
}

DetectionPayload parse_detection(const json& payload) {
  DetectionPayload out;
  const auto& window = require(payload, "window", "");
  out.start = require_int(window, "start", "window");
  out.end = require_int(window, "end", "window");
  out.step = require_int(window, "step", "window");
  if (out.step <= 0) schema_error("window.step", "must be > 0");
  if (out.end <= out.start) schema_error("window.end", "must be greater than window.start");
  const auto& preds = require(payload, "predictions", "");
  if (!preds.is_array()) schema_error("predictions", "expected an array");
  const auto ticks = window_ticks(out.start, out.end, out.step);
  if (static_cast<std::int64_t>(preds.size()) != ticks)
    schema_error("predictions", "length " + std::to_string(preds.size()) +
                                    " does not match the window's " + std::to_string(ticks) +
                                    " ticks");
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto& v = preds[i];
    if (v.is_boolean()) {
      out.predictions.push_back(v.get<bool>());
    } else if (v.is_number_integer() && (v.get<int>() == 0 || v.get<int>() == 1)) {
      out.predictions.push_back(v.get<int>() == 1);
    } else {
      schema_error("predictions[" + std::to_string(i) + "]", "expected 0 or 1");
    }
  }
  return out;
}

RankingPayload parse_ranking(const json& payload) {
  RankingPayload out;
  const auto& cases = require(payload, "cases", "");
  if (!cases.is_array()) schema_error("cases", "expected an array");
  std::set<std::string> ids;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto path = "cases[" + std::to_string(i) + "]";
    RankingEntry entry;
    entry.case_id = require_string(require(cases[i], "case_id", path), path + ".case_id");
    if (!ids.insert(entry.case_id).second) schema_error(path + ".case_id", "duplicate case");
    entry.candidates = string_list(require(cases[i], "candidates", path), path + ".candidates");
    out.cases.push_back(std::move(entry));
  }
  return out;
}

std::vector<LabelEntry> parse_label_cases(const json& cases, const std::string& path) {
  if (!cases.is_array()) schema_error(path, "expected an array");
  std::vector<LabelEntry> out;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto item = path + "[" + std::to_string(i) + "]";
    LabelEntry entry;
    entry.case_id = require_string(require(cases[i], "case_id", item), item + ".case_id");
    if (!ids.insert(entry.case_id).second) schema_error(item + ".case_id", "duplicate case");
    const bool has_labels = cases[i].contains("labels");
    const bool has_label = cases[i].contains("label");
    if (has_labels == has_label) schema_error(item, "exactly one of 'labels' or 'label' required");
    if (has_labels) {
      entry.labels = string_list(cases[i]["labels"], item + ".labels");
    } else {
      entry.labels = {require_string(cases[i]["label"], item + ".label")};
      entry.ranked = false;
    }
    out.push_back(std::move(entry));
  }
  return out;
}

ClassificationPayload parse_top_at_k(const json& payload) {
  ClassificationPayload out;
  const auto& top = require(payload, "top@k", "");
  if (!top.is_object()) schema_error("top@k", "expected an object");
  if (top.contains("k")) {
    if (!top["k"].is_number_integer() || top["k"].get<int>() < 1)
      schema_error("top@k.k", "expected an integer >= 1");
    out.reported_k = top["k"].get<int>();
  }
  const auto& epochs = require(payload, "epoch", "");
  if (!epochs.is_object() || epochs.empty())
    schema_error("epoch", "expected a non-empty object keyed by epoch index");
  for (const auto& [key, value] : epochs.items()) {
    int index = 0;
    auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), index);
    if (ec != std::errc() || ptr != key.data() + key.size() || index < 1)
      schema_error("epoch." + key, "epoch keys must be positive integers");
    out.epochs.emplace_back(index, parse_label_cases(value, "epoch." + key));
  }
  std::sort(out.epochs.begin(), out.epochs.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

std::map<std::string, const CaseRecord*> cases_by_id(const TelemetryBatch& truth) {
  std::map<std::string, const CaseRecord*> out;
  for (const auto& c : truth.ground_truth.cases) out[c.case_id] = &c;
  return out;
}

ValueBundle prf1_bundle(const PRF1& s) {
  return {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}};
}

std::vector<ClassifiedCase> classified(const std::vector<LabelEntry>& entries,
                                       const TelemetryBatch& truth, const std::string& path) {
  const auto by_id = cases_by_id(truth);
  std::map<std::string, const LabelEntry*> given;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!by_id.count(entries[i].case_id))
      schema_error(path + "[" + std::to_string(i) + "].case_id",
                   "unknown case '" + entries[i].case_id + "'");
    given[entries[i].case_id] = &entries[i];
  }
  std::vector<ClassifiedCase> out;
  for (const auto& [id, record] : by_id) {
    ClassifiedCase c{id, record->fault_type, {}, true};
    if (auto it = given.find(id); it != given.end()) {
      c.predicted = it->second->labels;
      c.ranked = it->second->ranked;
    }
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace

std::int64_t window_ticks(std::int64_t start, std::int64_t end, std::int64_t step) noexcept {
  if (step <= 0 || end <= start) return 0;
  return (end - start + step - 1) / step;
}

ResultPayload parse_result_payload(const json& payload, MetricKind kind) {
  if (!payload.is_object()) schema_error("$", "payload must be a JSON object");
  switch (task_of(kind)) {
    case TaskType::AD: return parse_detection(payload);
    case TaskType::RCA: return parse_ranking(payload);
    case TaskType::FC: break;
  }
  if (kind == MetricKind::TopAtK) return parse_top_at_k(payload);
  ClassificationPayload out;
  out.epochs.emplace_back(1, parse_label_cases(require(payload, "cases", ""), "cases"));
  return out;
}

std::vector<std::string> fault_class_set(const GroundTruth& truth) {
  std::set<std::string> classes;
  for (auto type : kAllFaultTypes) classes.insert(std::string(to_string(type)));
  for (const auto& c : truth.cases) classes.insert(c.fault_type);
  return {classes.begin(), classes.end()};
}

ValueBundle score_payload(MetricKind kind, const json& payload, const TelemetryBatch& truth,
                          const ScoreOptions& options) {
  if (options.k_max < 1) throw Error(ErrorCode::InvalidArgument, "k_max must be >= 1");
  const auto parsed = parse_result_payload(payload, kind);

  if (const auto* det = std::get_if<DetectionPayload>(&parsed)) {
    if (det->start != truth.start || det->end != truth.end || det->step != truth.step)
      schema_error("window", "does not match the evaluated window [" +
                                 std::to_string(truth.start) + ", " + std::to_string(truth.end) +
                                 ") step " + std::to_string(truth.step));
    PointPredictions p;
    const auto n = det->predictions.size();
    p.predicted = det->predictions;
    p.labels.assign(n, false);
    for (std::size_t i = 0; i < n; ++i)
      p.timestamps.push_back(truth.start + static_cast<std::int64_t>(i) * truth.step);
    for (const auto& label : truth.ground_truth.labels) {
      const auto index = (label.timestamp - truth.start) / truth.step;
      if (index >= 0 && static_cast<std::size_t>(index) < n && label.anomalous)
        p.labels[static_cast<std::size_t>(index)] = true;
    }
    switch (kind) {
      case MetricKind::PointPRF1: return prf1_bundle(point_prf1(p));
      case MetricKind::RangePRF1: return prf1_bundle(range_prf1(p));
      default: return prf1_bundle(event_prf1(p, options.tolerance));
    }
  }

  if (const auto* rank = std::get_if<RankingPayload>(&parsed)) {
    const auto by_id = cases_by_id(truth);
    std::map<std::string, const RankingEntry*> given;
    for (std::size_t i = 0; i < rank->cases.size(); ++i) {
      if (!by_id.count(rank->cases[i].case_id))
        schema_error("cases[" + std::to_string(i) + "].case_id",
                     "unknown case '" + rank->cases[i].case_id + "'");
      given[rank->cases[i].case_id] = &rank->cases[i];
    }
    std::vector<RankedCase> cases;
    for (const auto& [id, record] : by_id) {
      RankedCase c{id, record->root_cause, {}};
      if (auto it = given.find(id); it != given.end()) c.candidates = it->second->candidates;
      cases.push_back(std::move(c));
    }
    ValueBundle out;
    if (kind == MetricKind::MAR) {
      out["mar"] = mean_average_rank(cases);
    } else {
      for (int k = 1; k <= options.k_max; ++k) {
        if (kind == MetricKind::AccuracyAtK)
          out["acc@" + std::to_string(k)] = accuracy_at_k(cases, k);
        else
          out["avg@" + std::to_string(k)] = avg_at_k(cases, k);
      }
    }
    return out;
  }

  const auto& cls = std::get<ClassificationPayload>(parsed);
  const auto& last = cls.epochs.back();
  const auto path = kind == MetricKind::TopAtK ? "epoch." + std::to_string(last.first) : "cases";
  const auto cases = classified(last.second, truth, path);
  ValueBundle out;
  if (kind == MetricKind::TopAtK) {
    const int k_top = cls.reported_k > 0 ? cls.reported_k : options.k_max;
    for (int k = 1; k <= k_top; ++k) out["top@" + std::to_string(k)] = top_at_k(cases, k);
    return out;
  }
  const auto averaging = kind == MetricKind::MicroF1   ? Averaging::Micro
                         : kind == MetricKind::MacroF1 ? Averaging::Macro
                                                       : Averaging::Weighted;
  return prf1_bundle(multiclass_f1(cases, averaging, fault_class_set(truth.ground_truth)));
}

std::string primary_value_key(MetricKind kind, int k_max) {
  switch (kind) {
    case MetricKind::AccuracyAtK: return "acc@1";
    case MetricKind::AvgAtK: return "avg@" + std::to_string(k_max);
    case MetricKind::MAR: return "mar";
    case MetricKind::TopAtK: return "top@1";
    default: return "f1";
  }
}

bool higher_is_better(MetricKind kind) noexcept { return kind != MetricKind::MAR; }

}  // namespace servo
