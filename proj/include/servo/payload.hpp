// SPDX-License-Identifier: Apache-2.0

#pragma once

// Result payloads emitted by plugins, one JSON shape per metric kind
// (docs/sdk_contract.md), and their scoring against ground truth.

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "servo/metrics.hpp"
#include "servo/telemetry.hpp"

namespace servo {

struct DetectionPayload {
  std::int64_t start = 0;
  std::int64_t end = 0;
  std::int64_t step = 1;
  std::vector<bool> predictions;
};

struct RankingEntry {
  std::string case_id;
  std::vector<std::string> candidates;
};

struct RankingPayload {
  std::vector<RankingEntry> cases;
};

struct LabelEntry {
  std::string case_id;
  std::vector<std::string> labels;
  bool ranked = true;  // false when given as a single "label"
};

struct ClassificationPayload {
  int reported_k = 0;  // "top@k".k, 0 when absent
  // Epochs in ascending index order; non-TopAtK kinds have exactly one.
  std::vector<std::pair<int, std::vector<LabelEntry>>> epochs;
};

using ResultPayload = std::variant<DetectionPayload, RankingPayload, ClassificationPayload>;

std::int64_t window_ticks(std::int64_t start, std::int64_t end, std::int64_t step) noexcept;

// Throws SchemaError whose message starts with the offending key path.
ResultPayload parse_result_payload(const nlohmann::json& payload, MetricKind kind);

using ValueBundle = std::map<std::string, double>;

struct ScoreOptions {
  int k_max = 5;
  int tolerance = kDefaultEventTolerance;
};

// Scores a payload against the ground truth of an already sliced batch.
// Keys: precision/recall/f1, acc@k, avg@k, mar or top@k.
ValueBundle score_payload(MetricKind kind, const nlohmann::json& payload,
                          const TelemetryBatch& truth, const ScoreOptions& options = {});

// The bundle key a leaderboard sorts by, and whether larger is better.
std::string primary_value_key(MetricKind kind, int k_max = 5);
bool higher_is_better(MetricKind kind) noexcept;

// Fault classes a classification payload may use.
std::vector<std::string> fault_class_set(const GroundTruth& truth);

}  // namespace servo
