// SPDX-License-Identifier: Apache-2.0

#pragma once

// Evaluation metrics for anomaly detection (AD), root cause localisation
// (RCA) and failure classification (FC). All functions are pure.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace servo {

enum class TaskType { AD, RCA, FC };
std::string_view to_string(TaskType task) noexcept;
TaskType parse_task_type(std::string_view text);

enum class MetricKind {
  PointPRF1,
  RangePRF1,
  EventPRF1,
  AccuracyAtK,
  AvgAtK,
  MAR,
  TopAtK,
  MicroF1,
  MacroF1,
  WeightedF1,
};

inline constexpr MetricKind kAllMetricKinds[] = {
    MetricKind::PointPRF1, MetricKind::RangePRF1,   MetricKind::EventPRF1, MetricKind::AccuracyAtK,
    MetricKind::AvgAtK,    MetricKind::MAR,         MetricKind::TopAtK,    MetricKind::MicroF1,
    MetricKind::MacroF1,   MetricKind::WeightedF1};

std::string_view to_string(MetricKind kind) noexcept;
MetricKind parse_metric_kind(std::string_view text);
TaskType task_of(MetricKind kind) noexcept;
bool compatible(TaskType task, MetricKind kind) noexcept;
std::vector<MetricKind> kinds_for(TaskType task);

struct PRF1 {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  // Set when the corresponding ratio had a zero denominator and was
  // reported as 0.
  bool precision_undefined = false;
  bool recall_undefined = false;
};

// 2PR/(P+R), or 0 when P+R = 0.
double harmonic_f1(double precision, double recall) noexcept;
PRF1 prf1_from_counts(std::int64_t tp, std::int64_t fp, std::int64_t fn) noexcept;

struct PointPredictions {
  std::vector<std::int64_t> timestamps;
  std::vector<bool> predicted;
  std::vector<bool> labels;
};

// Maximal runs of true values as half-open [begin, end) index ranges.
struct Segment {
  std::size_t begin = 0;
  std::size_t end = 0;
  bool operator==(const Segment&) const = default;
};
std::vector<Segment> segments(const std::vector<bool>& flags);

inline constexpr int kDefaultEventTolerance = 2;

// Per-timestamp confusion. Throws EmptyInput when there is nothing to score
// (no timestamps, or neither a positive label nor a positive prediction).
PRF1 point_prf1(const PointPredictions& p);
// Truth segments hit by >= 1 predicted positive are TP, others FN; predicted
// segments overlapping no truth segment are FP. Throws EmptyInput without a
// truth segment.
PRF1 range_prf1(const PointPredictions& p);
// Events are truth-segment onsets; an event is TP when a predicted positive
// in [onset, onset + tolerance] is matched to it (each positive matches at
// most one event, maximum matching). Predicted segments that touch neither a
// truth segment nor any event window are FP.
PRF1 event_prf1(const PointPredictions& p, int tolerance = kDefaultEventTolerance);

struct RankedCase {
  std::string case_id;
  std::string true_root_cause;
  std::vector<std::string> candidates;  // rank 1 first, distinct
};

// Throws EmptyInput, InvalidArgument (k < 1 or duplicate candidates).
double accuracy_at_k(std::span<const RankedCase> cases, int k);
// Mean of Accuracy@1..k, computed from exact hit counts.
double avg_at_k(std::span<const RankedCase> cases, int k);
// Absent causes rank at candidates.size() + 1 unless `penalty_rank` is set.
double mean_average_rank(std::span<const RankedCase> cases,
                         std::optional<double> penalty_rank = std::nullopt);

struct ClassifiedCase {
  std::string case_id;
  std::string true_label;
  std::vector<std::string> predicted;  // best first
  bool ranked = true;                  // false: a single unranked label
};

// Throws EmptyInput, InvalidArgument (k < 1) or UnrankedPrediction (k > 1
// with an unranked prediction).
double top_at_k(std::span<const ClassifiedCase> cases, int k);

enum class Averaging { Micro, Macro, Weighted };

struct MulticlassScore : PRF1 {
  // Classes whose precision or recall had a zero denominator.
  std::vector<std::string> zero_division_classes;
};

// Per-class confusion from top-1 predictions. Classes are the union of true
// and predicted labels, plus `class_set` when given (labels outside a given
// class set throw InvalidArgument). Throws EmptyInput.
MulticlassScore multiclass_f1(std::span<const ClassifiedCase> cases, Averaging averaging,
                              const std::vector<std::string>& class_set = {});

// Half-up rounding for display.
double round_half_up(double value, int decimals = 2) noexcept;

}  // namespace servo
