// SPDX-License-Identifier: Apache-2.0

#include "servo/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "servo/error.hpp"

namespace servo {

namespace {

void check_aligned(const PointPredictions& p) {
  if (p.predicted.size() != p.labels.size())
    throw Error(ErrorCode::InvalidArgument, "predictions and labels differ in length");
  if (!p.timestamps.empty() && p.timestamps.size() != p.labels.size())
    throw Error(ErrorCode::InvalidArgument, "timestamps and labels differ in length");
  if (p.labels.empty()) throw Error(ErrorCode::EmptyInput, "no timestamps to score");
}

void check_k(int k) {
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
}

template <typename Case>
void check_nonempty(std::span<const Case> cases) {
  if (cases.empty()) throw Error(ErrorCode::EmptyInput, "no cases to score");
}

void check_distinct(const RankedCase& c) {
  std::set<std::string_view> seen;
  for (const auto& cand : c.candidates)
    if (!seen.insert(cand).second)
      throw Error(ErrorCode::InvalidArgument,
                  "case " + c.case_id + " lists candidate '" + cand + "' twice");
}

// 1-based rank of the true cause, 0 when absent.
std::size_t rank_of(const RankedCase& c) {
  auto it = std::find(c.candidates.begin(), c.candidates.end(), c.true_root_cause);
  return it == c.candidates.end() ? 0 : static_cast<std::size_t>(it - c.candidates.begin()) + 1;
}

std::int64_t hits_at(std::span<const RankedCase> cases, int k) {
  std::int64_t hits = 0;
  for (const auto& c : cases) {
    const auto r = rank_of(c);
    if (r != 0 && r <= static_cast<std::size_t>(k)) ++hits;
  }
  return hits;
}

}  // namespace

std::string_view to_string(TaskType task) noexcept {
  switch (task) {
    case TaskType::AD: return "AD";
    case TaskType::RCA: return "RCA";
    case TaskType::FC: return "FC";
  }
  return "AD";
}

TaskType parse_task_type(std::string_view text) {
  if (text == "AD") return TaskType::AD;
  if (text == "RCA") return TaskType::RCA;
  if (text == "FC") return TaskType::FC;
  throw Error(ErrorCode::ParseError, "unknown task type '" + std::string(text) + "'");
}

std::string_view to_string(MetricKind kind) noexcept {
  switch (kind) {
    case MetricKind::PointPRF1: return "PointPRF1";
    case MetricKind::RangePRF1: return "RangePRF1";
    case MetricKind::EventPRF1: return "EventPRF1";
    case MetricKind::AccuracyAtK: return "AccuracyAtK";
    case MetricKind::AvgAtK: return "AvgAtK";
    case MetricKind::MAR: return "MAR";
    case MetricKind::TopAtK: return "TopAtK";
    case MetricKind::MicroF1: return "MicroF1";
    case MetricKind::MacroF1: return "MacroF1";
    case MetricKind::WeightedF1: return "WeightedF1";
  }
  return "PointPRF1";
}

MetricKind parse_metric_kind(std::string_view text) {
  for (auto kind : kAllMetricKinds)
    if (to_string(kind) == text) return kind;
  throw Error(ErrorCode::ParseError, "unknown metric kind '" + std::string(text) + "'");
}

TaskType task_of(MetricKind kind) noexcept {
  switch (kind) {
    case MetricKind::PointPRF1:
    case MetricKind::RangePRF1:
    case MetricKind::EventPRF1: return TaskType::AD;
    case MetricKind::AccuracyAtK:
    case MetricKind::AvgAtK:
    case MetricKind::MAR: return TaskType::RCA;
    case MetricKind::TopAtK:
    case MetricKind::MicroF1:
    case MetricKind::MacroF1:
    case MetricKind::WeightedF1: return TaskType::FC;
  }
  return TaskType::AD;
}

bool compatible(TaskType task, MetricKind kind) noexcept { return task_of(kind) == task; }

std::vector<MetricKind> kinds_for(TaskType task) {
  std::vector<MetricKind> out;
  for (auto kind : kAllMetricKinds)
    if (compatible(task, kind)) out.push_back(kind);
  return out;
}

double harmonic_f1(double precision, double recall) noexcept {
  return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

PRF1 prf1_from_counts(std::int64_t tp, std::int64_t fp, std::int64_t fn) noexcept {
  PRF1 out;
  if (tp + fp > 0) {
    out.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  } else {
    out.precision_undefined = true;
  }
  if (tp + fn > 0) {
    out.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  } else {
    out.recall_undefined = true;
  }
  out.f1 = harmonic_f1(out.precision, out.recall);
  return out;
}

std::vector<Segment> segments(const std::vector<bool>& flags) {
  std::vector<Segment> out;
  for (std::size_t i = 0; i < flags.size();) {
    if (!flags[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < flags.size() && flags[j]) ++j;
    out.push_back({i, j});
    i = j;
  }
  return out;
}

PRF1 point_prf1(const PointPredictions& p) {
  check_aligned(p);
  std::int64_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < p.labels.size(); ++i) {
    if (p.predicted[i] && p.labels[i]) ++tp;
    if (p.predicted[i] && !p.labels[i]) ++fp;
    if (!p.predicted[i] && p.labels[i]) ++fn;
  }
  if (tp + fp + fn == 0)
    throw Error(ErrorCode::EmptyInput, "no positive labels or predictions to score");
  return prf1_from_counts(tp, fp, fn);
}

PRF1 range_prf1(const PointPredictions& p) {
  check_aligned(p);
  const auto truth = segments(p.labels);
  if (truth.empty()) throw Error(ErrorCode::EmptyInput, "labels contain no anomalous segment");
  std::int64_t tp = 0, fn = 0, fp = 0;
  for (const auto& s : truth) {
    bool hit = false;
    for (std::size_t i = s.begin; i < s.end && !hit; ++i) hit = p.predicted[i];
    (hit ? tp : fn) += 1;
  }
  for (const auto& s : segments(p.predicted)) {
    bool overlaps = false;
    for (std::size_t i = s.begin; i < s.end && !overlaps; ++i) overlaps = p.labels[i];
    if (!overlaps) ++fp;
  }
  return prf1_from_counts(tp, fp, fn);
}

PRF1 event_prf1(const PointPredictions& p, int tolerance) {
  if (tolerance < 0) throw Error(ErrorCode::InvalidArgument, "tolerance must be >= 0");
  check_aligned(p);
  const auto truth = segments(p.labels);
  if (truth.empty()) throw Error(ErrorCode::EmptyInput, "labels contain no anomalous segment");
  const std::size_t n = p.labels.size();
  const auto tol = static_cast<std::size_t>(tolerance);

  // Windows share one length, so onset order is deadline order and taking
  // the earliest free positive per window yields a maximum matching.
  std::vector<bool> used(n, false);
  std::vector<bool> in_window(n, false);
  std::int64_t tp = 0;
  for (const auto& s : truth) {
    const std::size_t last = std::min(n - 1, s.begin + tol);
    for (std::size_t i = s.begin; i <= last; ++i) in_window[i] = true;
    for (std::size_t i = s.begin; i <= last; ++i) {
      if (p.predicted[i] && !used[i]) {
        used[i] = true;
        ++tp;
        break;
      }
    }
  }
  const std::int64_t fn = static_cast<std::int64_t>(truth.size()) - tp;
  std::int64_t fp = 0;
  for (const auto& s : segments(p.predicted)) {
    bool touches = false;
    for (std::size_t i = s.begin; i < s.end && !touches; ++i)
      touches = p.labels[i] || in_window[i];
    if (!touches) ++fp;
  }
  return prf1_from_counts(tp, fp, fn);
}

double accuracy_at_k(std::span<const RankedCase> cases, int k) {
  check_k(k);
  check_nonempty(cases);
  for (const auto& c : cases) check_distinct(c);
  return static_cast<double>(hits_at(cases, k)) / static_cast<double>(cases.size());
}

double avg_at_k(std::span<const RankedCase> cases, int k) {
  check_k(k);
  check_nonempty(cases);
  for (const auto& c : cases) check_distinct(c);
  std::int64_t total_hits = 0;
  for (int j = 1; j <= k; ++j) total_hits += hits_at(cases, j);
  return static_cast<double>(total_hits) /
         (static_cast<double>(k) * static_cast<double>(cases.size()));
}

double mean_average_rank(std::span<const RankedCase> cases, std::optional<double> penalty_rank) {
  check_nonempty(cases);
  double total = 0.0;
  for (const auto& c : cases) {
    check_distinct(c);
    const auto r = rank_of(c);
    if (r != 0) {
      total += static_cast<double>(r);
    } else {
      total += penalty_rank ? *penalty_rank : static_cast<double>(c.candidates.size() + 1);
    }
  }
  return total / static_cast<double>(cases.size());
}

double top_at_k(std::span<const ClassifiedCase> cases, int k) {
  check_k(k);
  check_nonempty(cases);
  std::int64_t hits = 0;
  for (const auto& c : cases) {
    if (!c.ranked && k > 1)
      throw Error(ErrorCode::UnrankedPrediction,
                  "case " + c.case_id + " has an unranked prediction; Top@" + std::to_string(k) +
                      " needs a ranked list");
    const auto limit = std::min(c.predicted.size(), static_cast<std::size_t>(k));
    if (std::find(c.predicted.begin(), c.predicted.begin() + static_cast<std::ptrdiff_t>(limit),
                  c.true_label) != c.predicted.begin() + static_cast<std::ptrdiff_t>(limit))
      ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(cases.size());
}

MulticlassScore multiclass_f1(std::span<const ClassifiedCase> cases, Averaging averaging,
                              const std::vector<std::string>& class_set) {
  check_nonempty(cases);
  const std::set<std::string> allowed(class_set.begin(), class_set.end());
  struct Counts {
    std::int64_t tp = 0, fp = 0, fn = 0, support = 0;
  };
  std::map<std::string, Counts> per_class;
  for (const auto& c : class_set) per_class[c];
  auto check_label = [&](const std::string& label) {
    if (!allowed.empty() && !allowed.count(label))
      throw Error(ErrorCode::InvalidArgument, "label '" + label + "' not in the class set");
  };
  for (const auto& c : cases) {
    check_label(c.true_label);
    auto& truth = per_class[c.true_label];
    ++truth.support;
    if (c.predicted.empty()) {
      ++truth.fn;
      continue;
    }
    const auto& top = c.predicted.front();
    check_label(top);
    if (top == c.true_label) {
      ++truth.tp;
    } else {
      ++truth.fn;
      ++per_class[top].fp;
    }
  }

  MulticlassScore out;
  if (averaging == Averaging::Micro) {
    Counts pooled;
    for (const auto& [label, n] : per_class) {
      pooled.tp += n.tp;
      pooled.fp += n.fp;
      pooled.fn += n.fn;
    }
    static_cast<PRF1&>(out) = prf1_from_counts(pooled.tp, pooled.fp, pooled.fn);
    return out;
  }

  double sum_p = 0.0, sum_r = 0.0, sum_f = 0.0, total_weight = 0.0;
  for (const auto& [label, n] : per_class) {
    const auto score = prf1_from_counts(n.tp, n.fp, n.fn);
    if (score.precision_undefined || score.recall_undefined) {
      out.zero_division_classes.push_back(label);
      out.precision_undefined |= score.precision_undefined;
      out.recall_undefined |= score.recall_undefined;
    }
    const double w = averaging == Averaging::Macro ? 1.0 : static_cast<double>(n.support);
    sum_p += w * score.precision;
    sum_r += w * score.recall;
    sum_f += w * score.f1;
    total_weight += w;
  }
  if (total_weight > 0.0) {
    out.precision = sum_p / total_weight;
    out.recall = sum_r / total_weight;
    out.f1 = sum_f / total_weight;
  }
  return out;
}

double round_half_up(double value, int decimals) noexcept {
  const double scale = std::pow(10.0, decimals);
  // Nudge by a few ulps so values like 0.825 stored as 0.82499999... round up.
  const double scaled = value * scale;
  return std::floor(scaled + 0.5 + 1e-9 * std::max(1.0, std::abs(scaled))) / scale;
}

}  // namespace servo
