// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "servo/fault.hpp"

namespace servo {

struct MetricRecord {
  std::int64_t timestamp = 0;
  std::string cmdb_id;
  std::string kpi_name;
  double value = 0.0;
  bool operator==(const MetricRecord&) const = default;
};

struct LogRecord {
  std::string log_id;
  std::int64_t timestamp = 0;
  std::string date;  // "YYYY-MM-DD HH:MM:SS", UTC
  std::string cmdb_id;
  std::string message;
  bool operator==(const LogRecord&) const = default;
};

struct SpanRecord {
  std::int64_t timestamp = 0;
  std::string cmdb_id;
  std::string parent_span;  // empty for the root span
  std::string span_id;
  std::string trace_id;
  std::int64_t duration = 0;  // microseconds
  std::string type;
  int status_code = 200;
  std::string operation_name;
  bool operator==(const SpanRecord&) const = default;
};

enum class Modality { Metrics, Logs, Traces };
std::string_view to_string(Modality modality) noexcept;
Modality parse_modality(std::string_view text);
// Comma-separated list, e.g. "metrics,logs".
std::set<Modality> parse_modalities(std::string_view text);
inline const std::set<Modality> kAllModalities{Modality::Metrics, Modality::Logs,
                                               Modality::Traces};

struct DatasetWindow {
  std::int64_t start = 0;
  std::int64_t end = 0;
  std::set<Modality> modalities = kAllModalities;
  std::int64_t step = 1;
  bool operator==(const DatasetWindow&) const = default;
};

// Telemetry for [start, end). Records are kept in canonical order:
// metrics by (timestamp, cmdb_id, kpi_name), logs by (timestamp, cmdb_id,
// log_id), spans by (timestamp, cmdb_id, trace_id, span_id).
struct TelemetryBatch {
  std::int64_t start = 0;
  std::int64_t end = 0;
  std::int64_t step = 1;  // metric sampling step
  std::vector<std::string> container_kpis;
  std::vector<std::string> service_kpis;
  std::vector<MetricRecord> metrics;
  std::vector<LogRecord> logs;
  std::vector<SpanRecord> spans;
  GroundTruth ground_truth;

  bool operator==(const TelemetryBatch&) const = default;
};

void canonicalize(TelemetryBatch& batch);

// Violations of the record and batch invariants; empty when valid.
std::vector<std::string> validate(const TelemetryBatch& batch);

std::string format_utc_date(std::int64_t epoch_seconds);
// Shortest text that parses back to the identical double; locale-free.
std::string format_value(double value);

inline constexpr std::string_view kMetricHeader = "timestamp,cmdb_id,kpi_name,value";
inline constexpr std::string_view kLogHeader = "log_id,timestamp,date,cmdb_id,message";
inline constexpr std::string_view kTraceHeader =
    "timestamp,cmdb_id,parent_span,span_id,trace_id,duration,type,status_code,operation_name";
inline constexpr std::string_view kCasesHeader = "case_id,fault_type,root_cause,service,start,end";
inline constexpr std::string_view kLabelsHeader = "timestamp,label";

// Writes the dataset layout described in docs/dataset_format.md. Throws
// IoError.
void export_csv(const TelemetryBatch& batch, const std::filesystem::path& directory);
// Throws IoError, SchemaMismatch (wrong header) or RowError ("<file>:<line>").
TelemetryBatch import_csv(const std::filesystem::path& directory);

// Records within the window and modalities; metrics and labels resampled to
// window.step keeping the latest sample per step. Throws WindowOutOfRange.
TelemetryBatch slice(const TelemetryBatch& batch, const DatasetWindow& window);

// SHA-256 over the batch's canonical CSV serialisation.
std::string content_hash(const TelemetryBatch& batch);

}  // namespace servo
