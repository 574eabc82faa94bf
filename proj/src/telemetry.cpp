// SPDX-License-Identifier: Apache-2.0

#include "servo/telemetry.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <ctime>
#include <fstream>
#include <map>
#include <sstream>

#include "csv.hpp"
#include "servo/error.hpp"
#include "servo/hash.hpp"

namespace servo {

namespace fs = std::filesystem;

namespace {

constexpr int kDatasetVersion = 1;

void write_metric_rows(std::ostream& out, const std::vector<const MetricRecord*>& rows) {
  out << kMetricHeader << '\n';
  for (const auto* r : rows) {
    out << r->timestamp << ',';
    csv::write_field(out, r->cmdb_id);
    out << ',';
    csv::write_field(out, r->kpi_name);
    out << ',' << format_value(r->value) << '\n';
  }
}

void write_logs(std::ostream& out, const std::vector<LogRecord>& logs) {
  out << kLogHeader << '\n';
  for (const auto& r : logs) {
    csv::write_field(out, r.log_id);
    out << ',' << r.timestamp << ',';
    csv::write_field(out, r.date);
    out << ',';
    csv::write_field(out, r.cmdb_id);
    out << ',';
    csv::write_field(out, r.message);
    out << '\n';
  }
}

void write_spans(std::ostream& out, const std::vector<SpanRecord>& spans) {
  out << kTraceHeader << '\n';
  for (const auto& r : spans) {
    out << r.timestamp << ',';
    csv::write_field(out, r.cmdb_id);
    out << ',';
    csv::write_field(out, r.parent_span);
    out << ',';
    csv::write_field(out, r.span_id);
    out << ',';
    csv::write_field(out, r.trace_id);
    out << ',' << r.duration << ',';
    csv::write_field(out, r.type);
    out << ',' << r.status_code << ',';
    csv::write_field(out, r.operation_name);
    out << '\n';
  }
}

void write_cases(std::ostream& out, const std::vector<CaseRecord>& cases) {
  out << kCasesHeader << '\n';
  for (const auto& c : cases) {
    csv::write_field(out, c.case_id);
    out << ',';
    csv::write_field(out, c.fault_type);
    out << ',';
    csv::write_field(out, c.root_cause);
    out << ',';
    csv::write_field(out, c.service);
    out << ',' << c.start << ',' << c.end << '\n';
  }
}

void write_labels(std::ostream& out, const std::vector<TimestampLabel>& labels) {
  out << kLabelsHeader << '\n';
  for (const auto& l : labels) out << l.timestamp << ',' << (l.anomalous ? 1 : 0) << '\n';
}

nlohmann::json dataset_meta(const TelemetryBatch& batch) {
  return {{"format", "servo-dataset"},
          {"version", kDatasetVersion},
          {"start", batch.start},
          {"end", batch.end},
          {"step", batch.step},
          {"container_kpis", batch.container_kpis},
          {"service_kpis", batch.service_kpis}};
}

std::map<std::string, std::vector<const MetricRecord*>> metrics_by_kpi(
    const TelemetryBatch& batch) {
  std::map<std::string, std::vector<const MetricRecord*>> out;
  for (const auto& k : batch.container_kpis) out[k];
  for (const auto& k : batch.service_kpis) out[k];
  for (const auto& m : batch.metrics) out[m.kpi_name].push_back(&m);
  return out;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

// Reads a CSV file, checks its header, and hands each data row to `on_row`
// together with its line number. Conversion failures become RowError.
template <typename OnRow>
void read_table(const fs::path& path, std::string_view header, std::size_t columns,
                OnRow&& on_row) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  csv::Reader reader(in);
  std::vector<std::string> fields;
  long line = 0;
  try {
    if (!reader.next(fields, line))
      throw Error(ErrorCode::SchemaMismatch, path.string() + ": empty file, expected header");
    std::string joined;
    for (std::size_t i = 0; i < fields.size(); ++i) joined += (i ? "," : "") + fields[i];
    if (joined != header)
      throw Error(ErrorCode::SchemaMismatch,
                  path.string() + ": header '" + joined + "' does not match '" +
                      std::string(header) + "'");
    while (reader.next(fields, line)) {
      if (fields.size() != columns)
        throw Error(ErrorCode::RowError, path.string() + ":" + std::to_string(line) + ": expected " +
                                             std::to_string(columns) + " fields, got " +
                                             std::to_string(fields.size()));
      try {
        on_row(fields);
      } catch (const Error& e) {
        throw Error(ErrorCode::RowError,
                    path.string() + ":" + std::to_string(line) + ": " + e.what());
      }
    }
  } catch (const std::runtime_error& e) {
    if (dynamic_cast<const Error*>(&e)) throw;
    throw Error(ErrorCode::RowError, path.string() + ":" + std::to_string(line) + ": " + e.what());
  }
}

std::int64_t parse_int(const std::string& text, const char* field) {
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
    throw Error(ErrorCode::RowError, std::string("field '") + field + "' is not an integer: '" +
                                         text + "'");
  return value;
}

double parse_double(const std::string& text, const char* field) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
    throw Error(ErrorCode::RowError, std::string("field '") + field + "' is not numeric: '" +
                                         text + "'");
  return value;
}

}  // namespace

std::string_view to_string(Modality modality) noexcept {
  switch (modality) {
    case Modality::Metrics: return "metrics";
    case Modality::Logs: return "logs";
    case Modality::Traces: return "traces";
  }
  return "metrics";
}

Modality parse_modality(std::string_view text) {
  if (text == "metrics") return Modality::Metrics;
  if (text == "logs") return Modality::Logs;
  if (text == "traces") return Modality::Traces;
  throw Error(ErrorCode::ParseError, "unknown modality '" + std::string(text) + "'");
}

std::set<Modality> parse_modalities(std::string_view text) {
  std::set<Modality> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto comma = text.find(',', pos);
    auto part = text.substr(pos, comma == std::string_view::npos ? text.npos : comma - pos);
    if (!part.empty()) out.insert(parse_modality(part));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  if (out.empty()) throw Error(ErrorCode::ParseError, "empty modality list");
  return out;
}

void canonicalize(TelemetryBatch& batch) {
  std::sort(batch.metrics.begin(), batch.metrics.end(), [](const auto& a, const auto& b) {
    return std::tie(a.timestamp, a.cmdb_id, a.kpi_name) <
           std::tie(b.timestamp, b.cmdb_id, b.kpi_name);
  });
  std::sort(batch.logs.begin(), batch.logs.end(), [](const auto& a, const auto& b) {
    return std::tie(a.timestamp, a.cmdb_id, a.log_id) < std::tie(b.timestamp, b.cmdb_id, b.log_id);
  });
  std::sort(batch.spans.begin(), batch.spans.end(), [](const auto& a, const auto& b) {
    return std::tie(a.timestamp, a.cmdb_id, a.trace_id, a.span_id) <
           std::tie(b.timestamp, b.cmdb_id, b.trace_id, b.span_id);
  });
}

std::vector<std::string> validate(const TelemetryBatch& batch) {
  std::vector<std::string> violations;
  if (batch.start >= batch.end) violations.push_back("window: start must be < end");
  if (batch.step < 1) violations.push_back("window: step must be >= 1");
  auto in_window = [&](std::int64_t t) { return batch.start <= t && t < batch.end; };
  std::set<std::string> kpis(batch.container_kpis.begin(), batch.container_kpis.end());
  kpis.insert(batch.service_kpis.begin(), batch.service_kpis.end());
  for (const auto& m : batch.metrics) {
    if (!in_window(m.timestamp))
      violations.push_back("metric timestamp " + std::to_string(m.timestamp) + " outside window");
    if (!kpis.count(m.kpi_name)) violations.push_back("metric kpi_name not in catalog: " + m.kpi_name);
  }
  for (const auto& l : batch.logs) {
    if (!in_window(l.timestamp))
      violations.push_back("log timestamp " + std::to_string(l.timestamp) + " outside window");
    if (l.date != format_utc_date(l.timestamp))
      violations.push_back("log " + l.log_id + " date does not match timestamp");
  }
  std::map<std::string, std::pair<int, std::set<std::string>>> traces;
  for (const auto& s : batch.spans) {
    if (!in_window(s.timestamp))
      violations.push_back("span timestamp " + std::to_string(s.timestamp) + " outside window");
    auto& [roots, ids] = traces[s.trace_id];
    if (s.parent_span.empty()) ++roots;
    if (!ids.insert(s.span_id).second)
      violations.push_back("duplicate span_id " + s.span_id + " in trace " + s.trace_id);
  }
  for (const auto& [trace, info] : traces)
    if (info.first != 1)
      violations.push_back("trace " + trace + " has " + std::to_string(info.first) + " roots");
  for (const auto& l : batch.ground_truth.labels)
    if (!in_window(l.timestamp))
      violations.push_back("label timestamp " + std::to_string(l.timestamp) + " outside window");
  return violations;
}

std::string format_utc_date(std::int64_t epoch_seconds) {
  const std::time_t t = static_cast<std::time_t>(epoch_seconds);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buffer[32];
  std::strftime(buffer, sizeof(buffer), "%Y-%m-%d %H:%M:%S", &tm);
  return buffer;
}

std::string format_value(double value) {
  char buffer[64];
  auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, ptr);
}

void export_csv(const TelemetryBatch& batch, const fs::path& directory) {
  std::error_code ec;
  for (const char* sub : {"metric/container", "metric/service", "log", "trace", "groundtruth"}) {
    fs::create_directories(directory / sub, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create " + (directory / sub).string());
  }
  write_file(directory / "dataset.json", dataset_meta(batch).dump(2) + "\n");

  auto by_kpi = metrics_by_kpi(batch);
  auto write_group = [&](const std::vector<std::string>& names, const char* sub) {
    for (const auto& name : names) {
      std::ostringstream out;
      write_metric_rows(out, by_kpi[name]);
      write_file(directory / sub / (name + ".csv"), out.str());
    }
  };
  write_group(batch.container_kpis, "metric/container");
  write_group(batch.service_kpis, "metric/service");

  std::ostringstream logs, spans, cases, labels;
  write_logs(logs, batch.logs);
  write_spans(spans, batch.spans);
  write_cases(cases, batch.ground_truth.cases);
  write_labels(labels, batch.ground_truth.labels);
  write_file(directory / "log" / "log.csv", logs.str());
  write_file(directory / "trace" / "trace.csv", spans.str());
  write_file(directory / "groundtruth" / "cases.csv", cases.str());
  write_file(directory / "groundtruth" / "labels.csv", labels.str());
}

TelemetryBatch import_csv(const fs::path& directory) {
  TelemetryBatch batch;
  {
    std::ifstream in(directory / "dataset.json");
    if (!in) throw Error(ErrorCode::IoError, "missing " + (directory / "dataset.json").string());
    try {
      const auto meta = nlohmann::json::parse(in);
      if (meta.at("format") != "servo-dataset" || meta.at("version") != kDatasetVersion)
        throw Error(ErrorCode::SchemaMismatch, "unsupported dataset format/version");
      batch.start = meta.at("start").get<std::int64_t>();
      batch.end = meta.at("end").get<std::int64_t>();
      batch.step = meta.at("step").get<std::int64_t>();
      batch.container_kpis = meta.at("container_kpis").get<std::vector<std::string>>();
      batch.service_kpis = meta.at("service_kpis").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::SchemaMismatch, std::string("dataset.json: ") + e.what());
    }
  }

  std::set<std::string> kpis(batch.container_kpis.begin(), batch.container_kpis.end());
  kpis.insert(batch.service_kpis.begin(), batch.service_kpis.end());
  auto read_group = [&](const std::vector<std::string>& names, const char* sub) {
    for (const auto& name : names) {
      read_table(directory / sub / (name + ".csv"), kMetricHeader, 4,
                 [&](const std::vector<std::string>& f) {
                   if (f[2] != name)
                     throw Error(ErrorCode::RowError, "kpi_name '" + f[2] + "' in file for " + name);
                   batch.metrics.push_back(
                       {parse_int(f[0], "timestamp"), f[1], f[2], parse_double(f[3], "value")});
                 });
    }
  };
  read_group(batch.container_kpis, "metric/container");
  read_group(batch.service_kpis, "metric/service");

  read_table(directory / "log" / "log.csv", kLogHeader, 5, [&](const std::vector<std::string>& f) {
    LogRecord r{f[0], parse_int(f[1], "timestamp"), f[2], f[3], f[4]};
    if (r.date != format_utc_date(r.timestamp))
      throw Error(ErrorCode::RowError, "date '" + r.date + "' does not match timestamp");
    batch.logs.push_back(std::move(r));
  });
  read_table(directory / "trace" / "trace.csv", kTraceHeader, 9,
             [&](const std::vector<std::string>& f) {
               batch.spans.push_back({parse_int(f[0], "timestamp"), f[1], f[2], f[3], f[4],
                                      parse_int(f[5], "duration"), f[6],
                                      static_cast<int>(parse_int(f[7], "status_code")), f[8]});
             });
  read_table(directory / "groundtruth" / "cases.csv", kCasesHeader, 6,
             [&](const std::vector<std::string>& f) {
               batch.ground_truth.cases.push_back(
                   {f[0], f[1], f[2], f[3], parse_int(f[4], "start"), parse_int(f[5], "end")});
             });
  read_table(directory / "groundtruth" / "labels.csv", kLabelsHeader, 2,
             [&](const std::vector<std::string>& f) {
               const auto label = parse_int(f[1], "label");
               if (label != 0 && label != 1)
                 throw Error(ErrorCode::RowError, "label must be 0 or 1");
               batch.ground_truth.labels.push_back({parse_int(f[0], "timestamp"), label == 1});
             });
  canonicalize(batch);
  return batch;
}

TelemetryBatch slice(const TelemetryBatch& batch, const DatasetWindow& window) {
  if (window.start >= window.end || window.step < 1)
    throw Error(ErrorCode::WindowOutOfRange, "window must satisfy start < end and step >= 1");
  if (window.start < batch.start || window.end > batch.end)
    throw Error(ErrorCode::WindowOutOfRange,
                "window [" + std::to_string(window.start) + ", " + std::to_string(window.end) +
                    ") not inside batch [" + std::to_string(batch.start) + ", " +
                    std::to_string(batch.end) + ")");

  TelemetryBatch out;
  out.start = window.start;
  out.end = window.end;
  out.step = window.step;
  out.container_kpis = batch.container_kpis;
  out.service_kpis = batch.service_kpis;
  auto in_window = [&](std::int64_t t) { return window.start <= t && t < window.end; };
  auto bucket = [&](std::int64_t t) { return (t - window.start) / window.step; };

  if (window.modalities.count(Modality::Metrics)) {
    // Latest sample per (series, bucket); input is time-ordered so the last
    // write wins.
    std::map<std::tuple<std::string, std::string, std::int64_t>, const MetricRecord*> latest;
    for (const auto& m : batch.metrics) {
      if (!in_window(m.timestamp)) continue;
      auto& slot = latest[{m.cmdb_id, m.kpi_name, bucket(m.timestamp)}];
      if (slot == nullptr || slot->timestamp <= m.timestamp) slot = &m;
    }
    out.metrics.reserve(latest.size());
    for (const auto& [key, m] : latest) out.metrics.push_back(*m);
  }
  if (window.modalities.count(Modality::Logs))
    for (const auto& l : batch.logs)
      if (in_window(l.timestamp)) out.logs.push_back(l);
  if (window.modalities.count(Modality::Traces))
    for (const auto& s : batch.spans)
      if (in_window(s.timestamp)) out.spans.push_back(s);

  std::map<std::int64_t, TimestampLabel> labels;
  for (const auto& l : batch.ground_truth.labels) {
    if (!in_window(l.timestamp)) continue;
    auto [it, inserted] = labels.try_emplace(bucket(l.timestamp), l);
    if (!inserted && it->second.timestamp <= l.timestamp) it->second = l;
  }
  for (const auto& [b, l] : labels) out.ground_truth.labels.push_back(l);
  for (const auto& c : batch.ground_truth.cases)
    if (c.start < window.end && c.end > window.start) out.ground_truth.cases.push_back(c);

  canonicalize(out);
  return out;
}

std::string content_hash(const TelemetryBatch& batch) {
  std::ostringstream out;
  out << dataset_meta(batch).dump() << '\n';
  for (const auto& [name, rows] : metrics_by_kpi(batch)) {
    out << "# " << name << '\n';
    write_metric_rows(out, rows);
  }
  write_logs(out, batch.logs);
  write_spans(out, batch.spans);
  write_cases(out, batch.ground_truth.cases);
  write_labels(out, batch.ground_truth.labels);
  return sha256_hex(out.str());
}

}  // namespace servo
