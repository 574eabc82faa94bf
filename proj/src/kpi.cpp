// SPDX-License-Identifier: Apache-2.0

#include "servo/kpi.hpp"

#include <algorithm>
#include <set>

#include "servo/error.hpp"

namespace servo {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMiB = 1024.0 * 1024.0;

std::vector<KpiSpec> standard_specs() {
  using L = KpiLevel;
  return {
      {"cpu_usage_pct", L::Container, 20.0, 3.0, "percent", 0.0, 100.0},
      {"cpu_throttled_s", L::Container, 0.02, 0.01, "seconds", 0.0, kInf},
      {"mem_usage_bytes", L::Container, 200.0 * kMiB, 8.0 * kMiB, "bytes", 0.0, kInf},
      {"mem_working_set", L::Container, 150.0 * kMiB, 6.0 * kMiB, "bytes", 0.0, kInf},
      {"mem_fail_cnt", L::Container, 0.0, 0.0, "count", 0.0, kInf},
      {"net_tx_bytes", L::Container, 40000.0, 4000.0, "bytes/s", 0.0, kInf},
      {"net_rx_bytes", L::Container, 38000.0, 4000.0, "bytes/s", 0.0, kInf},
      {"net_tx_packets", L::Container, 120.0, 12.0, "packets/s", 0.0, kInf},
      {"net_rx_packets", L::Container, 115.0, 12.0, "packets/s", 0.0, kInf},
      {"net_drop_tx", L::Container, 0.0, 0.0, "packets/s", 0.0, kInf},
      {"net_drop_rx", L::Container, 0.0, 0.0, "packets/s", 0.0, kInf},
      {"fs_reads", L::Container, 5.0, 1.0, "ops/s", 0.0, kInf},
      {"fs_writes", L::Container, 3.0, 1.0, "ops/s", 0.0, kInf},
      {"fs_read_bytes", L::Container, 20000.0, 3000.0, "bytes/s", 0.0, kInf},
      {"fs_write_bytes", L::Container, 12000.0, 2000.0, "bytes/s", 0.0, kInf},
      {"threads", L::Container, 30.0, 1.0, "count", 0.0, kInf},
      {"restarts", L::Container, 0.0, 0.0, "count", 0.0, kInf},
      {"request_rate", L::Service, 10.0, 1.0, "req/s", 0.0, kInf},
      {"error_rate", L::Service, 0.0, 0.0, "ratio", 0.0, 1.0},
      {"p50_latency", L::Service, 5.0, 0.5, "ms", 0.0, kInf},
      {"p90_latency", L::Service, 9.0, 1.0, "ms", 0.0, kInf},
      {"p99_latency", L::Service, 15.0, 2.0, "ms", 0.0, kInf},
      {"request_size", L::Service, 512.0, 40.0, "bytes", 0.0, kInf},
      {"response_size", L::Service, 2048.0, 150.0, "bytes", 0.0, kInf},
      {"success_rate", L::Service, 1.0, 0.0, "ratio", 0.0, 1.0},
      {"active_connections", L::Service, 20.0, 2.0, "count", 0.0, kInf},
      {"retry_rate", L::Service, 0.0, 0.0, "ratio", 0.0, 1.0},
  };
}

}  // namespace

KpiCatalog::KpiCatalog(std::vector<KpiSpec> specs) {
  std::set<std::string> names;
  for (auto& s : specs) {
    if (!names.insert(s.name).second)
      throw Error(ErrorCode::ValidationError, "duplicate KPI name " + s.name);
    if (s.stddev < 0.0 || s.min_value > s.max_value)
      throw Error(ErrorCode::ValidationError, "invalid baseline for KPI " + s.name);
    (s.level == KpiLevel::Container ? container_ : service_).push_back(std::move(s));
  }
  if (container_.size() != kContainerCount || service_.size() != kServiceCount)
    throw Error(ErrorCode::ValidationError,
                "KPI catalog needs 17 container-level and 10 service-level KPIs, got " +
                    std::to_string(container_.size()) + " and " + std::to_string(service_.size()));
}

const KpiCatalog& KpiCatalog::standard() {
  static const KpiCatalog catalog(standard_specs());
  return catalog;
}

std::vector<std::string> KpiCatalog::container_names() const {
  std::vector<std::string> out;
  for (const auto& k : container_) out.push_back(k.name);
  return out;
}

std::vector<std::string> KpiCatalog::service_names() const {
  std::vector<std::string> out;
  for (const auto& k : service_) out.push_back(k.name);
  return out;
}

const KpiSpec* KpiCatalog::find(std::string_view name) const noexcept {
  for (const auto* group : {&container_, &service_})
    for (const auto& k : *group)
      if (k.name == name) return &k;
  return nullptr;
}

const KpiSpec& KpiCatalog::at(std::string_view name) const {
  if (const auto* spec = find(name)) return *spec;
  throw Error(ErrorCode::UnknownKpi, "unknown KPI '" + std::string(name) + "'");
}

double clamp_to_range(const KpiSpec& spec, double value) noexcept {
  return std::clamp(value, spec.min_value, spec.max_value);
}

double baseline_sample(const KpiCatalog& catalog, std::string_view kpi, std::string_view entity,
                       std::int64_t tick, std::uint64_t seed) {
  const KpiSpec& spec = catalog.at(kpi);
  if (spec.stddev == 0.0) return clamp_to_range(spec, spec.mean);
  auto stream = RngStream::derive(seed, std::string_view("kpi"), entity, kpi, tick);
  return clamp_to_range(spec, stream.normal(spec.mean, spec.stddev));
}

}  // namespace servo
