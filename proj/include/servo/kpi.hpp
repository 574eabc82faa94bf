// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "servo/rng.hpp"

namespace servo {

enum class KpiLevel { Container, Service };

struct KpiSpec {
  std::string name;
  KpiLevel level = KpiLevel::Container;
  double mean = 0.0;
  double stddev = 0.0;
  std::string unit;
  double min_value = 0.0;
  double max_value = std::numeric_limits<double>::infinity();
};

// 17 container-level and 10 service-level KPIs with their baseline model.
class KpiCatalog {
 public:
  static constexpr std::size_t kContainerCount = 17;
  static constexpr std::size_t kServiceCount = 10;

  // Throws ValidationError unless there are exactly 17 + 10 uniquely named
  // entries.
  explicit KpiCatalog(std::vector<KpiSpec> specs);

  static const KpiCatalog& standard();

  const std::vector<KpiSpec>& container_kpis() const noexcept { return container_; }
  const std::vector<KpiSpec>& service_kpis() const noexcept { return service_; }
  std::vector<std::string> container_names() const;
  std::vector<std::string> service_names() const;

  const KpiSpec* find(std::string_view name) const noexcept;
  // Throws UnknownKpi.
  const KpiSpec& at(std::string_view name) const;

 private:
  std::vector<KpiSpec> container_;
  std::vector<KpiSpec> service_;
};

double clamp_to_range(const KpiSpec& spec, double value) noexcept;

// Baseline value of `kpi` for `entity` at `tick`: mean + N(0, stddev),
// clamped to the KPI's physical range. Each (seed, entity, kpi, tick)
// draws from its own sub-stream so values are independent of evaluation
// order. Throws UnknownKpi.
double baseline_sample(const KpiCatalog& catalog, std::string_view kpi, std::string_view entity,
                       std::int64_t tick, std::uint64_t seed);

}  // namespace servo
