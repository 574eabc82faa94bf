// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "servo/fault.hpp"
#include "servo/kpi.hpp"
#include "servo/rng.hpp"
#include "servo/sim_clock.hpp"
#include "servo/telemetry.hpp"
#include "servo/topology.hpp"

namespace servo {

struct WorkloadProfile {
  double arrival_rate = 1.0;                      // requests per second
  std::map<std::string, double> operation_mix;    // entry operation -> weight
  std::uint64_t seed = 0;

  bool operator==(const WorkloadProfile&) const = default;
};

std::vector<std::string> validate(const WorkloadProfile& profile);
WorkloadProfile default_workload_profile();
// YAML with keys arrival_rate, seed, operation_mix. Throws ParseError or
// ValidationError.
WorkloadProfile load_workload_profile(const std::string& document);

struct SimulationOptions {
  KpiCatalog catalog = KpiCatalog::standard();
  ManifestationMatrix matrix = default_manifestation_matrix();
  std::int64_t max_horizon = 7 * 86400;
  double latency_sigma = 0.25;  // log-space stddev of per-call jitter
};

// Log line templates. Error templates are the only ones faults introduce.
inline constexpr std::string_view kUnreachableTemplate = "pod unable to connect";
inline constexpr std::string_view kRetryTemplate = "retrying request";
inline constexpr std::string_view kSlowTemplate = "slow response";
inline constexpr std::string_view kFailedTemplate = "request failed";
bool is_error_log(std::string_view message) noexcept;

struct TraceLogEvent {
  std::string cmdb_id;
  std::string message;
};

struct GeneratedTrace {
  std::vector<SpanRecord> spans;     // depth-first order, root first
  std::vector<TraceLogEvent> logs;   // per-span service logs and fault logs
};

// One request traversing the call graph depth-first from the entry service.
// Every edge crossed yields a child span on a uniformly chosen live pod of
// the callee; parent duration >= sum of child durations.
GeneratedTrace generate_trace(const ServiceTopology& topology, std::string_view entry_operation,
                              std::int64_t timestamp, const Perturbation& effects,
                              RngStream& rng, double latency_sigma = 0.25);

// Throws ValidationError (bad clock/profile), InvalidCalendar or
// HorizonOverflow. Output is a pure function of the inputs.
TelemetryBatch run_simulation(const ServiceTopology& topology, const WorkloadProfile& profile,
                              const FaultCalendar& calendar, const SimClock& clock,
                              const SimulationOptions& options = {});

// Expected metric row count for a fault-free run.
std::int64_t expected_metric_rows(const ServiceTopology& topology, const SimClock& clock,
                                  const KpiCatalog& catalog = KpiCatalog::standard());

}  // namespace servo
