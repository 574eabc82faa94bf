// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "servo/sim_clock.hpp"
#include "servo/topology.hpp"

namespace servo {

enum class FaultType { CpuStress, MemoryStress, PodFailure, NetworkDelay, NetworkLoss };

inline constexpr FaultType kAllFaultTypes[] = {FaultType::CpuStress, FaultType::MemoryStress,
                                               FaultType::PodFailure, FaultType::NetworkDelay,
                                               FaultType::NetworkLoss};

std::string_view to_string(FaultType type) noexcept;
// Throws ParseError for unknown names. Names reserved for future fault
// families (HttpAbort, HttpDelay, IoDelay, IoFault, ...) are rejected with a
// distinct "reserved" message.
FaultType parse_fault_type(std::string_view name);

struct CpuStressParams {
  double load_pct = 0.0;
  bool operator==(const CpuStressParams&) const = default;
};
struct MemoryStressParams {
  double bytes = 0.0;
  bool operator==(const MemoryStressParams&) const = default;
};
struct PodFailureParams {
  bool operator==(const PodFailureParams&) const = default;
};
struct NetworkDelayParams {
  double latency_ms = 0.0;
  double jitter_ms = 0.0;
  bool operator==(const NetworkDelayParams&) const = default;
};
struct NetworkLossParams {
  double loss_pct = 0.0;
  bool operator==(const NetworkLossParams&) const = default;
};

using FaultBehavior = std::variant<CpuStressParams, MemoryStressParams, PodFailureParams,
                                   NetworkDelayParams, NetworkLossParams>;

FaultType behavior_type(const FaultBehavior& behavior) noexcept;

// Builds behaviour parameters from a flat name -> number map. Throws
// ParseError when a required parameter is missing or an unknown one is given.
FaultBehavior make_behavior(FaultType type, const std::map<std::string, double>& params);
std::map<std::string, double> behavior_params(const FaultBehavior& behavior);

struct FaultDefinition {
  std::string id;
  std::string target;  // pod cmdb_id or service name
  std::int64_t start_time = 0;
  std::int64_t duration = 0;
  std::map<FaultType, FaultBehavior> behaviors;

  std::int64_t end_time() const noexcept { return start_time + duration; }
  bool active_at(std::int64_t t) const noexcept { return start_time <= t && t < end_time(); }

  bool operator==(const FaultDefinition&) const = default;
};

// Violations as data; empty means valid.
std::vector<std::string> validate_fault(const FaultDefinition& fault,
                                        const ServiceTopology& topology);

// Pods a target expands to: the pod itself, or every replica of a service.
std::vector<std::string> resolve_target_pods(const FaultDefinition& fault,
                                             const ServiceTopology& topology);
std::string resolve_target_service(const FaultDefinition& fault,
                                   const ServiceTopology& topology);

enum class InjectionMode { Immediate, Scheduled };
std::string_view to_string(InjectionMode mode) noexcept;
InjectionMode parse_injection_mode(std::string_view text);

struct CalendarEntry {
  FaultDefinition fault;
  InjectionMode mode = InjectionMode::Scheduled;

  bool operator==(const CalendarEntry&) const = default;
};

// Schedule of faults, listed by (start_time, id).
class FaultCalendar {
 public:
  FaultCalendar() = default;
  // Restores a calendar from stored entries. Throws DuplicateId.
  explicit FaultCalendar(std::vector<CalendarEntry> entries);

  // Immediate entries start at `now`. An empty id is replaced by the
  // smallest free "fault-<n>". Throws DuplicateId.
  std::string schedule(FaultDefinition fault, InjectionMode mode, std::int64_t now);
  // Throws UnknownFault, or AlreadyStarted when now >= start_time.
  void cancel(std::string_view id, std::int64_t now);

  const std::vector<CalendarEntry>& entries() const noexcept { return entries_; }
  const CalendarEntry* find(std::string_view id) const noexcept;
  bool empty() const noexcept { return entries_.empty(); }
  std::size_t size() const noexcept { return entries_.size(); }

  bool operator==(const FaultCalendar&) const = default;

 private:
  std::vector<CalendarEntry> entries_;
};

// Thread-safe registry wrapper used by API handlers; simulations read an
// immutable snapshot.
class SharedCalendar {
 public:
  SharedCalendar() = default;
  explicit SharedCalendar(FaultCalendar initial) : calendar_(std::move(initial)) {}

  std::string schedule(FaultDefinition fault, InjectionMode mode, std::int64_t now);
  void cancel(std::string_view id, std::int64_t now);
  FaultCalendar snapshot() const;

 private:
  mutable std::mutex mutex_;
  FaultCalendar calendar_;
};

// Faults with start_time <= t < start_time + duration.
std::vector<FaultDefinition> active_faults(const FaultCalendar& calendar, std::int64_t t);

struct ModalityWeights {
  double metrics = 0.0;
  double logs = 0.0;
  double traces = 0.0;
  bool operator==(const ModalityWeights&) const = default;
};

class ManifestationMatrix {
 public:
  ManifestationMatrix() = default;
  // Throws ValidationError if a weight is outside [0, 1], a fault type has
  // all-zero weights, or a fault type is missing.
  explicit ManifestationMatrix(std::map<FaultType, ModalityWeights> weights);

  const ModalityWeights& at(FaultType type) const;
  const std::map<FaultType, ModalityWeights>& weights() const noexcept { return weights_; }

 private:
  std::map<FaultType, ModalityWeights> weights_;
};

// Stress -> metrics only; pod failure -> metrics + logs; network -> all.
ManifestationMatrix default_manifestation_matrix();
// YAML mapping FaultType -> {metrics, logs, traces}; unspecified types keep
// their defaults.
ManifestationMatrix load_manifestation_matrix(const std::string& document);

struct DelayEffect {
  double latency_ms = 0.0;
  double jitter_ms = 0.0;
  double log_probability = 0.0;
  bool operator==(const DelayEffect&) const = default;
};

struct LossEffect {
  double loss_probability = 0.0;
  double retry_log_probability = 0.0;
  bool operator==(const LossEffect&) const = default;
};

// Telemetry perturbation at one tick. Overlapping faults compose: KPI
// offsets and delays add, loss probabilities combine as independent events,
// pod sets unite.
struct Perturbation {
  std::map<std::pair<std::string, std::string>, double> kpi_offsets;  // (entity, kpi)
  std::set<std::string> down_pods;           // unreachable; traffic reroutes
  std::set<std::string> silent_metric_pods;  // emit no metric rows
  std::map<std::string, double> unreachable_log_probability;  // by down pod
  std::map<std::string, DelayEffect> service_delay;            // by service
  std::map<std::string, LossEffect> service_loss;              // by service

  bool empty() const noexcept;
  double offset(const std::string& entity, const std::string& kpi) const noexcept;
  void merge(const Perturbation& other);

  bool operator==(const Perturbation&) const = default;
};

// Modality-specific perturbation of one fault at tick t, scaled by the
// matrix weights. Empty when the fault is inactive at t.
Perturbation apply_effects(const FaultDefinition& fault, const ManifestationMatrix& matrix,
                           const ServiceTopology& topology, std::int64_t t);

struct CaseRecord {
  std::string case_id;
  std::string fault_type;  // behaviour names joined by '+'
  std::string root_cause;  // cmdb_id, or service name for service targets
  std::string service;
  std::int64_t start = 0;
  std::int64_t end = 0;
  bool operator==(const CaseRecord&) const = default;
};

struct TimestampLabel {
  std::int64_t timestamp = 0;
  bool anomalous = false;
  bool operator==(const TimestampLabel&) const = default;
};

struct GroundTruth {
  std::vector<TimestampLabel> labels;
  std::vector<CaseRecord> cases;
  bool operator==(const GroundTruth&) const = default;
};

GroundTruth ground_truth(const FaultCalendar& calendar, const SimClock& clock,
                         const ServiceTopology& topology);

struct PlannedFault {
  FaultDefinition fault;
  InjectionMode mode = InjectionMode::Scheduled;
};

// Fault plan YAML (docs/fault_plan.md). Throws ParseError.
std::vector<PlannedFault> parse_fault_plan(const std::string& document);
std::vector<PlannedFault> load_fault_plan_file(const std::string& path);

// Validates every entry and schedules the plan into a fresh calendar.
// Throws InvalidCalendar (detail lists violations) or DuplicateId.
FaultCalendar build_calendar(const std::vector<PlannedFault>& plan,
                             const ServiceTopology& topology, std::int64_t now);

nlohmann::json to_json(const FaultDefinition& fault);
FaultDefinition fault_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const FaultCalendar& calendar);
FaultCalendar calendar_from_json(const nlohmann::json& doc);

}  // namespace servo
