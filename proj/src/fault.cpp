// SPDX-License-Identifier: Apache-2.0

#include "servo/fault.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "servo/error.hpp"

namespace servo {

namespace {

constexpr std::string_view kReservedFaultTypes[] = {"HttpAbort", "HttpDelay", "HttpPatch",
                                                    "HttpReplace", "IoDelay", "IoFault",
                                                    "IoAttrOverride", "IoMistake"};

const std::vector<std::string_view>& param_names(FaultType type) {
  static const std::map<FaultType, std::vector<std::string_view>> names = {
      {FaultType::CpuStress, {"load_pct"}},
      {FaultType::MemoryStress, {"bytes"}},
      {FaultType::PodFailure, {}},
      {FaultType::NetworkDelay, {"latency_ms", "jitter_ms"}},
      {FaultType::NetworkLoss, {"loss_pct"}},
  };
  return names.at(type);
}

bool is_zero(double v) noexcept { return v == 0.0; }

void add_offset(Perturbation& p, const std::string& entity, const char* kpi, double delta) {
  if (is_zero(delta)) return;
  p.kpi_offsets[{entity, kpi}] += delta;
}

}  // namespace

std::string_view to_string(FaultType type) noexcept {
  switch (type) {
    case FaultType::CpuStress: return "CpuStress";
    case FaultType::MemoryStress: return "MemoryStress";
    case FaultType::PodFailure: return "PodFailure";
    case FaultType::NetworkDelay: return "NetworkDelay";
    case FaultType::NetworkLoss: return "NetworkLoss";
  }
  return "CpuStress";
}

FaultType parse_fault_type(std::string_view name) {
  for (auto type : kAllFaultTypes)
    if (to_string(type) == name) return type;
  for (auto reserved : kReservedFaultTypes)
    if (reserved == name)
      throw Error(ErrorCode::ParseError,
                  "fault type '" + std::string(name) + "' is reserved but not supported");
  throw Error(ErrorCode::ParseError, "unknown fault type '" + std::string(name) + "'");
}

FaultType behavior_type(const FaultBehavior& behavior) noexcept {
  return kAllFaultTypes[behavior.index()];
}

FaultBehavior make_behavior(FaultType type, const std::map<std::string, double>& params) {
  const auto& names = param_names(type);
  for (const auto& [key, value] : params)
    if (std::find(names.begin(), names.end(), key) == names.end())
      throw Error(ErrorCode::ParseError, "unknown parameter '" + key + "' for " +
                                             std::string(to_string(type)));
  auto get = [&](std::string_view key, std::optional<double> fallback = {}) {
    auto it = params.find(std::string(key));
    if (it != params.end()) return it->second;
    if (fallback) return *fallback;
    throw Error(ErrorCode::ParseError, "missing parameter '" + std::string(key) + "' for " +
                                           std::string(to_string(type)));
  };
  switch (type) {
    case FaultType::CpuStress: return CpuStressParams{get("load_pct")};
    case FaultType::MemoryStress: return MemoryStressParams{get("bytes")};
    case FaultType::PodFailure: return PodFailureParams{};
    case FaultType::NetworkDelay: return NetworkDelayParams{get("latency_ms"), get("jitter_ms", 0.0)};
    case FaultType::NetworkLoss: return NetworkLossParams{get("loss_pct")};
  }
  throw Error(ErrorCode::ParseError, "unsupported fault type");
}

std::map<std::string, double> behavior_params(const FaultBehavior& behavior) {
  return std::visit(
      [](const auto& p) -> std::map<std::string, double> {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, CpuStressParams>) return {{"load_pct", p.load_pct}};
        if constexpr (std::is_same_v<T, MemoryStressParams>) return {{"bytes", p.bytes}};
        if constexpr (std::is_same_v<T, PodFailureParams>) return {};
        if constexpr (std::is_same_v<T, NetworkDelayParams>)
          return {{"latency_ms", p.latency_ms}, {"jitter_ms", p.jitter_ms}};
        if constexpr (std::is_same_v<T, NetworkLossParams>) return {{"loss_pct", p.loss_pct}};
      },
      behavior);
}

std::vector<std::string> validate_fault(const FaultDefinition& fault,
                                        const ServiceTopology& topology) {
  std::vector<std::string> violations;
  if (fault.duration <= 0) violations.push_back("duration must be > 0");
  if (fault.behaviors.empty()) violations.push_back("behaviors must be non-empty");
  if (!topology.find_pod(fault.target) && !topology.has_service(fault.target))
    violations.push_back("unknown target '" + fault.target + "'");

  auto in_range = [&](const char* name, double v, double lo, double hi) {
    if (!(v >= lo && v <= hi)) violations.push_back(std::string(name) + " out of range");
  };
  for (const auto& [type, behavior] : fault.behaviors) {
    if (behavior_type(behavior) != type) {
      violations.push_back("behavior for " + std::string(to_string(type)) +
                           " carries parameters of " +
                           std::string(to_string(behavior_type(behavior))));
      continue;
    }
    std::visit(
        [&](const auto& p) {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, CpuStressParams>) in_range("load_pct", p.load_pct, 0, 100);
          if constexpr (std::is_same_v<T, MemoryStressParams>) {
            if (!(p.bytes > 0)) violations.push_back("bytes out of range");
          }
          if constexpr (std::is_same_v<T, NetworkDelayParams>) {
            if (!(p.latency_ms > 0)) violations.push_back("latency_ms out of range");
            if (!(p.jitter_ms >= 0)) violations.push_back("jitter_ms out of range");
          }
          if constexpr (std::is_same_v<T, NetworkLossParams>) in_range("loss_pct", p.loss_pct, 0, 100);
        },
        behavior);
  }
  return violations;
}

std::vector<std::string> resolve_target_pods(const FaultDefinition& fault,
                                             const ServiceTopology& topology) {
  if (topology.find_pod(fault.target)) return {fault.target};
  std::vector<std::string> out;
  if (topology.has_service(fault.target))
    for (const auto& p : pods_of(topology, fault.target)) out.push_back(p.cmdb_id);
  return out;
}

std::string resolve_target_service(const FaultDefinition& fault,
                                   const ServiceTopology& topology) {
  if (const auto* pod = topology.find_pod(fault.target)) return pod->service;
  return fault.target;
}

std::string_view to_string(InjectionMode mode) noexcept {
  return mode == InjectionMode::Immediate ? "immediate" : "scheduled";
}

InjectionMode parse_injection_mode(std::string_view text) {
  if (text == "immediate") return InjectionMode::Immediate;
  if (text == "scheduled") return InjectionMode::Scheduled;
  throw Error(ErrorCode::ParseError, "unknown injection mode '" + std::string(text) + "'");
}

FaultCalendar::FaultCalendar(std::vector<CalendarEntry> entries) {
  for (auto& e : entries) {
    if (find(e.fault.id))
      throw Error(ErrorCode::DuplicateId, "duplicate fault id '" + e.fault.id + "'");
    entries_.push_back(std::move(e));
  }
  std::stable_sort(entries_.begin(), entries_.end(), [](const auto& a, const auto& b) {
    return std::tie(a.fault.start_time, a.fault.id) < std::tie(b.fault.start_time, b.fault.id);
  });
}

const CalendarEntry* FaultCalendar::find(std::string_view id) const noexcept {
  auto it = std::find_if(entries_.begin(), entries_.end(),
                         [&](const auto& e) { return e.fault.id == id; });
  return it == entries_.end() ? nullptr : &*it;
}

std::string FaultCalendar::schedule(FaultDefinition fault, InjectionMode mode, std::int64_t now) {
  if (fault.id.empty()) {
    for (int n = 0;; ++n) {
      auto candidate = "fault-" + std::to_string(n);
      if (!find(candidate)) {
        fault.id = std::move(candidate);
        break;
      }
    }
  } else if (find(fault.id)) {
    throw Error(ErrorCode::DuplicateId, "duplicate fault id '" + fault.id + "'");
  }
  if (mode == InjectionMode::Immediate) fault.start_time = now;
  CalendarEntry entry{std::move(fault), mode};
  auto pos = std::upper_bound(entries_.begin(), entries_.end(), entry,
                              [](const auto& a, const auto& b) {
                                return std::tie(a.fault.start_time, a.fault.id) <
                                       std::tie(b.fault.start_time, b.fault.id);
                              });
  auto id = entry.fault.id;
  entries_.insert(pos, std::move(entry));
  return id;
}

void FaultCalendar::cancel(std::string_view id, std::int64_t now) {
  auto it = std::find_if(entries_.begin(), entries_.end(),
                         [&](const auto& e) { return e.fault.id == id; });
  if (it == entries_.end())
    throw Error(ErrorCode::UnknownFault, "unknown fault '" + std::string(id) + "'");
  if (now >= it->fault.start_time)
    throw Error(ErrorCode::AlreadyStarted,
                "fault '" + std::string(id) + "' already started at " +
                    std::to_string(it->fault.start_time));
  entries_.erase(it);
}

std::string SharedCalendar::schedule(FaultDefinition fault, InjectionMode mode, std::int64_t now) {
  std::lock_guard lock(mutex_);
  return calendar_.schedule(std::move(fault), mode, now);
}

void SharedCalendar::cancel(std::string_view id, std::int64_t now) {
  std::lock_guard lock(mutex_);
  calendar_.cancel(id, now);
}

FaultCalendar SharedCalendar::snapshot() const {
  std::lock_guard lock(mutex_);
  return calendar_;
}

std::vector<FaultDefinition> active_faults(const FaultCalendar& calendar, std::int64_t t) {
  std::vector<FaultDefinition> out;
  for (const auto& e : calendar.entries())
    if (e.fault.active_at(t)) out.push_back(e.fault);
  return out;
}

ManifestationMatrix::ManifestationMatrix(std::map<FaultType, ModalityWeights> weights)
    : weights_(std::move(weights)) {
  for (auto type : kAllFaultTypes) {
    auto it = weights_.find(type);
    if (it == weights_.end())
      throw Error(ErrorCode::ValidationError,
                  "manifestation matrix lacks " + std::string(to_string(type)));
    const auto& w = it->second;
    for (double v : {w.metrics, w.logs, w.traces})
      if (!(v >= 0.0 && v <= 1.0))
        throw Error(ErrorCode::ValidationError,
                    "manifestation weight out of [0,1] for " + std::string(to_string(type)));
    if (w.metrics == 0.0 && w.logs == 0.0 && w.traces == 0.0)
      throw Error(ErrorCode::ValidationError,
                  "fault type " + std::string(to_string(type)) + " manifests nowhere");
  }
}

const ModalityWeights& ManifestationMatrix::at(FaultType type) const {
  auto it = weights_.find(type);
  if (it == weights_.end())
    throw Error(ErrorCode::ValidationError,
                "manifestation matrix lacks " + std::string(to_string(type)));
  return it->second;
}

ManifestationMatrix default_manifestation_matrix() {
  return ManifestationMatrix({
      {FaultType::CpuStress, {1.0, 0.0, 0.0}},
      {FaultType::MemoryStress, {1.0, 0.0, 0.0}},
      {FaultType::PodFailure, {1.0, 1.0, 0.0}},
      {FaultType::NetworkDelay, {1.0, 1.0, 1.0}},
      {FaultType::NetworkLoss, {1.0, 1.0, 1.0}},
  });
}

ManifestationMatrix load_manifestation_matrix(const std::string& document) {
  auto weights = default_manifestation_matrix().weights();
  try {
    const auto root = YAML::Load(document);
    for (const auto& item : root) {
      const auto type = parse_fault_type(item.first.as<std::string>());
      auto& w = weights[type];
      if (item.second["metrics"]) w.metrics = item.second["metrics"].as<double>();
      if (item.second["logs"]) w.logs = item.second["logs"].as<double>();
      if (item.second["traces"]) w.traces = item.second["traces"].as<double>();
    }
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::ParseError, std::string("manifestation matrix: ") + e.what());
  }
  return ManifestationMatrix(std::move(weights));
}

bool Perturbation::empty() const noexcept {
  return kpi_offsets.empty() && down_pods.empty() && silent_metric_pods.empty() &&
         unreachable_log_probability.empty() && service_delay.empty() && service_loss.empty();
}

double Perturbation::offset(const std::string& entity, const std::string& kpi) const noexcept {
  auto it = kpi_offsets.find({entity, kpi});
  return it == kpi_offsets.end() ? 0.0 : it->second;
}

void Perturbation::merge(const Perturbation& other) {
  for (const auto& [key, v] : other.kpi_offsets) kpi_offsets[key] += v;
  down_pods.insert(other.down_pods.begin(), other.down_pods.end());
  silent_metric_pods.insert(other.silent_metric_pods.begin(), other.silent_metric_pods.end());
  for (const auto& [pod, p] : other.unreachable_log_probability) {
    auto& mine = unreachable_log_probability[pod];
    mine = std::max(mine, p);
  }
  for (const auto& [svc, d] : other.service_delay) {
    auto& mine = service_delay[svc];
    mine.latency_ms += d.latency_ms;
    mine.jitter_ms = std::hypot(mine.jitter_ms, d.jitter_ms);
    mine.log_probability = std::max(mine.log_probability, d.log_probability);
  }
  for (const auto& [svc, l] : other.service_loss) {
    auto& mine = service_loss[svc];
    mine.loss_probability = 1.0 - (1.0 - mine.loss_probability) * (1.0 - l.loss_probability);
    mine.retry_log_probability = std::max(mine.retry_log_probability, l.retry_log_probability);
  }
}

Perturbation apply_effects(const FaultDefinition& fault, const ManifestationMatrix& matrix,
                           const ServiceTopology& topology, std::int64_t t) {
  Perturbation out;
  if (!fault.active_at(t)) return out;

  const auto pods = resolve_target_pods(fault, topology);
  const auto service = resolve_target_service(fault, topology);

  for (const auto& [type, behavior] : fault.behaviors) {
    const auto& w = matrix.at(type);
    std::visit(
        [&](const auto& p) {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, CpuStressParams>) {
            const double load = p.load_pct * w.metrics;
            for (const auto& pod : pods) {
              add_offset(out, pod, "cpu_usage_pct", load);
              add_offset(out, pod, "cpu_throttled_s", load / 100.0 * 0.5);
            }
            add_offset(out, service, "p50_latency", load * 0.05);
            add_offset(out, service, "p90_latency", load * 0.10);
            add_offset(out, service, "p99_latency", load * 0.20);
          }
          if constexpr (std::is_same_v<T, MemoryStressParams>) {
            const double bytes = p.bytes * w.metrics;
            for (const auto& pod : pods) {
              add_offset(out, pod, "mem_usage_bytes", bytes);
              add_offset(out, pod, "mem_working_set", bytes);
            }
          }
          if constexpr (std::is_same_v<T, PodFailureParams>) {
            for (const auto& pod : pods) {
              out.down_pods.insert(pod);
              if (w.metrics > 0.0) out.silent_metric_pods.insert(pod);
              if (w.logs > 0.0) out.unreachable_log_probability[pod] = w.logs;
            }
            // Surviving replicas absorb the rerouted traffic.
            for (const auto& sibling : pods_of(topology, service)) {
              if (std::find(pods.begin(), pods.end(), sibling.cmdb_id) != pods.end()) continue;
              add_offset(out, sibling.cmdb_id, "cpu_usage_pct", 5.0 * w.metrics);
            }
            add_offset(out, service, "active_connections", -5.0 * w.metrics);
          }
          if constexpr (std::is_same_v<T, NetworkDelayParams>) {
            if (w.traces > 0.0 || w.logs > 0.0) {
              out.service_delay[service] = {p.latency_ms * w.traces, p.jitter_ms * w.traces,
                                            0.2 * w.logs};
            }
            add_offset(out, service, "p50_latency", p.latency_ms * 0.5 * w.metrics);
            add_offset(out, service, "p90_latency", p.latency_ms * 0.9 * w.metrics);
            add_offset(out, service, "p99_latency", p.latency_ms * w.metrics);
          }
          if constexpr (std::is_same_v<T, NetworkLossParams>) {
            const double ratio = p.loss_pct / 100.0;
            if (ratio > 0.0 && (w.traces > 0.0 || w.logs > 0.0))
              out.service_loss[service] = {ratio * w.traces, w.logs};
            add_offset(out, service, "error_rate", ratio * w.metrics);
            add_offset(out, service, "success_rate", -ratio * w.metrics);
            add_offset(out, service, "retry_rate", ratio * w.metrics);
            for (const auto& pod : pods) {
              add_offset(out, pod, "net_drop_tx", p.loss_pct * 1.2 * w.metrics);
              add_offset(out, pod, "net_drop_rx", p.loss_pct * 1.1 * w.metrics);
            }
          }
        },
        behavior);
  }
  return out;
}

GroundTruth ground_truth(const FaultCalendar& calendar, const SimClock& clock,
                         const ServiceTopology& topology) {
  GroundTruth truth;
  const auto ticks = clock.tick_count();
  truth.labels.reserve(static_cast<std::size_t>(ticks));
  for (std::int64_t i = 0; i < ticks; ++i) {
    const auto t = clock.tick(i);
    const bool anomalous = std::any_of(calendar.entries().begin(), calendar.entries().end(),
                                       [&](const auto& e) { return e.fault.active_at(t); });
    truth.labels.push_back({t, anomalous});
  }
  for (const auto& e : calendar.entries()) {
    if (e.fault.start_time >= clock.end() || e.fault.end_time() <= clock.start) continue;
    std::string types;
    for (const auto& [type, behavior] : e.fault.behaviors) {
      if (!types.empty()) types += '+';
      types += to_string(type);
    }
    truth.cases.push_back({e.fault.id, types, e.fault.target,
                           resolve_target_service(e.fault, topology), e.fault.start_time,
                           e.fault.end_time()});
  }
  return truth;
}

std::vector<PlannedFault> parse_fault_plan(const std::string& document) {
  YAML::Node root;
  try {
    root = YAML::Load(document);
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::ParseError, std::string("fault plan: ") + e.what());
  }
  if (!root["faults"] || !root["faults"].IsSequence())
    throw Error(ErrorCode::ParseError, "fault plan: 'faults' must be a sequence");
  std::vector<PlannedFault> plan;
  int index = 0;
  for (const auto& node : root["faults"]) {
    const std::string where = "fault plan: faults[" + std::to_string(index++) + "]";
    try {
      PlannedFault planned;
      auto& f = planned.fault;
      if (node["id"]) f.id = node["id"].as<std::string>();
      if (!node["target"]) throw Error(ErrorCode::ParseError, where + ": missing 'target'");
      f.target = node["target"].as<std::string>();
      if (node["mode"]) planned.mode = parse_injection_mode(node["mode"].as<std::string>());
      if (node["start"]) {
        f.start_time = node["start"].as<std::int64_t>();
      } else if (planned.mode == InjectionMode::Scheduled) {
        throw Error(ErrorCode::ParseError, where + ": scheduled fault needs 'start'");
      }
      if (!node["duration"]) throw Error(ErrorCode::ParseError, where + ": missing 'duration'");
      f.duration = node["duration"].as<std::int64_t>();

      auto read_params = [](const YAML::Node& params) {
        std::map<std::string, double> out;
        if (params)
          for (const auto& kv : params) out[kv.first.as<std::string>()] = kv.second.as<double>();
        return out;
      };
      if (node["type"]) {
        const auto type = parse_fault_type(node["type"].as<std::string>());
        f.behaviors.emplace(type, make_behavior(type, read_params(node["params"])));
      }
      if (node["behaviors"]) {
        for (const auto& kv : node["behaviors"]) {
          const auto type = parse_fault_type(kv.first.as<std::string>());
          f.behaviors.insert_or_assign(type, make_behavior(type, read_params(kv.second)));
        }
      }
      if (f.behaviors.empty())
        throw Error(ErrorCode::ParseError, where + ": needs 'type' or 'behaviors'");
      plan.push_back(std::move(planned));
    } catch (const YAML::Exception& e) {
      throw Error(ErrorCode::ParseError, where + ": " + e.what());
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ParseError) throw;
      const std::string msg = e.what();
      throw Error(ErrorCode::ParseError,
                  msg.rfind("fault plan", 0) == 0 ? msg : where + ": " + msg);
    }
  }
  return plan;
}

std::vector<PlannedFault> load_fault_plan_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read fault plan " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_fault_plan(buffer.str());
}

FaultCalendar build_calendar(const std::vector<PlannedFault>& plan,
                             const ServiceTopology& topology, std::int64_t now) {
  std::vector<std::string> violations;
  for (const auto& p : plan) {
    const auto label = p.fault.id.empty() ? std::string("<unnamed>") : p.fault.id;
    for (const auto& v : validate_fault(p.fault, topology)) violations.push_back(label + ": " + v);
  }
  if (!violations.empty()) {
    auto message = "fault plan invalid: " + violations.front();
    throw Error(ErrorCode::InvalidCalendar, std::move(message), std::move(violations));
  }
  FaultCalendar calendar;
  for (const auto& p : plan) calendar.schedule(p.fault, p.mode, now);
  return calendar;
}

nlohmann::json to_json(const FaultDefinition& fault) {
  nlohmann::json behaviors = nlohmann::json::object();
  for (const auto& [type, behavior] : fault.behaviors)
    behaviors[std::string(to_string(type))] = behavior_params(behavior);
  return {{"id", fault.id},
          {"target", fault.target},
          {"start", fault.start_time},
          {"duration", fault.duration},
          {"behaviors", behaviors}};
}

FaultDefinition fault_from_json(const nlohmann::json& doc) {
  try {
    FaultDefinition f;
    if (doc.contains("id")) f.id = doc.at("id").get<std::string>();
    f.target = doc.at("target").get<std::string>();
    if (doc.contains("start")) f.start_time = doc.at("start").get<std::int64_t>();
    f.duration = doc.at("duration").get<std::int64_t>();
    auto read_params = [](const nlohmann::json& params) {
      std::map<std::string, double> out;
      if (params.is_object())
        for (const auto& [k, v] : params.items()) out[k] = v.get<double>();
      return out;
    };
    if (doc.contains("type")) {
      const auto type = parse_fault_type(doc.at("type").get<std::string>());
      f.behaviors.emplace(type,
                          make_behavior(type, read_params(doc.value("params", nlohmann::json{}))));
    }
    if (doc.contains("behaviors")) {
      for (const auto& [name, params] : doc.at("behaviors").items()) {
        const auto type = parse_fault_type(name);
        f.behaviors.insert_or_assign(type, make_behavior(type, read_params(params)));
      }
    }
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("fault definition: ") + e.what());
  }
}

nlohmann::json to_json(const FaultCalendar& calendar) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : calendar.entries()) {
    auto doc = to_json(e.fault);
    doc["mode"] = to_string(e.mode);
    entries.push_back(std::move(doc));
  }
  return {{"version", 1}, {"entries", entries}};
}

FaultCalendar calendar_from_json(const nlohmann::json& doc) {
  std::vector<CalendarEntry> entries;
  try {
    for (const auto& e : doc.at("entries"))
      entries.push_back({fault_from_json(e), parse_injection_mode(e.value("mode", "scheduled"))});
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("calendar: ") + e.what());
  }
  return FaultCalendar(std::move(entries));
}

}  // namespace servo
