// SPDX-License-Identifier: Apache-2.0

#include "servo/simulation.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "servo/error.hpp"

namespace servo {

namespace {

std::string hex64(std::uint64_t v) {
  char buffer[17];
  std::snprintf(buffer, sizeof(buffer), "%016llx", static_cast<unsigned long long>(v));
  return buffer;
}

std::string service_log_message(const ServiceTopology& topology, const std::string& service,
                                const std::string& operation) {
  const auto* s = topology.find_service(service);
  if (s != nullptr && s->kind == ServiceKind::Datastore) return "cache hit: " + operation;
  if (service == "checkoutservice") return "checkout complete: " + operation;
  return "request served: " + operation;
}

class TraceBuilder {
 public:
  TraceBuilder(const ServiceTopology& topology, const Perturbation& effects, RngStream& rng,
               std::int64_t timestamp, double sigma)
      : topology_(topology), effects_(effects), rng_(rng), timestamp_(timestamp), sigma_(sigma) {
    trace_key_ = rng_.next();
    trace_id_ = hex64(trace_key_) + hex64(rng_.next());
  }

  GeneratedTrace build(std::string_view entry_operation) {
    const auto& entry = topology_.entry_service();
    auto pod = pick_pod(entry, nullptr);
    if (pod.empty()) return std::move(out_);  // whole entry tier down
    visit(entry, pod, std::string(entry_operation), "", 0.3, 0.0, 200, "http");
    return std::move(out_);
  }

 private:
  // Returns the microsecond duration of the emitted span.
  std::int64_t visit(const std::string& service, const std::string& pod,
                     const std::string& operation, const std::string& parent_span,
                     double self_ms, double extra_ms, int status, const char* type) {
    const std::size_t index = out_.spans.size();
    out_.spans.push_back({timestamp_, pod, parent_span, hex64(mix64(trace_key_, index)), trace_id_,
                          0, type, status, operation});
    const auto span_id = out_.spans[index].span_id;
    out_.logs.push_back({pod, service_log_message(topology_, service, operation)});

    std::int64_t children_us = 0;
    if (status == 200) {
      for (const auto* edge : topology_.callees_of(service)) {
        auto callee_pod = pick_pod(edge->callee, &pod);
        if (callee_pod.empty()) {
          out_.logs.push_back({pod, std::string(kFailedTemplate) + ": no available pod for " +
                                        edge->callee});
          out_.spans[index].status_code = 503;
          continue;
        }
        double delay_ms = 0.0;
        for (const auto* svc : {&edge->caller, &edge->callee}) {
          auto it = effects_.service_delay.find(*svc);
          if (it == effects_.service_delay.end()) continue;
          double d = it->second.latency_ms;
          if (it->second.jitter_ms > 0.0) d += rng_.normal(0.0, it->second.jitter_ms);
          delay_ms += std::max(0.0, d);
          if (rng_.bernoulli(it->second.log_probability))
            out_.logs.push_back({pod, std::string(kSlowTemplate) + " from " + edge->callee});
        }
        int child_status = 200;
        for (const auto* svc : {&edge->caller, &edge->callee}) {
          auto it = effects_.service_loss.find(*svc);
          if (it == effects_.service_loss.end() || child_status != 200) continue;
          if (rng_.bernoulli(it->second.loss_probability)) {
            child_status = 503;
            if (rng_.bernoulli(it->second.retry_log_probability))
              out_.logs.push_back({pod, std::string(kRetryTemplate) + " to " + edge->callee});
          }
        }
        const double base_ms = edge->base_latency_ms * rng_.lognormal_factor(sigma_);
        children_us += visit(edge->callee, callee_pod, edge->operation_name, span_id, base_ms,
                             delay_ms, child_status, "rpc");
      }
    }
    const double own_ms = self_ms + extra_ms;
    const auto duration = static_cast<std::int64_t>(std::llround(own_ms * 1000.0)) + children_us;
    out_.spans[index].duration = duration;
    return duration;
  }

  // Uniform pick over all replicas; a down replica makes the caller log the
  // failed connection and retry among live replicas.
  std::string pick_pod(const std::string& service, const std::string* caller_pod) {
    const auto pods = pods_of(topology_, service);
    const auto& chosen = pods[rng_.below(pods.size())].cmdb_id;
    if (!effects_.down_pods.count(chosen)) return chosen;
    if (caller_pod != nullptr) {
      auto it = effects_.unreachable_log_probability.find(chosen);
      if (it != effects_.unreachable_log_probability.end() && rng_.bernoulli(it->second))
        out_.logs.push_back({*caller_pod, std::string(kUnreachableTemplate) + ": " + chosen +
                                              ", rerouting"});
    }
    std::vector<std::string> live;
    for (const auto& p : pods)
      if (!effects_.down_pods.count(p.cmdb_id)) live.push_back(p.cmdb_id);
    if (live.empty()) return {};
    return live[rng_.below(live.size())];
  }

  const ServiceTopology& topology_;
  const Perturbation& effects_;
  RngStream& rng_;
  std::int64_t timestamp_;
  double sigma_;
  std::uint64_t trace_key_ = 0;
  std::string trace_id_;
  GeneratedTrace out_;
};

}  // namespace

bool is_error_log(std::string_view message) noexcept {
  for (auto prefix : {kUnreachableTemplate, kRetryTemplate, kSlowTemplate, kFailedTemplate})
    if (message.substr(0, prefix.size()) == prefix) return true;
  return false;
}

std::vector<std::string> validate(const WorkloadProfile& profile) {
  std::vector<std::string> violations;
  if (!(profile.arrival_rate > 0.0)) violations.push_back("arrival_rate must be > 0");
  if (profile.operation_mix.empty()) violations.push_back("operation_mix must be non-empty");
  double total = 0.0;
  for (const auto& [op, w] : profile.operation_mix) {
    if (!(w >= 0.0)) violations.push_back("weight for " + op + " must be >= 0");
    total += w;
  }
  if (!profile.operation_mix.empty() && std::abs(total - 1.0) > 1e-9)
    violations.push_back("operation_mix weights must sum to 1");
  return violations;
}

WorkloadProfile default_workload_profile() {
  return {1.0,
          {{"GET /", 0.4},
           {"GET /product", 0.3},
           {"POST /cart", 0.2},
           {"POST /cart/checkout", 0.1}},
          42};
}

WorkloadProfile load_workload_profile(const std::string& document) {
  WorkloadProfile profile;
  try {
    const auto root = YAML::Load(document);
    profile.arrival_rate = root["arrival_rate"].as<double>();
    profile.seed = root["seed"].as<std::uint64_t>();
    for (const auto& kv : root["operation_mix"])
      profile.operation_mix[kv.first.as<std::string>()] = kv.second.as<double>();
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::ParseError, std::string("workload profile: ") + e.what());
  }
  auto violations = validate(profile);
  if (!violations.empty())
    throw Error(ErrorCode::ValidationError, "workload profile invalid: " + violations.front(),
                violations);
  return profile;
}

GeneratedTrace generate_trace(const ServiceTopology& topology, std::string_view entry_operation,
                              std::int64_t timestamp, const Perturbation& effects,
                              RngStream& rng, double latency_sigma) {
  TraceBuilder builder(topology, effects, rng, timestamp, latency_sigma);
  return builder.build(entry_operation);
}

std::int64_t expected_metric_rows(const ServiceTopology& topology, const SimClock& clock,
                                  const KpiCatalog& catalog) {
  const auto per_tick =
      static_cast<std::int64_t>(topology.pods().size() * catalog.container_kpis().size() +
                                topology.services().size() * catalog.service_kpis().size());
  return clock.tick_count() * per_tick;
}

TelemetryBatch run_simulation(const ServiceTopology& topology, const WorkloadProfile& profile,
                              const FaultCalendar& calendar, const SimClock& clock,
                              const SimulationOptions& options) {
  if (auto v = validate(clock); !v.empty())
    throw Error(ErrorCode::ValidationError, "clock invalid: " + v.front(), v);
  if (auto v = validate(profile); !v.empty())
    throw Error(ErrorCode::ValidationError, "workload profile invalid: " + v.front(), v);
  if (clock.horizon > options.max_horizon)
    throw Error(ErrorCode::HorizonOverflow, "horizon " + std::to_string(clock.horizon) +
                                                " s exceeds maximum " +
                                                std::to_string(options.max_horizon) + " s");
  std::vector<std::string> calendar_violations;
  for (const auto& e : calendar.entries())
    for (const auto& v : validate_fault(e.fault, topology))
      calendar_violations.push_back(e.fault.id + ": " + v);
  if (!calendar_violations.empty())
    throw Error(ErrorCode::InvalidCalendar, "calendar invalid: " + calendar_violations.front(),
                calendar_violations);

  const auto& catalog = options.catalog;
  TelemetryBatch batch;
  batch.start = clock.start;
  batch.end = clock.end();
  batch.step = clock.step;
  batch.container_kpis = catalog.container_names();
  batch.service_kpis = catalog.service_names();
  batch.metrics.reserve(static_cast<std::size_t>(expected_metric_rows(topology, clock, catalog)));

  std::vector<std::pair<double, std::string>> cumulative_mix;
  double acc = 0.0;
  for (const auto& [op, w] : profile.operation_mix) cumulative_mix.push_back({acc += w, op});

  std::uint64_t log_seq = 0;
  for (std::int64_t i = 0; i < clock.tick_count(); ++i) {
    const auto t = clock.tick(i);
    Perturbation effects;
    for (const auto& fault : active_faults(calendar, t))
      effects.merge(apply_effects(fault, options.matrix, topology, t));

    for (const auto& pod : topology.pods()) {
      if (effects.silent_metric_pods.count(pod.cmdb_id)) continue;
      for (const auto& kpi : catalog.container_kpis()) {
        const double value = baseline_sample(catalog, kpi.name, pod.cmdb_id, t, profile.seed) +
                             effects.offset(pod.cmdb_id, kpi.name);
        batch.metrics.push_back({t, pod.cmdb_id, kpi.name, clamp_to_range(kpi, value)});
      }
    }
    for (const auto& service : topology.services()) {
      for (const auto& kpi : catalog.service_kpis()) {
        const double value = baseline_sample(catalog, kpi.name, service.name, t, profile.seed) +
                             effects.offset(service.name, kpi.name);
        batch.metrics.push_back({t, service.name, kpi.name, clamp_to_range(kpi, value)});
      }
    }

    auto arrivals = RngStream::derive(profile.seed, std::string_view("arrivals"), t);
    const auto requests = arrivals.poisson(profile.arrival_rate * static_cast<double>(clock.step));
    for (std::uint64_t r = 0; r < requests; ++r) {
      auto rng = RngStream::derive(profile.seed, std::string_view("request"), t, r);
      const double pick = rng.uniform() * acc;
      auto it = std::find_if(cumulative_mix.begin(), cumulative_mix.end(),
                             [&](const auto& c) { return pick < c.first; });
      if (it == cumulative_mix.end()) --it;
      const auto timestamp = t + static_cast<std::int64_t>(rng.below(
                                     static_cast<std::uint64_t>(clock.step)));
      auto trace = generate_trace(topology, it->second, timestamp, effects, rng,
                                  options.latency_sigma);
      for (auto& s : trace.spans) batch.spans.push_back(std::move(s));
      for (auto& l : trace.logs) {
        char id[24];
        std::snprintf(id, sizeof(id), "log-%012llu", static_cast<unsigned long long>(log_seq++));
        batch.logs.push_back({id, timestamp, format_utc_date(timestamp), std::move(l.cmdb_id),
                              std::move(l.message)});
      }
    }
  }

  batch.ground_truth = ground_truth(calendar, clock, topology);
  canonicalize(batch);
  return batch;
}

}  // namespace servo
