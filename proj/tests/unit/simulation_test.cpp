// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numeric>

#include "fixture.hpp"
#include "servo/error.hpp"
#include "servo/rng.hpp"
#include "servo/simulation.hpp"
#include "servo/telemetry.hpp"

using namespace servo;
namespace ts = testing_support;
namespace fs = std::filesystem;

namespace {

constexpr std::int64_t kT0 = 1700000000;

struct Stats {
  double mean = 0, sd = 0;
  std::size_t n = 0;
};

Stats stats(const std::vector<double>& v) {
  Stats s;
  s.n = v.size();
  if (v.empty()) return s;
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
  double acc = 0;
  for (double x : v) acc += (x - s.mean) * (x - s.mean);
  s.sd = std::sqrt(acc / double(v.size()));
  return s;
}

std::pair<std::vector<double>, std::vector<double>> split_kpi(const TelemetryBatch& b,
                                                              const std::string& entity,
                                                              const std::string& kpi,
                                                              std::int64_t from, std::int64_t to) {
  std::vector<double> inside, outside;
  for (const auto& m : b.metrics) {
    if (m.cmdb_id != entity || m.kpi_name != kpi) continue;
    (m.timestamp >= from && m.timestamp < to ? inside : outside).push_back(m.value);
  }
  return {inside, outside};
}

}  // namespace

TEST(Rng, DeriveIsStableAndSensitive) {
  auto a = RngStream::derive(42, std::string_view("kpi"), std::string_view("x"), std::int64_t{1});
  auto b = RngStream::derive(42, std::string_view("kpi"), std::string_view("x"), std::int64_t{1});
  auto c = RngStream::derive(42, std::string_view("kpi"), std::string_view("y"), std::int64_t{1});
  const auto va = a.next();
  EXPECT_EQ(va, b.next());
  EXPECT_NE(va, c.next());
}

TEST(Simulation, DeterministicAndSeedSensitive) {
  const auto t = default_boutique_topology();
  const SimClock clock{kT0, 1, 120};
  const auto cal = ts::calendar_of(
      {ts::fault("d", FaultType::NetworkDelay, "adservice", kT0 + 30, 30, {{"latency_ms", 100}})}, 0);
  const auto a = run_simulation(t, ts::profile(1), cal, clock);
  const auto b = run_simulation(t, ts::profile(1), cal, clock);
  const auto c = run_simulation(t, ts::profile(2), cal, clock);
  EXPECT_EQ(a, b);
  EXPECT_EQ(content_hash(a), content_hash(b));
  EXPECT_NE(content_hash(a), content_hash(c));
}

TEST(Simulation, BatchIsValidAndComplete) {
  const auto t = default_boutique_topology();
  const SimClock clock{kT0, 5, 300};
  const auto b = run_simulation(t, ts::profile(), FaultCalendar{}, clock);
  EXPECT_TRUE(validate(b).empty());
  EXPECT_EQ(static_cast<std::int64_t>(b.metrics.size()), expected_metric_rows(t, clock));
  EXPECT_EQ(b.container_kpis.size(), 17u);
  EXPECT_EQ(b.service_kpis.size(), 10u);
  for (const auto& l : b.logs) EXPECT_FALSE(is_error_log(l.message));
}

TEST(Simulation, SpanTreesAreWellFormed) {
  const auto b = run_simulation(default_boutique_topology(), ts::profile(5), FaultCalendar{},
                                SimClock{kT0, 1, 60});
  std::map<std::string, std::vector<const SpanRecord*>> traces;
  for (const auto& s : b.spans) traces[s.trace_id].push_back(&s);
  ASSERT_FALSE(traces.empty());
  for (const auto& [id, spans] : traces) {
    std::map<std::string, const SpanRecord*> by_id;
    int roots = 0;
    for (const auto* s : spans) {
      by_id[s->span_id] = s;
      roots += s->parent_span.empty();
    }
    EXPECT_EQ(roots, 1) << id;
    std::map<std::string, std::int64_t> child_sum;
    for (const auto* s : spans) {
      if (s->parent_span.empty()) continue;
      ASSERT_TRUE(by_id.count(s->parent_span)) << id;
      child_sum[s->parent_span] += s->duration;
    }
    for (const auto& [parent, sum] : child_sum) EXPECT_GE(by_id[parent]->duration, sum);
  }
}

TEST(Simulation, GenerateTraceVisitsEveryReachableService) {
  RngStream rng = RngStream::derive(1, std::string_view("t"));
  const auto t = default_boutique_topology();
  const auto trace = generate_trace(t, "", kT0, Perturbation{}, rng);
  std::set<std::string> services;
  for (const auto& s : trace.spans) services.insert(t.find_pod(s.cmdb_id)->service);
  EXPECT_EQ(services.size(), t.services().size());
}

TEST(Simulation, CpuStressManifestsInMetricsOnly) {
  const auto t = default_boutique_topology();
  const SimClock clock{kT0, 1, 1800};
  const std::int64_t from = kT0 + 600, to = kT0 + 900;
  const auto cal = ts::calendar_of(
      {ts::fault("cpu", FaultType::CpuStress, "cartservice-0", from, to - from, {{"load_pct", 60}})}, 0);
  const auto b = run_simulation(t, ts::profile(9), cal, clock);
  for (const auto& l : b.logs) EXPECT_FALSE(is_error_log(l.message)) << l.message;
  const auto [in, out] = split_kpi(b, "cartservice-0", "cpu_usage_pct", from, to);
  const auto si = stats(in), so = stats(out);
  EXPECT_EQ(si.n, 300u);
  EXPECT_GT(si.mean - so.mean, 3.0 * so.sd);
  // Other replicas stay at baseline.
  const auto [in1, out1] = split_kpi(b, "cartservice-1", "cpu_usage_pct", from, to);
  EXPECT_LT(std::abs(stats(in1).mean - stats(out1).mean), stats(out1).sd);
}

TEST(Simulation, PodFailureLogsAndSilence) {
  const auto t = default_boutique_topology();
  const SimClock clock{kT0, 1, 600};
  const std::int64_t from = kT0 + 200, to = kT0 + 320;
  const auto cal = ts::calendar_of({ts::fault("pf", FaultType::PodFailure, "cartservice-1", from, to - from)}, 0);
  const auto b = run_simulation(t, ts::profile(9), cal, clock);
  std::size_t unreachable = 0;
  for (const auto& l : b.logs)
    if (l.message.rfind(std::string(kUnreachableTemplate), 0) == 0) {
      ++unreachable;
      EXPECT_GE(l.timestamp, from);
      EXPECT_LT(l.timestamp, to);
    }
  EXPECT_GE(unreachable, 1u);
  for (const auto& m : b.metrics)
    if (m.cmdb_id == "cartservice-1") EXPECT_TRUE(m.timestamp < from || m.timestamp >= to);
  for (const auto& s : b.spans)
    if (s.cmdb_id == "cartservice-1") EXPECT_TRUE(s.timestamp < from || s.timestamp >= to);
}

TEST(Simulation, NetworkDelayAddsLatency) {
  const auto t = default_boutique_topology();
  const SimClock clock{kT0, 1, 900};
  const std::int64_t from = kT0 + 300, to = kT0 + 600;
  const auto cal = ts::calendar_of(
      {ts::fault("nd", FaultType::NetworkDelay, "adservice", from, to - from, {{"latency_ms", 200}})}, 0);
  const auto b = run_simulation(t, ts::profile(4), cal, clock);
  std::vector<double> in, out;
  for (const auto& s : b.spans) {
    if (t.find_pod(s.cmdb_id)->service != "adservice") continue;
    (s.timestamp >= from && s.timestamp < to ? in : out).push_back(double(s.duration));
  }
  ASSERT_FALSE(in.empty());
  ASSERT_FALSE(out.empty());
  const double added_ms = (stats(in).mean - stats(out).mean) / 1000.0;
  EXPECT_NEAR(added_ms, 200.0, 20.0);
}

TEST(Simulation, NetworkLossFailsCalls) {
  const auto t = default_boutique_topology();
  const std::int64_t from = kT0 + 60, to = kT0 + 180;
  const auto cal = ts::calendar_of(
      {ts::fault("nl", FaultType::NetworkLoss, "currencyservice", from, to - from, {{"loss_pct", 50}})}, 0);
  const auto b = run_simulation(t, ts::profile(4), cal, SimClock{kT0, 1, 240});
  std::size_t failed_in = 0, failed_out = 0;
  for (const auto& s : b.spans) {
    if (s.status_code == 200) continue;
    (s.timestamp >= from && s.timestamp < to ? failed_in : failed_out) += 1;
  }
  EXPECT_GT(failed_in, 0u);
  EXPECT_EQ(failed_out, 0u);
}

TEST(Simulation, RejectsBadInputs) {
  const auto t = default_boutique_topology();
  auto code = [&](const WorkloadProfile& p, const FaultCalendar& cal, const SimClock& c) {
    try {
      run_simulation(t, p, cal, c);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::ParseError;
  };
  EXPECT_EQ(code(ts::profile(), {}, SimClock{kT0, 0, 60}), ErrorCode::ValidationError);
  EXPECT_EQ(code(ts::profile(), {}, SimClock{kT0, 7, 60}), ErrorCode::ValidationError);
  auto p = ts::profile();
  p.arrival_rate = 0;
  EXPECT_EQ(code(p, {}, SimClock{kT0, 1, 60}), ErrorCode::ValidationError);
  EXPECT_EQ(code(ts::profile(), {}, SimClock{kT0, 1, 8 * 86400}), ErrorCode::HorizonOverflow);
  const auto bad = ts::calendar_of({ts::fault("x", FaultType::PodFailure, "ghost", kT0, 10)}, 0);
  EXPECT_EQ(code(ts::profile(), bad, SimClock{kT0, 1, 60}), ErrorCode::InvalidCalendar);
}

TEST(Simulation, CoarseStepKeepsRowCount) {
  const auto t = default_boutique_topology();
  const SimClock clock{kT0, 10, 600};
  const auto b = run_simulation(t, ts::profile(), FaultCalendar{}, clock);
  EXPECT_EQ(static_cast<std::int64_t>(b.metrics.size()), expected_metric_rows(t, clock));
  EXPECT_EQ(b.ground_truth.labels.size(), 60u);
}
