// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "fixture.hpp"
#include "servo/error.hpp"
#include "servo/fault.hpp"
#include "servo/topology.hpp"

using namespace servo;
using testing_support::fault;

namespace {

bool has_prefix(const std::vector<std::string>& v, const std::string& prefix) {
  return std::any_of(v.begin(), v.end(), [&](const std::string& s) { return s.rfind(prefix, 0) == 0; });
}

std::vector<std::string> load_violations(const std::string& yaml) {
  try {
    load_topology(yaml);
  } catch (const Error& e) {
    return e.detail();
  }
  return {};
}

std::string replace(std::string s, const std::string& from, const std::string& to) {
  const auto at = s.find(from);
  if (at != std::string::npos) s.replace(at, from.size(), to);
  return s;
}

}  // namespace

TEST(Topology, DefaultCounts) {
  const auto t = default_boutique_topology();
  EXPECT_EQ(t.services().size(), 11u);
  EXPECT_EQ(t.pods().size(), 31u);
  EXPECT_EQ(t.nodes().size(), 8u);
  ASSERT_NE(t.find_service("redis-cart"), nullptr);
  EXPECT_EQ(t.find_service("redis-cart")->replica_count, 1);
  EXPECT_TRUE(validate(t).empty());
  EXPECT_EQ(t.entry_service(), "frontend");
}

TEST(Topology, PodsMatchReplicaCounts) {
  const auto t = default_boutique_topology();
  for (const auto& s : t.services()) {
    const auto pods = pods_of(t, s.name);
    ASSERT_EQ(static_cast<int>(pods.size()), s.replica_count);
    for (int i = 0; i < s.replica_count; ++i) EXPECT_EQ(pods[i].cmdb_id, pod_id(s.name, i));
  }
  EXPECT_THROW(pods_of(t, "nope"), Error);
}

TEST(Topology, DumpLoadRoundTrip) {
  const auto t = default_boutique_topology();
  EXPECT_EQ(load_topology(dump_topology(t)), t);
}

TEST(Topology, ReportsEveryViolation) {
  const auto yaml = dump_topology(default_boutique_topology());
  auto bad = replace(yaml, "{name: redis-cart, kind: datastore, replicas: 1}",
                     "{name: redis-cart, kind: datastore, replicas: 2}");
  EXPECT_TRUE(has_prefix(load_violations(bad), "pod_count: service redis-cart"));

  bad = replace(yaml, "{cmdb_id: frontend-0, service: frontend, node: node-0}",
                "{cmdb_id: frontend-0, service: frontend, node: node-99}");
  EXPECT_TRUE(has_prefix(load_violations(bad), "unknown_node"));

  bad = replace(yaml, "entry: frontend", "entry: cartservice");
  const auto v = load_violations(bad);
  EXPECT_TRUE(has_prefix(v, "entry_kind"));
  EXPECT_TRUE(has_prefix(v, "entry_incoming"));
}

TEST(Topology, CycleAndUnreachable) {
  auto services = default_boutique_topology().services();
  auto pods = default_boutique_topology().pods();
  auto nodes = default_boutique_topology().nodes();
  auto edges = default_boutique_topology().edges();
  edges.push_back({"redis-cart", "cartservice", "loop", 1.0});
  edges.erase(std::remove_if(edges.begin(), edges.end(),
                             [](const CallEdge& e) { return e.callee == "adservice"; }),
              edges.end());
  const ServiceTopology t(services, pods, nodes, edges, "frontend");
  const auto v = validate(t);
  EXPECT_TRUE(has_prefix(v, "cycle"));
  EXPECT_TRUE(has_prefix(v, "unreachable: adservice"));
}

TEST(Topology, MalformedYamlIsParseError) {
  try {
    load_topology("services: [");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ParseError);
  }
}

TEST(Fault, ParamsAndReservedTypes) {
  EXPECT_THROW(make_behavior(FaultType::CpuStress, {}), Error);
  EXPECT_THROW(make_behavior(FaultType::NetworkDelay, {{"delay_ms", 1}}), Error);
  try {
    parse_fault_type("HttpAbort");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ParseError);
  }
  const auto b = make_behavior(FaultType::NetworkDelay, {{"latency_ms", 200}});
  EXPECT_EQ(behavior_params(b).at("jitter_ms"), 0.0);
}

TEST(Fault, ValidationRanges) {
  const auto t = default_boutique_topology();
  auto f = fault("f", FaultType::NetworkLoss, "cartservice", 10, 60, {{"loss_pct", 150}});
  EXPECT_FALSE(validate_fault(f, t).empty());
  f = fault("f", FaultType::CpuStress, "ghost", 10, 60, {{"load_pct", 50}});
  EXPECT_FALSE(validate_fault(f, t).empty());
  f = fault("f", FaultType::CpuStress, "cartservice-1", 10, 0, {{"load_pct", 50}});
  EXPECT_FALSE(validate_fault(f, t).empty());
  f.duration = 30;
  EXPECT_TRUE(validate_fault(f, t).empty());
  EXPECT_EQ(resolve_target_pods(f, t), std::vector<std::string>{"cartservice-1"});
  EXPECT_EQ(resolve_target_service(f, t), "cartservice");
  f.target = "cartservice";
  EXPECT_EQ(resolve_target_pods(f, t).size(), 3u);
}

TEST(Calendar, ScheduleCancelAndIds) {
  FaultCalendar cal;
  const auto id0 = cal.schedule(fault("", FaultType::CpuStress, "frontend", 100, 60, {{"load_pct", 50}}),
                                InjectionMode::Scheduled, 0);
  const auto id1 = cal.schedule(fault("", FaultType::PodFailure, "cartservice-0", 50, 10),
                                InjectionMode::Scheduled, 0);
  EXPECT_EQ(id0, "fault-0");
  EXPECT_EQ(id1, "fault-1");
  ASSERT_EQ(cal.entries().front().fault.id, "fault-1");  // ordered by start

  EXPECT_THROW(cal.schedule(fault("fault-0", FaultType::PodFailure, "frontend", 1, 1),
                            InjectionMode::Scheduled, 0),
               Error);
  try {
    cal.cancel("fault-1", 50);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AlreadyStarted);
  }
  cal.cancel("fault-0", 99);
  EXPECT_EQ(cal.size(), 1u);
  try {
    cal.cancel("fault-0", 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownFault);
  }
}

TEST(Calendar, ImmediateStartsNow) {
  FaultCalendar cal;
  const auto id = cal.schedule(fault("", FaultType::PodFailure, "frontend-0", 5, 10),
                               InjectionMode::Immediate, 777);
  EXPECT_EQ(cal.find(id)->fault.start_time, 777);
}

TEST(Calendar, ActiveFaultsMatchIntervals) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    FaultCalendar cal;
    std::vector<FaultDefinition> all;
    for (int i = 0; i < 5; ++i) {
      const auto start = static_cast<std::int64_t>(rng() % 100);
      const auto dur = static_cast<std::int64_t>(1 + rng() % 30);
      auto f = fault("f" + std::to_string(i), FaultType::PodFailure, "frontend-0", start, dur);
      all.push_back(f);
      cal.schedule(f, InjectionMode::Scheduled, 0);
    }
    for (std::int64_t t = 0; t < 140; t += 3) {
      std::set<std::string> want, got;
      for (const auto& f : all)
        if (f.start_time <= t && t < f.start_time + f.duration) want.insert(f.id);
      for (const auto& f : active_faults(cal, t)) got.insert(f.id);
      EXPECT_EQ(got, want);
    }
  }
}

TEST(Calendar, JsonRoundTrip) {
  auto cal = testing_support::calendar_of(
      {fault("a", FaultType::NetworkDelay, "frontend", 10, 20, {{"latency_ms", 200}, {"jitter_ms", 5}}),
       fault("b", FaultType::MemoryStress, "adservice-1", 40, 20, {{"bytes", 1e8}})},
      0);
  EXPECT_EQ(calendar_from_json(to_json(cal)), cal);
}

TEST(Calendar, GroundTruthLabelsCoverFaultWindows) {
  const auto t = default_boutique_topology();
  auto cal = testing_support::calendar_of(
      {fault("a", FaultType::CpuStress, "cartservice-2", 1010, 20, {{"load_pct", 60}})}, 0);
  const SimClock clock{1000, 5, 60};
  const auto gt = ground_truth(cal, clock, t);
  ASSERT_EQ(gt.labels.size(), 12u);
  for (const auto& l : gt.labels) EXPECT_EQ(l.anomalous, l.timestamp >= 1010 && l.timestamp < 1030);
  ASSERT_EQ(gt.cases.size(), 1u);
  EXPECT_EQ(gt.cases[0].root_cause, "cartservice-2");
  EXPECT_EQ(gt.cases[0].service, "cartservice");
  EXPECT_EQ(gt.cases[0].fault_type, "CpuStress");
}

TEST(FaultPlan, ParseAndBuild) {
  const std::string plan = R"(faults:
  - id: cpu-1
    type: CpuStress
    target: cartservice-0
    start: 1700000100
    duration: 300
    params: {load_pct: 80}
  - id: now-1
    type: PodFailure
    target: adservice-0
    mode: immediate
    duration: 60
)";
  const auto parsed = parse_fault_plan(plan);
  ASSERT_EQ(parsed.size(), 2u);
  EXPECT_EQ(parsed[1].mode, InjectionMode::Immediate);
  const auto cal = build_calendar(parsed, default_boutique_topology(), 1700000000);
  EXPECT_EQ(cal.find("now-1")->fault.start_time, 1700000000);

  const std::string bad = R"(faults:
  - {id: x, type: CpuStress, target: ghost, start: 1, duration: 10, params: {load_pct: 10}}
  - {id: y, type: NetworkLoss, target: frontend, start: 1, duration: 10, params: {loss_pct: 101}}
)";
  try {
    build_calendar(parse_fault_plan(bad), default_boutique_topology(), 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidCalendar);
    EXPECT_EQ(e.detail().size(), 2u);
  }
}

TEST(Perturbation, CpuStressRaisesCpuOnTargetOnly) {
  const auto t = default_boutique_topology();
  const auto f = fault("a", FaultType::CpuStress, "cartservice-1", 100, 10, {{"load_pct", 70}});
  const auto p = apply_effects(f, default_manifestation_matrix(), t, 105);
  EXPECT_GT(p.offset("cartservice-1", "cpu_usage_pct"), 0.0);
  EXPECT_EQ(p.offset("cartservice-0", "cpu_usage_pct"), 0.0);
  EXPECT_TRUE(apply_effects(f, default_manifestation_matrix(), t, 110).empty());
  EXPECT_TRUE(p.down_pods.empty());
}

TEST(Perturbation, PodFailureSilencesAndDowns) {
  const auto t = default_boutique_topology();
  const auto f = fault("a", FaultType::PodFailure, "cartservice-1", 100, 10);
  const auto p = apply_effects(f, default_manifestation_matrix(), t, 100);
  EXPECT_TRUE(p.down_pods.count("cartservice-1"));
  EXPECT_TRUE(p.silent_metric_pods.count("cartservice-1"));
}
