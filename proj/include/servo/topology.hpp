// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace servo {

enum class ServiceKind { Frontend, Backend, Datastore };

std::string_view to_string(ServiceKind kind) noexcept;
ServiceKind parse_service_kind(std::string_view text);

struct Service {
  std::string name;
  ServiceKind kind = ServiceKind::Backend;
  int replica_count = 1;

  bool operator==(const Service&) const = default;
};

struct PodInstance {
  std::string cmdb_id;  // "<service>-<index>"
  std::string service;
  std::string node_id;

  bool operator==(const PodInstance&) const = default;
};

struct CallEdge {
  std::string caller;
  std::string callee;
  std::string operation_name;
  double base_latency_ms = 1.0;

  bool operator==(const CallEdge&) const = default;
};

// Static structure of the simulated system. Immutable once validated;
// instances are safe to share across threads.
class ServiceTopology {
 public:
  ServiceTopology() = default;
  ServiceTopology(std::vector<Service> services, std::vector<PodInstance> pods,
                  std::vector<std::string> nodes, std::vector<CallEdge> edges,
                  std::string entry_service);

  const std::vector<Service>& services() const noexcept { return services_; }
  const std::vector<PodInstance>& pods() const noexcept { return pods_; }
  const std::vector<std::string>& nodes() const noexcept { return nodes_; }
  const std::vector<CallEdge>& edges() const noexcept { return edges_; }
  const std::string& entry_service() const noexcept { return entry_service_; }

  const Service* find_service(std::string_view name) const noexcept;
  const PodInstance* find_pod(std::string_view cmdb_id) const noexcept;
  bool has_service(std::string_view name) const noexcept { return find_service(name) != nullptr; }

  // Outgoing edges of a service in declaration order.
  std::vector<const CallEdge*> callees_of(std::string_view service) const;
  std::vector<const CallEdge*> callers_of(std::string_view service) const;

  bool operator==(const ServiceTopology&) const = default;

 private:
  std::vector<Service> services_;
  std::vector<PodInstance> pods_;
  std::vector<std::string> nodes_;
  std::vector<CallEdge> edges_;
  std::string entry_service_;
};

// Every invariant violation of the topology; empty means valid. Each entry
// starts with the violated invariant's name, e.g. "unreachable: adservice".
std::vector<std::string> validate(const ServiceTopology& topology);

std::string pod_id(std::string_view service, int index);

// Online Boutique: 11 services, 31 pods round-robin over 8 nodes.
ServiceTopology default_boutique_topology();

// Parses and validates a YAML topology document (docs/topology.md).
// Throws ParseError or ValidationError (detail lists every violation).
ServiceTopology load_topology(std::string_view document);
ServiceTopology load_topology_file(const std::string& path);
std::string dump_topology(const ServiceTopology& topology);

// Pods of a service ordered by replica index. Throws UnknownService.
std::vector<PodInstance> pods_of(const ServiceTopology& topology, std::string_view service);

}  // namespace servo
