// SPDX-License-Identifier: Apache-2.0

#include "servo/topology.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <queue>
#include <set>
#include <sstream>

#include "servo/error.hpp"

namespace servo {

namespace {

constexpr int kTopologyVersion = 1;

std::string node_name(int index) { return "node-" + std::to_string(index); }

}  // namespace

std::string_view to_string(ServiceKind kind) noexcept {
  switch (kind) {
    case ServiceKind::Frontend: return "frontend";
    case ServiceKind::Backend: return "backend";
    case ServiceKind::Datastore: return "datastore";
  }
  return "backend";
}

ServiceKind parse_service_kind(std::string_view text) {
  if (text == "frontend") return ServiceKind::Frontend;
  if (text == "backend") return ServiceKind::Backend;
  if (text == "datastore") return ServiceKind::Datastore;
  throw Error(ErrorCode::ParseError, "unknown service kind '" + std::string(text) + "'");
}

ServiceTopology::ServiceTopology(std::vector<Service> services, std::vector<PodInstance> pods,
                                 std::vector<std::string> nodes, std::vector<CallEdge> edges,
                                 std::string entry_service)
    : services_(std::move(services)),
      pods_(std::move(pods)),
      nodes_(std::move(nodes)),
      edges_(std::move(edges)),
      entry_service_(std::move(entry_service)) {}

const Service* ServiceTopology::find_service(std::string_view name) const noexcept {
  auto it = std::find_if(services_.begin(), services_.end(),
                         [&](const Service& s) { return s.name == name; });
  return it == services_.end() ? nullptr : &*it;
}

const PodInstance* ServiceTopology::find_pod(std::string_view cmdb_id) const noexcept {
  auto it = std::find_if(pods_.begin(), pods_.end(),
                         [&](const PodInstance& p) { return p.cmdb_id == cmdb_id; });
  return it == pods_.end() ? nullptr : &*it;
}

std::vector<const CallEdge*> ServiceTopology::callees_of(std::string_view service) const {
  std::vector<const CallEdge*> out;
  for (const auto& e : edges_)
    if (e.caller == service) out.push_back(&e);
  return out;
}

std::vector<const CallEdge*> ServiceTopology::callers_of(std::string_view service) const {
  std::vector<const CallEdge*> out;
  for (const auto& e : edges_)
    if (e.callee == service) out.push_back(&e);
  return out;
}

std::string pod_id(std::string_view service, int index) {
  return std::string(service) + "-" + std::to_string(index);
}

std::vector<std::string> validate(const ServiceTopology& topology) {
  std::vector<std::string> violations;

  std::set<std::string> service_names;
  for (const auto& s : topology.services()) {
    if (s.name.empty()) violations.push_back("service_name: empty service name");
    if (!service_names.insert(s.name).second)
      violations.push_back("duplicate_service: " + s.name);
    if (s.replica_count < 1)
      violations.push_back("replica_count: service " + s.name + " has replica_count " +
                           std::to_string(s.replica_count));
  }

  std::set<std::string> node_names;
  for (const auto& n : topology.nodes())
    if (!node_names.insert(n).second) violations.push_back("duplicate_node: " + n);

  std::set<std::string> pod_ids;
  std::map<std::string, int> pods_per_service;
  for (const auto& p : topology.pods()) {
    if (!pod_ids.insert(p.cmdb_id).second) violations.push_back("duplicate_pod: " + p.cmdb_id);
    if (!node_names.count(p.node_id))
      violations.push_back("unknown_node: pod " + p.cmdb_id + " placed on undeclared node " +
                           p.node_id);
    if (!service_names.count(p.service)) {
      violations.push_back("pod_service: pod " + p.cmdb_id + " belongs to undeclared service " +
                           p.service);
      continue;
    }
    ++pods_per_service[p.service];
    const std::string prefix = p.service + "-";
    const bool formatted = p.cmdb_id.size() > prefix.size() &&
                           p.cmdb_id.compare(0, prefix.size(), prefix) == 0 &&
                           std::all_of(p.cmdb_id.begin() + prefix.size(), p.cmdb_id.end(),
                                       [](char c) { return c >= '0' && c <= '9'; });
    if (!formatted)
      violations.push_back("pod_id_format: " + p.cmdb_id + " is not <service>-<index>");
  }
  for (const auto& s : topology.services()) {
    const int count = pods_per_service[s.name];
    if (s.replica_count >= 1 && count != s.replica_count)
      violations.push_back("pod_count: service " + s.name + " has " + std::to_string(count) +
                           " pods, expected " + std::to_string(s.replica_count));
  }

  std::map<std::string, std::vector<std::string>> adjacency;
  std::set<std::pair<std::string, std::string>> seen_edges;
  for (const auto& e : topology.edges()) {
    const std::string label = "edge " + e.caller + "->" + e.callee;
    if (e.caller == e.callee) violations.push_back("self_edge: " + label);
    if (!service_names.count(e.caller))
      violations.push_back("unknown_endpoint: " + label + " references undeclared service " +
                           e.caller);
    if (!service_names.count(e.callee))
      violations.push_back("unknown_endpoint: " + label + " references undeclared service " +
                           e.callee);
    if (!(e.base_latency_ms > 0.0)) violations.push_back("base_latency: " + label + " must be > 0");
    if (!seen_edges.insert({e.caller, e.callee}).second)
      violations.push_back("duplicate_edge: " + label);
    adjacency[e.caller].push_back(e.callee);
  }

  const Service* entry = topology.find_service(topology.entry_service());
  if (entry == nullptr) {
    violations.push_back("entry_missing: entry service '" + topology.entry_service() +
                         "' is not declared");
    return violations;
  }
  if (entry->kind != ServiceKind::Frontend)
    violations.push_back("entry_kind: entry service " + entry->name + " is not a frontend");
  if (!topology.callers_of(entry->name).empty())
    violations.push_back("entry_incoming: entry service " + entry->name + " has incoming edges");

  std::set<std::string> reached{entry->name};
  std::queue<std::string> frontier;
  frontier.push(entry->name);
  while (!frontier.empty()) {
    auto current = frontier.front();
    frontier.pop();
    for (const auto& next : adjacency[current])
      if (reached.insert(next).second) frontier.push(next);
  }
  for (const auto& s : topology.services())
    if (!reached.count(s.name)) violations.push_back("unreachable: " + s.name);

  // The call graph must be a DAG so trace generation terminates.
  std::map<std::string, int> color;
  std::vector<std::string> cycle_members;
  auto visit = [&](auto&& self, const std::string& node) -> void {
    color[node] = 1;
    for (const auto& next : adjacency[node]) {
      if (color[next] == 1) {
        cycle_members.push_back(node + "->" + next);
      } else if (color[next] == 0) {
        self(self, next);
      }
    }
    color[node] = 2;
  };
  for (const auto& s : topology.services())
    if (color[s.name] == 0) visit(visit, s.name);
  for (const auto& c : cycle_members) violations.push_back("cycle: edge " + c);

  return violations;
}

ServiceTopology default_boutique_topology() {
  struct Spec {
    const char* name;
    ServiceKind kind;
    int replicas;
  };
  static constexpr Spec kServices[] = {
      {"frontend", ServiceKind::Frontend, 3},
      {"productcatalogservice", ServiceKind::Backend, 3},
      {"cartservice", ServiceKind::Backend, 3},
      {"currencyservice", ServiceKind::Backend, 3},
      {"recommendationservice", ServiceKind::Backend, 3},
      {"shippingservice", ServiceKind::Backend, 3},
      {"checkoutservice", ServiceKind::Backend, 3},
      {"adservice", ServiceKind::Backend, 3},
      {"paymentservice", ServiceKind::Backend, 3},
      {"emailservice", ServiceKind::Backend, 3},
      {"redis-cart", ServiceKind::Datastore, 1},
  };
  constexpr int kNodes = 8;

  std::vector<Service> services;
  std::vector<PodInstance> pods;
  int global_index = 0;
  for (const auto& spec : kServices) {
    services.push_back({spec.name, spec.kind, spec.replicas});
    for (int i = 0; i < spec.replicas; ++i)
      pods.push_back({pod_id(spec.name, i), spec.name, node_name(global_index++ % kNodes)});
  }
  std::vector<std::string> nodes;
  for (int i = 0; i < kNodes; ++i) nodes.push_back(node_name(i));

  std::vector<CallEdge> edges = {
      {"frontend", "productcatalogservice", "hipstershop.ProductCatalogService/GetProduct", 3.0},
      {"frontend", "cartservice", "hipstershop.CartService/GetCart", 4.0},
      {"frontend", "currencyservice", "hipstershop.CurrencyService/Convert", 2.0},
      {"frontend", "recommendationservice",
       "hipstershop.RecommendationService/ListRecommendations", 6.0},
      {"frontend", "shippingservice", "hipstershop.ShippingService/GetQuote", 3.0},
      {"frontend", "checkoutservice", "hipstershop.CheckoutService/PlaceOrder", 10.0},
      {"frontend", "adservice", "hipstershop.AdService/GetAds", 3.0},
      {"checkoutservice", "cartservice", "hipstershop.CartService/EmptyCart", 4.0},
      {"checkoutservice", "productcatalogservice", "hipstershop.ProductCatalogService/GetProduct",
       3.0},
      {"checkoutservice", "currencyservice", "hipstershop.CurrencyService/Convert", 2.0},
      {"checkoutservice", "shippingservice", "hipstershop.ShippingService/ShipOrder", 3.0},
      {"checkoutservice", "paymentservice", "hipstershop.PaymentService/Charge", 5.0},
      {"checkoutservice", "emailservice", "hipstershop.EmailService/SendOrderConfirmation", 4.0},
      {"recommendationservice", "productcatalogservice",
       "hipstershop.ProductCatalogService/ListProducts", 3.0},
      {"cartservice", "redis-cart", "redis.HGETALL", 1.0},
  };
  return ServiceTopology(std::move(services), std::move(pods), std::move(nodes),
                         std::move(edges), "frontend");
}

namespace {

template <typename T>
T required(const YAML::Node& node, const char* key, const std::string& where) {
  const auto child = node[key];
  if (!child) throw Error(ErrorCode::ParseError, where + ": missing key '" + key + "'");
  try {
    return child.as<T>();
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::ParseError, where + "." + key + ": " + e.what());
  }
}

}  // namespace

ServiceTopology load_topology(std::string_view document) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(document));
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::ParseError, std::string("topology: ") + e.what());
  }
  if (!root.IsMap()) throw Error(ErrorCode::ParseError, "topology: document is not a mapping");
  const int version = required<int>(root, "version", "topology");
  if (version != kTopologyVersion)
    throw Error(ErrorCode::ParseError,
                "topology: unsupported version " + std::to_string(version));

  const auto entry = required<std::string>(root, "entry", "topology");

  std::vector<std::string> nodes;
  if (!root["nodes"] || !root["nodes"].IsSequence())
    throw Error(ErrorCode::ParseError, "topology: 'nodes' must be a sequence");
  for (const auto& n : root["nodes"]) nodes.push_back(n.as<std::string>());

  std::vector<Service> services;
  if (!root["services"] || !root["services"].IsSequence())
    throw Error(ErrorCode::ParseError, "topology: 'services' must be a sequence");
  int i = 0;
  for (const auto& s : root["services"]) {
    const std::string where = "services[" + std::to_string(i++) + "]";
    services.push_back({required<std::string>(s, "name", where),
                        parse_service_kind(required<std::string>(s, "kind", where)),
                        required<int>(s, "replicas", where)});
  }

  std::vector<PodInstance> pods;
  if (root["pods"]) {
    if (!root["pods"].IsSequence())
      throw Error(ErrorCode::ParseError, "topology: 'pods' must be a sequence");
    i = 0;
    for (const auto& p : root["pods"]) {
      const std::string where = "pods[" + std::to_string(i++) + "]";
      pods.push_back({required<std::string>(p, "cmdb_id", where),
                      required<std::string>(p, "service", where),
                      required<std::string>(p, "node", where)});
    }
  } else if (!nodes.empty()) {
    // Deterministic round-robin placement by global pod index.
    int global_index = 0;
    for (const auto& s : services)
      for (int r = 0; r < s.replica_count; ++r)
        pods.push_back({pod_id(s.name, r), s.name,
                        nodes[static_cast<std::size_t>(global_index++) % nodes.size()]});
  }

  std::vector<CallEdge> edges;
  if (root["edges"]) {
    if (!root["edges"].IsSequence())
      throw Error(ErrorCode::ParseError, "topology: 'edges' must be a sequence");
    i = 0;
    for (const auto& e : root["edges"]) {
      const std::string where = "edges[" + std::to_string(i++) + "]";
      edges.push_back({required<std::string>(e, "caller", where),
                       required<std::string>(e, "callee", where),
                       required<std::string>(e, "operation", where),
                       required<double>(e, "base_latency_ms", where)});
    }
  }

  ServiceTopology topology(std::move(services), std::move(pods), std::move(nodes),
                           std::move(edges), entry);
  auto violations = validate(topology);
  if (!violations.empty()) {
    std::string message = "topology invalid: " + violations.front();
    if (violations.size() > 1)
      message += " (+" + std::to_string(violations.size() - 1) + " more)";
    throw Error(ErrorCode::ValidationError, message, std::move(violations));
  }
  return topology;
}

ServiceTopology load_topology_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read topology file " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return load_topology(buffer.str());
}

std::string dump_topology(const ServiceTopology& topology) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "version" << YAML::Value << kTopologyVersion;
  out << YAML::Key << "entry" << YAML::Value << topology.entry_service();
  out << YAML::Key << "nodes" << YAML::Value << YAML::Flow << topology.nodes();
  out << YAML::Key << "services" << YAML::Value << YAML::BeginSeq;
  for (const auto& s : topology.services()) {
    out << YAML::Flow << YAML::BeginMap << YAML::Key << "name" << YAML::Value << s.name
        << YAML::Key << "kind" << YAML::Value << std::string(to_string(s.kind)) << YAML::Key
        << "replicas" << YAML::Value << s.replica_count << YAML::EndMap;
  }
  out << YAML::EndSeq;
  out << YAML::Key << "pods" << YAML::Value << YAML::BeginSeq;
  for (const auto& p : topology.pods()) {
    out << YAML::Flow << YAML::BeginMap << YAML::Key << "cmdb_id" << YAML::Value << p.cmdb_id
        << YAML::Key << "service" << YAML::Value << p.service << YAML::Key << "node"
        << YAML::Value << p.node_id << YAML::EndMap;
  }
  out << YAML::EndSeq;
  out << YAML::Key << "edges" << YAML::Value << YAML::BeginSeq;
  for (const auto& e : topology.edges()) {
    out << YAML::BeginMap << YAML::Key << "caller" << YAML::Value << e.caller << YAML::Key
        << "callee" << YAML::Value << e.callee << YAML::Key << "operation" << YAML::Value
        << e.operation_name << YAML::Key << "base_latency_ms" << YAML::Value
        << e.base_latency_ms << YAML::EndMap;
  }
  out << YAML::EndSeq;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

std::vector<PodInstance> pods_of(const ServiceTopology& topology, std::string_view service) {
  if (!topology.has_service(service))
    throw Error(ErrorCode::UnknownService, "unknown service '" + std::string(service) + "'");
  std::vector<PodInstance> out;
  for (const auto& p : topology.pods())
    if (p.service == service) out.push_back(p);
  auto index_of = [](const PodInstance& p) {
    return std::stoi(p.cmdb_id.substr(p.cmdb_id.rfind('-') + 1));
  };
  std::stable_sort(out.begin(), out.end(),
                   [&](const auto& a, const auto& b) { return index_of(a) < index_of(b); });
  return out;
}

}  // namespace servo
