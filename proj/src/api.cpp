// SPDX-License-Identifier: Apache-2.0

#include "servo/api.hpp"

#include <csignal>
#include <iostream>

#include "httplib.h"

namespace servo {

using nlohmann::json;

namespace {

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    auto body = json::parse(req.body);
    if (!body.is_object()) throw Error(ErrorCode::ParseError, "request body must be a JSON object");
    return body;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("request body: ") + e.what());
  }
}

void send(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(2), "application/json");
}

template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
  return [fn](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const Error& e) {
      send(res, http_status(e.code()), error_body(e));
    } catch (const json::exception& e) {
      send(res, 400, error_body(Error(ErrorCode::ParseError, e.what())));
    } catch (const std::exception& e) {
      send(res, 500, {{"code", "InternalError"}, {"message", e.what()}, {"detail", json::array()}});
    }
  };
}

template <typename T>
T field(const json& body, const char* key) {
  if (!body.contains(key)) throw Error(ErrorCode::ParseError, std::string("missing key '") + key + "'");
  try {
    return body.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::ParseError, std::string("key '") + key + "' has the wrong type");
  }
}

httplib::Server* g_server = nullptr;

void on_signal(int) {
  if (g_server != nullptr) g_server->stop();
}

}  // namespace

json error_body(const Error& e) {
  return {{"code", error_name(e.code())}, {"message", e.what()}, {"detail", e.detail()}};
}

json calendar_entry_json(const CalendarEntry& entry) {
  auto doc = to_json(entry.fault);
  doc["mode"] = to_string(entry.mode);
  doc["end"] = entry.fault.end_time();
  return doc;
}

FaultDefinition fault_request(const json& body, InjectionMode& mode) {
  auto fault = fault_from_json(body);
  if (body.contains("mode"))
    mode = parse_injection_mode(field<std::string>(body, "mode"));
  else
    mode = body.contains("start") ? InjectionMode::Scheduled : InjectionMode::Immediate;
  return fault;
}

SimulateRequest simulate_request(const json& body, const WorkspaceConfig& config) {
  SimulateRequest r;
  r.dataset = field<std::string>(body, "dataset");
  const auto clock = body.value("clock", json::object());
  r.clock.start = clock.value("start", kDefaultClockStart);
  r.clock.step = clock.value("step", config.step);
  r.clock.horizon = clock.value("horizon", std::int64_t{600});
  if (body.contains("profile")) {
    const auto& p = body["profile"];
    WorkloadProfile profile = default_workload_profile();
    profile.seed = config.seed;
    profile.arrival_rate = p.value("arrival_rate", profile.arrival_rate);
    profile.seed = p.value("seed", profile.seed);
    if (p.contains("operation_mix")) profile.operation_mix = p["operation_mix"].get<std::map<std::string, double>>();
    r.profile = profile;
  } else if (body.contains("seed")) {
    WorkloadProfile profile = default_workload_profile();
    profile.seed = field<std::uint64_t>(body, "seed");
    r.profile = profile;
  }
  r.overwrite = body.value("overwrite", false);
  return r;
}

ExperimentRequest experiment_request(const json& body, std::string& dataset) {
  ExperimentRequest r;
  r.plugin_id = field<std::string>(body, "plugin");
  dataset = field<std::string>(body, "dataset");
  if (!body.contains("window")) throw Error(ErrorCode::ParseError, "missing key 'window'");
  r.window = window_from_json(body["window"]);
  r.phase = parse_phase(field<std::string>(body, "phase"));
  r.experiment_id = body.value("experiment_id", std::string());
  return r;
}

BoardRequest board_request(const json& body, Workspace& workspace) {
  BoardRequest r;
  r.id = field<std::string>(body, "id");
  if (!body.contains("scenario")) throw Error(ErrorCode::ParseError, "missing key 'scenario'");
  r.scenario = body["scenario"].is_string() ? workspace.scenario(body["scenario"].get<std::string>())
                                            : scenario_from_json(body["scenario"]);
  r.plugins = field<std::vector<std::string>>(body, "plugins");
  for (const auto& m : field<std::vector<std::string>>(body, "metrics"))
    r.metrics.push_back(parse_metric_kind(m));
  if (body.contains("primary_metric"))
    r.primary_metric = parse_metric_kind(field<std::string>(body, "primary_metric"));
  r.k_max = body.value("k_max", 5);
  r.tolerance = body.value("tolerance", workspace.config().tolerance);
  return r;
}

void register_routes(httplib::Server& server, Workspace& ws) {
  server.Get("/scenarios", guarded([&ws](const httplib::Request&, httplib::Response& res) {
               json out = json::array();
               for (const auto& s : ws.scenarios()) out.push_back(to_json(s));
               send(res, 200, out);
             }));
  server.Post("/scenarios", guarded([&ws](const httplib::Request& req, httplib::Response& res) {
                send(res, 201, to_json(ws.add_scenario(scenario_from_json(parse_body(req)))));
              }));

  server.Get("/faults", guarded([&ws](const httplib::Request&, httplib::Response& res) {
               json out = json::array();
               const auto calendar = ws.calendar();
               for (const auto& e : calendar.entries()) out.push_back(calendar_entry_json(e));
               send(res, 200, out);
             }));
  server.Post("/faults", guarded([&ws](const httplib::Request& req, httplib::Response& res) {
                InjectionMode mode;
                auto fault = fault_request(parse_body(req), mode);
                send(res, 201, calendar_entry_json(ws.schedule_fault(std::move(fault), mode)));
              }));
  server.Delete(R"(/faults/([^/]+))",
                guarded([&ws](const httplib::Request& req, httplib::Response& res) {
                  ws.cancel_fault(req.matches[1]);
                  send(res, 200, {{"id", req.matches[1]}, {"cancelled", true}});
                }));

  server.Post("/simulate", guarded([&ws](const httplib::Request& req, httplib::Response& res) {
                send(res, 201, ws.simulate(simulate_request(parse_body(req), ws.config())));
              }));
  server.Get("/datasets", guarded([&ws](const httplib::Request&, httplib::Response& res) {
               send(res, 200, ws.datasets());
             }));

  server.Get("/plugins", guarded([&ws](const httplib::Request&, httplib::Response& res) {
               json out = json::array();
               for (const auto& i : ws.plugins().list()) out.push_back(to_json(i));
               send(res, 200, out);
             }));
  server.Post("/plugins", guarded([&ws](const httplib::Request& req, httplib::Response& res) {
                const auto body = parse_body(req);
                const auto instance = ws.plugins().deploy(field<std::string>(body, "bundle"),
                                                          body.value("id", std::string()));
                send(res, 201, to_json(instance));
              }));
  server.Post(R"(/plugins/([^/]+)/restart)",
              guarded([&ws](const httplib::Request& req, httplib::Response& res) {
                ws.plugins().restart(req.matches[1]);
                send(res, 200, to_json(ws.plugins().get(req.matches[1])));
              }));
  server.Post(R"(/plugins/([^/]+)/stop)",
              guarded([&ws](const httplib::Request& req, httplib::Response& res) {
                ws.plugins().stop(req.matches[1]);
                send(res, 200, to_json(ws.plugins().get(req.matches[1])));
              }));
  server.Post(R"(/plugins/([^/]+)/clear)",
              guarded([&ws](const httplib::Request& req, httplib::Response& res) {
                const auto body = parse_body(req);
                ws.plugins().clear(req.matches[1], field<std::string>(body, "experiment_id"));
                send(res, 200, {{"id", req.matches[1]}, {"cleared", body["experiment_id"]}});
              }));
  server.Delete(R"(/plugins/([^/]+))",
                guarded([&ws](const httplib::Request& req, httplib::Response& res) {
                  ws.plugins().remove(req.matches[1]);
                  send(res, 200, to_json(ws.plugins().get(req.matches[1])));
                }));

  server.Post("/experiments", guarded([&ws](const httplib::Request& req, httplib::Response& res) {
                std::string dataset;
                const auto request = experiment_request(parse_body(req), dataset);
                const auto store = ws.load_dataset(dataset);
                send(res, 201, to_json(ws.plugins().run_experiment(request, store)));
              }));
  server.Get(R"(/experiments/([^/]+))",
             guarded([&ws](const httplib::Request& req, httplib::Response& res) {
               const auto result = ws.plugins().result(req.matches[1]);
               if (!result)
                 throw Error(ErrorCode::UnknownExperiment, "unknown experiment '" +
                                                             std::string(req.matches[1]) + "'");
               send(res, 200, to_json(*result));
             }));

  server.Get("/leaderboards", guarded([&ws](const httplib::Request&, httplib::Response& res) {
               send(res, 200, ws.boards().ids());
             }));
  server.Post("/leaderboards", guarded([&ws](const httplib::Request& req, httplib::Response& res) {
                send(res, 201, to_json(ws.boards().create_leaderboard(board_request(parse_body(req), ws))));
              }));
  server.Get(R"(/leaderboards/([^/]+))",
             guarded([&ws](const httplib::Request& req, httplib::Response& res) {
               send(res, 200, to_json(ws.boards().get(req.matches[1])));
             }));
  server.Post(R"(/leaderboards/([^/]+)/algorithms)",
              guarded([&ws](const httplib::Request& req, httplib::Response& res) {
                const auto body = parse_body(req);
                send(res, 200,
                     to_json(ws.boards().add_algorithm(req.matches[1], field<std::string>(body, "plugin"))));
              }));
}

void serve(Workspace& workspace, const std::string& bind) {
  const auto colon = bind.rfind(':');
  if (colon == std::string::npos) throw Error(ErrorCode::InvalidArgument, "bind must be host:port");
  const auto host = bind.substr(0, colon);
  int port = 0;
  try {
    port = std::stoi(bind.substr(colon + 1));
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidArgument, "bind port '" + bind.substr(colon + 1) + "' is not a number");
  }
  httplib::Server server;
  register_routes(server, workspace);
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cerr << "listening on " << host << ":" << port << std::endl;
  const bool ok = server.listen(host, port);
  g_server = nullptr;
  if (!ok) throw Error(ErrorCode::IoError, "cannot listen on " + bind);
}

}  // namespace servo
