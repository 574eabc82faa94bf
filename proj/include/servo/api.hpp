// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "servo/error.hpp"
#include "servo/workspace.hpp"

namespace httplib {
class Server;
}

namespace servo {

struct RouteInfo {
  std::string_view method;
  std::string_view path;
  bool mutation;
  std::string_view cli;  // equivalent CLI subcommand path, empty for reads
};

inline constexpr RouteInfo kRoutes[] = {
    {"GET", "/scenarios", false, ""},
    {"POST", "/scenarios", true, "scenario add"},
    {"GET", "/faults", false, ""},
    {"POST", "/faults", true, "faults add"},
    {"DELETE", "/faults/{id}", true, "faults cancel"},
    {"POST", "/simulate", true, "simulate"},
    {"GET", "/datasets", false, ""},
    {"GET", "/plugins", false, ""},
    {"POST", "/plugins", true, "plugin deploy"},
    {"POST", "/plugins/{id}/restart", true, "plugin restart"},
    {"POST", "/plugins/{id}/stop", true, "plugin stop"},
    {"POST", "/plugins/{id}/clear", true, "plugin clear"},
    {"DELETE", "/plugins/{id}", true, "plugin rm"},
    {"POST", "/experiments", true, "experiment run"},
    {"GET", "/experiments/{id}", false, ""},
    {"GET", "/leaderboards", false, ""},
    {"POST", "/leaderboards", true, "board create"},
    {"GET", "/leaderboards/{id}", false, ""},
    {"POST", "/leaderboards/{id}/algorithms", true, "board add"},
};

// {code, message, detail}
nlohmann::json error_body(const Error& error);

// Request documents shared by the API and the CLI.
FaultDefinition fault_request(const nlohmann::json& body, InjectionMode& mode);
SimulateRequest simulate_request(const nlohmann::json& body, const WorkspaceConfig& config);
ExperimentRequest experiment_request(const nlohmann::json& body, std::string& dataset);
BoardRequest board_request(const nlohmann::json& body, Workspace& workspace);

nlohmann::json calendar_entry_json(const CalendarEntry& entry);

void register_routes(httplib::Server& server, Workspace& workspace);

// Serves until `stop` is set by another thread or the process is signalled.
// `bind` is "host:port".
void serve(Workspace& workspace, const std::string& bind);

}  // namespace servo
