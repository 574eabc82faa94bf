// SPDX-License-Identifier: Apache-2.0

#include "servo/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "servo/api.hpp"
#include "servo/error.hpp"
#include "servo/json_store.hpp"
#include "servo/workspace.hpp"

namespace servo {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Globals {
  std::string config_file;
  std::optional<std::string> data_root, plugin_root, board_store, topology, bind;
  std::optional<int> port_base, tolerance;
  std::optional<std::int64_t> step, now;
  std::optional<std::uint64_t> seed;
  bool json = false;
};

// "start:end" or "start:end:step"
DatasetWindow parse_window(const std::string& text, std::int64_t default_step,
                           const std::string& modalities) {
  DatasetWindow w;
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string part; std::getline(ss, part, ':');) parts.push_back(part);
  if (parts.size() < 2 || parts.size() > 3)
    throw Error(ErrorCode::InvalidArgument, "window '" + text + "' must be start:end[:step]");
  try {
    w.start = std::stoll(parts[0]);
    w.end = std::stoll(parts[1]);
    w.step = parts.size() == 3 ? std::stoll(parts[2]) : default_step;
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidArgument, "window '" + text + "' must hold integers");
  }
  if (!modalities.empty()) w.modalities = parse_modalities(modalities);
  return w;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

std::string table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> widths;
  for (const auto& r : rows)
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (widths.size() <= i) widths.push_back(0);
      widths[i] = std::max(widths[i], r[i].size());
    }
  std::string out;
  for (const auto& r : rows) {
    std::string line;
    for (std::size_t i = 0; i < r.size(); ++i) line += (i + 1 < r.size() ? pad(r[i], widths[i] + 2) : r[i]);
    out += line + "\n";
  }
  return out;
}

class Cli {
 public:
  Cli(std::ostream& out, std::ostream& err, Getenv getenv)
      : out_(out), err_(err), getenv_(std::move(getenv)) {
    build();
  }

  CLI::App& app() { return app_; }

  int run(const std::vector<std::string>& args) {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
      app_.parse(reversed);
    } catch (const CLI::ParseError& e) {
      const int code = app_.exit(e, out_, err_);
      return code == 0 ? 0 : exit_code(ErrorFamily::Usage);
    }
    try {
      if (action_) action_();
      return 0;
    } catch (const Error& e) {
      if (globals_.json) {
        err_ << error_body(e).dump(2) << '\n';
      } else {
        err_ << "error: " << error_name(e.code()) << ": " << e.what() << '\n';
        for (const auto& d : e.detail()) err_ << "  - " << d << '\n';
      }
      return exit_code(e.family());
    } catch (const std::exception& e) {
      err_ << "error: internal: " << e.what() << '\n';
      return 1;
    }
  }

 private:
  WorkspaceConfig config() const {
    WorkspaceConfig c;
    std::string file = globals_.config_file;
    if (file.empty()) {
      const char* env = getenv_("SERVO_CONFIG");
      if (env != nullptr) file = env;
    }
    if (!file.empty()) c = merge_config_file(c, read_text_file(file));
    c = merge_environment(c, getenv_);
    if (globals_.data_root) c.data_root = *globals_.data_root;
    if (globals_.plugin_root) c.plugin_root = *globals_.plugin_root;
    if (globals_.board_store) c.board_store = *globals_.board_store;
    if (globals_.topology) c.topology_file = *globals_.topology;
    if (globals_.bind) c.bind = *globals_.bind;
    if (globals_.port_base) c.port_base = *globals_.port_base;
    if (globals_.tolerance) c.tolerance = *globals_.tolerance;
    if (globals_.step) c.step = *globals_.step;
    if (globals_.seed) c.seed = *globals_.seed;
    if (auto v = validate(c); !v.empty())
      throw Error(ErrorCode::ValidationError, "config invalid: " + v.front(), v);
    return c;
  }

  Workspace& ws() {
    if (!ws_) {
      Workspace::Clock clock;
      if (globals_.now) clock = [n = *globals_.now] { return n; };
      ws_ = std::make_unique<Workspace>(config(), clock);
    }
    return *ws_;
  }

  ServiceTopology topology_from(const std::string& file) const {
    if (!file.empty()) return load_topology_file(file);
    const auto c = config();
    return c.topology_file.empty() ? default_boutique_topology() : load_topology_file(c.topology_file);
  }

  void emit(const json& doc, const std::string& text) {
    if (globals_.json)
      out_ << doc.dump(2) << '\n';
    else
      out_ << text;
  }

  void build() {
    app_.name("servo");
    app_.description("Desk-scale microservice testbed: fault injection, telemetry simulation and AIOps evaluation.");
    app_.require_subcommand(1);
    app_.fallthrough();
    app_.add_option("--config", globals_.config_file, "YAML config file (also SERVO_CONFIG)");
    app_.add_option("--data-root", globals_.data_root, "Dataset directory root");
    app_.add_option("--plugin-root", globals_.plugin_root, "Plugin registry and sandbox root");
    app_.add_option("--board-store", globals_.board_store, "Leaderboard, scenario and calendar store");
    app_.add_option("--topology", globals_.topology, "Topology YAML (default: built-in boutique)");
    app_.add_option("--port-base", globals_.port_base, "First host port for plugin sandboxes");
    app_.add_option("--seed", globals_.seed, "Default workload seed");
    app_.add_option("--step", globals_.step, "Default metric step in seconds");
    app_.add_option("--tolerance", globals_.tolerance, "Default event tolerance in steps");
    app_.add_option("--now", globals_.now, "Current simulated time (epoch seconds) for calendar operations");
    app_.add_flag("--json", globals_.json, "Machine-readable output");

    build_topology();
    build_faults();
    build_simulate();
    build_dataset();
    build_plugin();
    build_experiment();
    build_scenario();
    build_board();

    auto* serve = app_.add_subcommand("serve", "Start the REST API");
    serve->add_option("--bind", globals_.bind, "host:port (default 127.0.0.1:8080)");
    serve->callback([this] {
      action_ = [this] { servo::serve(ws(), ws().config().bind); };
    });
  }

  void build_topology() {
    auto* topo = app_.add_subcommand("topology", "Service topology")->require_subcommand(1);
    auto* validate_cmd = topo->add_subcommand("validate", "Validate a topology file");
    validate_cmd->add_option("file", topology_file_, "Topology YAML")->required();
    validate_cmd->callback([this] {
      action_ = [this] {
        const auto t = load_topology_file(topology_file_);
        json doc{{"valid", true},
                 {"services", t.services().size()},
                 {"pods", t.pods().size()},
                 {"nodes", t.nodes().size()},
                 {"edges", t.edges().size()}};
        std::ostringstream text;
        text << "valid topology: " << t.services().size() << " services, " << t.pods().size()
             << " pods, " << t.nodes().size() << " nodes, " << t.edges().size() << " edges\n";
        emit(doc, text.str());
      };
    });
    auto* show = topo->add_subcommand("show", "Print the active topology as YAML");
    show->callback([this] { action_ = [this] { out_ << dump_topology(topology_from({})) << '\n'; }; });
  }

  void build_faults() {
    auto* faults = app_.add_subcommand("faults", "Fault calendar")->require_subcommand(1);

    auto* plan = faults->add_subcommand("plan", "Check or schedule a fault plan file");
    plan->add_option("file", plan_file_, "Fault plan YAML")->required();
    plan->add_flag("--check", check_only_, "Validate only; leave the calendar untouched");
    plan->callback([this] {
      action_ = [this] {
        const auto planned = load_fault_plan_file(plan_file_);
        if (check_only_) {
          const auto now = globals_.now.value_or(kDefaultClockStart);
          const auto cal = build_calendar(planned, topology_from({}), now);
          json doc{{"valid", true}, {"faults", cal.size()}};
          emit(doc, "plan ok: " + std::to_string(cal.size()) + " faults\n");
          return;
        }
        json ids = json::array();
        for (const auto& p : planned) ids.push_back(ws().schedule_fault(p.fault, p.mode).fault.id);
        std::string text;
        for (const auto& id : ids) text += "scheduled " + id.get<std::string>() + "\n";
        emit({{"scheduled", ids}}, text);
      };
    });

    auto* add = faults->add_subcommand("add", "Schedule one fault");
    add->add_option("--id", fault_id_, "Fault id (default: next free fault-<n>)");
    add->add_option("--type", fault_type_, "Fault type, e.g. CpuStress")->required();
    add->add_option("--target", fault_target_, "Pod cmdb_id or service name")->required();
    add->add_option("--start", fault_start_, "Start time (epoch seconds); omitted means immediate");
    add->add_option("--duration", fault_duration_, "Duration in seconds")->required();
    add->add_option("--param", fault_params_, "Parameter name=value (repeatable)");
    add->add_option("--mode", fault_mode_, "immediate or scheduled");
    add->callback([this] {
      action_ = [this] {
        json body{{"type", fault_type_}, {"target", fault_target_}, {"duration", fault_duration_}};
        if (!fault_id_.empty()) body["id"] = fault_id_;
        if (fault_start_) body["start"] = *fault_start_;
        if (!fault_mode_.empty()) body["mode"] = fault_mode_;
        json params = json::object();
        for (const auto& p : fault_params_) {
          const auto eq = p.find('=');
          if (eq == std::string::npos)
            throw Error(ErrorCode::InvalidArgument, "--param '" + p + "' must be name=value");
          try {
            params[p.substr(0, eq)] = std::stod(p.substr(eq + 1));
          } catch (const std::exception&) {
            throw Error(ErrorCode::InvalidArgument, "--param '" + p + "' value is not a number");
          }
        }
        body["params"] = params;
        InjectionMode mode;
        auto fault = fault_request(body, mode);
        const auto entry = ws().schedule_fault(std::move(fault), mode);
        emit(calendar_entry_json(entry), "scheduled " + entry.fault.id + "\n");
      };
    });

    auto* list = faults->add_subcommand("list", "List calendar entries");
    list->callback([this] {
      action_ = [this] {
        json doc = json::array();
        std::vector<std::vector<std::string>> rows{{"id", "type", "target", "start", "end", "mode"}};
        const auto calendar = ws().calendar();
        for (const auto& e : calendar.entries()) {
          doc.push_back(calendar_entry_json(e));
          std::string types;
          for (const auto& [t, b] : e.fault.behaviors) types += (types.empty() ? "" : "+") + std::string(to_string(t));
          rows.push_back({e.fault.id, types, e.fault.target, std::to_string(e.fault.start_time),
                          std::to_string(e.fault.end_time()), std::string(to_string(e.mode))});
        }
        emit(doc, table(rows));
      };
    });

    auto* cancel = faults->add_subcommand("cancel", "Cancel a fault that has not started");
    cancel->add_option("id", fault_id_, "Fault id")->required();
    cancel->callback([this] {
      action_ = [this] {
        ws().cancel_fault(fault_id_);
        emit({{"id", fault_id_}, {"cancelled", true}}, "cancelled " + fault_id_ + "\n");
      };
    });
  }

  void build_simulate() {
    auto* sim = app_.add_subcommand("simulate", "Generate telemetry for a clock window");
    sim->add_option("--topology", sim_topology_, "Topology YAML");
    sim->add_option("--plan", sim_plan_, "Fault plan YAML (default: the stored calendar)");
    sim->add_option("--profile", sim_profile_, "Workload profile YAML");
    sim->add_option("--clock", sim_clock_, "Clock YAML (start, step, horizon)");
    sim->add_option("--start", sim_start_, "Clock start (epoch seconds)");
    sim->add_option("--horizon", sim_horizon_, "Clock horizon in seconds");
    sim->add_option("--out", sim_out_, "Output directory");
    sim->add_option("--dataset", sim_dataset_, "Dataset name under the data root");
    sim->add_flag("--overwrite", overwrite_, "Replace an existing output");
    sim->callback([this] {
      action_ = [this] {
        if (sim_out_.empty() == sim_dataset_.empty())
          throw Error(ErrorCode::InvalidArgument, "give exactly one of --out or --dataset");
        SimClock clock{kDefaultClockStart, 1, 600};
        if (!sim_clock_.empty()) clock = load_clock(read_text_file(sim_clock_));
        if (globals_.step) clock.step = *globals_.step;
        if (sim_start_) clock.start = *sim_start_;
        if (sim_horizon_) clock.horizon = *sim_horizon_;
        std::optional<WorkloadProfile> profile;
        if (!sim_profile_.empty()) profile = load_workload_profile(read_text_file(sim_profile_));
        if (globals_.seed) {
          if (!profile) profile = default_workload_profile();
          profile->seed = *globals_.seed;
        }
        std::optional<std::vector<PlannedFault>> plan;
        if (!sim_plan_.empty()) plan = load_fault_plan_file(sim_plan_);

        json summary;
        if (!sim_dataset_.empty()) {
          if (!sim_topology_.empty()) globals_.topology = sim_topology_;
          SimulateRequest request{sim_dataset_, clock, profile, plan, overwrite_};
          summary = ws().simulate(request);
        } else {
          const auto topo = topology_from(sim_topology_);
          std::error_code ec;
          if (fs::exists(sim_out_) && !fs::is_empty(sim_out_, ec)) {
            if (!overwrite_)
              throw Error(ErrorCode::DuplicateId, "output directory " + sim_out_ + " is not empty");
            fs::remove_all(sim_out_, ec);
          }
          if (!profile) {
            profile = default_workload_profile();
            profile->seed = config().seed;
          }
          const auto calendar = plan ? build_calendar(*plan, topo, clock.start) : FaultCalendar{};
          const auto batch = run_simulation(topo, *profile, calendar, clock);
          export_csv(batch, sim_out_);
          summary = dataset_summary(fs::path(sim_out_).filename().string(), batch);
          summary["path"] = sim_out_;
        }
        std::ostringstream text;
        text << "dataset " << summary["name"].get<std::string>() << ": [" << summary["start"] << ", "
             << summary["end"] << ") step " << summary["step"] << ", " << summary["metric_rows"]
             << " metric rows, " << summary["log_rows"] << " log rows, " << summary["span_rows"]
             << " spans, " << summary["cases"] << " cases\n";
        emit(summary, text.str());
      };
    });
  }

  void build_dataset() {
    auto* ds = app_.add_subcommand("dataset", "Datasets")->require_subcommand(1);
    auto* sl = ds->add_subcommand("slice", "Cut a window out of an exported dataset");
    sl->add_option("--in", slice_in_, "Input dataset directory")->required();
    sl->add_option("--window", window_, "start:end[:step]")->required();
    sl->add_option("--modalities", modalities_, "Comma-separated: metrics,logs,traces");
    sl->add_option("--out", slice_out_, "Output directory")->required();
    sl->callback([this] {
      action_ = [this] {
        const auto batch = import_csv(slice_in_);
        const auto window = parse_window(window_, batch.step, modalities_);
        const auto part = slice(batch, window);
        export_csv(part, slice_out_);
        auto summary = dataset_summary(fs::path(slice_out_).filename().string(), part);
        emit(summary, "sliced " + std::to_string(part.metrics.size()) + " metric rows, " +
                          std::to_string(part.logs.size()) + " log rows, " +
                          std::to_string(part.spans.size()) + " spans into " + slice_out_ + "\n");
      };
    });
    auto* list = ds->add_subcommand("list", "List datasets under the data root");
    list->callback([this] {
      action_ = [this] {
        json doc = ws().datasets();
        std::vector<std::vector<std::string>> rows{{"name", "start", "end", "step"}};
        for (const auto& d : doc)
          rows.push_back({d["name"], d.value("start", json()).dump(), d.value("end", json()).dump(),
                          d.value("step", json()).dump()});
        emit(doc, table(rows));
      };
    });
  }

  void build_plugin() {
    auto* plugin = app_.add_subcommand("plugin", "Algorithm plugins")->require_subcommand(1);
    auto* deploy = plugin->add_subcommand("deploy", "Deploy a bundle (directory or .tar)");
    deploy->add_option("bundle", bundle_, "Bundle path")->required();
    deploy->add_option("--id", plugin_id_, "Instance id (default: manifest name)");
    deploy->callback([this] {
      action_ = [this] {
        const auto i = ws().plugins().deploy(bundle_, plugin_id_);
        emit(to_json(i), "deployed " + i.id + " on " + i.endpoint.host + ":" +
                             std::to_string(i.endpoint.port) + "\n");
      };
    });
    auto* list = plugin->add_subcommand("list", "List plugin instances");
    list->callback([this] {
      action_ = [this] {
        json doc = json::array();
        std::vector<std::vector<std::string>> rows{{"id", "state", "port", "name", "task", "mode", "metric"}};
        for (const auto& i : ws().plugins().list()) {
          doc.push_back(to_json(i));
          rows.push_back({i.id, std::string(to_string(i.state)), std::to_string(i.endpoint.port),
                          i.manifest.name, std::string(to_string(i.manifest.task_type)),
                          std::string(to_string(i.manifest.mode)),
                          std::string(to_string(i.manifest.metric_kind))});
        }
        emit(doc, table(rows));
      };
    });
    auto lifecycle = [this, plugin](const char* name, const char* help, auto op) {
      auto* cmd = plugin->add_subcommand(name, help);
      cmd->add_option("id", plugin_id_, "Instance id")->required();
      cmd->callback([this, op, name] {
        action_ = [this, op, name] {
          op(ws().plugins(), plugin_id_);
          const auto i = ws().plugins().get(plugin_id_);
          emit(to_json(i), std::string(name) + ": " + i.id + " is " + std::string(to_string(i.state)) + "\n");
        };
      });
    };
    lifecycle("restart", "Restart a plugin", [](PluginController& c, const std::string& id) { c.restart(id); });
    lifecycle("stop", "Stop a plugin", [](PluginController& c, const std::string& id) { c.stop(id); });
    lifecycle("rm", "Remove a plugin and its sandbox", [](PluginController& c, const std::string& id) { c.remove(id); });

    auto* clear = plugin->add_subcommand("clear", "Remove an experiment's temporary files");
    clear->add_option("id", plugin_id_, "Instance id")->required();
    clear->add_option("experiment", experiment_id_, "Experiment id")->required();
    clear->callback([this] {
      action_ = [this] {
        ws().plugins().clear(plugin_id_, experiment_id_);
        emit({{"id", plugin_id_}, {"cleared", experiment_id_}}, "cleared " + experiment_id_ + "\n");
      };
    });
  }

  void build_experiment() {
    auto* exp = app_.add_subcommand("experiment", "Experiments")->require_subcommand(1);
    auto* run = exp->add_subcommand("run", "Run one phase of a plugin on a dataset window");
    run->add_option("--plugin", plugin_id_, "Plugin instance id")->required();
    run->add_option("--dataset", dataset_, "Dataset name")->required();
    run->add_option("--window", window_, "start:end[:step]")->required();
    run->add_option("--modalities", modalities_, "Comma-separated modalities");
    run->add_option("--phase", phase_, "train, test or run")->required();
    run->add_option("--id", experiment_id_, "Experiment id (default: next exp-<n>)");
    run->callback([this] {
      action_ = [this] {
        const auto window = parse_window(window_, ws().config().step, modalities_);
        json body{{"plugin", plugin_id_}, {"dataset", dataset_}, {"window", to_json(window)}, {"phase", phase_}};
        if (!experiment_id_.empty()) body["experiment_id"] = experiment_id_;
        std::string dataset;
        const auto request = experiment_request(body, dataset);
        const auto result = ws().plugins().run_experiment(request, ws().load_dataset(dataset));
        std::ostringstream text;
        text << "experiment " << result.experiment_id << " " << to_string(result.phase) << " ok in "
             << std::fixed << std::setprecision(2) << result.wall_time << " s";
        if (!result.payload_hash.empty()) text << ", payload sha256 " << result.payload_hash;
        text << '\n';
        emit(to_json(result), text.str());
      };
    });
    auto* show = exp->add_subcommand("show", "Print a stored experiment result");
    show->add_option("id", experiment_id_, "Experiment id")->required();
    show->callback([this] {
      action_ = [this] {
        const auto r = ws().plugins().result(experiment_id_);
        if (!r) throw Error(ErrorCode::UnknownExperiment, "unknown experiment '" + experiment_id_ + "'");
        out_ << to_json(*r).dump(2) << '\n';
      };
    });
  }

  void build_scenario() {
    auto* sc = app_.add_subcommand("scenario", "Evaluation scenarios")->require_subcommand(1);
    auto* add = sc->add_subcommand("add", "Register a scenario from YAML");
    add->add_option("file", scenario_file_, "Scenario YAML")->required();
    add->callback([this] {
      action_ = [this] {
        const auto s = ws().add_scenario(parse_scenario(read_text_file(scenario_file_)));
        emit(to_json(s), "added scenario " + s.name + "\n");
      };
    });
    auto* list = sc->add_subcommand("list", "List scenarios");
    list->callback([this] {
      action_ = [this] {
        json doc = json::array();
        std::vector<std::vector<std::string>> rows{{"name", "task", "dataset", "window"}};
        for (const auto& s : ws().scenarios()) {
          doc.push_back(to_json(s));
          rows.push_back({s.name, std::string(to_string(s.task_type)), s.dataset,
                          std::to_string(s.window.start) + ":" + std::to_string(s.window.end) + ":" +
                              std::to_string(s.window.step)});
        }
        emit(doc, table(rows));
      };
    });
  }

  void build_board() {
    auto* board = app_.add_subcommand("board", "Leaderboards")->require_subcommand(1);
    auto* create = board->add_subcommand("create", "Run plugins on a scenario and create a board");
    create->add_option("--id", board_id_, "Board id")->required();
    create->add_option("--scenario", scenario_name_, "Scenario name")->required();
    create->add_option("--plugin", plugins_, "Plugin instance id (repeatable)");
    create->add_option("--metric", metrics_, "Metric kind (repeatable)")->required();
    create->add_option("--primary", primary_, "Primary metric for sorting");
    create->add_option("--k-max", k_max_, "Largest k for @k metrics");
    create->callback([this] {
      action_ = [this] {
        json body{{"id", board_id_}, {"scenario", scenario_name_}, {"plugins", plugins_},
                  {"metrics", metrics_}, {"k_max", k_max_}};
        if (!primary_.empty()) body["primary_metric"] = primary_;
        const auto b = ws().boards().create_leaderboard(board_request(body, ws()));
        emit(to_json(b), render_table(b));
      };
    });
    auto* add = board->add_subcommand("add", "Evaluate one more plugin on an existing board");
    add->add_option("board", board_id_, "Board id")->required();
    add->add_option("plugin", plugin_id_, "Plugin instance id")->required();
    add->callback([this] {
      action_ = [this] {
        const auto b = ws().boards().add_algorithm(board_id_, plugin_id_);
        emit(to_json(b), render_table(b));
      };
    });
    auto* show = board->add_subcommand("show", "Print a board as a table");
    show->add_option("board", board_id_, "Board id")->required();
    show->callback([this] {
      action_ = [this] {
        const auto b = ws().boards().get(board_id_);
        emit(to_json(b), render_table(b));
      };
    });
    auto* exp = board->add_subcommand("export", "Write a board as one JSON document");
    exp->add_option("board", board_id_, "Board id")->required();
    exp->add_option("--out", export_out_, "Output file (default: stdout)");
    exp->callback([this] {
      action_ = [this] {
        const auto doc = to_json(ws().boards().get(board_id_));
        if (export_out_.empty()) {
          out_ << doc.dump(2) << '\n';
        } else {
          write_json_atomic(export_out_, doc);
          emit({{"board", board_id_}, {"path", export_out_}}, "wrote " + export_out_ + "\n");
        }
      };
    });
    auto* list = board->add_subcommand("list", "List board ids");
    list->callback([this] {
      action_ = [this] {
        const auto ids = ws().boards().ids();
        std::string text;
        for (const auto& id : ids) text += id + "\n";
        emit(ids, text);
      };
    });
  }

  CLI::App app_;
  std::ostream& out_;
  std::ostream& err_;
  Getenv getenv_;
  Globals globals_;
  std::function<void()> action_;
  std::unique_ptr<Workspace> ws_;

  std::string topology_file_, plan_file_, fault_id_, fault_type_, fault_target_, fault_mode_;
  std::optional<std::int64_t> fault_start_;
  std::int64_t fault_duration_ = 0;
  std::vector<std::string> fault_params_;
  bool check_only_ = false;
  std::string sim_topology_, sim_plan_, sim_profile_, sim_clock_, sim_out_, sim_dataset_;
  std::optional<std::int64_t> sim_start_, sim_horizon_;
  bool overwrite_ = false;
  std::string slice_in_, slice_out_, window_, modalities_;
  std::string bundle_, plugin_id_, experiment_id_, dataset_, phase_;
  std::string scenario_file_, scenario_name_, board_id_, primary_, export_out_;
  std::vector<std::string> plugins_, metrics_;
  int k_max_ = 5;
};

void collect(const CLI::App* app, const std::string& prefix, std::vector<std::string>& out) {
  for (const auto* sub : app->get_subcommands([](const CLI::App*) { return true; })) {
    const auto path = prefix.empty() ? sub->get_name() : prefix + " " + sub->get_name();
    out.push_back(path);
    collect(sub, path, out);
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const Getenv& getenv) {
  Cli cli(out, err, getenv);
  return cli.run(args);
}

std::vector<std::string> cli_command_paths() {
  std::ostringstream sink;
  Cli cli(sink, sink, [](const char*) -> const char* { return nullptr; });
  std::vector<std::string> out;
  collect(&cli.app(), "", out);
  return out;
}

}  // namespace servo
