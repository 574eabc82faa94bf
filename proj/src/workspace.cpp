// SPDX-License-Identifier: Apache-2.0

#include "servo/workspace.hpp"

#include <yaml-cpp/yaml.h>

#include <chrono>
#include <regex>

#include "servo/error.hpp"
#include "servo/json_store.hpp"

namespace servo {

using nlohmann::json;

namespace {

const std::regex kIdentifier("[A-Za-z0-9][A-Za-z0-9_.-]*");

std::int64_t system_now() {
  return std::chrono::duration_cast<std::chrono::seconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

template <typename T>
T parse_number(const std::string& text, const char* what) {
  try {
    std::size_t used = 0;
    T value;
    if constexpr (std::is_floating_point_v<T>) {
      value = static_cast<T>(std::stod(text, &used));
    } else if constexpr (std::is_unsigned_v<T>) {
      value = static_cast<T>(std::stoull(text, &used));
    } else {
      value = static_cast<T>(std::stoll(text, &used));
    }
    if (used == text.size()) return value;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::InvalidArgument, std::string(what) + ": '" + text + "' is not a number");
}

}  // namespace

std::vector<std::string> validate(const WorkspaceConfig& c) {
  std::vector<std::string> v;
  if (c.data_root.empty()) v.push_back("data_root: required");
  if (c.plugin_root.empty()) v.push_back("plugin_root: required");
  if (c.board_store.empty()) v.push_back("board_store: required");
  if (c.port_base < 1024 || c.port_base > 65000) v.push_back("port_base: must be in [1024, 65000]");
  if (c.step < 1) v.push_back("step: must be >= 1");
  if (c.tolerance < 0) v.push_back("tolerance: must be >= 0");
  if (c.bind.rfind(':') == std::string::npos) v.push_back("bind: expected host:port");
  if (!(c.startup_timeout_s > 0.0)) v.push_back("startup_timeout: must be > 0");
  if (!(c.phase_timeout_s > 0.0)) v.push_back("phase_timeout: must be > 0");
  return v;
}

WorkspaceConfig merge_config_file(WorkspaceConfig c, const std::string& document) {
  try {
    const auto root = YAML::Load(document);
    if (root.IsNull()) return c;
    if (const auto paths = root["paths"]) {
      if (paths["data_root"]) c.data_root = paths["data_root"].as<std::string>();
      if (paths["plugin_root"]) c.plugin_root = paths["plugin_root"].as<std::string>();
      if (paths["board_store"]) c.board_store = paths["board_store"].as<std::string>();
    }
    if (root["bind"]) c.bind = root["bind"].as<std::string>();
    if (root["topology"]) c.topology_file = root["topology"].as<std::string>();
    if (const auto d = root["defaults"]) {
      if (d["step"]) c.step = d["step"].as<std::int64_t>();
      if (d["tolerance"]) c.tolerance = d["tolerance"].as<int>();
      if (d["port_base"]) c.port_base = d["port_base"].as<int>();
      if (d["seed"]) c.seed = d["seed"].as<std::uint64_t>();
    }
    if (const auto t = root["timeouts"]) {
      if (t["startup_s"]) c.startup_timeout_s = t["startup_s"].as<double>();
      if (t["phase_s"]) c.phase_timeout_s = t["phase_s"].as<double>();
    }
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::ParseError, std::string("config: ") + e.what());
  }
  return c;
}

WorkspaceConfig merge_environment(WorkspaceConfig c,
                                  const std::function<const char*(const char*)>& getenv) {
  auto get = [&](const char* name) -> std::optional<std::string> {
    const char* v = getenv(name);
    if (v == nullptr || *v == '\0') return std::nullopt;
    return std::string(v);
  };
  if (auto v = get("SERVO_DATA_ROOT")) c.data_root = *v;
  if (auto v = get("SERVO_PLUGIN_ROOT")) c.plugin_root = *v;
  if (auto v = get("SERVO_BOARD_STORE")) c.board_store = *v;
  if (auto v = get("SERVO_BIND")) c.bind = *v;
  if (auto v = get("SERVO_TOPOLOGY")) c.topology_file = *v;
  if (auto v = get("SERVO_STEP")) c.step = parse_number<std::int64_t>(*v, "SERVO_STEP");
  if (auto v = get("SERVO_TOLERANCE")) c.tolerance = parse_number<int>(*v, "SERVO_TOLERANCE");
  if (auto v = get("SERVO_PORT_BASE")) c.port_base = parse_number<int>(*v, "SERVO_PORT_BASE");
  if (auto v = get("SERVO_SEED")) c.seed = parse_number<std::uint64_t>(*v, "SERVO_SEED");
  if (auto v = get("SERVO_STARTUP_TIMEOUT"))
    c.startup_timeout_s = parse_number<double>(*v, "SERVO_STARTUP_TIMEOUT");
  if (auto v = get("SERVO_PHASE_TIMEOUT"))
    c.phase_timeout_s = parse_number<double>(*v, "SERVO_PHASE_TIMEOUT");
  return c;
}

json to_json(const WorkspaceConfig& c) {
  return {{"paths",
           {{"data_root", c.data_root.string()},
            {"plugin_root", c.plugin_root.string()},
            {"board_store", c.board_store.string()}}},
          {"bind", c.bind},
          {"topology", c.topology_file},
          {"defaults",
           {{"step", c.step}, {"tolerance", c.tolerance}, {"port_base", c.port_base}, {"seed", c.seed}}},
          {"timeouts", {{"startup_s", c.startup_timeout_s}, {"phase_s", c.phase_timeout_s}}}};
}

json dataset_summary(const std::string& name, const TelemetryBatch& batch) {
  return {{"name", name},
          {"start", batch.start},
          {"end", batch.end},
          {"step", batch.step},
          {"metric_rows", batch.metrics.size()},
          {"log_rows", batch.logs.size()},
          {"span_rows", batch.spans.size()},
          {"cases", batch.ground_truth.cases.size()},
          {"content_hash", content_hash(batch)}};
}

Workspace::Workspace(WorkspaceConfig config, Clock now)
    : config_(std::move(config)), now_(now ? std::move(now) : Clock(system_now)) {
  if (auto v = validate(config_); !v.empty())
    throw Error(ErrorCode::ValidationError, "config invalid: " + v.front(), v);
  std::error_code ec;
  fs::create_directories(config_.data_root, ec);
  fs::create_directories(config_.board_store / "scenarios", ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create workspace directories: " + ec.message());
  ControllerConfig cc;
  cc.root = config_.plugin_root;
  cc.port_base = config_.port_base;
  cc.startup_timeout_s = config_.startup_timeout_s;
  cc.phase_timeout_s = config_.phase_timeout_s;
  controller_ = std::make_unique<PluginController>(cc);
  store_ = std::make_unique<JsonBoardStore>(config_.board_store);
  boards_ = std::make_unique<LeaderboardService>(
      *controller_, *store_, [this](const std::string& name) { return load_dataset(name); });
}

const ServiceTopology& Workspace::topology() {
  std::lock_guard lock(mutex_);
  if (!topology_)
    topology_ = config_.topology_file.empty() ? default_boutique_topology()
                                              : load_topology_file(config_.topology_file);
  return *topology_;
}

fs::path Workspace::calendar_path() const { return config_.board_store / "calendar.json"; }

FaultCalendar Workspace::calendar() const {
  std::lock_guard lock(mutex_);
  const auto doc = read_json(calendar_path());
  return doc ? calendar_from_json(*doc) : FaultCalendar{};
}

CalendarEntry Workspace::schedule_fault(FaultDefinition fault, InjectionMode mode) {
  const auto& topo = topology();
  if (auto v = validate_fault(fault, topo); !v.empty())
    throw Error(ErrorCode::InvalidCalendar, "fault invalid: " + v.front(), v);
  std::lock_guard lock(mutex_);
  const auto doc = read_json(calendar_path());
  auto cal = doc ? calendar_from_json(*doc) : FaultCalendar{};
  const auto id = cal.schedule(std::move(fault), mode, now_());
  write_json_atomic(calendar_path(), to_json(cal));
  return *cal.find(id);
}

void Workspace::cancel_fault(const std::string& id) {
  std::lock_guard lock(mutex_);
  const auto doc = read_json(calendar_path());
  auto cal = doc ? calendar_from_json(*doc) : FaultCalendar{};
  cal.cancel(id, now_());
  write_json_atomic(calendar_path(), to_json(cal));
}

fs::path Workspace::dataset_dir(const std::string& name) const {
  if (!std::regex_match(name, kIdentifier))
    throw Error(ErrorCode::InvalidArgument, "dataset name '" + name + "' is not an identifier");
  return config_.data_root / name;
}

json Workspace::simulate(const SimulateRequest& request) {
  const auto dir = dataset_dir(request.dataset);
  if (fs::exists(dir) && !request.overwrite)
    throw Error(ErrorCode::DuplicateId, "dataset '" + request.dataset + "' already exists");
  const auto& topo = topology();
  auto profile = request.profile.value_or(default_workload_profile());
  if (!request.profile) profile.seed = config_.seed;
  const auto cal = request.plan ? build_calendar(*request.plan, topo, request.clock.start) : calendar();
  const auto batch = run_simulation(topo, profile, cal, request.clock);
  std::error_code ec;
  fs::remove_all(dir, ec);
  export_csv(batch, dir);
  {
    std::lock_guard lock(mutex_);
    cache_.erase(request.dataset);
  }
  return dataset_summary(request.dataset, batch);
}

std::vector<json> Workspace::datasets() const {
  std::vector<json> out;
  std::error_code ec;
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(config_.data_root, ec))
    if (e.is_directory() && fs::exists(e.path() / "dataset.json")) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  for (const auto& d : dirs) {
    auto meta = read_json(d / "dataset.json");
    if (!meta) continue;
    json entry{{"name", d.filename().string()}};
    for (const char* key : {"start", "end", "step"})
      if (meta->contains(key)) entry[key] = (*meta)[key];
    out.push_back(std::move(entry));
  }
  return out;
}

TelemetryBatch Workspace::load_dataset(const std::string& name) {
  const auto dir = dataset_dir(name);
  const auto meta = dir / "dataset.json";
  std::error_code ec;
  const auto stamp = fs::last_write_time(meta, ec);
  if (ec) throw Error(ErrorCode::UnknownDataset, "unknown dataset '" + name + "'");
  {
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(name); it != cache_.end() && it->second.first == stamp)
      return *it->second.second;
  }
  auto batch = std::make_shared<const TelemetryBatch>(import_csv(dir));
  std::lock_guard lock(mutex_);
  cache_[name] = {stamp, batch};
  return *batch;
}

Scenario Workspace::add_scenario(const Scenario& scenario) {
  if (auto v = validate(scenario); !v.empty())
    throw Error(ErrorCode::ValidationError, "scenario invalid: " + v.front(), v);
  std::lock_guard lock(mutex_);
  const auto path = config_.board_store / "scenarios" / (scenario.name + ".json");
  if (fs::exists(path))
    throw Error(ErrorCode::DuplicateId, "scenario '" + scenario.name + "' already exists");
  write_json_atomic(path, to_json(scenario));
  return scenario;
}

std::vector<Scenario> Workspace::scenarios() const {
  std::lock_guard lock(mutex_);
  std::vector<fs::path> files;
  std::error_code ec;
  for (const auto& e : fs::directory_iterator(config_.board_store / "scenarios", ec))
    if (e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<Scenario> out;
  for (const auto& f : files)
    if (auto doc = read_json(f)) out.push_back(scenario_from_json(*doc));
  return out;
}

Scenario Workspace::scenario(const std::string& name) const {
  std::lock_guard lock(mutex_);
  std::optional<json> doc;
  if (std::regex_match(name, kIdentifier))
    doc = read_json(config_.board_store / "scenarios" / (name + ".json"));
  if (!doc) throw Error(ErrorCode::UnknownScenario, "unknown scenario '" + name + "'");
  return scenario_from_json(*doc);
}

}  // namespace servo
