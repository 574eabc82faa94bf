// SPDX-License-Identifier: Apache-2.0

#include "servo/plugin.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>
#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <regex>
#include <set>
#include <thread>

#include "httplib.h"
#include "servo/error.hpp"
#include "servo/hash.hpp"
#include "servo/json_store.hpp"
#include "servo/payload.hpp"

extern char** environ;

namespace servo {

using nlohmann::json;

namespace {

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

bool starts_with(std::string_view s, std::string_view prefix) {
  return s.substr(0, prefix.size()) == prefix;
}

json yaml_scalar(const YAML::Node& node) {
  const auto text = node.Scalar();
  if (node.Tag() == "!") return text;  // quoted
  try {
    std::size_t used = 0;
    const auto i = std::stoll(text, &used);
    if (used == text.size()) return i;
  } catch (...) {
  }
  try {
    std::size_t used = 0;
    const auto d = std::stod(text, &used);
    if (used == text.size()) return d;
  } catch (...) {
  }
  if (text == "true") return true;
  if (text == "false") return false;
  return text;
}

// Runs argv to completion; returns the exit status (or -1) and captures
// combined output.
int run_process(const std::vector<std::string>& argv, std::string& output) {
  int fds[2];
  if (::pipe(fds) != 0) return -1;
  std::vector<char*> args;
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);
  const pid_t pid = ::fork();
  if (pid < 0) return -1;
  if (pid == 0) {
    ::dup2(fds[1], 1);
    ::dup2(fds[1], 2);
    ::close(fds[0]);
    ::close(fds[1]);
    ::execvp(args[0], args.data());
    ::_exit(127);
  }
  ::close(fds[1]);
  char buffer[4096];
  ssize_t n;
  while ((n = ::read(fds[0], buffer, sizeof(buffer))) > 0) output.append(buffer, n);
  ::close(fds[0]);
  int status = 0;
  ::waitpid(pid, &status, 0);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

bool process_alive(std::int64_t pid) {
  if (pid <= 0) return false;
  int status = 0;
  const auto r = ::waitpid(static_cast<pid_t>(pid), &status, WNOHANG);
  if (r == pid) return false;
  if (r == 0) return true;
  if (::kill(static_cast<pid_t>(pid), 0) != 0) return false;
  std::ifstream stat("/proc/" + std::to_string(pid) + "/stat");
  std::string content;
  std::getline(stat, content);
  const auto close_paren = content.rfind(')');
  return close_paren == std::string::npos || close_paren + 2 >= content.size() ||
         content[close_paren + 2] != 'Z';
}

// Test and run deliveries carry no labels; cases keep only id and span.
TelemetryBatch masked(TelemetryBatch batch) {
  batch.ground_truth.labels.clear();
  for (auto& c : batch.ground_truth.cases) {
    c.fault_type.clear();
    c.root_cause.clear();
    c.service.clear();
  }
  return batch;
}

const std::regex kIdentifier("[A-Za-z0-9][A-Za-z0-9_.-]*");

}  // namespace

std::string_view to_string(DeploymentMode mode) noexcept {
  return mode == DeploymentMode::Online ? "online" : "batch";
}

DeploymentMode parse_deployment_mode(std::string_view text) {
  if (text == "online") return DeploymentMode::Online;
  if (text == "batch") return DeploymentMode::Batch;
  throw Error(ErrorCode::ParseError, "unknown deployment mode '" + std::string(text) + "'");
}

std::string_view to_string(PluginState state) noexcept {
  switch (state) {
    case PluginState::Created: return "Created";
    case PluginState::Running: return "Running";
    case PluginState::Stopped: return "Stopped";
    case PluginState::Deleted: return "Deleted";
  }
  return "Created";
}

PluginState parse_plugin_state(std::string_view text) {
  for (auto s : {PluginState::Created, PluginState::Running, PluginState::Stopped,
                 PluginState::Deleted})
    if (to_string(s) == text) return s;
  throw Error(ErrorCode::ParseError, "unknown plugin state '" + std::string(text) + "'");
}

bool legal_transition(PluginState from, PluginState to) noexcept {
  switch (from) {
    case PluginState::Created:
      return to == PluginState::Running || to == PluginState::Deleted;
    case PluginState::Running:
      return to == PluginState::Stopped || to == PluginState::Deleted;
    case PluginState::Stopped:
      return to == PluginState::Running || to == PluginState::Deleted;
    case PluginState::Deleted: return false;
  }
  return false;
}

std::string_view to_string(Phase phase) noexcept {
  switch (phase) {
    case Phase::Train: return "train";
    case Phase::Test: return "test";
    case Phase::Run: return "run";
  }
  return "run";
}

Phase parse_phase(std::string_view text) {
  if (text == "train") return Phase::Train;
  if (text == "test") return Phase::Test;
  if (text == "run") return Phase::Run;
  throw Error(ErrorCode::ParseError, "unknown phase '" + std::string(text) + "'");
}

std::vector<std::string> validate(const PluginManifest& m) {
  std::vector<std::string> v;
  if (!std::regex_match(m.name, kIdentifier)) v.push_back("name: must be an identifier");
  if (!compatible(m.task_type, m.metric_kind))
    v.push_back("metric_kind: " + std::string(to_string(m.metric_kind)) +
                " is not compatible with task_type " + std::string(to_string(m.task_type)));
  if (m.entry.empty() || m.entry.front().empty()) v.push_back("entry: must name a program");
  if (!m.config.is_object()) {
    v.push_back("config: must be a mapping");
    return v;
  }
  for (const auto& [key, value] : m.config.items()) {
    const bool is_dir = ends_with(key, "_dir");
    const bool is_path = ends_with(key, "_path");
    if (value.is_structured()) {
      v.push_back("config." + key + ": values must be scalars");
      continue;
    }
    if (!is_dir && !is_path) continue;
    if (!value.is_string()) {
      v.push_back("config." + key + ": path value must be a string");
      continue;
    }
    const auto& path = value.get_ref<const std::string&>();
    const bool absolute =
        starts_with(path, "/") || starts_with(path, std::string(kSandboxDirVar) + "/");
    if (!absolute) v.push_back("config." + key + ": path must be absolute, got '" + path + "'");
    if (is_path && ends_with(path, "/"))
      v.push_back("config." + key + ": _path keys name files, got a directory");
  }
  return v;
}

PluginManifest parse_manifest(const std::string& document) {
  PluginManifest m;
  std::vector<std::string> problems;
  try {
    const auto root = YAML::Load(document);
    if (!root.IsMap()) throw Error(ErrorCode::ManifestError, "manifest must be a mapping");
    auto text = [&](const char* key) -> std::string {
      if (!root[key]) {
        problems.push_back(std::string(key) + ": missing required key");
        return {};
      }
      return root[key].as<std::string>();
    };
    m.name = text("name");
    auto guarded = [&](const char* key, auto&& parse) {
      const auto value = text(key);
      if (value.empty()) return;
      try {
        parse(value);
      } catch (const Error& e) {
        problems.push_back(std::string(key) + ": " + e.what());
      }
    };
    guarded("task_type", [&](const std::string& s) { m.task_type = parse_task_type(s); });
    guarded("mode", [&](const std::string& s) { m.mode = parse_deployment_mode(s); });
    guarded("metric_kind", [&](const std::string& s) { m.metric_kind = parse_metric_kind(s); });
    if (const auto entry = root["entry"]) {
      if (entry.IsSequence()) {
        for (const auto& a : entry) m.entry.push_back(a.as<std::string>());
      } else {
        m.entry.push_back(entry.as<std::string>());
      }
    }
    if (const auto deps = root["dependencies"])
      for (const auto& d : deps) m.dependencies.push_back(d.as<std::string>());
    if (const auto config = root["config"]) {
      if (!config.IsMap()) {
        problems.push_back("config: must be a mapping");
      } else {
        for (const auto& kv : config) {
          const auto key = kv.first.as<std::string>();
          if (kv.second.IsScalar())
            m.config[key] = yaml_scalar(kv.second);
          else if (kv.second.IsNull())
            m.config[key] = nullptr;
          else
            problems.push_back("config." + key + ": values must be scalars");
        }
      }
    }
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::ManifestError, std::string("manifest: ") + e.what());
  }
  for (auto& v : validate(m))
    if (std::find(problems.begin(), problems.end(), v) == problems.end()) problems.push_back(std::move(v));
  if (!problems.empty())
    throw Error(ErrorCode::ManifestError, "invalid manifest: " + problems.front(), problems);
  return m;
}

json to_json(const PluginManifest& m) {
  return {{"name", m.name},
          {"task_type", to_string(m.task_type)},
          {"mode", to_string(m.mode)},
          {"metric_kind", to_string(m.metric_kind)},
          {"config", m.config},
          {"dependencies", m.dependencies},
          {"entry", m.entry}};
}

PluginManifest manifest_from_json(const json& doc) {
  PluginManifest m;
  m.name = doc.at("name").get<std::string>();
  m.task_type = parse_task_type(doc.at("task_type").get<std::string>());
  m.mode = parse_deployment_mode(doc.at("mode").get<std::string>());
  m.metric_kind = parse_metric_kind(doc.at("metric_kind").get<std::string>());
  m.config = doc.value("config", json::object());
  m.dependencies = doc.value("dependencies", std::vector<std::string>{});
  m.entry = doc.at("entry").get<std::vector<std::string>>();
  return m;
}

json expand_sandbox_paths(const json& config, const fs::path& sandbox_dir) {
  json out = config;
  for (auto& [key, value] : out.items()) {
    if (!value.is_string()) continue;
    const auto& s = value.get_ref<const std::string&>();
    if (starts_with(s, kSandboxDirVar)) value = sandbox_dir.string() + s.substr(kSandboxDirVar.size());
  }
  return out;
}

json to_json(const DatasetWindow& w) {
  json modalities = json::array();
  for (auto m : w.modalities) modalities.push_back(to_string(m));
  return {{"start", w.start}, {"end", w.end}, {"step", w.step}, {"modalities", modalities}};
}

DatasetWindow window_from_json(const json& doc) {
  DatasetWindow w;
  w.start = doc.at("start").get<std::int64_t>();
  w.end = doc.at("end").get<std::int64_t>();
  w.step = doc.value("step", std::int64_t{1});
  if (doc.contains("modalities")) {
    w.modalities.clear();
    for (const auto& m : doc["modalities"]) w.modalities.insert(parse_modality(m.get<std::string>()));
  }
  return w;
}

json to_json(const PluginInstance& i) {
  return {{"id", i.id},
          {"manifest", to_json(i.manifest)},
          {"endpoint", {{"host", i.endpoint.host}, {"port", i.endpoint.port}}},
          {"state", to_string(i.state)},
          {"sandbox_dir", i.sandbox_dir.string()},
          {"handle", {{"pid", i.handle.pid}, {"container", i.handle.container}}},
          {"trained", i.trained}};
}

PluginInstance instance_from_json(const json& doc) {
  PluginInstance i;
  i.id = doc.at("id").get<std::string>();
  i.manifest = manifest_from_json(doc.at("manifest"));
  i.endpoint.host = doc.at("endpoint").at("host").get<std::string>();
  i.endpoint.port = doc.at("endpoint").at("port").get<int>();
  i.state = parse_plugin_state(doc.at("state").get<std::string>());
  i.sandbox_dir = doc.at("sandbox_dir").get<std::string>();
  i.handle.pid = doc.at("handle").value("pid", std::int64_t{0});
  i.handle.container = doc.at("handle").value("container", std::string());
  i.trained = doc.value("trained", false);
  return i;
}

json to_json(const ExperimentResult& r) {
  return {{"experiment_id", r.experiment_id},
          {"plugin_id", r.plugin_id},
          {"algorithm", r.algorithm},
          {"metric_kind", to_string(r.metric_kind)},
          {"phase", to_string(r.phase)},
          {"window", to_json(r.window)},
          {"payload", r.payload},
          {"payload_hash", r.payload_hash},
          {"wall_time", r.wall_time},
          {"status", r.status == ResultStatus::Ok ? "ok" : "failed"},
          {"failure_reason", r.failure_reason}};
}

ExperimentResult result_from_json(const json& doc) {
  ExperimentResult r;
  r.experiment_id = doc.at("experiment_id").get<std::string>();
  r.plugin_id = doc.at("plugin_id").get<std::string>();
  r.algorithm = doc.value("algorithm", std::string());
  r.metric_kind = parse_metric_kind(doc.at("metric_kind").get<std::string>());
  r.phase = parse_phase(doc.at("phase").get<std::string>());
  r.window = window_from_json(doc.at("window"));
  r.payload = doc.value("payload", json());
  r.payload_hash = doc.value("payload_hash", std::string());
  r.wall_time = doc.value("wall_time", 0.0);
  r.status = doc.at("status") == "ok" ? ResultStatus::Ok : ResultStatus::Failed;
  r.failure_reason = doc.value("failure_reason", std::string());
  return r;
}

bool port_available(const std::string& host, int port) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) return false;
  int yes = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  const bool ok = ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0;
  ::close(fd);
  return ok;
}

// ---- ProcessSandbox

SandboxHandle ProcessSandbox::start(const SandboxSpec& spec) {
  if (spec.command.empty()) throw Error(ErrorCode::BundleError, "empty entry command");
  std::error_code ec;
  fs::create_directories(spec.sandbox_dir / "work", ec);
  const auto log_path = (spec.sandbox_dir / "plugin.log").string();
  const auto work_dir = (spec.sandbox_dir / "work").string();

  std::vector<std::string> env_storage;
  std::set<std::string> overridden;
  for (const auto& [k, v] : spec.env) {
    env_storage.push_back(k + "=" + v);
    overridden.insert(k);
  }
  for (char** e = environ; *e != nullptr; ++e) {
    std::string_view entry(*e);
    const auto eq = entry.find('=');
    if (eq != std::string_view::npos && overridden.count(std::string(entry.substr(0, eq)))) continue;
    env_storage.emplace_back(entry);
  }
  std::vector<char*> envp;
  for (auto& e : env_storage) envp.push_back(e.data());
  envp.push_back(nullptr);
  std::vector<std::string> argv_storage = spec.command;
  std::vector<char*> argv;
  for (auto& a : argv_storage) argv.push_back(a.data());
  argv.push_back(nullptr);

  const pid_t pid = ::fork();
  if (pid < 0) throw Error(ErrorCode::IoError, "fork failed");
  if (pid == 0) {
    ::setsid();
    if (::chdir(work_dir.c_str()) != 0) ::_exit(126);
    const int fd = ::open(log_path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
    if (fd >= 0) {
      ::dup2(fd, 1);
      ::dup2(fd, 2);
      ::close(fd);
    }
    const int null_fd = ::open("/dev/null", O_RDONLY);
    if (null_fd >= 0) ::dup2(null_fd, 0);
    ::execve(argv[0], argv.data(), envp.data());
    ::_exit(127);
  }
  return {pid, {}};
}

void ProcessSandbox::stop(const SandboxHandle& handle) {
  if (!process_alive(handle.pid)) return;
  const auto pid = static_cast<pid_t>(handle.pid);
  ::kill(-pid, SIGTERM);
  ::kill(pid, SIGTERM);
  for (int i = 0; i < 100 && process_alive(handle.pid); ++i)
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  if (process_alive(handle.pid)) {
    ::kill(-pid, SIGKILL);
    ::kill(pid, SIGKILL);
    for (int i = 0; i < 100 && process_alive(handle.pid); ++i)
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
}

bool ProcessSandbox::alive(const SandboxHandle& handle) { return process_alive(handle.pid); }

// ---- ContainerSandbox

ContainerSandbox::ContainerSandbox(std::string cli, std::string image, Runner runner)
    : cli_(std::move(cli)), image_(std::move(image)), runner_(std::move(runner)) {
  if (!runner_) runner_ = run_process;
}

std::vector<std::string> ContainerSandbox::run_command(const SandboxSpec& spec) const {
  std::vector<std::string> argv{cli_,
                                "run",
                                "-d",
                                "--name",
                                "servo-" + spec.plugin_id,
                                "-p",
                                spec.endpoint.host + ":" + std::to_string(spec.endpoint.port) +
                                    ":" + std::to_string(kInternalPort),
                                "-v",
                                spec.sandbox_dir.string() + ":/sandbox",
                                "-w",
                                "/sandbox/work"};
  for (const auto& [k, v] : spec.env) {
    argv.push_back("-e");
    argv.push_back(k + "=" + (k == "SERVO_PORT" ? std::to_string(kInternalPort)
                              : k == "SERVO_SANDBOX_DIR" ? std::string("/sandbox")
                                                         : v));
  }
  argv.push_back(image_);
  argv.insert(argv.end(), spec.command.begin(), spec.command.end());
  return argv;
}

SandboxHandle ContainerSandbox::start(const SandboxSpec& spec) {
  std::string output;
  if (runner_(run_command(spec), output) != 0)
    throw Error(ErrorCode::BundleError, "container start failed: " + output);
  while (!output.empty() && std::isspace(static_cast<unsigned char>(output.back()))) output.pop_back();
  return {0, output.empty() ? "servo-" + spec.plugin_id : output};
}

void ContainerSandbox::stop(const SandboxHandle& handle) {
  std::string output;
  runner_({cli_, "rm", "-f", handle.container}, output);
}

bool ContainerSandbox::alive(const SandboxHandle& handle) {
  std::string output;
  if (runner_({cli_, "inspect", "-f", "{{.State.Running}}", handle.container}, output) != 0)
    return false;
  return output.find("true") != std::string::npos;
}

// ---- PluginController

PluginController::PluginController(ControllerConfig config, std::shared_ptr<SandboxRuntime> runtime)
    : config_(std::move(config)), runtime_(std::move(runtime)) {
  if (!runtime_) runtime_ = std::make_shared<ProcessSandbox>();
  if (config_.port_base < 1024 || config_.port_base > 65000)
    throw Error(ErrorCode::InvalidArgument, "port base must be in [1024, 65000]");
  std::error_code ec;
  fs::create_directories(config_.root / "results", ec);
  fs::create_directories(config_.root / "sandboxes", ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + config_.root.string());
  load();
}

void PluginController::load() {
  const auto doc = read_json(config_.root / "registry.json");
  if (!doc) return;
  try {
    for (const auto& i : doc->at("instances")) {
      auto instance = instance_from_json(i);
      instances_[instance.id] = std::move(instance);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::IoError, std::string("registry.json: ") + e.what());
  }
}

void PluginController::save() const {
  json instances = json::array();
  for (const auto& [id, i] : instances_) instances.push_back(to_json(i));
  write_json_atomic(config_.root / "registry.json", {{"version", 1}, {"instances", instances}});
}

PluginInstance& PluginController::at(const std::string& id) {
  auto it = instances_.find(id);
  if (it == instances_.end()) throw Error(ErrorCode::UnknownPlugin, "unknown plugin '" + id + "'");
  return it->second;
}

const PluginInstance& PluginController::at(const std::string& id) const {
  auto it = instances_.find(id);
  if (it == instances_.end()) throw Error(ErrorCode::UnknownPlugin, "unknown plugin '" + id + "'");
  return it->second;
}

std::mutex& PluginController::plugin_mutex(const std::string& id) {
  std::lock_guard lock(registry_mutex_);
  auto& slot = plugin_mutexes_[id];
  if (!slot) slot = std::make_unique<std::mutex>();
  return *slot;
}

int PluginController::allocate_port() const {
  std::set<int> reserved;
  for (const auto& [id, i] : instances_)
    if (i.state != PluginState::Deleted) reserved.insert(i.endpoint.port);
  for (int port = config_.port_base; port < 65535; ++port)
    if (!reserved.count(port) && port_available(config_.host, port)) return port;
  throw Error(ErrorCode::IoError, "no free port above " + std::to_string(config_.port_base));
}

void PluginController::launch(PluginInstance& instance) {
  if (!port_available(instance.endpoint.host, instance.endpoint.port))
    instance.endpoint.port = allocate_port();
  SandboxSpec spec;
  spec.plugin_id = instance.id;
  spec.bundle_dir = instance.sandbox_dir / "bundle";
  spec.sandbox_dir = instance.sandbox_dir;
  spec.endpoint = instance.endpoint;
  spec.command = instance.manifest.entry;
  if (!fs::path(spec.command.front()).is_absolute())
    spec.command.front() = (spec.bundle_dir / spec.command.front()).string();
  spec.env = {{"SERVO_PORT", std::to_string(instance.endpoint.port)},
              {"SERVO_HOST", instance.endpoint.host},
              {"SERVO_SANDBOX_DIR", instance.sandbox_dir.string()},
              {"SERVO_PLUGIN_ID", instance.id}};
  instance.handle = runtime_->start(spec);

  const auto deadline = std::chrono::steady_clock::now() +
                        std::chrono::duration<double>(config_.startup_timeout_s);
  httplib::Client client(instance.endpoint.host, instance.endpoint.port);
  client.set_connection_timeout(0, 200000);
  client.set_read_timeout(1, 0);
  while (std::chrono::steady_clock::now() < deadline) {
    if (auto res = client.Get("/health"); res && res->status == 200) return;
    if (!runtime_->alive(instance.handle)) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  runtime_->stop(instance.handle);
  const bool exited = !runtime_->alive(instance.handle);
  instance.handle = {};
  throw Error(ErrorCode::StartupTimeout,
              "plugin '" + instance.id + "' did not report healthy on port " +
                  std::to_string(instance.endpoint.port) + " within " +
                  std::to_string(config_.startup_timeout_s) + " s" +
                  (exited ? "" : " (process killed)"));
}

PluginInstance PluginController::deploy(const fs::path& bundle, const std::string& requested_id) {
  std::error_code ec;
  if (!fs::exists(bundle)) throw Error(ErrorCode::BundleError, "bundle " + bundle.string() + " not found");

  // Stage the bundle first so archives can be inspected.
  const auto staging = config_.root / "sandboxes" /
                       (".staging-" + std::to_string(::getpid()) + "-" +
                        std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
  fs::create_directories(staging / "bundle", ec);
  auto cleanup = [&] { fs::remove_all(staging, ec); };
  try {
    if (fs::is_directory(bundle)) {
      fs::copy(bundle, staging / "bundle", fs::copy_options::recursive, ec);
      if (ec) throw Error(ErrorCode::BundleError, "cannot copy bundle: " + ec.message());
    } else {
      std::string output;
      if (run_process({"tar", "-xf", bundle.string(), "-C", (staging / "bundle").string()}, output) != 0)
        throw Error(ErrorCode::BundleError, "cannot unpack bundle: " + output);
    }
    const auto manifest_file = staging / "bundle" / "manifest.yaml";
    if (!fs::exists(manifest_file))
      throw Error(ErrorCode::BundleError, "bundle has no manifest.yaml");
    auto manifest = parse_manifest(read_text_file(manifest_file));
    fs::path entry(manifest.entry.front());
    if (!entry.is_absolute()) entry = staging / "bundle" / entry;
    if (!fs::is_regular_file(entry) || ::access(entry.c_str(), X_OK) != 0)
      throw Error(ErrorCode::BundleError,
                  "entry program '" + manifest.entry.front() + "' missing or not executable");

    std::unique_lock lock(registry_mutex_);
    std::string id = requested_id;
    if (id.empty()) {
      id = manifest.name;
      for (int n = 2; instances_.count(id); ++n) id = manifest.name + "-" + std::to_string(n);
    } else if (!std::regex_match(id, kIdentifier)) {
      throw Error(ErrorCode::InvalidArgument, "plugin id '" + id + "' is not an identifier");
    } else if (instances_.count(id)) {
      throw Error(ErrorCode::DuplicateId, "plugin id '" + id + "' already registered");
    }
    PluginInstance instance;
    instance.id = id;
    instance.sandbox_dir = fs::absolute(config_.root / "sandboxes" / id);
    fs::remove_all(instance.sandbox_dir, ec);
    fs::create_directories(instance.sandbox_dir, ec);
    fs::rename(staging / "bundle", instance.sandbox_dir / "bundle", ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot place sandbox: " + ec.message());
    fs::create_directories(instance.sandbox_dir / "work", ec);
    fs::create_directories(instance.sandbox_dir / "data", ec);
    cleanup();
    manifest.config = expand_sandbox_paths(manifest.config, instance.sandbox_dir);
    instance.manifest = std::move(manifest);
    instance.endpoint = {config_.host, allocate_port()};
    instance.state = PluginState::Created;
    // Reserve the id and port while the server starts.
    instances_[id] = instance;
    lock.unlock();

    try {
      launch(instance);
    } catch (...) {
      std::lock_guard relock(registry_mutex_);
      instances_.erase(id);
      fs::remove_all(instance.sandbox_dir, ec);
      throw;
    }
    instance.state = PluginState::Running;
    std::lock_guard relock(registry_mutex_);
    instances_[id] = instance;
    save();
    return instance;
  } catch (...) {
    cleanup();
    throw;
  }
}

std::vector<PluginInstance> PluginController::list() const {
  std::lock_guard lock(registry_mutex_);
  std::vector<PluginInstance> out;
  for (const auto& [id, i] : instances_) out.push_back(i);
  return out;
}

PluginInstance PluginController::get(const std::string& id) const {
  std::lock_guard lock(registry_mutex_);
  return at(id);
}

void PluginController::stop(const std::string& id) {
  std::lock_guard plugin_lock(plugin_mutex(id));
  PluginInstance instance;
  {
    std::lock_guard lock(registry_mutex_);
    instance = at(id);
  }
  if (!legal_transition(instance.state, PluginState::Stopped))
    throw Error(ErrorCode::IllegalTransition, "cannot stop plugin '" + id + "' in state " +
                                                  std::string(to_string(instance.state)));
  runtime_->stop(instance.handle);
  std::lock_guard lock(registry_mutex_);
  auto& stored = at(id);
  stored.state = PluginState::Stopped;
  stored.handle = {};
  save();
}

void PluginController::restart(const std::string& id) {
  std::lock_guard plugin_lock(plugin_mutex(id));
  PluginInstance instance;
  {
    std::lock_guard lock(registry_mutex_);
    instance = at(id);
  }
  if (instance.state == PluginState::Deleted || instance.state == PluginState::Created)
    throw Error(ErrorCode::IllegalTransition, "cannot restart plugin '" + id + "' in state " +
                                                  std::string(to_string(instance.state)));
  if (instance.state == PluginState::Running) runtime_->stop(instance.handle);
  instance.handle = {};
  {
    std::lock_guard lock(registry_mutex_);
    auto& stored = at(id);
    stored.state = PluginState::Stopped;
    stored.handle = {};
    save();
  }
  launch(instance);
  std::lock_guard lock(registry_mutex_);
  auto& stored = at(id);
  stored.state = PluginState::Running;
  stored.handle = instance.handle;
  stored.endpoint = instance.endpoint;
  save();
}

void PluginController::remove(const std::string& id) {
  std::lock_guard plugin_lock(plugin_mutex(id));
  PluginInstance instance;
  {
    std::lock_guard lock(registry_mutex_);
    instance = at(id);
  }
  if (!legal_transition(instance.state, PluginState::Deleted))
    throw Error(ErrorCode::IllegalTransition, "plugin '" + id + "' is already deleted");
  if (instance.state == PluginState::Running) runtime_->stop(instance.handle);
  std::error_code ec;
  fs::remove_all(instance.sandbox_dir, ec);
  std::lock_guard lock(registry_mutex_);
  auto& stored = at(id);
  stored.state = PluginState::Deleted;
  stored.handle = {};
  stored.endpoint.port = 0;
  save();
}

std::string PluginController::next_experiment_id() const {
  for (int n = 1;; ++n) {
    char id[32];
    std::snprintf(id, sizeof(id), "exp-%06d", n);
    if (!fs::exists(config_.root / "results" / (std::string(id) + ".json"))) return id;
  }
}

void PluginController::persist(const ExperimentResult& result) const {
  write_json_atomic(config_.root / "results" / (result.experiment_id + ".json"), to_json(result));
}

ExperimentResult PluginController::run_experiment(const ExperimentRequest& request,
                                                  const TelemetryBatch& store) {
  std::lock_guard plugin_lock(plugin_mutex(request.plugin_id));
  PluginInstance instance;
  ExperimentResult result;
  {
    std::lock_guard lock(registry_mutex_);
    instance = at(request.plugin_id);
    if (instance.state != PluginState::Running)
      throw Error(ErrorCode::PluginUnreachable, "plugin '" + instance.id + "' is " +
                                                    std::string(to_string(instance.state)));
    const bool online_phase = request.phase == Phase::Train || request.phase == Phase::Test;
    if (online_phase != (instance.manifest.mode == DeploymentMode::Online))
      throw Error(ErrorCode::InvalidArgument,
                  "phase " + std::string(to_string(request.phase)) + " is not available to " +
                      std::string(to_string(instance.manifest.mode)) + "-mode plugins");
    if (request.phase == Phase::Test && !instance.trained)
      throw Error(ErrorCode::PhaseOrderError,
                  "plugin '" + instance.id + "' has no successful train phase yet");
    result.experiment_id = request.experiment_id.empty() ? next_experiment_id() : request.experiment_id;
    if (!std::regex_match(result.experiment_id, kIdentifier))
      throw Error(ErrorCode::InvalidArgument, "experiment id '" + result.experiment_id + "' is not an identifier");
    if (fs::exists(config_.root / "results" / (result.experiment_id + ".json")))
      throw Error(ErrorCode::DuplicateId, "experiment '" + result.experiment_id + "' already exists");
    // Claim the id before releasing the lock.
    result.plugin_id = instance.id;
    result.algorithm = instance.manifest.name;
    result.metric_kind = instance.manifest.metric_kind;
    result.phase = request.phase;
    result.window = request.window;
    result.status = ResultStatus::Failed;
    result.failure_reason = "in progress";
    persist(result);
  }

  const auto started = std::chrono::steady_clock::now();
  auto finish = [&](ResultStatus status, std::string reason) {
    result.status = status;
    result.failure_reason = std::move(reason);
    result.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    persist(result);
  };

  const auto data_dir = instance.sandbox_dir / "data" / result.experiment_id;
  try {
    auto sliced = slice(store, request.window);
    export_csv(request.phase == Phase::Train ? sliced : masked(std::move(sliced)), data_dir);
  } catch (const Error& e) {
    std::error_code ec;
    fs::remove(config_.root / "results" / (result.experiment_id + ".json"), ec);
    throw;
  }

  const json body{{"experiment_id", result.experiment_id},
                  {"data_dir", data_dir.string()},
                  {"config", instance.manifest.config}};
  httplib::Client client(instance.endpoint.host, instance.endpoint.port);
  client.set_connection_timeout(2, 0);
  const auto timeout = std::chrono::duration<double>(config_.phase_timeout_s);
  client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  auto response = client.Post("/" + std::string(to_string(request.phase)), body.dump(),
                              "application/json");
  if (!response) {
    bool live = runtime_->alive(instance.handle);
    for (int i = 0; i < 50 && live; ++i) {
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
      live = runtime_->alive(instance.handle);
    }
    if (!live) {
      {
        std::lock_guard lock(registry_mutex_);
        auto& stored = at(instance.id);
        stored.state = PluginState::Stopped;
        stored.handle = {};
        save();
      }
      finish(ResultStatus::Failed, "plugin process exited during " +
                                       std::string(to_string(request.phase)));
      throw Error(ErrorCode::PluginFailure, "plugin '" + instance.id + "' " + result.failure_reason);
    }
    std::error_code ec;
    fs::remove(config_.root / "results" / (result.experiment_id + ".json"), ec);
    throw Error(ErrorCode::PluginUnreachable,
                "plugin '" + instance.id + "' unreachable: " + httplib::to_string(response.error()));
  }

  json reply;
  try {
    reply = json::parse(response->body);
  } catch (const json::exception&) {
    finish(ResultStatus::Failed, "response is not JSON (HTTP " + std::to_string(response->status) + ")");
    throw Error(ErrorCode::PluginFailure, "plugin '" + instance.id + "': " + result.failure_reason);
  }
  const auto status = reply.value("status", std::string());
  if (response->status != 200 || status != "ok") {
    auto reason = reply.value("reason", std::string());
    if (reason.empty()) reason = "HTTP " + std::to_string(response->status) + " status '" + status + "'";
    finish(ResultStatus::Failed, reason);
    throw Error(ErrorCode::PluginFailure, "plugin '" + instance.id + "' failed: " + reason);
  }

  result.payload = reply.contains("payload") ? reply["payload"] : json();
  if (request.phase != Phase::Train) {
    try {
      if (result.payload.is_null()) throw Error(ErrorCode::SchemaError, "payload: missing required key", {"payload"});
      const auto parsed = parse_result_payload(result.payload, result.metric_kind);
      if (const auto* det = std::get_if<DetectionPayload>(&parsed)) {
        if (det->start != request.window.start || det->end != request.window.end ||
            det->step != request.window.step)
          throw Error(ErrorCode::SchemaError, "window: does not match the requested window",
                      {"window"});
      }
    } catch (const Error& e) {
      const auto path = e.detail().empty() ? std::string("$") : e.detail().front();
      result.payload = json();
      finish(ResultStatus::Failed, std::string("payload invalid: ") + e.what());
      throw Error(ErrorCode::PayloadInvalid, "payload invalid at '" + path + "': " + e.what(), {path});
    }
  }
  result.payload_hash = result.payload.is_null() ? std::string() : sha256_hex(result.payload.dump());
  finish(ResultStatus::Ok, {});
  if (request.phase == Phase::Train) {
    std::lock_guard lock(registry_mutex_);
    at(instance.id).trained = true;
    save();
  }
  return result;
}

void PluginController::clear(const std::string& id, const std::string& experiment_id) {
  std::lock_guard plugin_lock(plugin_mutex(id));
  PluginInstance instance;
  {
    std::lock_guard lock(registry_mutex_);
    instance = at(id);
  }
  if (instance.state != PluginState::Running)
    throw Error(ErrorCode::PluginUnreachable,
                "plugin '" + id + "' is " + std::string(to_string(instance.state)));
  httplib::Client client(instance.endpoint.host, instance.endpoint.port);
  client.set_connection_timeout(2, 0);
  const json body{{"experiment_id", experiment_id},
                  {"data_dir", (instance.sandbox_dir / "data" / experiment_id).string()},
                  {"config", instance.manifest.config}};
  auto response = client.Post("/clear", body.dump(), "application/json");
  if (!response)
    throw Error(ErrorCode::PluginUnreachable,
                "plugin '" + id + "' unreachable: " + httplib::to_string(response.error()));
  std::error_code ec;
  if (!experiment_id.empty() && std::regex_match(experiment_id, kIdentifier))
    fs::remove_all(instance.sandbox_dir / "data" / experiment_id, ec);
}

std::optional<ExperimentResult> PluginController::result(const std::string& experiment_id) const {
  if (!std::regex_match(experiment_id, kIdentifier)) return std::nullopt;
  const auto doc = read_json(config_.root / "results" / (experiment_id + ".json"));
  if (!doc) return std::nullopt;
  return result_from_json(*doc);
}

std::vector<ExperimentResult> PluginController::results() const {
  std::vector<ExperimentResult> out;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(config_.root / "results", ec)) {
    if (entry.path().extension() != ".json") continue;
    if (const auto doc = read_json(entry.path())) out.push_back(result_from_json(*doc));
  }
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.experiment_id < b.experiment_id; });
  return out;
}

std::vector<std::string> PluginController::reconcile() {
  std::lock_guard lock(registry_mutex_);
  std::vector<std::string> mismatches;
  for (const auto& [id, i] : instances_) {
    const bool live = i.handle != SandboxHandle{} && runtime_->alive(i.handle);
    if (i.state == PluginState::Running && !live)
      mismatches.push_back(id + ": Running but sandbox is gone");
    if (i.state != PluginState::Running && live)
      mismatches.push_back(id + ": " + std::string(to_string(i.state)) + " but sandbox is alive");
  }
  return mismatches;
}

}  // namespace servo
