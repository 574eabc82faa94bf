// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "servo/metrics.hpp"
#include "servo/telemetry.hpp"

namespace servo {

namespace fs = std::filesystem;

enum class DeploymentMode { Online, Batch };
std::string_view to_string(DeploymentMode mode) noexcept;
DeploymentMode parse_deployment_mode(std::string_view text);

enum class PluginState { Created, Running, Stopped, Deleted };
std::string_view to_string(PluginState state) noexcept;
PluginState parse_plugin_state(std::string_view text);
bool legal_transition(PluginState from, PluginState to) noexcept;

enum class Phase { Train, Test, Run };
std::string_view to_string(Phase phase) noexcept;
Phase parse_phase(std::string_view text);

// The fixed port a plugin server listens on inside a container sandbox.
inline constexpr int kInternalPort = 8000;
// Prefix a manifest path may start with; replaced by the sandbox directory.
inline constexpr std::string_view kSandboxDirVar = "${SANDBOX_DIR}";

struct PluginManifest {
  std::string name;
  TaskType task_type = TaskType::AD;
  DeploymentMode mode = DeploymentMode::Online;
  MetricKind metric_kind = MetricKind::PointPRF1;
  // Scalar values only. Keys ending in _dir / _path hold absolute paths.
  nlohmann::json config = nlohmann::json::object();
  std::vector<std::string> dependencies;
  std::vector<std::string> entry;  // argv; entry[0] is relative to the bundle or absolute
  bool operator==(const PluginManifest&) const = default;
};

// Throws ManifestError listing every violation.
PluginManifest parse_manifest(const std::string& yaml_document);
std::vector<std::string> validate(const PluginManifest& manifest);
nlohmann::json to_json(const PluginManifest& manifest);
PluginManifest manifest_from_json(const nlohmann::json& doc);
nlohmann::json expand_sandbox_paths(const nlohmann::json& config, const fs::path& sandbox_dir);

struct Endpoint {
  std::string host = "127.0.0.1";
  int port = 0;
  bool operator==(const Endpoint&) const = default;
};

struct SandboxHandle {
  std::int64_t pid = 0;
  std::string container;
  bool operator==(const SandboxHandle&) const = default;
};

struct SandboxSpec {
  std::string plugin_id;
  fs::path bundle_dir;
  fs::path sandbox_dir;
  std::vector<std::string> command;
  Endpoint endpoint;
  std::map<std::string, std::string> env;
};

class SandboxRuntime {
 public:
  virtual ~SandboxRuntime() = default;
  virtual std::string name() const = 0;
  virtual SandboxHandle start(const SandboxSpec& spec) = 0;
  virtual void stop(const SandboxHandle& handle) = 0;
  virtual bool alive(const SandboxHandle& handle) = 0;
};

// Each plugin is a process in its own session, working directory
// <sandbox>/work, output in <sandbox>/plugin.log, told its port through
// SERVO_PORT.
class ProcessSandbox final : public SandboxRuntime {
 public:
  std::string name() const override { return "process"; }
  SandboxHandle start(const SandboxSpec& spec) override;
  void stop(const SandboxHandle& handle) override;
  bool alive(const SandboxHandle& handle) override;
};

// Adapter for a container runtime CLI (docker/podman). The image must hold
// the bundle; the sandbox directory is bind-mounted at /sandbox and the host
// port is published onto kInternalPort.
class ContainerSandbox final : public SandboxRuntime {
 public:
  using Runner = std::function<int(const std::vector<std::string>& argv, std::string& output)>;
  ContainerSandbox(std::string cli, std::string image, Runner runner = {});
  std::string name() const override { return "container"; }
  std::vector<std::string> run_command(const SandboxSpec& spec) const;
  SandboxHandle start(const SandboxSpec& spec) override;
  void stop(const SandboxHandle& handle) override;
  bool alive(const SandboxHandle& handle) override;

 private:
  std::string cli_;
  std::string image_;
  Runner runner_;
};

struct PluginInstance {
  std::string id;
  PluginManifest manifest;
  Endpoint endpoint;
  PluginState state = PluginState::Created;
  fs::path sandbox_dir;
  SandboxHandle handle;
  bool trained = false;
  bool operator==(const PluginInstance&) const = default;
};
nlohmann::json to_json(const PluginInstance& instance);
PluginInstance instance_from_json(const nlohmann::json& doc);

struct ExperimentRequest {
  std::string experiment_id;  // empty: generated
  std::string plugin_id;
  DatasetWindow window;
  Phase phase = Phase::Test;
};

enum class ResultStatus { Ok, Failed };

struct ExperimentResult {
  std::string experiment_id;
  std::string plugin_id;
  std::string algorithm;  // manifest name
  MetricKind metric_kind = MetricKind::PointPRF1;
  Phase phase = Phase::Test;
  DatasetWindow window;
  nlohmann::json payload;  // null unless ok
  std::string payload_hash;
  double wall_time = 0.0;
  ResultStatus status = ResultStatus::Ok;
  std::string failure_reason;
  bool operator==(const ExperimentResult&) const = default;
};
nlohmann::json to_json(const ExperimentResult& result);
ExperimentResult result_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const DatasetWindow& window);
DatasetWindow window_from_json(const nlohmann::json& doc);

struct ControllerConfig {
  fs::path root;  // registry.json, results/, sandboxes/
  std::string host = "127.0.0.1";
  int port_base = 18000;
  double startup_timeout_s = 10.0;
  double phase_timeout_s = 300.0;
};

// Synchronized plugin registry and experiment runner. State lives under
// config.root so separate processes sharing the root see the same plugins.
class PluginController {
 public:
  explicit PluginController(ControllerConfig config,
                            std::shared_ptr<SandboxRuntime> runtime = nullptr);

  // `bundle` is a directory or a .tar archive with manifest.yaml at its top.
  PluginInstance deploy(const fs::path& bundle, const std::string& id = {});
  std::vector<PluginInstance> list() const;
  PluginInstance get(const std::string& id) const;
  void stop(const std::string& id);
  void restart(const std::string& id);
  void remove(const std::string& id);

  // Slices `store`, hands the slice to the sandbox and invokes the phase.
  // Failed runs are persisted before PluginFailure/PayloadInvalid is thrown.
  ExperimentResult run_experiment(const ExperimentRequest& request, const TelemetryBatch& store);
  void clear(const std::string& id, const std::string& experiment_id);

  std::optional<ExperimentResult> result(const std::string& experiment_id) const;
  std::vector<ExperimentResult> results() const;

  // Mismatches between Running instances and live sandboxes.
  std::vector<std::string> reconcile();

  const ControllerConfig& config() const noexcept { return config_; }

 private:
  void load();
  void save() const;
  PluginInstance& at(const std::string& id);
  const PluginInstance& at(const std::string& id) const;
  std::mutex& plugin_mutex(const std::string& id);
  int allocate_port() const;
  void launch(PluginInstance& instance);
  void persist(const ExperimentResult& result) const;
  std::string next_experiment_id() const;

  ControllerConfig config_;
  std::shared_ptr<SandboxRuntime> runtime_;
  mutable std::mutex registry_mutex_;
  std::map<std::string, PluginInstance> instances_;
  std::map<std::string, std::unique_ptr<std::mutex>> plugin_mutexes_;
};

// True when nothing is bound to host:port.
bool port_available(const std::string& host, int port);

}  // namespace servo
