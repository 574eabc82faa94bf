// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "servo/fault.hpp"
#include "servo/simulation.hpp"
#include "servo/topology.hpp"

namespace testing_support {

namespace fs = std::filesystem;

class TempDir {
 public:
  explicit TempDir(const std::string& tag = "servo") {
    std::random_device rd;
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = fs::temp_directory_path() /
            (tag + "-" + std::to_string(stamp) + "-" + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

inline servo::FaultDefinition fault(const std::string& id, servo::FaultType type,
                                    const std::string& target, std::int64_t start,
                                    std::int64_t duration,
                                    const std::map<std::string, double>& params = {}) {
  servo::FaultDefinition f;
  f.id = id;
  f.target = target;
  f.start_time = start;
  f.duration = duration;
  f.behaviors.emplace(type, servo::make_behavior(type, params));
  return f;
}

inline servo::FaultCalendar calendar_of(std::vector<servo::FaultDefinition> faults,
                                        std::int64_t now) {
  servo::FaultCalendar cal;
  for (auto& f : faults) cal.schedule(std::move(f), servo::InjectionMode::Scheduled, now);
  return cal;
}

inline servo::WorkloadProfile profile(std::uint64_t seed = 7) {
  auto p = servo::default_workload_profile();
  p.seed = seed;
  return p;
}

// Byte listing of every file under root, keyed by relative path.
inline std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
  return out;
}

}  // namespace testing_support
