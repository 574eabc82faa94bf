// SPDX-License-Identifier: Apache-2.0

#include "servo/sim_clock.hpp"

#include <yaml-cpp/yaml.h>

#include "servo/error.hpp"

namespace servo {

std::vector<std::string> validate(const SimClock& clock) {
  std::vector<std::string> violations;
  if (clock.step <= 0) violations.push_back("step must be > 0");
  if (clock.horizon < clock.step) violations.push_back("horizon must be >= step");
  if (clock.step > 0 && clock.horizon % clock.step != 0)
    violations.push_back("horizon must be a multiple of step");
  return violations;
}

SimClock load_clock(const std::string& document) {
  try {
    const auto root = YAML::Load(document);
    SimClock clock;
    clock.start = root["start"].as<std::int64_t>();
    clock.step = root["step"].as<std::int64_t>();
    clock.horizon = root["horizon"].as<std::int64_t>();
    return clock;
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::ParseError, std::string("clock: ") + e.what());
  }
}

}  // namespace servo
