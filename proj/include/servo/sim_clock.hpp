// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace servo {

// Fixed-tick simulation clock covering [start, start + horizon).
struct SimClock {
  std::int64_t start = 0;
  std::int64_t step = 1;
  std::int64_t horizon = 60;

  std::int64_t end() const noexcept { return start + horizon; }
  std::int64_t tick_count() const noexcept { return step > 0 ? horizon / step : 0; }
  std::int64_t tick(std::int64_t index) const noexcept { return start + index * step; }

  bool operator==(const SimClock&) const = default;
};

// Empty when valid: step > 0, horizon >= step, horizon a multiple of step.
std::vector<std::string> validate(const SimClock& clock);

// YAML document with keys start, step, horizon.
SimClock load_clock(const std::string& document);

}  // namespace servo
