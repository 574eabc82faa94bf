// SPDX-License-Identifier: Apache-2.0

#pragma once

// Portable, seedable random streams. The algorithms are fixed so that a
// simulation run is byte-reproducible on any conforming implementation:
//
//   * string labels hash with 64-bit FNV-1a;
//   * stream keys mix with SplitMix64;
//   * each stream is a xoshiro256** generator seeded by four SplitMix64
//     outputs of its key;
//   * uniform doubles take the top 53 bits; normals use Box-Muller (first
//     output only, no caching); Poisson uses Knuth's product method in
//     chunks of mean <= 16.
//
// See docs/rng.md for the full description.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>
#include <type_traits>

namespace servo {

constexpr std::uint64_t fnv1a64(std::string_view text,
                                std::uint64_t hash = 0xcbf29ce484222325ULL) noexcept {
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t mix64(std::uint64_t a, std::uint64_t b) noexcept {
  std::uint64_t s = a ^ (b * 0x9e3779b97f4a7c15ULL);
  return splitmix64(s);
}

class RngStream {
 public:
  explicit constexpr RngStream(std::uint64_t key) noexcept {
    std::uint64_t s = key;
    for (auto& word : state_) word = splitmix64(s);
  }

  // Stream for (seed, label, label, ..., counter). Labels may be string
  // views or integers.
  template <typename... Parts>
  static RngStream derive(std::uint64_t seed, const Parts&... parts) noexcept {
    std::uint64_t key = mix64(seed, 0x5e7f0a11ULL);
    ((key = mix64(key, part_hash(parts))), ...);
    return RngStream(key);
  }

  constexpr std::uint64_t next() noexcept {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // [0, 1)
  double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // [0, n)
  std::uint64_t below(std::uint64_t n) noexcept {
    return n == 0 ? 0 : static_cast<std::uint64_t>(uniform() * static_cast<double>(n));
  }

  double normal() noexcept {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double stddev) noexcept { return mean + stddev * normal(); }

  // Unit-mean log-normal factor with log-space stddev sigma.
  double lognormal_factor(double sigma) noexcept {
    return std::exp(sigma * normal() - 0.5 * sigma * sigma);
  }

  bool bernoulli(double p) noexcept { return uniform() < p; }

  std::uint64_t poisson(double mean) noexcept {
    std::uint64_t total = 0;
    while (mean > 0.0) {
      const double chunk = mean > 16.0 ? 16.0 : mean;
      mean -= chunk;
      const double limit = std::exp(-chunk);
      double product = uniform();
      while (product > limit) {
        ++total;
        product *= uniform();
      }
    }
    return total;
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }
  static std::uint64_t part_hash(std::string_view s) noexcept { return fnv1a64(s); }
  static std::uint64_t part_hash(const char* s) noexcept { return fnv1a64(s); }
  template <typename Int>
    requires std::is_integral_v<Int>
  static std::uint64_t part_hash(Int v) noexcept {
    return static_cast<std::uint64_t>(v) ^ 0xa5a5a5a5a5a5a5a5ULL;
  }
  template <typename String>
    requires std::is_convertible_v<const String&, std::string_view> &&
             (!std::is_integral_v<String>)
  static std::uint64_t part_hash(const String& s) noexcept {
    return fnv1a64(std::string_view(s));
  }

  std::array<std::uint64_t, 4> state_{};
};

}  // namespace servo
