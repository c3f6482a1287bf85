#pragma once

// Counter-based random streams. Every value is a pure function of
// (seed, stream, a, b, counter), so any sample's draws can be regenerated
// independently of the others and of thread scheduling. Gaussian draws use
// Box-Muller on 53-bit uniforms; the standard library's distributions are
// implementation-defined and would break cross-platform reproducibility.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace agc::rng {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

constexpr std::uint64_t stream_key(std::uint64_t seed, std::uint64_t stream, std::uint64_t a,
                                   std::uint64_t b) noexcept {
  return mix64(seed ^ mix64(stream ^ mix64(a ^ mix64(b))));
}

/// Stream identifiers used by the synthetic world.
enum Stream : std::uint64_t {
  Prototypes = 1,   // a = attempt, b = class
  CleanNoise = 2,   // a = sample
  CleanViews = 3,   // a = sample, b = view
  AdvViews = 4,     // a = sample, b = view
  Bench = 5,        // a = purpose, b = index
};

class CounterStream {
 public:
  CounterStream(std::uint64_t seed, std::uint64_t stream, std::uint64_t a = 0,
                std::uint64_t b = 0) noexcept
      : key_(stream_key(seed, stream, a, b)) {}

  std::uint64_t next_u64() noexcept { return mix64(key_ ^ mix64(counter_++)); }

  /// Uniform in the open interval (0, 1).
  double uniform() noexcept {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double gaussian() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double phi = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(phi);
    has_spare_ = true;
    return r * std::cos(phi);
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace agc::rng
