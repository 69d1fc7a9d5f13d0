#pragma once

#include <cstdint>
#include <cmath>

namespace wta {

// Splittable counter-style RNG used everywhere in the library.
//
// All randomness derives from 64-bit keys combined with mix64(). Every
// logical stream (scenario draws, per-weapon threat checks, per-target
// jink schedules, sensor noise, policy sampling) owns an independent key,
// so the number of draws consumed by one stream never perturbs another.
// This is what makes common-random-number comparisons exact: two policies
// evaluated on the same episode key face bit-identical initial conditions
// and threat realizations.
//
// The generator is SplitMix64 (Steele, Lea, Flood 2014). It is tiny,
// fully specified, and identical on every platform, unlike the standard
// library distributions.

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

constexpr std::uint64_t mix_finalize(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Derives a child key from a parent key and an index/tag.
constexpr std::uint64_t mix64(std::uint64_t key, std::uint64_t index) {
  return mix_finalize(key + kGolden + index * 0xD1B54A32D192ED03ull);
}

constexpr std::uint64_t mix64(std::uint64_t key, std::uint64_t a, std::uint64_t b) {
  return mix64(mix64(key, a), b);
}

constexpr std::uint64_t mix64(std::uint64_t key, std::uint64_t a, std::uint64_t b,
                              std::uint64_t c) {
  return mix64(mix64(key, a, b), c);
}

// Stream tags. Keep stable: reports promise bit-identical reruns.
enum StreamTag : std::uint64_t {
  kStreamScenario = 1,
  kStreamSensor = 2,
  kStreamThreat = 3,
  kStreamJink = 4,
  kStreamPolicy = 5,
  kStreamInit = 6,
};

class SplitMix64 {
 public:
  constexpr explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  constexpr std::uint64_t next() {
    std::uint64_t z = (state_ += kGolden);
    return mix_finalize(z);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double u01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

  // Inclusive integer range via multiply-floor. A draw has bias O(span/2^53),
  // irrelevant at simulation scales and deterministic, which is what matters.
  int uniform_int(int lo, int hi) {
    const double span = static_cast<double>(hi - lo) + 1.0;
    int offset = static_cast<int>(u01() * span);
    if (offset > hi - lo) offset = hi - lo;
    return lo + offset;
  }

 private:
  std::uint64_t state_;
};

// One uniform addressed by (key, counter); the counter-based form used for
// per-frame threat checks so realizations align across compared policies.
inline double u01_at(std::uint64_t key, std::uint64_t counter) {
  return static_cast<double>(mix64(key, counter) >> 11) * 0x1.0p-53;
}

}  // namespace wta
