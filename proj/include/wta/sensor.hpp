#pragma once

#include <vector>

#include "wta/errors.hpp"
#include "wta/rng.hpp"

namespace wta {

// Class-shift sensor model: with probability shift_prob the observed value is
// one class off the truth, split evenly between one class lower and one class
// higher. At a boundary class the unavailable shift leaves the value
// unchanged. Range and look angle do not enter.
inline double sensor_observe(double true_value, const std::vector<double>& classes,
                             double shift_prob, SplitMix64& rng) {
  int idx = -1;
  for (int k = 0; k < static_cast<int>(classes.size()); ++k) {
    if (classes[k] == true_value) {
      idx = k;
      break;
    }
  }
  if (idx < 0) throw ConfigError("sensor_observe: value not in class list");
  const double u = rng.u01();
  if (u < shift_prob * 0.5) {
    if (idx > 0) return classes[idx - 1];
    return true_value;
  }
  if (u < shift_prob) {
    if (idx + 1 < static_cast<int>(classes.size())) return classes[idx + 1];
    return true_value;
  }
  return true_value;
}

}  // namespace wta
