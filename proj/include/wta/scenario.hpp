#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "wta/config.hpp"
#include "wta/errors.hpp"
#include "wta/rng.hpp"
#include "wta/sensor.hpp"
#include "wta/vec3.hpp"

namespace wta {

struct WeaponInit {
  Vec3 position;
  Vec3 velocity;
};

struct TargetInit {
  Vec3 position;       // z = 0
  Vec3 velocity;       // planar
  double true_value = 0.0;
  double observed_value = 0.0;
  double jink_accel_mag = 0.0;  // per-target lateral maneuver magnitude
};

struct EpisodeInit {
  std::vector<WeaponInit> weapons;
  std::vector<TargetInit> targets;
  std::vector<double> value_classes;  // sorted ascending
  double targeting_rate = 0.0;        // s^-1
  double intercept_rate = 0.0;        // s^-1
  bool value_scaled_targeting = false;
  double mean_class_value = 0.0;

  int m() const { return static_cast<int>(weapons.size()); }
  int n() const { return static_cast<int>(targets.size()); }
};

// P(class v) = (1/v) / sum_k (1/v_k). Classes must be positive and increasing.
inline std::vector<double> sample_target_values(const std::vector<double>& classes, int n,
                                                SplitMix64& rng) {
  if (classes.empty()) throw ConfigError("value classes empty");
  double norm = 0.0;
  for (std::size_t k = 0; k < classes.size(); ++k) {
    if (classes[k] <= 0.0) throw ConfigError("value classes must be positive");
    if (k > 0 && classes[k] <= classes[k - 1])
      throw ConfigError("value classes must be strictly increasing");
    norm += 1.0 / classes[k];
  }
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) {
    const double u = rng.u01() * norm;
    double acc = 0.0;
    std::size_t pick = classes.size() - 1;
    for (std::size_t k = 0; k < classes.size(); ++k) {
      acc += 1.0 / classes[k];
      if (u < acc) {
        pick = k;
        break;
      }
    }
    out[i] = classes[pick];
  }
  return out;
}

namespace detail {

// Uniform point in a disc of the given radius, z = 0.
inline Vec3 disc_point(double radius, SplitMix64& rng) {
  const double r = radius * std::sqrt(rng.u01());
  const double a = 2.0 * kPi * rng.u01();
  return {r * std::cos(a), r * std::sin(a), 0.0};
}

inline Vec3 planar_direction(SplitMix64& rng) {
  const double a = 2.0 * kPi * rng.u01();
  return {std::cos(a), std::sin(a), 0.0};
}

// V_n distinct integers drawn uniformly without replacement from
// [value_min, V_max], ascending.
inline std::vector<double> draw_value_classes(const ScenarioConfig& cfg, SplitMix64& rng) {
  const int count = rng.uniform_int(cfg.value_count_range.lo, cfg.value_count_range.hi);
  const int v_max = rng.uniform_int(cfg.value_max_range.lo, cfg.value_max_range.hi);
  const int lo = static_cast<int>(cfg.value_min);
  std::vector<int> pool;
  for (int v = lo; v <= v_max; ++v) pool.push_back(v);
  // Partial Fisher-Yates: the first `count` entries are the draw.
  for (int i = 0; i < count; ++i) {
    const int j = i + rng.uniform_int(0, static_cast<int>(pool.size()) - 1 - i);
    std::swap(pool[i], pool[j]);
  }
  std::vector<double> classes(pool.begin(), pool.begin() + count);
  std::sort(classes.begin(), classes.end());
  return classes;
}

}  // namespace detail

// Draws one episode. Deterministic in (config, episode_seed); the draw order
// below is part of the format contract for reproducibility:
//   1. m, n
//   2. R_expected, then per attempt: per weapon (reference point, azimuth,
//      elevation, speed) until the pairwise spacing bound holds
//   3. R_GT, then per target: disc position, shift direction + distance,
//      velocity direction + speed, jink magnitude
//   4. value classes, per-target true values
//   5. targeting and intercept rates
// Observed values come from the independent sensor stream.
inline EpisodeInit sample_episode(const ScenarioConfig& cfg, std::uint64_t episode_seed) {
  cfg.validate();
  SplitMix64 rng(mix64(cfg.seed, episode_seed, kStreamScenario));

  EpisodeInit ep;
  ep.value_scaled_targeting = cfg.value_scaled_targeting;
  const int m = rng.uniform_int(cfg.m_range.lo, cfg.m_range.hi);
  const int n = rng.uniform_int(cfg.n_range.lo, cfg.n_range.hi);

  const double r_expected = rng.uniform(cfg.r_expected_range.lo, cfg.r_expected_range.hi);
  constexpr int kMaxAttempts = 1000;
  bool placed = false;
  for (int attempt = 0; attempt < kMaxAttempts && !placed; ++attempt) {
    ep.weapons.clear();
    for (int i = 0; i < m; ++i) {
      const Vec3 ref = detail::disc_point(r_expected, rng);
      const double az = deg2rad(rng.uniform(cfg.azimuth_range.lo, cfg.azimuth_range.hi));
      const double el = deg2rad(rng.uniform(cfg.elevation_range.lo, cfg.elevation_range.hi));
      const double speed = rng.uniform(cfg.weapon_speed_range.lo, cfg.weapon_speed_range.hi);
      const Vec3 offset = {cfg.distance_d * std::cos(el) * std::cos(az),
                           cfg.distance_d * std::cos(el) * std::sin(az),
                           cfg.distance_d * std::sin(el)};
      WeaponInit w;
      w.position = ref + offset;
      w.velocity = (ref - w.position).normalized() * speed;
      ep.weapons.push_back(w);
    }
    placed = true;
    for (int i = 0; i < m && placed; ++i)
      for (int j = i + 1; j < m; ++j)
        if ((ep.weapons[i].position - ep.weapons[j].position).norm() < cfg.min_weapon_spacing) {
          placed = false;
          break;
        }
  }
  if (!placed)
    throw ScenarioError("weapon spacing bound unsatisfiable after " +
                        std::to_string(kMaxAttempts) + " attempts (config '" + cfg.case_label +
                        "', episode seed " + std::to_string(episode_seed) + ")");

  const double r_gt = rng.uniform(cfg.r_gt_range.lo, cfg.r_gt_range.hi);
  for (int j = 0; j < n; ++j) {
    TargetInit t;
    t.position = detail::disc_point(r_gt, rng);
    const Vec3 shift_dir = detail::planar_direction(rng);
    const double shift = rng.uniform(cfg.d_shift_range.lo, cfg.d_shift_range.hi);
    t.position += shift_dir * shift;
    const Vec3 vel_dir = detail::planar_direction(rng);
    t.velocity = vel_dir * rng.uniform(cfg.target_speed_range.lo, cfg.target_speed_range.hi);
    t.jink_accel_mag = rng.uniform(cfg.target_accel_range.lo, cfg.target_accel_range.hi);
    ep.targets.push_back(t);
  }

  ep.value_classes = detail::draw_value_classes(cfg, rng);
  const std::vector<double> values = sample_target_values(ep.value_classes, n, rng);
  double class_sum = 0.0;
  for (double c : ep.value_classes) class_sum += c;
  ep.mean_class_value = class_sum / static_cast<double>(ep.value_classes.size());

  SplitMix64 sensor_rng(mix64(cfg.seed, episode_seed, kStreamSensor));
  for (int j = 0; j < n; ++j) {
    ep.targets[j].true_value = values[j];
    ep.targets[j].observed_value =
        sensor_observe(values[j], ep.value_classes, cfg.sensor_shift_prob, sensor_rng);
  }

  ep.targeting_rate = rng.uniform(cfg.targeting_rate_range.lo, cfg.targeting_rate_range.hi);
  ep.intercept_rate = rng.uniform(cfg.intercept_rate_range.lo, cfg.intercept_rate_range.hi);
  return ep;
}

}  // namespace wta
