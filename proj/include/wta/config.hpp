#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "wta/errors.hpp"

namespace wta {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  constexpr bool contains(double v) const { return v >= lo && v <= hi; }
  constexpr bool valid() const { return lo <= hi; }
};

struct IntInterval {
  int lo = 0;
  int hi = 0;
  constexpr bool contains(int v) const { return v >= lo && v <= hi; }
  constexpr bool valid() const { return lo <= hi; }
};

// Everything that determines an episode distribution. A (config, episode seed)
// pair fully determines an episode, bit for bit.
struct ScenarioConfig {
  int m_max = 20;
  int n_max = 12;
  IntInterval m_range{10, 20};
  IntInterval n_range{4, 12};

  // Weapon initial conditions.
  Interval r_expected_range{6000.0, 12000.0};  // radius of the expected target disc
  double distance_d = 30000.0;                 // slant range from reference point
  Interval azimuth_range{-45.0, 45.0};         // degrees about +x
  Interval elevation_range{45.0, 90.0};        // degrees above horizontal
  Interval weapon_speed_range{2500.0, 3500.0};
  double min_weapon_spacing = 2000.0;

  // Target initial conditions.
  Interval r_gt_range{6000.0, 12000.0};  // radius of the actual target disc
  Interval d_shift_range{1000.0, 3000.0};
  Interval target_speed_range{0.0, 30.0};
  Interval target_accel_range{0.0, 1.0};

  // Target value distribution.
  IntInterval value_count_range{3, 5};
  double value_min = 1.0;
  IntInterval value_max_range{10, 15};

  // Threat model.
  Interval targeting_rate_range{0.2, 0.3};
  Interval intercept_rate_range{0.1, 0.3};
  // When set, the per-step targeting probability of a weapon is scaled by
  // (assigned target's true value / mean class value), clamped to [0, 1].
  bool value_scaled_targeting = false;

  double sensor_shift_prob = 0.1;

  std::uint64_t seed = 0;
  std::string case_label = "Nominal";

  void validate() const;
};

inline void ScenarioConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("invalid config: " + msg); };
  if (m_max < 1 || n_max < 1) fail("m_max and n_max must be >= 1");
  if (!m_range.valid() || !n_range.valid()) fail("count range has min > max");
  if (m_range.lo < 1 || m_range.hi > m_max) fail("m_range must lie within [1, m_max]");
  if (n_range.lo < 1 || n_range.hi > n_max) fail("n_range must lie within [1, n_max]");
  for (const Interval* iv : {&r_expected_range, &azimuth_range, &elevation_range,
                             &weapon_speed_range, &r_gt_range, &d_shift_range,
                             &target_speed_range, &target_accel_range,
                             &targeting_rate_range, &intercept_rate_range}) {
    if (!iv->valid()) fail("interval has min > max");
  }
  if (!value_count_range.valid() || !value_max_range.valid()) fail("value range has min > max");
  if (value_count_range.lo < 1) fail("value_count_range must be >= 1");
  if (value_min <= 0.0) fail("value_min must be positive");
  if (value_max_range.lo < value_min) fail("value_max_range below value_min");
  // Distinct integer classes must exist for the largest requested count.
  if (value_count_range.hi > static_cast<int>(value_max_range.lo - value_min) + 1)
    fail("value_count_range.hi exceeds the number of distinct class values available");
  if (sensor_shift_prob < 0.0 || sensor_shift_prob > 0.5)
    fail("sensor_shift_prob must lie in [0, 0.5]");
  if (distance_d <= 0.0 || min_weapon_spacing < 0.0) fail("distances must be positive");
  if (targeting_rate_range.lo < 0.0 || intercept_rate_range.lo < 0.0)
    fail("threat rates must be non-negative");
}

inline const std::vector<std::string>& case_labels() {
  static const std::vector<std::string> labels = {
      "Nominal",      "Threat Model 1",  "Threat Model 2", "Sensor Noise",
      "Threat Targeting", "25km Range",  "scale-20x12",    "scale-40x24",
      "scale-60x36"};
  return labels;
}

// Named evaluation cases. Each returns the nominal configuration with only
// that case's fields overridden. The scale presets grow the engagement and
// stretch both target-region radii linearly with the size factor.
inline ScenarioConfig make_case(const std::string& label) {
  ScenarioConfig cfg;
  cfg.case_label = label;
  if (label == "Nominal") {
    return cfg;
  }
  if (label == "Threat Model 1") {
    cfg.targeting_rate_range = {0.0, 0.25};
    cfg.intercept_rate_range = {0.0, 0.25};
    return cfg;
  }
  if (label == "Threat Model 2") {
    // Raised threat level: targeting bounds up by 0.05, intercept minimum up.
    cfg.targeting_rate_range = {0.25, 0.35};
    cfg.intercept_rate_range = {0.15, 0.25};
    return cfg;
  }
  if (label == "Sensor Noise") {
    cfg.sensor_shift_prob = 0.2;
    return cfg;
  }
  if (label == "Threat Targeting") {
    cfg.value_scaled_targeting = true;
    return cfg;
  }
  if (label == "25km Range") {
    cfg.distance_d = 25000.0;
    return cfg;
  }
  auto scaled = [&cfg](int factor, int m_max, int n_max, IntInterval mr, IntInterval nr) {
    cfg.m_max = m_max;
    cfg.n_max = n_max;
    cfg.m_range = mr;
    cfg.n_range = nr;
    cfg.r_expected_range = {6000.0 * factor, 12000.0 * factor};
    cfg.r_gt_range = {6000.0 * factor, 12000.0 * factor};
    return cfg;
  };
  if (label == "scale-20x12") return scaled(1, 20, 12, {10, 20}, {4, 12});
  if (label == "scale-40x24") return scaled(2, 40, 24, {20, 40}, {8, 24});
  if (label == "scale-60x36") return scaled(3, 60, 36, {30, 60}, {12, 36});

  std::string msg = "unknown case label '" + label + "'; valid labels:";
  for (const auto& l : case_labels()) msg += " '" + l + "'";
  throw ConfigError(msg);
}

// --- text serialization -----------------------------------------------------
//
// One "key = value" line per field; intervals are "lo hi". Lines starting
// with '#' are comments. Unknown keys are errors so typos do not silently
// fall back to defaults.

namespace detail {

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace detail

inline std::string to_text(const ScenarioConfig& c) {
  using detail::fmt;
  std::ostringstream os;
  auto kv = [&os](const std::string& k, const std::string& v) { os << k << " = " << v << "\n"; };
  os << "# scenario configuration\n";
  kv("case_label", c.case_label);
  kv("m_max", std::to_string(c.m_max));
  kv("n_max", std::to_string(c.n_max));
  kv("m_range", std::to_string(c.m_range.lo) + " " + std::to_string(c.m_range.hi));
  kv("n_range", std::to_string(c.n_range.lo) + " " + std::to_string(c.n_range.hi));
  kv("r_expected_range", fmt(c.r_expected_range.lo) + " " + fmt(c.r_expected_range.hi));
  kv("distance_d", fmt(c.distance_d));
  kv("azimuth_range", fmt(c.azimuth_range.lo) + " " + fmt(c.azimuth_range.hi));
  kv("elevation_range", fmt(c.elevation_range.lo) + " " + fmt(c.elevation_range.hi));
  kv("weapon_speed_range", fmt(c.weapon_speed_range.lo) + " " + fmt(c.weapon_speed_range.hi));
  kv("min_weapon_spacing", fmt(c.min_weapon_spacing));
  kv("r_gt_range", fmt(c.r_gt_range.lo) + " " + fmt(c.r_gt_range.hi));
  kv("d_shift_range", fmt(c.d_shift_range.lo) + " " + fmt(c.d_shift_range.hi));
  kv("target_speed_range", fmt(c.target_speed_range.lo) + " " + fmt(c.target_speed_range.hi));
  kv("target_accel_range", fmt(c.target_accel_range.lo) + " " + fmt(c.target_accel_range.hi));
  kv("value_count_range",
     std::to_string(c.value_count_range.lo) + " " + std::to_string(c.value_count_range.hi));
  kv("value_min", fmt(c.value_min));
  kv("value_max_range",
     std::to_string(c.value_max_range.lo) + " " + std::to_string(c.value_max_range.hi));
  kv("targeting_rate_range", fmt(c.targeting_rate_range.lo) + " " + fmt(c.targeting_rate_range.hi));
  kv("intercept_rate_range", fmt(c.intercept_rate_range.lo) + " " + fmt(c.intercept_rate_range.hi));
  kv("value_scaled_targeting", c.value_scaled_targeting ? "1" : "0");
  kv("sensor_shift_prob", fmt(c.sensor_shift_prob));
  kv("seed", std::to_string(c.seed));
  return os.str();
}

inline ScenarioConfig config_from_text(const std::string& text) {
  ScenarioConfig c;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  auto parse_interval = [](const std::string& v, int ln) {
    std::istringstream vs(v);
    Interval iv;
    if (!(vs >> iv.lo >> iv.hi)) throw ParseError("expected two numbers", ln);
    return iv;
  };
  auto parse_int_interval = [](const std::string& v, int ln) {
    std::istringstream vs(v);
    IntInterval iv;
    if (!(vs >> iv.lo >> iv.hi)) throw ParseError("expected two integers", ln);
    return iv;
  };
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected 'key = value'", line_no);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    try {
      if (key == "case_label") c.case_label = val;
      else if (key == "m_max") c.m_max = std::stoi(val);
      else if (key == "n_max") c.n_max = std::stoi(val);
      else if (key == "m_range") c.m_range = parse_int_interval(val, line_no);
      else if (key == "n_range") c.n_range = parse_int_interval(val, line_no);
      else if (key == "r_expected_range") c.r_expected_range = parse_interval(val, line_no);
      else if (key == "distance_d") c.distance_d = std::stod(val);
      else if (key == "azimuth_range") c.azimuth_range = parse_interval(val, line_no);
      else if (key == "elevation_range") c.elevation_range = parse_interval(val, line_no);
      else if (key == "weapon_speed_range") c.weapon_speed_range = parse_interval(val, line_no);
      else if (key == "min_weapon_spacing") c.min_weapon_spacing = std::stod(val);
      else if (key == "r_gt_range") c.r_gt_range = parse_interval(val, line_no);
      else if (key == "d_shift_range") c.d_shift_range = parse_interval(val, line_no);
      else if (key == "target_speed_range") c.target_speed_range = parse_interval(val, line_no);
      else if (key == "target_accel_range") c.target_accel_range = parse_interval(val, line_no);
      else if (key == "value_count_range") c.value_count_range = parse_int_interval(val, line_no);
      else if (key == "value_min") c.value_min = std::stod(val);
      else if (key == "value_max_range") c.value_max_range = parse_int_interval(val, line_no);
      else if (key == "targeting_rate_range") c.targeting_rate_range = parse_interval(val, line_no);
      else if (key == "intercept_rate_range") c.intercept_rate_range = parse_interval(val, line_no);
      else if (key == "value_scaled_targeting") c.value_scaled_targeting = std::stoi(val) != 0;
      else if (key == "sensor_shift_prob") c.sensor_shift_prob = std::stod(val);
      else if (key == "seed") c.seed = std::stoull(val);
      else throw ParseError("unknown key '" + key + "'", line_no);
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception&) {
      throw ParseError("bad value for '" + key + "'", line_no);
    }
  }
  c.validate();
  return c;
}

inline void save_config(const ScenarioConfig& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  out << to_text(c);
}

inline ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return config_from_text(ss.str());
}

}  // namespace wta
