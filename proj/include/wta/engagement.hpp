#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "wta/errors.hpp"
#include "wta/guidance.hpp"
#include "wta/rng.hpp"
#include "wta/scenario.hpp"
#include "wta/sensor.hpp"
#include "wta/tensor.hpp"
#include "wta/vec3.hpp"

namespace wta {

struct ThreatRates {
  double targeting = 0.0;  // s^-1
  double intercept = 0.0;  // s^-1
};

// One threat check at the guidance rate. A weapon not yet targeted rolls the
// targeting check; a targeted weapon rolls the interception check. A weapon
// targeted at step k therefore sees its first interception check at step k+1.
inline void apply_threat_check(WeaponState& w, double p_target_step, double p_intercept_step,
                               double u) {
  if (!w.alive || w.terminal) return;
  if (!w.targeted) {
    if (u < p_target_step) w.targeted = true;
  } else if (u < p_intercept_step) {
    w.intercepted = true;
    w.alive = false;
  }
}

// Sequential-stream form used by statistical tests and standalone studies.
inline void threat_step(WeaponState& w, const ThreatRates& rates, double dt, SplitMix64& rng) {
  apply_threat_check(w, rates.targeting * dt, rates.intercept * dt, rng.u01());
}

enum class WeaponOutcome { Intercepted, Hit, Miss };

struct TraceRow {
  double time;
  std::string entity;  // w<i> or t<j>
  double x, y, z;
  bool active;  // weapon alive / target not destroyed
};

struct EpisodeResult {
  double destroyed_value = 0.0;
  double reward = 0.0;
  std::vector<WeaponOutcome> weapon_outcomes;
  std::vector<bool> target_destroyed;
  std::vector<double> miss_distances;
  double intercept_fraction = 0.0;  // intercepted weapons / m
  double elapsed = 0.0;             // episode time, s
  double solver_ms = 0.0;           // filled by the evaluation harness
  std::vector<TraceRow> trace;      // only when requested
};

struct EngagementState {
  std::vector<WeaponState> weapons;
  std::vector<TargetState> targets;
  double time = 0.0;
  ThreatRates rates;
  std::vector<double> value_classes;
};

struct EpisodeOptions {
  GuidanceConstants guidance{};
  double guidance_dt = 0.1;
  double fine_dt = 0.01;
  double fine_range = 300.0;  // terminal-homing window, m
  double kill_radius = 5.0;   // m
  double max_time = 60.0;     // safety cap, s
  double reward_alpha = 10.0;
  bool record_trace = false;
  // Root key for the episode's threat and jink streams. Derive with
  // episode_stream_key() so evaluation harnesses and trainers agree.
  std::uint64_t stream_key = 0;
};

inline std::uint64_t episode_stream_key(std::uint64_t config_seed, std::uint64_t episode_seed) {
  return mix64(config_seed, episode_seed, kStreamInit);
}

// Observation builder. Feasibility requires heading error below the proxy
// threshold and a positive closing speed; the time-to-go channel is
// range / closing speed clipped to [0, 1] after normalization.
inline EngagementTensor build_engagement_tensor(const EngagementState& s, int m_max, int n_max,
                                                const TensorNorms& norms = {},
                                                double feasibility_he_deg = 15.0) {
  EngagementTensor e(m_max, n_max);
  const int m = static_cast<int>(s.weapons.size());
  const int n = static_cast<int>(s.targets.size());
  for (int i = 0; i < m && i < m_max; ++i) {
    const WeaponState& w = s.weapons[i];
    if (!w.alive || w.terminal) continue;
    for (int j = 0; j < n && j < n_max; ++j) {
      const TargetState& t = s.targets[j];
      if (t.destroyed) continue;
      const Vec3 r = t.position - w.position;
      const double range = r.norm();
      if (range <= 0.0) continue;
      const double he = heading_error_deg(w.velocity, w.position, t.position);
      const double closing = -r.dot(t.velocity - w.velocity) / range;
      if (he >= feasibility_he_deg || closing <= 0.0) continue;
      e.at(i, j, 0) = 1.0;
      e.at(i, j, 1) = std::clamp(range / closing / norms.t_go, 0.0, 1.0);
      e.at(i, j, 2) = t.observed_value / norms.value;
    }
  }
  return e;
}

inline EngagementState make_engagement_state(const EpisodeInit& init) {
  EngagementState s;
  s.rates = {init.targeting_rate, init.intercept_rate};
  s.value_classes = init.value_classes;
  for (const WeaponInit& w : init.weapons) {
    WeaponState ws;
    ws.position = w.position;
    ws.velocity = w.velocity;
    ws.speed = w.velocity.norm();
    s.weapons.push_back(ws);
  }
  for (const TargetInit& t : init.targets) {
    TargetState ts;
    ts.position = t.position;
    ts.velocity = t.velocity;
    ts.jink_accel_mag = t.jink_accel_mag;
    ts.true_value = t.true_value;
    ts.observed_value = t.observed_value;
    s.targets.push_back(ts);
  }
  return s;
}

namespace detail {

// Closest-approach refinement from three equally spaced range samples.
// Relative motion is locally uniform, so squared range is a parabola in time;
// the raw range is a hyperbola whose direct fit would overstate small misses
// by the sample spacing. Fit the squares and take the vertex.
inline double refine_miss(double r0, double r1, double r2, double min_seen) {
  const double q0 = r0 * r0, q1 = r1 * r1, q2 = r2 * r2;
  const double denom = q0 - 2.0 * q1 + q2;
  double best = std::min({r0, r1, r2, min_seen});
  if (denom > 0.0) {
    const double s = 0.5 * (q0 - q2) / denom;  // vertex offset in sample units from r1
    if (s > -1.0 && s < 1.0) {
      const double qv = q1 - 0.25 * (q0 - q2) * s;
      best = std::min(best, qv > 0.0 ? std::sqrt(qv) : 0.0);
    }
  }
  return best;
}

}  // namespace detail

// Runs one engagement to completion under a fixed assignment.
//
// The loop advances in 0.1 s guidance frames. Commands are computed once per
// frame and held. Targets always advance in 0.01 s substeps so their jink
// schedules are independent of weapon phase. A weapon integrates one 0.1 s
// RK4 step while far from its target and ten 0.01 s steps once its predicted
// range enters the terminal window; the closest approach is resolved from the
// fine-phase range samples. A target is destroyed the instant some weapon's
// closest approach falls below the kill radius; weapons already committed to
// a destroyed target fly on and are wasted.
inline EpisodeResult run_episode(const EpisodeInit& init, const std::vector<int>& assignment,
                                 const EpisodeOptions& opt) {
  const int m = init.m();
  const int n = init.n();
  if (static_cast<int>(assignment.size()) != m)
    throw ConfigError("assignment length does not match weapon count");
  for (int a : assignment)
    if (a < 0 || a >= n) throw ConfigError("assignment target index out of range");

  EngagementState s = make_engagement_state(init);
  for (int i = 0; i < m; ++i) s.weapons[i].assigned_target = assignment[i];

  std::vector<SplitMix64> jink_rngs;
  for (int j = 0; j < n; ++j) jink_rngs.emplace_back(mix64(opt.stream_key, kStreamJink, j));
  for (int j = 0; j < n; ++j) {
    // Arm the initial jink leg from the same stream as later redraws.
    s.targets[j].jink_timer = 0.0;
    const double a = 2.0 * kPi * jink_rngs[j].u01();
    s.targets[j].jink_accel =
        Vec3{std::cos(a), std::sin(a), 0.0} * s.targets[j].jink_accel_mag;
    s.targets[j].jink_timer = jink_rngs[j].uniform(1.0, 3.0);
  }

  const double p_target_step = s.rates.targeting * opt.guidance_dt;
  const double p_intercept_step = s.rates.intercept * opt.guidance_dt;
  const int substeps = static_cast<int>(std::lround(opt.guidance_dt / opt.fine_dt));

  // Per-weapon fine-phase bookkeeping.
  std::vector<double> prev_range(m, std::numeric_limits<double>::infinity());
  std::vector<double> prev_prev_range(m, std::numeric_limits<double>::infinity());
  std::vector<double> min_range(m, std::numeric_limits<double>::infinity());
  std::vector<bool> fine(m, false);
  std::vector<int> fine_samples(m, 0);

  EpisodeResult res;
  res.weapon_outcomes.assign(m, WeaponOutcome::Miss);
  res.target_destroyed.assign(n, false);
  res.miss_distances.assign(m, std::numeric_limits<double>::infinity());

  auto record_trace = [&](double t) {
    if (!opt.record_trace) return;
    for (int i = 0; i < m; ++i)
      res.trace.push_back({t, "w" + std::to_string(i), s.weapons[i].position.x,
                           s.weapons[i].position.y, s.weapons[i].position.z,
                           s.weapons[i].alive && !s.weapons[i].terminal});
    for (int j = 0; j < n; ++j)
      res.trace.push_back({t, "t" + std::to_string(j), s.targets[j].position.x,
                           s.targets[j].position.y, s.targets[j].position.z,
                           !s.targets[j].destroyed});
  };

  auto finish_weapon = [&](int i, double miss, double now) {
    WeaponState& w = s.weapons[i];
    w.terminal = true;
    w.miss_distance = miss;
    res.miss_distances[i] = miss;
    if (miss < opt.kill_radius) {
      res.weapon_outcomes[i] = WeaponOutcome::Hit;
      TargetState& t = s.targets[w.assigned_target];
      if (!t.destroyed) {
        t.destroyed = true;
        res.destroyed_value += t.true_value;
      }
    } else {
      res.weapon_outcomes[i] = WeaponOutcome::Miss;
    }
    (void)now;
  };

  record_trace(0.0);
  std::uint64_t frame = 0;
  while (s.time < opt.max_time) {
    bool any_flying = false;
    for (const WeaponState& w : s.weapons)
      if (w.alive && !w.terminal) any_flying = true;
    if (!any_flying) break;

    // Guidance commands, held for the frame.
    std::vector<Vec3> commands(m);
    for (int i = 0; i < m; ++i) {
      WeaponState& w = s.weapons[i];
      if (!w.alive || w.terminal) continue;
      commands[i] = pn_command(w, s.targets[w.assigned_target], opt.guidance);
    }

    // Threat checks at the guidance rate, one uniform per weapon per frame.
    if (s.rates.targeting > 0.0 || s.rates.intercept > 0.0) {
      for (int i = 0; i < m; ++i) {
        WeaponState& w = s.weapons[i];
        if (!w.alive || w.terminal) continue;
        double p_t = p_target_step;
        if (init.value_scaled_targeting && init.mean_class_value > 0.0) {
          const double scale = s.targets[w.assigned_target].true_value / init.mean_class_value;
          p_t = std::clamp(p_t * scale, 0.0, 1.0);
        }
        apply_threat_check(w, p_t, p_intercept_step,
                           u01_at(mix64(opt.stream_key, kStreamThreat, i), frame));
        if (w.intercepted) res.weapon_outcomes[i] = WeaponOutcome::Intercepted;
      }
    }

    // Decide each weapon's integration mode for this frame: fine once the
    // predicted range over the frame can enter the terminal window.
    for (int i = 0; i < m; ++i) {
      WeaponState& w = s.weapons[i];
      if (!w.alive || w.terminal || fine[i]) continue;
      const TargetState& t = s.targets[w.assigned_target];
      const Vec3 r = t.position - w.position;
      const double range = r.norm();
      const double closing = range > 0.0 ? -r.dot(t.velocity - w.velocity) / range : 0.0;
      if (range <= opt.fine_range + std::max(closing, 0.0) * opt.guidance_dt) {
        fine[i] = true;
        fine_samples[i] = 0;
        min_range[i] = range;
        prev_range[i] = range;
      }
    }

    // Coarse weapons: one RK4 step across the frame.
    for (int i = 0; i < m; ++i) {
      WeaponState& w = s.weapons[i];
      if (!w.alive || w.terminal || fine[i]) continue;
      integrate_step(w, commands[i], opt.guidance_dt, opt.guidance);
      min_range[i] =
          std::min(min_range[i], (s.targets[w.assigned_target].position - w.position).norm());
    }

    // Targets and fine-phase weapons advance in fine substeps.
    for (int sub = 0; sub < substeps; ++sub) {
      for (int j = 0; j < n; ++j) target_step(s.targets[j], opt.fine_dt, jink_rngs[j]);
      for (int i = 0; i < m; ++i) {
        WeaponState& w = s.weapons[i];
        if (!w.alive || w.terminal || !fine[i]) continue;
        integrate_step(w, commands[i], opt.fine_dt, opt.guidance);
        const double range = (s.targets[w.assigned_target].position - w.position).norm();
        min_range[i] = std::min(min_range[i], range);
        ++fine_samples[i];
        if (range < opt.kill_radius ||
            (fine_samples[i] >= 2 && range > prev_range[i])) {
          const double miss = fine_samples[i] >= 2
                                  ? detail::refine_miss(prev_prev_range[i], prev_range[i], range,
                                                        min_range[i])
                                  : std::min(min_range[i], range);
          finish_weapon(i, miss, s.time + (sub + 1) * opt.fine_dt);
        }
        prev_prev_range[i] = prev_range[i];
        prev_range[i] = range;
      }
    }

    s.time += opt.guidance_dt;
    ++frame;
    record_trace(s.time);
  }

  // Weapons still flying at the cap miss by whatever range remains.
  for (int i = 0; i < m; ++i) {
    WeaponState& w = s.weapons[i];
    if (w.alive && !w.terminal) {
      const double range = (s.targets[w.assigned_target].position - w.position).norm();
      res.miss_distances[i] = std::min(min_range[i], range);
    }
  }

  int intercepted = 0;
  for (int i = 0; i < m; ++i)
    if (res.weapon_outcomes[i] == WeaponOutcome::Intercepted) ++intercepted;
  res.intercept_fraction = m > 0 ? static_cast<double>(intercepted) / m : 0.0;
  res.reward = opt.reward_alpha * res.destroyed_value;
  res.elapsed = s.time;
  return res;
}

// Per-target values travel as comments so the plotter can scale the discs.
inline void write_trace_csv(const std::vector<TraceRow>& trace,
                            const std::vector<double>& target_values, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open trace output '" + path + "'");
  for (std::size_t j = 0; j < target_values.size(); ++j)
    out << "# value t" << j << ' ' << target_values[j] << "\n";
  out << "time,entity,x,y,z,active\n";
  out.precision(10);
  for (const TraceRow& r : trace)
    out << r.time << ',' << r.entity << ',' << r.x << ',' << r.y << ',' << r.z << ','
        << (r.active ? 1 : 0) << "\n";
}

}  // namespace wta
