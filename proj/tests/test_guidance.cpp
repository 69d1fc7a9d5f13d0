#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "wta/guidance.hpp"
#include "wta/rng.hpp"

using namespace wta;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Reference constants from the printed model; simulations use the calibrated
// drag density default instead.
GuidanceConstants sea_level_constants() {
  GuidanceConstants k;
  k.rho0 = 1.225;
  k.h_scale = 8500.0;
  return k;
}

WeaponState weapon_at(Vec3 pos, Vec3 vel) {
  WeaponState w;
  w.position = pos;
  w.velocity = vel;
  w.speed = vel.norm();
  return w;
}

}  // namespace

TEST_CASE("heading error spans 0 to 180 degrees") {
  const WeaponState w = weapon_at({0, 0, 0}, {3000, 0, 0});
  REQUIRE_THAT(heading_error_deg(w, {10000, 0, 0}), WithinAbs(0.0, 1e-12));
  REQUIRE_THAT(heading_error_deg(w, {0, 5000, 0}), WithinAbs(90.0, 1e-12));
  REQUIRE_THAT(heading_error_deg(w, {-10000, 0, 0}), WithinAbs(180.0, 1e-12));

  // The feasibility proxy separates 14.9 from 15.1 degrees.
  const double c149 = std::cos(deg2rad(14.9)), s149 = std::sin(deg2rad(14.9));
  REQUIRE(heading_error_deg(w, {10000 * c149, 10000 * s149, 0}) < 15.0);
  const double c151 = std::cos(deg2rad(15.1)), s151 = std::sin(deg2rad(15.1));
  REQUIRE(heading_error_deg(w, {10000 * c151, 10000 * s151, 0}) > 15.0);

  REQUIRE_THROWS_AS(heading_error_deg(w, {0, 0, 0}), GeometryError);
  const WeaponState stopped = weapon_at({0, 0, 0}, {0, 0, 0});
  REQUIRE_THROWS_AS(heading_error_deg(stopped, {1, 0, 0}), GeometryError);
}

TEST_CASE("collision-triangle geometry commands zero acceleration") {
  const GuidanceConstants k;
  TargetState t;
  t.position = {10000, 0, 0};
  t.velocity = {0, 0, 0};
  const WeaponState w = weapon_at({0, 0, 0}, {3000, 0, 0});
  const Vec3 a = pn_command(w, t, k);
  REQUIRE(a.x == 0.0);
  REQUIRE(a.y == 0.0);
  REQUIRE(a.z == 0.0);
}

TEST_CASE("commanded magnitude clips at 40 g") {
  const GuidanceConstants k;
  // Crossing target chosen so the raw command magnitude is 500 m/s^2.
  TargetState t;
  t.position = {10000, 0, 0};
  t.velocity = {0, 1000.0 / 3.0, 0};
  const WeaponState w = weapon_at({0, 0, 0}, {3000, 0, 0});
  const Vec3 a = pn_command(w, t, k);
  REQUIRE_THAT(a.norm(), WithinRel(392.4, 1e-12));

  // Milder crossing stays below the limit: v_t = 200 gives |a| = 300.
  TargetState t2 = t;
  t2.velocity = {0, 200, 0};
  REQUIRE_THAT(pn_command(w, t2, k).norm(), WithinRel(300.0, 1e-9));

  WeaponState coincident = weapon_at({10000, 0, 0}, {3000, 0, 0});
  REQUIRE_THROWS_AS(pn_command(coincident, t, k), GeometryError);
}

TEST_CASE("pn command is perpendicular to the line of sight") {
  const GuidanceConstants k;
  SplitMix64 rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    const WeaponState w = weapon_at(
        {rng.uniform(-2e4, 2e4), rng.uniform(-2e4, 2e4), rng.uniform(1e3, 3e4)},
        {rng.uniform(-3e3, 3e3), rng.uniform(-3e3, 3e3), rng.uniform(-3e3, -100.0)});
    TargetState t;
    t.position = {rng.uniform(-1e4, 1e4), rng.uniform(-1e4, 1e4), 0};
    t.velocity = {rng.uniform(-30, 30), rng.uniform(-30, 30), 0};
    const Vec3 a = pn_command(w, t, k);
    const Vec3 r = t.position - w.position;
    REQUIRE(std::abs(a.dot(r)) <= 1e-9 * a.norm() * r.norm() + 1e-12);
    REQUIRE(a.norm() <= k.accel_max + 1e-9);
  }
}

TEST_CASE("atmosphere density matches the reference fit") {
  REQUIRE_THAT(atmosphere_density(0.0), WithinAbs(1.225, 1e-15));
  REQUIRE_THAT(atmosphere_density(8500.0), WithinRel(1.225 / std::exp(1.0), 1e-12));
  REQUIRE_THAT(atmosphere_density(30000.0), WithinAbs(0.03594, 1e-4));
  REQUIRE_THAT(atmosphere_density(30000.0), WithinRel(1.225 * std::exp(-30000.0 / 8500.0), 1e-12));
  // Below-ground altitudes clamp to sea level.
  REQUIRE(atmosphere_density(-100.0) == atmosphere_density(0.0));
}

TEST_CASE("speed derivative reproduces the drag arithmetic") {
  const GuidanceConstants k = sea_level_constants();
  WeaponState w = weapon_at({0, 0, 0}, {3000, 0, 0});
  const WeaponDerivative d = derivatives(w, {0, 0, 0}, k);
  REQUIRE_THAT(d.dspeed, WithinRel(-1225.0, 1e-12));
  REQUIRE(d.dposition.x == 3000.0);

  GuidanceConstants vacuum = k;
  vacuum.rho0 = 0.0;
  REQUIRE(derivatives(w, {0, 0, 0}, vacuum).dspeed == 0.0);

  const WeaponDerivative d2 = derivatives(w, {0, 392.4, 0}, vacuum);
  REQUIRE_THAT(d2.dspeed, WithinRel(-39.24, 1e-12));
}

TEST_CASE("rk4 advances linear motion exactly") {
  GuidanceConstants vacuum;
  vacuum.rho0 = 0.0;
  vacuum.accel_drag_gain = 0.0;
  WeaponState w = weapon_at({100, 200, 10000}, {2000, -500, -1000});
  const Vec3 v0 = w.velocity;
  integrate_step(w, {0, 0, 0}, 0.1, vacuum);
  REQUIRE_THAT(w.position.x, WithinAbs(100 + 200.0, 1e-9));
  REQUIRE_THAT(w.position.y, WithinAbs(200 - 50.0, 1e-9));
  REQUIRE_THAT(w.position.z, WithinAbs(10000 - 100.0, 1e-9));
  REQUIRE_THAT(w.speed, WithinRel(v0.norm(), 1e-12));
}

TEST_CASE("drag makes a dive strictly lose speed") {
  const GuidanceConstants k = sea_level_constants();
  WeaponState w = weapon_at({0, 0, 25000}, {0, 0, -3000});
  double last = w.speed;
  for (int i = 0; i < 50; ++i) {
    integrate_step(w, {0, 0, 0}, 0.1, k);
    REQUIRE(w.speed < last);
    REQUIRE_THAT(w.velocity.norm(), WithinRel(w.speed, 1e-9));
    last = w.speed;
  }
}

TEST_CASE("halving the timestep moves a 10 s endpoint by less than 0.1 m") {
  const GuidanceConstants k = sea_level_constants();
  auto flight = [&](double dt) {
    WeaponState w = weapon_at({0, 0, 26000}, {1500, 300, -2500});
    const int steps = static_cast<int>(std::lround(10.0 / dt));
    for (int i = 0; i < steps; ++i) integrate_step(w, {2.0, -1.0, 0.0}, dt, k);
    return w.position;
  };
  const Vec3 coarse = flight(0.1);
  const Vec3 fine = flight(0.05);
  REQUIRE((coarse - fine).norm() < 0.1);
}

TEST_CASE("targets stay planar and obey the acceleration budget") {
  SplitMix64 jink(17);
  TargetState t;
  t.position = {100, -50, 0};
  t.velocity = {10, 5, 0};
  t.jink_accel_mag = 1.0;
  const double v0 = t.velocity.norm();
  double elapsed = 0.0;
  for (int i = 0; i < 10000; ++i) {
    target_step(t, 0.01, jink);
    elapsed += 0.01;
    REQUIRE(t.position.z == 0.0);
    REQUIRE(t.velocity.z == 0.0);
    REQUIRE(t.jink_accel.z == 0.0);
  }
  REQUIRE(std::abs(t.velocity.norm() - v0) <= 1.0 * elapsed + 1e-9);

  TargetState still;
  still.position = {0, 0, 0};
  still.velocity = {20, 0, 0};
  still.jink_accel_mag = 0.0;
  SplitMix64 jink2(3);
  for (int i = 0; i < 100; ++i) target_step(still, 0.01, jink2);
  REQUIRE_THAT(still.position.x, WithinAbs(20.0 * 1.0, 1e-9));
  REQUIRE(still.position.y == 0.0);
}
