#include <catch2/catch_amalgamated.hpp>
#include <algorithm>
#include <cmath>

#include "wta/eval.hpp"
#include "wta/solvers.hpp"

using namespace wta;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Plain greedy without the local-search pass, as an independent reference.
double greedy_only_value(const WtaInstance& inst) {
  std::vector<double> survival(inst.n, 1.0);
  std::vector<bool> assigned(inst.m, false);
  Assignment a(inst.m, -1);
  for (int step = 0; step < inst.m; ++step) {
    int bi = -1, bj = -1;
    double bg = -1.0;
    for (int i = 0; i < inst.m; ++i) {
      if (assigned[i]) continue;
      for (int j = 0; j < inst.n; ++j) {
        const double g = inst.values[j] * survival[j] * (1.0 - inst.f(i, j));
        if (g > bg) {
          bg = g;
          bi = i;
          bj = j;
        }
      }
    }
    assigned[bi] = true;
    a[bi] = bj;
    survival[bj] *= inst.f(bi, bj);
  }
  return objective(inst, a);
}

WtaInstance uniform_instance(int m, int n, double f) {
  WtaInstance inst;
  inst.resize(m, n);
  for (int j = 0; j < n; ++j) inst.values[j] = 10.0 - 2.0 * j;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      inst.f(i, j) = f;
      inst.feasible[static_cast<std::size_t>(i) * n + j] = 1;
      inst.heading_errors[static_cast<std::size_t>(i) * n + j] = 5.0 + i + j;
    }
  return inst;
}

}  // namespace

TEST_CASE("time of flight is range over closing speed") {
  REQUIRE_THAT(time_of_flight({30000, 0, 0}, {3000, 0, 0}), WithinRel(10.0, 1e-12));
  REQUIRE_THAT(time_of_flight({0, 25000, 0}, {0, 2500, 0}), WithinRel(10.0, 1e-12));
  // Oblique: only the projection counts.
  REQUIRE_THAT(time_of_flight({30000, 0, 0}, {3000, 4000, 0}), WithinRel(10.0, 1e-12));
  REQUIRE_THROWS_AS(time_of_flight({30000, 0, 0}, {0, 3000, 0}), NoClosureError);
  REQUIRE_THROWS_AS(time_of_flight({30000, 0, 0}, {-3000, 0, 0}), NoClosureError);
}

TEST_CASE("interception cdf evaluates the printed form") {
  REQUIRE(intercept_cdf(0.0, 0.25, 0.2) == 0.0);
  REQUIRE_THAT(intercept_cdf(10.0, 0.25, 0.2), WithinAbs(0.64724, 1e-5));
  REQUIRE_THAT(intercept_cdf(4.0, 0.25, 0.2), WithinAbs(0.27266, 1e-5));
  // Clamped where the printed form dips negative (small t with l2 > l1).
  REQUIRE(intercept_cdf(0.5, 0.05, 0.5) >= 0.0);
  // The exact convolution agrees at the ends and integrates both rates.
  REQUIRE(intercept_cdf_exact(0.0, 0.25, 0.2) == 0.0);
  REQUIRE_THAT(intercept_cdf_exact(1e4, 0.25, 0.2), WithinAbs(1.0, 1e-9));
  REQUIRE_THAT(intercept_cdf_exact(10.0, 0.2, 0.2), WithinAbs(1.0 - std::exp(-2.0) * 3.0, 1e-9));
}

TEST_CASE("instances mark infeasible geometry with the 0.9999 constant") {
  EpisodeInit ep;
  WeaponInit w;
  w.position = {0, 0, 30000};
  w.velocity = {0, 0, -3000};  // straight down at target 0
  ep.weapons.push_back(w);
  TargetInit t0;
  t0.position = {0, 0, 0};
  t0.observed_value = 9.0;
  TargetInit t1;
  t1.position = {40000, 0, 0};  // far off boresight
  t1.observed_value = 5.0;
  ep.targets.push_back(t0);
  ep.targets.push_back(t1);

  const WtaInstance inst = build_instance(ep);
  REQUIRE(inst.is_feasible(0, 0));
  REQUIRE_THAT(inst.f(0, 0), WithinAbs(intercept_cdf(10.0, 0.25, 0.2), 1e-12));
  REQUIRE(!inst.is_feasible(0, 1));
  REQUIRE(inst.f(0, 1) == kInfeasibleInterception);
  REQUIRE(inst.values[0] == 9.0);

  // Destroyed columns are infeasible everywhere.
  const WtaInstance masked = build_instance(ep, {}, {true, false});
  REQUIRE(!masked.is_feasible(0, 0));
  REQUIRE(masked.f(0, 0) == kInfeasibleInterception);
}

TEST_CASE("objective multiplies interception odds per target") {
  WtaInstance inst = uniform_instance(1, 1, 0.3);
  inst.values[0] = 10.0;
  REQUIRE_THAT(objective(inst, {0}), WithinRel(7.0, 1e-12));

  WtaInstance two = uniform_instance(2, 1, 0.3);
  two.values[0] = 10.0;
  two.f(1, 0) = 0.4;
  REQUIRE_THAT(objective(two, {0, 0}), WithinRel(8.8, 1e-12));

  WtaInstance sure = uniform_instance(3, 2, 1.0);
  REQUIRE(objective(sure, {0, 1, 0}) == 0.0);
  REQUIRE(objective(sure, {1, 1, 1}) == 0.0);
}

TEST_CASE("objective is permutation equivariant and monotone in F") {
  SplitMix64 rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const WtaInstance inst = random_instance(rng, 2, 6, 1, 4);
    Assignment a(inst.m);
    for (int i = 0; i < inst.m; ++i) a[i] = rng.uniform_int(0, inst.n - 1);
    const double base = objective(inst, a);

    // Swap two weapon rows and the matching assignment entries.
    WtaInstance swapped = inst;
    const int i1 = rng.uniform_int(0, inst.m - 1), i2 = rng.uniform_int(0, inst.m - 1);
    for (int j = 0; j < inst.n; ++j) std::swap(swapped.f(i1, j), swapped.f(i2, j));
    Assignment sa = a;
    std::swap(sa[i1], sa[i2]);
    REQUIRE_THAT(objective(swapped, sa), WithinAbs(base, 1e-12));

    // Decreasing an assigned interception probability never hurts.
    WtaInstance better = inst;
    const int pick = rng.uniform_int(0, inst.m - 1);
    better.f(pick, a[pick]) *= 0.5;
    REQUIRE(objective(better, a) >= base - 1e-12);
  }
}

TEST_CASE("enumeration finds the split optimum and breaks ties low") {
  WtaInstance inst = uniform_instance(2, 2, 0.5);
  inst.values = {10.0, 8.0};
  const SolveResult res = solve_enumeration(inst);
  REQUIRE_THAT(res.value, WithinRel(9.0, 1e-12));
  REQUIRE(res.assignment == Assignment{0, 1});

  // Equal values make (0,1) and (1,0) tie; lexicographic order wins.
  inst.values = {10.0, 10.0};
  REQUIRE(solve_enumeration(inst).assignment == Assignment{0, 1});

  WtaInstance single = uniform_instance(1, 3, 0.5);
  single.values = {4.0, 9.0, 6.0};
  single.f(0, 1) = 0.2;
  REQUIRE(solve_enumeration(single).assignment == Assignment{1});

  WtaInstance huge = uniform_instance(20, 12, 0.5);
  REQUIRE_THROWS_AS(solve_enumeration(huge), SolverError);
}

TEST_CASE("enumeration dominates random assignments") {
  SplitMix64 rng(77);
  const WtaInstance inst = random_instance(rng, 4, 5, 3, 4);
  const SolveResult best = solve_enumeration(inst);
  for (int trial = 0; trial < 1000; ++trial) {
    Assignment a(inst.m);
    for (int i = 0; i < inst.m; ++i) a[i] = rng.uniform_int(0, inst.n - 1);
    REQUIRE(objective(inst, a) <= best.value + 1e-12);
  }
}

TEST_CASE("branch and bound matches enumeration on oracle-sized instances") {
  SplitMix64 rng(123);
  double worst_gap = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const WtaInstance inst = random_instance(rng);
    const SolveResult oracle = solve_enumeration(inst);
    const SolveResult bnb = solve_bnb(inst);
    REQUIRE(bnb.optimal);
    worst_gap = std::max(worst_gap, std::abs(oracle.value - bnb.value));
    REQUIRE_THAT(bnb.value, WithinAbs(oracle.value, 1e-9));
    // The returned value is consistent with its own assignment.
    REQUIRE_THAT(objective(inst, bnb.assignment), WithinAbs(bnb.value, 1e-9));

    // Root bound validity: the single-pair relaxation dominates the optimum.
    double root_bound = 0.0;
    for (int i = 0; i < inst.m; ++i) {
      double best = 0.0;
      for (int j = 0; j < inst.n; ++j)
        best = std::max(best, inst.values[j] * (1.0 - inst.f(i, j)));
      root_bound += best;
    }
    REQUIRE(root_bound >= oracle.value - 1e-9);
  }
  REQUIRE(worst_gap <= 1e-9);
}

TEST_CASE("identical weapon rows make the optimum permutation invariant") {
  WtaInstance inst = uniform_instance(3, 3, 0.0);
  inst.values = {9.0, 5.0, 2.0};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) inst.f(i, j) = 0.3 + 0.2 * j;
  const double v = solve_bnb(inst).value;
  WtaInstance swapped = inst;  // rows identical, so any permutation is a no-op
  REQUIRE_THAT(solve_bnb(swapped).value, WithinAbs(v, 1e-12));
}

TEST_CASE("budget exhaustion returns the flagged warm start") {
  SplitMix64 rng(9);
  const WtaInstance inst = random_instance(rng, 6, 6, 4, 4);
  const SolveResult truncated = solve_bnb(inst, 1);
  REQUIRE(!truncated.optimal);
  const SolveResult warm = solve_greedy_local(inst);
  REQUIRE(truncated.value >= warm.value - 1e-12);
}

TEST_CASE("greedy with local search tracks the oracle") {
  SplitMix64 rng(321);
  int within_1pct = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const WtaInstance inst = random_instance(rng);
    const SolveResult oracle = solve_enumeration(inst);
    const SolveResult greedy = solve_greedy_local(inst);
    REQUIRE(greedy.value <= oracle.value + 1e-12);
    REQUIRE(greedy.value >= greedy_only_value(inst) - 1e-12);
    if (oracle.value <= 0.0 || (oracle.value - greedy.value) / oracle.value <= 0.01)
      ++within_1pct;
    // Single weapon instances are exact.
    if (inst.m == 1) REQUIRE_THAT(greedy.value, WithinAbs(oracle.value, 1e-12));
  }
  REQUIRE(within_1pct >= 190);
}

TEST_CASE("the spreading heuristic trades value against crowding") {
  // Values (10, 1): 10/2 and 10/3 still beat 1, so everything piles on.
  WtaInstance a = uniform_instance(3, 2, 0.5);
  a.values = {10.0, 1.0};
  REQUIRE(solve_heuristic(a) == Assignment{0, 0, 0});

  // Values (10, 6): the second weapon prefers the untouched 6.
  WtaInstance b = uniform_instance(3, 2, 0.5);
  b.values = {10.0, 6.0};
  REQUIRE(solve_heuristic(b) == Assignment{0, 1, 0});

  // Single feasible target takes everyone.
  WtaInstance c = uniform_instance(3, 2, 0.5);
  for (int i = 0; i < 3; ++i) {
    c.feasible[static_cast<std::size_t>(i) * 2 + 0] = 0;
    c.f(i, 0) = kInfeasibleInterception;
  }
  REQUIRE(solve_heuristic(c) == Assignment{1, 1, 1});

  // No feasible target at all: fall back to the lowest heading error.
  WtaInstance d = uniform_instance(2, 2, 0.5);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      d.feasible[static_cast<std::size_t>(i) * 2 + j] = 0;
      d.f(i, j) = kInfeasibleInterception;
    }
  d.heading_errors = {30.0, 20.0, 18.0, 25.0};
  REQUIRE(solve_heuristic(d) == Assignment{1, 0});
}

TEST_CASE("the heuristic never reads interception probabilities") {
  SplitMix64 rng(55);
  for (int trial = 0; trial < 50; ++trial) {
    const WtaInstance inst = random_instance(rng, 2, 6, 2, 4);
    const Assignment base = solve_heuristic(inst);
    WtaInstance perturbed = inst;
    for (int i = 0; i < inst.m; ++i)
      for (int j = 0; j < inst.n; ++j)
        if (perturbed.is_feasible(i, j)) perturbed.f(i, j) *= rng.uniform(0.5, 1.0);
    REQUIRE(solve_heuristic(perturbed) == base);
  }
}

TEST_CASE("lowest heading error picks the boresight target") {
  WtaInstance inst = uniform_instance(2, 3, 0.5);
  inst.heading_errors = {12.0, 3.0, 8.0, 6.0, 6.0, 9.0};
  const Assignment a = lowest_heading_error(inst);
  REQUIRE(a[0] == 1);
  REQUIRE(a[1] == 0);  // tie between targets 0 and 1 goes low

  // When any feasible target exists, the minimum-HE target is feasible.
  SplitMix64 rng(88);
  for (int trial = 0; trial < 100; ++trial) {
    const WtaInstance r = random_instance(rng, 2, 5, 2, 4);
    const Assignment pick = lowest_heading_error(r);
    for (int i = 0; i < r.m; ++i) {
      bool any = false;
      for (int j = 0; j < r.n; ++j) any = any || r.is_feasible(i, j);
      if (any) REQUIRE(r.is_feasible(i, pick[i]));
    }
  }
}

TEST_CASE("every solver satisfies the one-target-per-weapon constraint") {
  SplitMix64 rng(4242);
  for (int trial = 0; trial < 300; ++trial) {
    const WtaInstance inst = random_instance(rng, 1, 6, 1, 4);
    for (const Assignment& a :
         {solve_enumeration(inst).assignment, solve_bnb(inst).assignment,
          solve_greedy_local(inst).assignment, solve_heuristic(inst), lowest_heading_error(inst)}) {
      REQUIRE(static_cast<int>(a.size()) == inst.m);
      for (int v : a) {
        REQUIRE(v >= 0);
        REQUIRE(v < inst.n);
      }
    }
  }
}

TEST_CASE("instance text round trip preserves every entry") {
  SplitMix64 rng(66);
  const WtaInstance inst = random_instance(rng, 3, 5, 2, 4);
  const WtaInstance back = instance_from_text(instance_to_text(inst));
  REQUIRE(back.m == inst.m);
  REQUIRE(back.n == inst.n);
  for (int j = 0; j < inst.n; ++j) REQUIRE(back.values[j] == inst.values[j]);
  for (int i = 0; i < inst.m; ++i)
    for (int j = 0; j < inst.n; ++j) {
      REQUIRE(back.f(i, j) == inst.f(i, j));
      REQUIRE(back.is_feasible(i, j) == inst.is_feasible(i, j));
      REQUIRE(back.he(i, j) == inst.he(i, j));
    }
  REQUIRE_THROWS_AS(instance_from_text("garbage\n"), ParseError);
}
