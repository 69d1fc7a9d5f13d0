#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "wta/errors.hpp"
#include "wta/guidance.hpp"
#include "wta/scenario.hpp"
#include "wta/vec3.hpp"

namespace wta {

using Assignment = std::vector<int>;  // entry i = target index for weapon i

// The assignment problem data: maximize sum_j c_j (1 - prod_{i: a_i=j} F_ij)
// where F_ij is the probability weapon i is intercepted on the way to target
// j. Infeasible pairs carry F = 0.9999 so they are never worth choosing.
struct WtaInstance {
  int m = 0;
  int n = 0;
  std::vector<double> values;          // c_j, observed values, length n
  std::vector<double> interception;    // F, m x n row major
  std::vector<char> feasible;          // m x n row major
  std::vector<double> heading_errors;  // degrees, m x n row major

  double f(int i, int j) const { return interception[static_cast<std::size_t>(i) * n + j]; }
  double& f(int i, int j) { return interception[static_cast<std::size_t>(i) * n + j]; }
  bool is_feasible(int i, int j) const { return feasible[static_cast<std::size_t>(i) * n + j] != 0; }
  double he(int i, int j) const { return heading_errors[static_cast<std::size_t>(i) * n + j]; }

  void resize(int m_, int n_) {
    m = m_;
    n = n_;
    values.assign(n, 0.0);
    interception.assign(static_cast<std::size_t>(m) * n, 0.0);
    feasible.assign(static_cast<std::size_t>(m) * n, 0);
    heading_errors.assign(static_cast<std::size_t>(m) * n, 0.0);
  }
};

inline constexpr double kInfeasibleInterception = 0.9999;

// Ballistic time-of-flight estimate: range over the projection of the initial
// velocity on the line of sight. Throws when the pair is not closing.
inline double time_of_flight(const Vec3& r_tm0, const Vec3& v0) {
  const double range = r_tm0.norm();
  if (range <= 0.0) throw NoClosureError("time_of_flight: zero range");
  const double closing = v0.dot(r_tm0) / range;
  if (closing <= 0.0) throw NoClosureError("time_of_flight: non-positive closing speed");
  return range / closing;
}

// Interception CDF for a flight of duration t under targeting rate l1 and
// interception rate l2, in the benchmark's printed two-exponential form,
// clamped to [0, 1].
inline double intercept_cdf(double t, double l1, double l2) {
  const double v = 1.0 - std::exp(-l1 * t) - l2 * t * std::exp(-l2 * t);
  return std::clamp(v, 0.0, 1.0);
}

// Exact CDF of the sum of two independent exponentials with rates l1, l2;
// provided as the alternative form for comparison runs.
inline double intercept_cdf_exact(double t, double l1, double l2) {
  if (t <= 0.0) return 0.0;
  double v;
  if (std::abs(l1 - l2) < 1e-12 * std::max(l1, l2)) {
    const double lt = l1 * t;
    v = 1.0 - std::exp(-lt) * (1.0 + lt);
  } else {
    v = 1.0 - (l2 * std::exp(-l1 * t) - l1 * std::exp(-l2 * t)) / (l2 - l1);
  }
  return std::clamp(v, 0.0, 1.0);
}

enum class CdfForm { Printed, Exact };

struct InstanceOptions {
  double targeting_rate = 0.25;  // expected values of the threat draws
  double intercept_rate = 0.2;
  double feasibility_he_deg = 15.0;
  CdfForm cdf = CdfForm::Printed;
};

// Builds the assignment instance from initial conditions: F from the
// time-of-flight CDF for feasible pairs, the infeasible constant otherwise.
// Values are the observed target values. An optional destroyed mask marks
// whole columns infeasible.
inline WtaInstance build_instance(const EpisodeInit& init, const InstanceOptions& opt = {},
                                  const std::vector<bool>& destroyed = {}) {
  WtaInstance inst;
  inst.resize(init.m(), init.n());
  for (int j = 0; j < inst.n; ++j) inst.values[j] = init.targets[j].observed_value;
  for (int i = 0; i < inst.m; ++i) {
    const WeaponInit& w = init.weapons[i];
    for (int j = 0; j < inst.n; ++j) {
      const Vec3 los = init.targets[j].position - w.position;
      const double he = heading_error_deg(w.velocity, w.position, init.targets[j].position);
      inst.heading_errors[static_cast<std::size_t>(i) * inst.n + j] = he;
      const bool col_dead = !destroyed.empty() && destroyed[j];
      const double closing = los.norm() > 0.0 ? w.velocity.dot(los) / los.norm() : 0.0;
      if (col_dead || he >= opt.feasibility_he_deg || closing <= 0.0) {
        inst.f(i, j) = kInfeasibleInterception;
        continue;
      }
      const double tof = time_of_flight(los, w.velocity);
      inst.f(i, j) = opt.cdf == CdfForm::Printed
                         ? intercept_cdf(tof, opt.targeting_rate, opt.intercept_rate)
                         : intercept_cdf_exact(tof, opt.targeting_rate, opt.intercept_rate);
      inst.feasible[static_cast<std::size_t>(i) * inst.n + j] = 1;
    }
  }
  return inst;
}

// Expected destroyed value of an assignment. Unassigned targets contribute
// nothing (empty product = 1).
inline double objective(const WtaInstance& inst, const Assignment& a) {
  if (static_cast<int>(a.size()) != inst.m) throw SolverError("assignment length mismatch");
  std::vector<double> survival(inst.n, 1.0);
  for (int i = 0; i < inst.m; ++i) {
    if (a[i] < 0 || a[i] >= inst.n) throw SolverError("assignment index out of range");
    survival[a[i]] *= inst.f(i, a[i]);
  }
  double total = 0.0;
  for (int j = 0; j < inst.n; ++j)
    if (survival[j] < 1.0) total += inst.values[j] * (1.0 - survival[j]);
  return total;
}

struct SolveResult {
  Assignment assignment;
  double value = 0.0;
  bool optimal = true;  // false when a node budget truncated the search
  std::uint64_t nodes = 0;
};

// Exhaustive search, the ground-truth oracle. Guarded to n^m <= 10^7.
inline SolveResult solve_enumeration(const WtaInstance& inst) {
  double combos = 1.0;
  for (int i = 0; i < inst.m; ++i) {
    combos *= inst.n;
    if (combos > 1e7) throw SolverError("instance too large for enumeration");
  }
  Assignment a(inst.m, 0);
  SolveResult best;
  best.assignment = a;
  best.value = objective(inst, a);
  // Lexicographic odometer; strict improvement keeps the smallest optimum.
  while (true) {
    int k = inst.m - 1;
    while (k >= 0 && a[k] == inst.n - 1) {
      a[k] = 0;
      --k;
    }
    if (k < 0) break;
    ++a[k];
    const double v = objective(inst, a);
    if (v > best.value) {
      best.value = v;
      best.assignment = a;
    }
  }
  return best;
}

// Greedy maximum marginal return followed by single-move and pairwise-swap
// local search. Deterministic tie-breaks by (weapon, target) index.
inline SolveResult solve_greedy_local(const WtaInstance& inst) {
  SolveResult res;
  res.assignment.assign(inst.m, -1);
  std::vector<double> survival(inst.n, 1.0);
  std::vector<bool> assigned(inst.m, false);
  for (int step = 0; step < inst.m; ++step) {
    int best_i = -1, best_j = -1;
    double best_gain = -1.0;
    for (int i = 0; i < inst.m; ++i) {
      if (assigned[i]) continue;
      for (int j = 0; j < inst.n; ++j) {
        const double gain = inst.values[j] * survival[j] * (1.0 - inst.f(i, j));
        if (gain > best_gain) {
          best_gain = gain;
          best_i = i;
          best_j = j;
        }
      }
    }
    assigned[best_i] = true;
    res.assignment[best_i] = best_j;
    survival[best_j] *= inst.f(best_i, best_j);
  }
  res.value = objective(inst, res.assignment);

  // Local search until no move improves by more than the tolerance.
  constexpr double kTol = 1e-12;
  bool improved = true;
  while (improved) {
    improved = false;
    for (int i = 0; i < inst.m; ++i) {
      const int old_j = res.assignment[i];
      for (int j = 0; j < inst.n; ++j) {
        if (j == old_j) continue;
        res.assignment[i] = j;
        const double v = objective(inst, res.assignment);
        if (v > res.value + kTol) {
          res.value = v;
          improved = true;
        } else {
          res.assignment[i] = old_j;
        }
        if (improved) break;
      }
      if (improved) break;
    }
    if (improved) continue;
    for (int i1 = 0; i1 < inst.m && !improved; ++i1) {
      for (int i2 = i1 + 1; i2 < inst.m && !improved; ++i2) {
        if (res.assignment[i1] == res.assignment[i2]) continue;
        std::swap(res.assignment[i1], res.assignment[i2]);
        const double v = objective(inst, res.assignment);
        if (v > res.value + kTol) {
          res.value = v;
          improved = true;
        } else {
          std::swap(res.assignment[i1], res.assignment[i2]);
        }
      }
    }
  }
  return res;
}

// Each weapon independently takes the target with the smallest heading error;
// ties go to the lowest target index.
inline Assignment lowest_heading_error(const WtaInstance& inst) {
  Assignment a(inst.m, 0);
  for (int i = 0; i < inst.m; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < inst.n; ++j) {
      if (inst.he(i, j) < best) {
        best = inst.he(i, j);
        a[i] = j;
      }
    }
  }
  return a;
}

// Depth-first branch and bound over weapons in index order.
//
// Node bound: current objective plus the smaller of two admissible tail
// estimates. The per-weapon estimate sums each unassigned weapon's best
// single-pair marginal against the partial survival products (marginal gains
// only shrink as targets fill up). The per-target estimate is the remaining
// survival-weighted value sum(c_j P_j), which no completion can exceed; it
// bites hard when weapons outnumber targets. Warm-started from greedy +
// local search. When the node budget runs out the incumbent is returned
// flagged non-optimal; with no usable incumbent the lowest-heading-error
// assignment is the fallback.
inline SolveResult solve_bnb(const WtaInstance& inst,
                             std::uint64_t node_budget = 2'000'000ull) {
  SolveResult incumbent = solve_greedy_local(inst);
  if (inst.m == 0) return incumbent;
  if (incumbent.assignment.empty()) {
    incumbent.assignment = lowest_heading_error(inst);
    incumbent.value = objective(inst, incumbent.assignment);
  }
  constexpr double kTol = 1e-12;

  std::vector<double> survival(inst.n, 1.0);
  double remaining_cp = 0.0;  // sum over targets of c_j * P_j
  for (int j = 0; j < inst.n; ++j) remaining_cp += inst.values[j];
  Assignment current(inst.m, -1);
  std::uint64_t nodes = 0;
  bool budget_hit = false;

  // Per-depth candidate ordering buffers.
  std::vector<std::vector<int>> order(inst.m, std::vector<int>(inst.n));
  std::vector<std::vector<double>> gain(inst.m, std::vector<double>(inst.n));

  auto per_weapon_tail = [&](int depth) {
    double b = 0.0;
    for (int i = depth; i < inst.m; ++i) {
      double best = 0.0;
      for (int j = 0; j < inst.n; ++j)
        best = std::max(best, inst.values[j] * survival[j] * (1.0 - inst.f(i, j)));
      b += best;
    }
    return b;
  };

  auto dfs = [&](auto&& self, int depth, double value) -> void {
    if (budget_hit) return;
    if (depth == inst.m) {
      if (value > incumbent.value + kTol) {
        incumbent.value = value;
        incumbent.assignment = current;
      }
      return;
    }
    if (++nodes > node_budget) {
      budget_hit = true;
      return;
    }
    auto& ord = order[depth];
    auto& g = gain[depth];
    for (int j = 0; j < inst.n; ++j) {
      ord[j] = j;
      g[j] = inst.values[j] * survival[j] * (1.0 - inst.f(depth, j));
    }
    std::sort(ord.begin(), ord.end(), [&](int a, int b) {
      if (g[a] != g[b]) return g[a] > g[b];
      return a < b;
    });
    for (int idx = 0; idx < inst.n; ++idx) {
      const int j = ord[idx];
      const double child_value = value + g[j];
      const double old_survival = survival[j];
      survival[j] *= inst.f(depth, j);
      remaining_cp -= g[j];  // c_j * (P_old - P_new) equals the gain
      current[depth] = j;
      // Cheap per-target cap first; the per-weapon scan only when it matters.
      if (child_value + remaining_cp > incumbent.value + kTol &&
          child_value + per_weapon_tail(depth + 1) > incumbent.value + kTol)
        self(self, depth + 1, child_value);
      survival[j] = old_survival;
      remaining_cp += g[j];
      current[depth] = -1;
      if (budget_hit) return;
    }
  };
  dfs(dfs, 0, 0.0);
  incumbent.optimal = !budget_hit;
  incumbent.nodes = nodes;
  return incumbent;
}

// The spreading heuristic: weapons in index order each take the feasible
// target maximizing value / (1 + weapons already on it); with no feasible
// target the lowest-heading-error target is used. Interception probabilities
// and time to go are deliberately not consulted.
inline Assignment solve_heuristic(const WtaInstance& inst,
                                  const std::vector<bool>& destroyed = {}) {
  Assignment a(inst.m, 0);
  std::vector<int> load(inst.n, 0);
  for (int i = 0; i < inst.m; ++i) {
    int best_j = -1;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < inst.n; ++j) {
      if (!inst.is_feasible(i, j)) continue;
      if (!destroyed.empty() && destroyed[j]) continue;
      const double score = inst.values[j] / (1.0 + load[j]);
      if (score > best_score) {
        best_score = score;
        best_j = j;
      }
    }
    if (best_j < 0) {
      double best_he = std::numeric_limits<double>::infinity();
      best_j = 0;
      for (int j = 0; j < inst.n; ++j) {
        if (inst.he(i, j) < best_he) {
          best_he = inst.he(i, j);
          best_j = j;
        }
      }
    }
    a[i] = best_j;
    ++load[best_j];
  }
  return a;
}

// --- instance text format ----------------------------------------------------

inline std::string instance_to_text(const WtaInstance& inst) {
  std::ostringstream os;
  os.precision(17);
  os << "wta-instance 1\n";
  os << "m " << inst.m << "\n";
  os << "n " << inst.n << "\n";
  os << "values";
  for (double v : inst.values) os << ' ' << v;
  os << "\n";
  auto matrix = [&os, &inst](const std::string& name, auto get) {
    for (int i = 0; i < inst.m; ++i) {
      os << name;
      for (int j = 0; j < inst.n; ++j) os << ' ' << get(i, j);
      os << "\n";
    }
  };
  matrix("F", [&inst](int i, int j) { return inst.f(i, j); });
  matrix("feasible", [&inst](int i, int j) { return inst.is_feasible(i, j) ? 1 : 0; });
  matrix("he", [&inst](int i, int j) { return inst.he(i, j); });
  return os.str();
}

inline WtaInstance instance_from_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  WtaInstance inst;
  int f_row = 0, feas_row = 0, he_row = 0;
  bool sized = false;
  int m = -1, n = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (line_no == 1) {
      int version = 0;
      if (tag != "wta-instance" || !(ls >> version) || version != 1)
        throw ParseError("expected 'wta-instance 1' header", line_no);
      continue;
    }
    if (tag == "m") {
      ls >> m;
    } else if (tag == "n") {
      ls >> n;
    } else {
      if (!sized) {
        if (m <= 0 || n <= 0) throw ParseError("m and n must come first", line_no);
        inst.resize(m, n);
        sized = true;
      }
      if (tag == "values") {
        for (int j = 0; j < n; ++j)
          if (!(ls >> inst.values[j])) throw ParseError("short values row", line_no);
      } else if (tag == "F") {
        if (f_row >= m) throw ParseError("too many F rows", line_no);
        for (int j = 0; j < n; ++j)
          if (!(ls >> inst.f(f_row, j))) throw ParseError("short F row", line_no);
        ++f_row;
      } else if (tag == "feasible") {
        if (feas_row >= m) throw ParseError("too many feasible rows", line_no);
        for (int j = 0; j < n; ++j) {
          int v;
          if (!(ls >> v)) throw ParseError("short feasible row", line_no);
          inst.feasible[static_cast<std::size_t>(feas_row) * n + j] = v ? 1 : 0;
        }
        ++feas_row;
      } else if (tag == "he") {
        if (he_row >= m) throw ParseError("too many he rows", line_no);
        for (int j = 0; j < n; ++j)
          if (!(ls >> inst.heading_errors[static_cast<std::size_t>(he_row) * n + j]))
            throw ParseError("short he row", line_no);
        ++he_row;
      } else {
        throw ParseError("unknown tag '" + tag + "'", line_no);
      }
    }
  }
  if (!sized || f_row != inst.m) throw ParseError("incomplete instance", line_no);
  return inst;
}

inline void save_instance(const WtaInstance& inst, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  out << instance_to_text(inst);
}

inline WtaInstance load_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open instance file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return instance_from_text(ss.str());
}

}  // namespace wta
