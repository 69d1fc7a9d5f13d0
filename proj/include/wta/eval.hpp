#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "wta/engagement.hpp"
#include "wta/network.hpp"
#include "wta/parallel.hpp"
#include "wta/scenario.hpp"
#include "wta/solvers.hpp"

namespace wta {

enum class PolicyKind { Rl, Bnb, Greedy, Heuristic, Fallback, Random };

inline const std::vector<std::pair<std::string, PolicyKind>>& policy_names() {
  static const std::vector<std::pair<std::string, PolicyKind>> names = {
      {"rl", PolicyKind::Rl},           {"bnb", PolicyKind::Bnb},
      {"greedy", PolicyKind::Greedy},   {"heuristic", PolicyKind::Heuristic},
      {"fallback", PolicyKind::Fallback}, {"random", PolicyKind::Random}};
  return names;
}

inline PolicyKind parse_policy(const std::string& name) {
  for (const auto& [n, k] : policy_names())
    if (n == name) return k;
  std::string msg = "unknown policy '" + name + "'; valid:";
  for (const auto& [n, k] : policy_names()) msg += " " + n;
  throw ConfigError(msg);
}

inline std::string policy_name(PolicyKind k) {
  for (const auto& [n, kk] : policy_names())
    if (kk == k) return n;
  return "?";
}

struct EvalOptions {
  int jobs = 1;
  // Benchmark solves are budgeted; at (20, 12) scale the measured mean
  // objective gap to a 20M-node search is under 0.1% from 20k nodes up.
  std::uint64_t bnb_node_budget = 50'000;
  InstanceOptions instance{};
  TensorNorms norms{};
  EpisodeOptions episode{};
};

// One aggregated evaluation row: a (case, policy) cell of the comparison
// table. pct_of_benchmark is filled by compare().
struct EvalRow {
  std::string case_label;
  std::string policy;
  double median = 0.0;
  double p25 = 0.0;
  double p75 = 0.0;
  double mean = 0.0;
  double pct_of_benchmark = std::numeric_limits<double>::quiet_NaN();
  double lat_mean_ms = 0.0;
  double lat_std_ms = 0.0;
  double lat_max_ms = 0.0;
  double intercept_frac = 0.0;
  int episodes = 0;
  std::uint64_t seed = 0;
  // Per-(m, n) mean latency buckets, for the scalability report.
  std::map<std::pair<int, int>, std::pair<double, int>> latency_buckets;
};

// Order-statistic quantile with linear interpolation between ranks.
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const double frac = pos - static_cast<double>(lo);
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] * (1.0 - frac) + v[lo + 1] * frac;
}

namespace evaldetail {

// Clamps network actions onto live targets: indices at or beyond the
// episode's target count fall back to the lowest-heading-error target.
inline void clamp_assignment(Assignment& a, const WtaInstance& inst) {
  for (int i = 0; i < inst.m; ++i) {
    if (a[i] >= inst.n || a[i] < 0) {
      double best = std::numeric_limits<double>::infinity();
      int pick = 0;
      for (int j = 0; j < inst.n; ++j)
        if (inst.he(i, j) < best) {
          best = inst.he(i, j);
          pick = j;
        }
      a[i] = pick;
    }
  }
}

struct EpisodeRecord {
  double destroyed_value = 0.0;
  double latency_ms = 0.0;
  int intercepted = 0;
  int weapons = 0;
  int targets = 0;
};

}  // namespace evaldetail

// Runs one policy over `episodes` Monte Carlo engagements. Episode index e is
// reproducible in isolation; every policy evaluated on the same config and
// seed sees bit-identical initial conditions and threat draws (the policy
// choice never touches the environment streams).
inline EvalRow evaluate(const ScenarioConfig& cfg, PolicyKind policy, int episodes,
                        const NetworkParams* weights, const EvalOptions& opt = {}) {
  cfg.validate();
  if (policy == PolicyKind::Rl) {
    if (weights == nullptr) throw WeightsError("policy 'rl' requires trained weights");
    if (weights->m_max != cfg.m_max || weights->n_max != cfg.n_max)
      throw WeightsError("weights are for (" + std::to_string(weights->m_max) + ", " +
                         std::to_string(weights->n_max) + "), case needs (" +
                         std::to_string(cfg.m_max) + ", " + std::to_string(cfg.n_max) + ")");
  }

  std::vector<evaldetail::EpisodeRecord> records(episodes);

  auto run_one = [&](int e, bool timed) {
    const std::uint64_t episode_seed = static_cast<std::uint64_t>(e);
    const EpisodeInit init = sample_episode(cfg, episode_seed);
    const WtaInstance inst = build_instance(init, opt.instance);

    Assignment assignment;
    const auto t0 = std::chrono::steady_clock::now();
    switch (policy) {
      case PolicyKind::Rl: {
        EngagementState state = make_engagement_state(init);
        const EngagementTensor obs =
            build_engagement_tensor(state, cfg.m_max, cfg.n_max, opt.norms,
                                    opt.instance.feasibility_he_deg);
        const ActionDistribution dist = policy_forward(*weights, obs);
        assignment = greedy_action(dist, init.m());
        evaldetail::clamp_assignment(assignment, inst);
        break;
      }
      case PolicyKind::Bnb:
        assignment = solve_bnb(inst, opt.bnb_node_budget).assignment;
        break;
      case PolicyKind::Greedy:
        assignment = solve_greedy_local(inst).assignment;
        break;
      case PolicyKind::Heuristic:
        assignment = solve_heuristic(inst);
        break;
      case PolicyKind::Fallback:
        assignment = lowest_heading_error(inst);
        break;
      case PolicyKind::Random: {
        SplitMix64 rng(mix64(mix64(cfg.seed, episode_seed), kStreamPolicy));
        assignment.resize(init.m());
        for (int i = 0; i < init.m(); ++i) assignment[i] = rng.uniform_int(0, init.n() - 1);
        break;
      }
    }
    const auto t1 = std::chrono::steady_clock::now();

    EpisodeOptions ep = opt.episode;
    ep.stream_key = episode_stream_key(cfg.seed, episode_seed);
    const EpisodeResult res = run_episode(init, assignment, ep);

    if (timed) {
      evaldetail::EpisodeRecord& r = records[e];
      r.destroyed_value = res.destroyed_value;
      r.latency_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
      for (auto o : res.weapon_outcomes)
        if (o == WeaponOutcome::Intercepted) ++r.intercepted;
      r.weapons = init.m();
      r.targets = init.n();
    }
  };

  run_one(0, false);  // warm-up, excluded from the timing statistics
  parallel_for(episodes, opt.jobs, [&](int e) { run_one(e, true); });

  EvalRow row;
  row.case_label = cfg.case_label;
  row.policy = policy_name(policy);
  row.episodes = episodes;
  row.seed = cfg.seed;
  std::vector<double> values(episodes);
  double lat_sum = 0.0, lat_sq = 0.0;
  long intercepted = 0, weapons = 0;
  for (int e = 0; e < episodes; ++e) {
    values[e] = records[e].destroyed_value;
    lat_sum += records[e].latency_ms;
    lat_sq += records[e].latency_ms * records[e].latency_ms;
    row.lat_max_ms = std::max(row.lat_max_ms, records[e].latency_ms);
    intercepted += records[e].intercepted;
    weapons += records[e].weapons;
    auto& bucket = row.latency_buckets[{records[e].weapons, records[e].targets}];
    bucket.first += records[e].latency_ms;
    bucket.second += 1;
  }
  row.median = quantile(values, 0.5);
  row.p25 = quantile(values, 0.25);
  row.p75 = quantile(values, 0.75);
  row.mean = std::accumulate(values.begin(), values.end(), 0.0) / episodes;
  row.lat_mean_ms = lat_sum / episodes;
  const double var = std::max(0.0, lat_sq / episodes - row.lat_mean_ms * row.lat_mean_ms);
  row.lat_std_ms = std::sqrt(var);
  row.intercept_frac = weapons > 0 ? static_cast<double>(intercepted) / weapons : 0.0;
  for (auto& [k, v] : row.latency_buckets) v.first /= v.second;
  return row;
}

inline std::string eval_header() {
  return "case,policy,median,p25,p75,pct_of_benchmark,lat_mean_ms,lat_std_ms,lat_max_ms,"
         "intercept_frac";
}

inline std::string eval_row_csv(const EvalRow& r) {
  std::ostringstream os;
  os.precision(10);
  os << r.case_label << ',' << r.policy << ',' << r.median << ',' << r.p25 << ',' << r.p75 << ','
     << r.pct_of_benchmark << ',' << r.lat_mean_ms << ',' << r.lat_std_ms << ',' << r.lat_max_ms
     << ',' << r.intercept_frac;
  return os.str();
}

// Cross product of cases and policies with common random numbers per episode
// index. pct_of_benchmark is relative to the bnb row of the same case when
// bnb is among the policies, else to the first policy listed.
inline std::vector<EvalRow> compare(const std::vector<std::string>& cases,
                                    const std::vector<PolicyKind>& policies, int episodes,
                                    std::uint64_t seed, const NetworkParams* weights,
                                    const EvalOptions& opt = {},
                                    const std::function<void(const EvalRow&)>& progress = {}) {
  std::vector<EvalRow> rows;
  for (const std::string& label : cases) {
    ScenarioConfig cfg = make_case(label);
    cfg.seed = seed;
    std::size_t benchmark_idx = rows.size();
    for (std::size_t p = 0; p < policies.size(); ++p) {
      EvalRow row = evaluate(cfg, policies[p], episodes, weights, opt);
      if (policies[p] == PolicyKind::Bnb) benchmark_idx = rows.size();
      rows.push_back(row);
      if (progress) progress(row);
    }
    const double bench_median = rows[benchmark_idx].median;
    for (std::size_t p = rows.size() - policies.size(); p < rows.size(); ++p)
      rows[p].pct_of_benchmark = bench_median != 0.0 ? 100.0 * rows[p].median / bench_median
                                                     : std::numeric_limits<double>::quiet_NaN();
  }
  return rows;
}

inline void write_eval_csv(const std::vector<EvalRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  out << eval_header() << "\n";
  for (const auto& r : rows) out << eval_row_csv(r) << "\n";
}

// --- scalability bench ---------------------------------------------------------

struct ScaleRow {
  std::string preset;
  int m_max = 0, n_max = 0;
  int mn = 0;
  double ratio = 0.0;  // m*n relative to the (20,12) preset
  double rl_median = 0.0;
  double rl_lat_ms = 0.0;
  double rl_lat_cov = 0.0;  // coefficient of variation of per-(m,n) mean latency
  double heuristic_median = 0.0;
  double heuristic_lat_ms = 0.0;
};

inline double latency_cov(const EvalRow& row) {
  std::vector<double> means;
  for (const auto& [k, v] : row.latency_buckets) means.push_back(v.first);
  if (means.size() < 2) return 0.0;
  const double mean = std::accumulate(means.begin(), means.end(), 0.0) / means.size();
  double var = 0.0;
  for (double m : means) var += (m - mean) * (m - mean);
  return mean > 0.0 ? std::sqrt(var / means.size()) / mean : 0.0;
}

inline ScaleRow scale_bench(const std::string& preset, int episodes, std::uint64_t seed,
                            const NetworkParams& weights, const EvalOptions& opt = {}) {
  ScenarioConfig cfg = make_case(preset);
  cfg.seed = seed;
  ScaleRow row;
  row.preset = preset;
  row.m_max = cfg.m_max;
  row.n_max = cfg.n_max;
  row.mn = cfg.m_max * cfg.n_max;
  row.ratio = static_cast<double>(row.mn) / 240.0;

  // Latency dispersion across engagement sizes is the point here, so the
  // network pass runs without thread contention.
  EvalOptions rl_opt = opt;
  rl_opt.jobs = 1;
  const EvalRow rl = evaluate(cfg, PolicyKind::Rl, episodes, &weights, rl_opt);
  row.rl_median = rl.median;
  row.rl_lat_ms = rl.lat_mean_ms;
  row.rl_lat_cov = latency_cov(rl);

  const EvalRow heur = evaluate(cfg, PolicyKind::Heuristic, episodes, nullptr, opt);
  row.heuristic_median = heur.median;
  row.heuristic_lat_ms = heur.lat_mean_ms;
  return row;
}

inline void write_scale_csv(const std::vector<ScaleRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  out << "preset,m_max,n_max,mn,ratio,rl_median,rl_lat_ms,rl_lat_cov,heuristic_median,"
         "heuristic_lat_ms\n";
  out.precision(10);
  for (const auto& r : rows)
    out << r.preset << ',' << r.m_max << ',' << r.n_max << ',' << r.mn << ',' << r.ratio << ','
        << r.rl_median << ',' << r.rl_lat_ms << ',' << r.rl_lat_cov << ',' << r.heuristic_median
        << ',' << r.heuristic_lat_ms << "\n";
}

// --- solver verification ---------------------------------------------------------

struct OracleReport {
  int instances = 0;
  int bnb_exact = 0;          // value matches enumeration within tolerance
  int greedy_within_1pct = 0;
  double max_bnb_gap = 0.0;
  double max_greedy_gap_pct = 0.0;
  bool pass = false;
  std::string first_failure;  // serialized instance on exact mismatch
};

// Deterministic random small instance for the oracle suite.
inline WtaInstance random_instance(SplitMix64& rng, int m_lo = 1, int m_hi = 6, int n_lo = 1,
                                   int n_hi = 4) {
  WtaInstance inst;
  inst.resize(rng.uniform_int(m_lo, m_hi), rng.uniform_int(n_lo, n_hi));
  for (int j = 0; j < inst.n; ++j) inst.values[j] = rng.uniform(1.0, 15.0);
  for (int i = 0; i < inst.m; ++i) {
    for (int j = 0; j < inst.n; ++j) {
      const bool feasible = rng.u01() < 0.75;
      inst.feasible[static_cast<std::size_t>(i) * inst.n + j] = feasible ? 1 : 0;
      inst.f(i, j) = feasible ? rng.uniform(0.2, 0.9) : kInfeasibleInterception;
      inst.heading_errors[static_cast<std::size_t>(i) * inst.n + j] =
          feasible ? rng.uniform(0.0, 15.0) : rng.uniform(15.0, 180.0);
    }
  }
  return inst;
}

// Asserts bnb == enumeration on every instance and greedy within 1% on at
// least 95%; reports worst gaps.
inline OracleReport oracle_check(int instances, std::uint64_t seed) {
  OracleReport rep;
  rep.instances = instances;
  SplitMix64 rng(mix64(seed, 0x6f7261636cull));
  constexpr double kTol = 1e-9;
  for (int k = 0; k < instances; ++k) {
    const WtaInstance inst = random_instance(rng);
    const SolveResult oracle = solve_enumeration(inst);
    const SolveResult bnb = solve_bnb(inst);
    const SolveResult greedy = solve_greedy_local(inst);
    const double gap = std::abs(oracle.value - bnb.value);
    rep.max_bnb_gap = std::max(rep.max_bnb_gap, gap);
    if (gap <= kTol) {
      ++rep.bnb_exact;
    } else if (rep.first_failure.empty()) {
      rep.first_failure = instance_to_text(inst);
    }
    const double greedy_gap_pct =
        oracle.value > 0.0 ? 100.0 * (oracle.value - greedy.value) / oracle.value : 0.0;
    rep.max_greedy_gap_pct = std::max(rep.max_greedy_gap_pct, greedy_gap_pct);
    if (greedy_gap_pct <= 1.0) ++rep.greedy_within_1pct;
  }
  rep.pass = rep.bnb_exact == instances &&
             rep.greedy_within_1pct * 100 >= instances * 95;
  return rep;
}

}  // namespace wta
