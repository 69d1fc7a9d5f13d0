// Command-line harness for the strike-engagement simulator: episode
// simulation and trace export, policy training, Monte Carlo evaluation and
// policy comparison, scalability runs, plotting, and solver verification.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include "wta/wta.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitWeights = 3;
constexpr int kExitOracle = 4;
constexpr int kExitParse = 5;

wta::ScenarioConfig resolve_config(const std::string& config_path, const std::string& case_label,
                                   std::uint64_t seed) {
  wta::ScenarioConfig cfg =
      config_path.empty() ? wta::make_case(case_label) : wta::load_config(config_path);
  cfg.seed = seed;
  return cfg;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(s);
  while (std::getline(ss, cur, ',')) {
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

void print_rows(const std::vector<wta::EvalRow>& rows) {
  std::cout << wta::eval_header() << "\n";
  for (const auto& r : rows) std::cout << wta::eval_row_csv(r) << "\n";
}

int run_simulate(const std::string& config_path, const std::string& case_label,
                 std::uint64_t seed, std::uint64_t episode_seed, const std::string& policy_name,
                 const std::string& weights_path, const std::string& out_path,
                 const std::string& export_config_path) {
  wta::ScenarioConfig cfg = resolve_config(config_path, case_label, seed);
  if (!export_config_path.empty()) {
    wta::save_config(cfg, export_config_path);
    std::cout << "wrote " << export_config_path << "\n";
    if (policy_name.empty()) return kExitOk;
  }

  const wta::EpisodeInit init = wta::sample_episode(cfg, episode_seed);
  const wta::WtaInstance inst = wta::build_instance(init);

  wta::Assignment assignment;
  const wta::PolicyKind kind = wta::parse_policy(policy_name.empty() ? "heuristic" : policy_name);
  std::optional<wta::NetworkParams> weights;
  switch (kind) {
    case wta::PolicyKind::Rl:
      weights = wta::load_params(weights_path, cfg.m_max, cfg.n_max);
      {
        wta::EngagementState st = wta::make_engagement_state(init);
        const auto obs = wta::build_engagement_tensor(st, cfg.m_max, cfg.n_max);
        assignment = wta::greedy_action(wta::policy_forward(*weights, obs), init.m());
        for (int i = 0; i < init.m(); ++i)
          if (assignment[i] >= init.n()) assignment[i] = wta::lowest_heading_error(inst)[i];
      }
      break;
    case wta::PolicyKind::Bnb:
      assignment = wta::solve_bnb(inst).assignment;
      break;
    case wta::PolicyKind::Greedy:
      assignment = wta::solve_greedy_local(inst).assignment;
      break;
    case wta::PolicyKind::Heuristic:
      assignment = wta::solve_heuristic(inst);
      break;
    case wta::PolicyKind::Fallback:
      assignment = wta::lowest_heading_error(inst);
      break;
    case wta::PolicyKind::Random: {
      wta::SplitMix64 rng(wta::mix64(wta::mix64(cfg.seed, episode_seed), wta::kStreamPolicy));
      assignment.resize(init.m());
      for (int i = 0; i < init.m(); ++i) assignment[i] = rng.uniform_int(0, init.n() - 1);
      break;
    }
  }

  wta::EpisodeOptions opt;
  opt.record_trace = !out_path.empty();
  opt.stream_key = wta::episode_stream_key(cfg.seed, episode_seed);
  const wta::EpisodeResult res = wta::run_episode(init, assignment, opt);

  std::cout << "episode " << episode_seed << " (" << cfg.case_label << "): m=" << init.m()
            << " n=" << init.n() << "\n";
  std::cout << "assignment:";
  for (int a : assignment) std::cout << ' ' << a;
  std::cout << "\n";
  std::cout << "destroyed value " << res.destroyed_value << ", reward " << res.reward
            << ", intercepted " << res.intercept_fraction * init.m() << "/" << init.m()
            << ", elapsed " << res.elapsed << " s\n";
  if (!out_path.empty()) {
    std::vector<double> values;
    for (const auto& t : init.targets) values.push_back(t.true_value);
    wta::write_trace_csv(res.trace, values, out_path);
    std::cout << "trace written to " << out_path << "\n";
  }
  return kExitOk;
}

int run_train(const std::string& config_path, const std::string& case_label, std::uint64_t seed,
              int m_max, int n_max, wta::TrainConfig tc, int best_of, int holdout_episodes,
              const std::string& out_dir) {
  wta::ScenarioConfig cfg = resolve_config(config_path, case_label, seed);
  if (m_max > 0) {
    cfg.m_max = m_max;
    cfg.m_range = {std::min(cfg.m_range.lo, m_max), m_max};
  }
  if (n_max > 0) {
    cfg.n_max = n_max;
    cfg.n_range = {std::min(cfg.n_range.lo, n_max), n_max};
  }
  cfg.validate();
  std::filesystem::create_directories(out_dir);

  auto progress = [](const wta::LearningCurveRow& r) {
    std::printf("iter %4d  episodes %8ld  reward mean %8.2f  min %7.1f  max %7.1f  vloss %10.2f  kl %.4f\n",
                r.iteration, r.episodes, r.mean_reward, r.min_reward, r.max_reward, r.value_loss,
                r.kl);
    std::fflush(stdout);
  };

  double best_median = -1.0;
  for (int run = 0; run < best_of; ++run) {
    wta::TrainConfig run_tc = tc;
    run_tc.seed = tc.seed + static_cast<std::uint64_t>(run);
    const std::string run_dir =
        best_of == 1 ? out_dir : out_dir + "/run" + std::to_string(run);
    std::cout << "=== training run " << run << " (seed " << run_tc.seed << ") ===\n";
    const wta::TrainResult result = wta::train(cfg, run_tc, run_dir, progress);

    if (best_of == 1) {
      wta::save_params(result.params,
                       out_dir + "/policy_" + std::to_string(cfg.m_max) + "x" +
                           std::to_string(cfg.n_max) + ".wta");
      return kExitOk;
    }
    // Held-out selection: median destroyed value with greedy actions on the
    // evaluation distribution.
    wta::ScenarioConfig eval_cfg = cfg;
    eval_cfg.seed = wta::mix64(tc.seed, 0x686f6c64ull);
    wta::EvalOptions eopt;
    eopt.jobs = tc.jobs;
    const wta::EvalRow row =
        wta::evaluate(eval_cfg, wta::PolicyKind::Rl, holdout_episodes, &result.params, eopt);
    std::cout << "run " << run << " held-out median " << row.median << "\n";
    if (row.median > best_median) {
      best_median = row.median;
      wta::save_params(result.params,
                       out_dir + "/policy_" + std::to_string(cfg.m_max) + "x" +
                           std::to_string(cfg.n_max) + ".wta");
    }
  }
  std::cout << "best held-out median " << best_median << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"strike-engagement weapon-target assignment simulator and benchmark"};
  app.require_subcommand(1);

  // Shared option storage.
  std::string config_path, case_label = "Nominal", policy = "", weights_path = "weights/policy_20x12.wta";
  std::string out_path, in_path, kind;
  std::uint64_t seed = 0, episode_seed = 0;
  int episodes = 5000, jobs = 1;
  bool full = false;

  auto* simulate = app.add_subcommand("simulate", "run one episode, optionally exporting a trace");
  simulate->add_option("--config", config_path, "scenario config file");
  simulate->add_option("--case", case_label, "named case preset");
  simulate->add_option("--seed", seed, "root seed");
  simulate->add_option("--episode-seed", episode_seed, "episode index");
  simulate->add_option("--policy", policy, "rl|bnb|greedy|heuristic|fallback|random");
  simulate->add_option("--weights", weights_path, "weights manifest for --policy rl");
  simulate->add_option("--out", out_path, "trace CSV output path");
  std::string export_config;
  simulate->add_option("--export-config", export_config, "write the resolved config and exit");

  auto* train = app.add_subcommand("train", "optimize a policy with PPO");
  wta::TrainConfig tc;
  int m_max_override = 0, n_max_override = 0, best_of = 1, holdout = 500;
  std::string train_out = "out/train";
  train->add_option("--config", config_path, "scenario config file");
  train->add_option("--case", case_label, "named case preset");
  train->add_option("--seed", tc.seed, "training seed");
  train->add_option("--m-max", m_max_override, "override maximum weapon count");
  train->add_option("--n-max", n_max_override, "override maximum target count");
  train->add_option("--iterations", tc.max_iterations, "optimization iterations");
  train->add_option("--rollout", tc.episodes_per_rollout, "episodes per rollout");
  train->add_option("--epochs", tc.epochs_per_update, "epochs per update");
  train->add_option("--minibatch", tc.minibatch_size, "minibatch size");
  train->add_option("--policy-lr", tc.policy_lr, "policy learning rate");
  train->add_option("--value-lr", tc.value_lr, "value learning rate");
  train->add_option("--clip", tc.clip_epsilon, "surrogate clipping parameter");
  train->add_option("--entropy-bonus", tc.entropy_bonus, "entropy bonus coefficient");
  train->add_option("--checkpoint-every", tc.checkpoint_every, "iterations between checkpoints");
  train->add_option("--jobs", tc.jobs, "parallel rollout workers");
  train->add_option("--seeds", best_of, "parallel optimization runs, best kept");
  train->add_option("--holdout", holdout, "held-out episodes for best-of selection");
  train->add_option("--out", train_out, "output directory");

  auto* eval = app.add_subcommand("eval", "Monte Carlo evaluation of one policy on one case");
  eval->add_option("--config", config_path, "scenario config file");
  eval->add_option("--case", case_label, "named case preset");
  eval->add_option("--policy", policy, "rl|bnb|greedy|heuristic|fallback|random")->required();
  eval->add_option("--episodes", episodes, "episode count");
  eval->add_option("--seed", seed, "root seed");
  eval->add_option("--weights", weights_path, "weights manifest for --policy rl");
  eval->add_option("--jobs", jobs, "parallel episode workers");
  eval->add_option("--out", out_path, "CSV output path");

  auto* compare = app.add_subcommand("compare", "cross-case policy comparison table");
  std::string cases_arg = "Nominal,Threat Model 1,Threat Model 2,Sensor Noise,Threat Targeting,25km Range";
  std::string policies_arg = "bnb,rl,heuristic";
  std::string cdf_arg = "printed";
  std::uint64_t bnb_budget = 2'000'000;
  compare->add_option("--cases", cases_arg, "comma-separated case labels");
  compare->add_option("--policies", policies_arg, "comma-separated policy names");
  compare->add_option("--episodes", episodes, "episodes per (case, policy) cell");
  compare->add_flag("--full", full, "use the full 30000-episode protocol");
  compare->add_option("--seed", seed, "root seed");
  compare->add_option("--weights", weights_path, "weights manifest for rl");
  compare->add_option("--jobs", jobs, "parallel episode workers");
  compare->add_option("--out", out_path, "CSV output path");
  compare->add_option("--cdf", cdf_arg, "interception CDF form: printed|exact");
  compare->add_option("--bnb-budget", bnb_budget, "branch-and-bound node budget");

  auto* scale = app.add_subcommand("scale", "scalability benchmark across engagement sizes");
  std::string presets_arg = "scale-20x12,scale-40x24,scale-60x36";
  std::string weights_dir = "weights";
  scale->add_option("--presets", presets_arg, "comma-separated scale presets");
  scale->add_option("--episodes", episodes, "episodes per preset");
  scale->add_option("--seed", seed, "root seed");
  scale->add_option("--weights-dir", weights_dir, "directory holding policy_MxN.wta files");
  scale->add_option("--jobs", jobs, "parallel episode workers");
  scale->add_option("--out", out_path, "CSV output path");

  auto* plot = app.add_subcommand("plot", "render SVG plots from output files");
  plot->add_option("--kind", kind, "learning-curve|engagement")->required();
  plot->add_option("--in", in_path, "input file")->required();
  plot->add_option("--out", out_path, "output SVG path")->required();

  auto* oracle = app.add_subcommand("oracle-check", "verify solvers against exhaustive search");
  int instances = 200;
  std::string dump_path;
  oracle->add_option("--instances", instances, "random instance count");
  oracle->add_option("--seed", seed, "root seed");
  oracle->add_option("--dump", dump_path, "path for a failing instance dump");

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed())
      return run_simulate(config_path, case_label, seed, episode_seed, policy, weights_path,
                          out_path, export_config);

    if (train->parsed())
      return run_train(config_path, case_label, tc.seed, m_max_override, n_max_override, tc,
                       best_of, holdout, train_out);

    if (eval->parsed()) {
      wta::ScenarioConfig cfg = resolve_config(config_path, case_label, seed);
      const wta::PolicyKind k = wta::parse_policy(policy);
      std::optional<wta::NetworkParams> weights;
      if (k == wta::PolicyKind::Rl) weights = wta::load_params(weights_path, cfg.m_max, cfg.n_max);
      wta::EvalOptions opt;
      opt.jobs = jobs;
      const wta::EvalRow row =
          wta::evaluate(cfg, k, episodes, weights ? &*weights : nullptr, opt);
      print_rows({row});
      if (!out_path.empty()) wta::write_eval_csv({row}, out_path);
      return kExitOk;
    }

    if (compare->parsed()) {
      const int n_episodes = full ? 30000 : episodes;
      std::vector<wta::PolicyKind> kinds;
      bool needs_weights = false;
      for (const auto& p : split_list(policies_arg)) {
        kinds.push_back(wta::parse_policy(p));
        if (kinds.back() == wta::PolicyKind::Rl) needs_weights = true;
      }
      std::optional<wta::NetworkParams> weights;
      if (needs_weights) weights = wta::load_params(weights_path, 20, 12);
      wta::EvalOptions opt;
      opt.jobs = jobs;
      opt.bnb_node_budget = bnb_budget;
      if (cdf_arg == "exact") opt.instance.cdf = wta::CdfForm::Exact;
      else if (cdf_arg != "printed") throw wta::ConfigError("--cdf must be printed or exact");
      auto progress = [](const wta::EvalRow& r) {
        std::cout << "done: " << r.case_label << " / " << r.policy << " median " << r.median
                  << "\n";
        std::cout.flush();
      };
      const auto rows = wta::compare(split_list(cases_arg), kinds, n_episodes, seed,
                                     weights ? &*weights : nullptr, opt, progress);
      print_rows(rows);
      if (!out_path.empty()) wta::write_eval_csv(rows, out_path);
      return kExitOk;
    }

    if (scale->parsed()) {
      std::vector<wta::ScaleRow> rows;
      for (const auto& preset : split_list(presets_arg)) {
        const wta::ScenarioConfig cfg = wta::make_case(preset);
        const std::string wpath = weights_dir + "/policy_" + std::to_string(cfg.m_max) + "x" +
                                  std::to_string(cfg.n_max) + ".wta";
        const wta::NetworkParams weights = wta::load_params(wpath, cfg.m_max, cfg.n_max);
        wta::EvalOptions opt;
        opt.jobs = jobs;
        rows.push_back(wta::scale_bench(preset, episodes, seed, weights, opt));
        std::cout << "done: " << preset << "\n";
      }
      std::cout << "preset,m_max,n_max,mn,ratio,rl_median,rl_lat_ms,rl_lat_cov,heuristic_median,heuristic_lat_ms\n";
      std::cout.precision(6);
      for (const auto& r : rows)
        std::cout << r.preset << ',' << r.m_max << ',' << r.n_max << ',' << r.mn << ',' << r.ratio
                  << ',' << r.rl_median << ',' << r.rl_lat_ms << ',' << r.rl_lat_cov << ','
                  << r.heuristic_median << ',' << r.heuristic_lat_ms << "\n";
      if (!out_path.empty()) wta::write_scale_csv(rows, out_path);
      return kExitOk;
    }

    if (plot->parsed()) {
      if (kind == "learning-curve") wta::plot_learning_curve(in_path, out_path);
      else if (kind == "engagement") wta::plot_engagement(in_path, out_path);
      else throw wta::ConfigError("--kind must be learning-curve or engagement");
      std::cout << "wrote " << out_path << "\n";
      return kExitOk;
    }

    if (oracle->parsed()) {
      const wta::OracleReport rep = wta::oracle_check(instances, seed);
      std::printf("oracle-check: %d instances, bnb exact %d/%d, greedy within 1%%: %d/%d\n",
                  rep.instances, rep.bnb_exact, rep.instances, rep.greedy_within_1pct,
                  rep.instances);
      std::printf("max bnb gap %.3g, max greedy gap %.3f%%\n", rep.max_bnb_gap,
                  rep.max_greedy_gap_pct);
      if (!rep.pass) {
        if (!rep.first_failure.empty()) {
          const std::string path = dump_path.empty() ? "oracle_failure.wta-instance" : dump_path;
          std::ofstream dump(path);
          dump << rep.first_failure;
          std::cerr << "exact mismatch; failing instance written to " << path << "\n";
        }
        std::cerr << "oracle-check FAILED\n";
        return kExitOracle;
      }
      std::cout << "oracle-check passed\n";
      return kExitOk;
    }
  } catch (const wta::WeightsError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitWeights;
  } catch (const wta::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
