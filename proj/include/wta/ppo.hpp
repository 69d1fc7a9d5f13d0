#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "wta/engagement.hpp"
#include "wta/network.hpp"
#include "wta/parallel.hpp"
#include "wta/rng.hpp"
#include "wta/scenario.hpp"

namespace wta {

struct TrainConfig {
  int episodes_per_rollout = 2000;
  double clip_epsilon = 0.1;
  double policy_lr = 1e-4;
  double value_lr = 1e-3;
  int epochs_per_update = 10;
  int minibatch_size = 256;
  double gamma = 0.99;  // retained for the return definition; inert for one-step episodes
  double entropy_bonus = 0.0;
  int max_iterations = 100;
  double reward_alpha = 10.0;
  bool advantage_normalization = true;
  int checkpoint_every = 25;
  int jobs = 1;
  std::uint64_t seed = 0;

  void validate() const {
    if (episodes_per_rollout < 1 || epochs_per_update < 1 || minibatch_size < 1 ||
        max_iterations < 1)
      throw ConfigError("train config counts must be >= 1");
    if (clip_epsilon <= 0.0 || clip_epsilon >= 1.0)
      throw ConfigError("clip_epsilon must lie in (0, 1)");
  }
};

// One entry per episode; the decision problem is single step.
struct RolloutBatch {
  std::vector<EngagementTensor> observations;
  std::vector<Assignment> actions;
  std::vector<double> rewards;
  std::vector<double> old_log_probs;
  std::vector<double> values;

  std::size_t size() const { return rewards.size(); }
};

// Training always runs at the maximum engagement size; evaluation randomizes
// sizes separately.
inline ScenarioConfig fixed_size_config(ScenarioConfig cfg) {
  cfg.m_range = {cfg.m_max, cfg.m_max};
  cfg.n_range = {cfg.n_max, cfg.n_max};
  return cfg;
}

// Collects one rollout. Episode e of iteration k is reproducible on its own:
// everything derives from (config seed, iteration, episode index).
inline RolloutBatch collect_rollout(const NetworkParams& params, const ScenarioConfig& scenario,
                                    const TrainConfig& tc, std::uint64_t iteration) {
  const ScenarioConfig cfg = fixed_size_config(scenario);
  const int count = tc.episodes_per_rollout;
  RolloutBatch batch;
  batch.observations.resize(count);
  batch.actions.resize(count);
  batch.rewards.resize(count);
  batch.old_log_probs.resize(count);
  batch.values.resize(count);

  parallel_for(count, tc.jobs, [&](int e) {
    const std::uint64_t episode_seed = mix64(tc.seed, iteration, static_cast<std::uint64_t>(e));
    EpisodeInit init;
    try {
      init = sample_episode(cfg, episode_seed);
    } catch (const std::exception& ex) {
      throw ScenarioError("rollout episode " + std::to_string(e) + " of iteration " +
                          std::to_string(iteration) + ": " + ex.what());
    }
    EngagementState state = make_engagement_state(init);
    const EngagementTensor obs = build_engagement_tensor(state, cfg.m_max, cfg.n_max);
    const ActionDistribution dist = policy_forward(params, obs);
    SplitMix64 action_rng(mix64(episode_seed, kStreamPolicy));
    const Assignment action = sample_action(dist, init.m(), action_rng);
    const auto [lp, ent] = log_prob_and_entropy(dist, action, init.m());

    EpisodeOptions opt;
    opt.reward_alpha = tc.reward_alpha;
    opt.stream_key = episode_stream_key(cfg.seed, episode_seed);
    const EpisodeResult res = run_episode(init, action, opt);

    batch.observations[e] = obs;
    batch.actions[e] = action;
    batch.rewards[e] = res.reward;
    batch.old_log_probs[e] = lp;
    batch.values[e] = value_forward(params, obs);
  });
  return batch;
}

// Single-step advantage: empirical return minus the value baseline. Optional
// batch normalization to zero mean, unit deviation.
inline std::vector<double> advantages(const RolloutBatch& batch, bool normalize) {
  std::vector<double> adv(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) adv[i] = batch.rewards[i] - batch.values[i];
  if (normalize && !adv.empty()) {
    double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / adv.size();
    double var = 0.0;
    for (double a : adv) var += (a - mean) * (a - mean);
    const double sd = std::sqrt(var / adv.size());
    for (double& a : adv) a = (a - mean) / (sd + 1e-8);
  }
  return adv;
}

// Clipped surrogate for one sample: min(ratio * A, clip(ratio) * A).
inline double clipped_surrogate(double ratio, double advantage, double epsilon) {
  const double unclipped = ratio * advantage;
  const double clipped = std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon) * advantage;
  return std::min(unclipped, clipped);
}

// --- Adam ---------------------------------------------------------------------

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;

  void init_like(NetworkParams& params) {
    const auto tensors = params.tensors();
    m.clear();
    v.clear();
    for (const auto& t : tensors) {
      m.push_back(Matrix::Zero(t.tensor->rows(), t.tensor->cols()));
      v.push_back(Matrix::Zero(t.tensor->rows(), t.tensor->cols()));
    }
    step = 0;
  }
};

namespace ppodetail {

// Applies one adaptive-moment step to a tensor; direction +1 ascends.
inline void adam_apply(Matrix& param, const Matrix& grad, Matrix& m, Matrix& v, AdamState& st,
                       double lr, double direction) {
  m = st.beta1 * m + (1.0 - st.beta1) * grad;
  v = st.beta2 * v + (1.0 - st.beta2) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  param.array() +=
      direction * lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + st.eps);
}

inline std::vector<Matrix*> stack_grad_list(StackGrads& g) {
  return {&g.conv1.w, &g.conv1.b, &g.conv2.w, &g.conv2.b, &g.fc1.w,
          &g.fc1.b,   &g.fc2.w,   &g.fc2.b,   &g.fc3.w,   &g.fc3.b};
}

inline std::vector<Matrix*> stack_tensor_list(NetworkStack& s) {
  return {&s.conv1.w, &s.conv1.b, &s.conv2.w, &s.conv2.b, &s.fc1.w,
          &s.fc1.b,   &s.fc2.w,   &s.fc2.b,   &s.fc3.w,   &s.fc3.b};
}

}  // namespace ppodetail

struct UpdateMetrics {
  double mean_reward = 0.0;
  double min_reward = 0.0;
  double max_reward = 0.0;
  double surrogate = 0.0;
  double value_loss = 0.0;
  double kl = 0.0;             // mean (ratio - 1) - log ratio estimate
  double clip_fraction = 0.0;  // |ratio - 1| > epsilon
  double entropy = 0.0;
};

// One PPO update: for each epoch, shuffle the batch, then per minibatch
// maximize the clipped surrogate (plus any entropy bonus) over the policy and
// minimize the squared-error value loss, each with its own Adam optimizer.
inline UpdateMetrics ppo_update(NetworkParams& params, AdamState& policy_adam,
                                AdamState& value_adam, const RolloutBatch& batch,
                                const TrainConfig& tc, std::uint64_t iteration) {
  if (batch.size() == 0) throw ConfigError("ppo_update: empty batch");
  const int total = static_cast<int>(batch.size());
  const NetDims d = params.dims();
  const std::vector<double> adv = advantages(batch, tc.advantage_normalization);

  UpdateMetrics metrics;
  metrics.min_reward = *std::min_element(batch.rewards.begin(), batch.rewards.end());
  metrics.max_reward = *std::max_element(batch.rewards.begin(), batch.rewards.end());
  metrics.mean_reward =
      std::accumulate(batch.rewards.begin(), batch.rewards.end(), 0.0) / total;

  // All samples share the training engagement size.
  const int m_rows = static_cast<int>(batch.actions[0].size());

  std::vector<int> order(total);
  std::iota(order.begin(), order.end(), 0);
  SplitMix64 shuffle_rng(mix64(tc.seed, iteration, 0x73687566ull));

  double last_surrogate = 0.0, last_vloss = 0.0, last_kl = 0.0, last_clipfrac = 0.0,
         last_entropy = 0.0;
  long stat_batches = 0;

  for (int epoch = 0; epoch < tc.epochs_per_update; ++epoch) {
    // Fisher-Yates with the library generator, identical on every platform.
    for (int i = total - 1; i > 0; --i) {
      const int j = shuffle_rng.uniform_int(0, i);
      std::swap(order[i], order[j]);
    }
    double ep_surr = 0.0, ep_vloss = 0.0, ep_kl = 0.0, ep_clip = 0.0, ep_ent = 0.0;
    int ep_batches = 0;
    for (int start = 0; start < total; start += tc.minibatch_size) {
      const int b = std::min(tc.minibatch_size, total - start);

      Matrix input(b, static_cast<Eigen::Index>(3) * params.m_max * params.n_max);
      for (int s = 0; s < b; ++s)
        input.row(s) = tensor_to_row(batch.observations[order[start + s]]);

      StackCache pol_cache, val_cache;
      stack_forward(params.policy, input, params.m_max, params.n_max, pol_cache);
      stack_forward(params.value, input, params.m_max, params.n_max, val_cache);

      // Per-sample log prob, entropy, and d(loss)/d(logits).
      Matrix dlogits = Matrix::Zero(b, d.act_dim);
      double surr_sum = 0.0, kl_sum = 0.0, ent_sum = 0.0;
      int clip_count = 0;
      Matrix dvalue(b, 1);
      double vloss_sum = 0.0;

      for (int s = 0; s < b; ++s) {
        const int k = order[start + s];
        const Assignment& act = batch.actions[k];
        double lp = 0.0;
        double ent = 0.0;
        // Row softmax over the episode's action rows.
        Eigen::ArrayXXd probs(m_rows, params.n_max);
        for (int i = 0; i < m_rows; ++i) {
          Eigen::RowVectorXd row = pol_cache.out.block(s, i * params.n_max, 1, params.n_max);
          const double mx = row.maxCoeff();
          Eigen::ArrayXd shifted = row.transpose().array() - mx;
          Eigen::ArrayXd e = shifted.exp();
          const double sum = e.sum();
          probs.row(i) = (e / sum).transpose();
          const double lse = std::log(sum);
          lp += shifted(act[i]) - lse;
          ent += lse - (probs.row(i).transpose() * shifted).sum();
        }
        const double ratio = std::exp(lp - batch.old_log_probs[k]);
        const double a_k = adv[k];
        surr_sum += clipped_surrogate(ratio, a_k, tc.clip_epsilon);
        kl_sum += (ratio - 1.0) - (lp - batch.old_log_probs[k]);
        ent_sum += ent;
        if (std::abs(ratio - 1.0) > tc.clip_epsilon) ++clip_count;

        // Gradient of min(r A, clip(r) A) wrt lp: r A when the unclipped
        // branch is active (or tied), else 0.
        const bool unclipped_active =
            ratio * a_k <= std::clamp(ratio, 1.0 - tc.clip_epsilon, 1.0 + tc.clip_epsilon) * a_k;
        const double dsurr_dlp = unclipped_active ? ratio * a_k : 0.0;
        // Ascent objective per sample: surrogate/b + entropy_bonus * entropy/b.
        const double w_lp = dsurr_dlp / b;
        const double w_ent = tc.entropy_bonus / b;
        for (int i = 0; i < m_rows; ++i) {
          for (int j = 0; j < params.n_max; ++j) {
            const double p = probs(i, j);
            const double indicator = (j == act[i]) ? 1.0 : 0.0;
            double g = w_lp * (indicator - p);
            if (w_ent != 0.0) {
              // d entropy / d logit = -p (log p + H_row)
              double h_row = 0.0;
              for (int jj = 0; jj < params.n_max; ++jj) {
                const double pj = probs(i, jj);
                if (pj > 0.0) h_row -= pj * std::log(pj);
              }
              g += w_ent * (-p * (std::log(std::max(p, 1e-300)) + h_row));
            }
            dlogits(s, i * params.n_max + j) = g;
          }
        }

        const double err = val_cache.out(s, 0) - batch.rewards[k];
        vloss_sum += 0.5 * err * err;
        dvalue(s, 0) = err / b;  // gradient of (1/2b) sum err^2
      }

      if (!std::isfinite(surr_sum) || !std::isfinite(vloss_sum))
        throw SolverError("non-finite loss in minibatch starting at sample " +
                          std::to_string(start) + " (iteration " + std::to_string(iteration) +
                          ", seed " + std::to_string(tc.seed) + ")");

      StackGrads pol_grads =
          stack_backward(params.policy, pol_cache, dlogits, params.m_max, params.n_max);
      StackGrads val_grads =
          stack_backward(params.value, val_cache, dvalue, params.m_max, params.n_max);

      ++policy_adam.step;
      ++value_adam.step;
      auto pol_params = ppodetail::stack_tensor_list(params.policy);
      auto val_params = ppodetail::stack_tensor_list(params.value);
      auto pol_glist = ppodetail::stack_grad_list(pol_grads);
      auto val_glist = ppodetail::stack_grad_list(val_grads);
      for (std::size_t t = 0; t < pol_params.size(); ++t)
        ppodetail::adam_apply(*pol_params[t], *pol_glist[t], policy_adam.m[t], policy_adam.v[t],
                              policy_adam, tc.policy_lr, +1.0);
      for (std::size_t t = 0; t < val_params.size(); ++t)
        ppodetail::adam_apply(*val_params[t], *val_glist[t], value_adam.m[t + 10], value_adam.v[t + 10],
                              value_adam, tc.value_lr, -1.0);

      ep_surr += surr_sum / b;
      ep_vloss += vloss_sum / b;
      ep_kl += kl_sum / b;
      ep_clip += static_cast<double>(clip_count) / b;
      ep_ent += ent_sum / b;
      ++ep_batches;
    }
    last_surrogate = ep_surr / ep_batches;
    last_vloss = ep_vloss / ep_batches;
    last_kl = ep_kl / ep_batches;
    last_clipfrac = ep_clip / ep_batches;
    last_entropy = ep_ent / ep_batches;
    stat_batches += ep_batches;
  }
  metrics.surrogate = last_surrogate;
  metrics.value_loss = last_vloss;
  metrics.kl = last_kl;
  metrics.clip_fraction = last_clipfrac;
  metrics.entropy = last_entropy;
  return metrics;
}

// --- training-state persistence -------------------------------------------------
//
// A checkpoint carries the weights plus both optimizers' moments, so a
// resumed run reproduces the original bit for bit (rollout seeds derive from
// the iteration index, not from run history).

inline void save_training_state(const std::string& path, const NetworkParams& params,
                                const AdamState& policy_adam, const AdamState& value_adam,
                                int next_iteration, long episodes_seen) {
  std::ofstream out(path);
  if (!out) throw WeightsError("cannot open '" + path + "' for writing");
  out.precision(17);
  out << "wta-train-state 1\n";
  out << "next_iteration " << next_iteration << "\n";
  out << "episodes_seen " << episodes_seen << "\n";
  out << "policy_adam_step " << policy_adam.step << "\n";
  out << "value_adam_step " << value_adam.step << "\n";
  const auto tensors = params.tensors();
  out << "m_max " << params.m_max << "\n";
  out << "n_max " << params.n_max << "\n";
  auto dump = [&out](const std::string& name, const Matrix& m) {
    out << "tensor " << name << ' ' << m.rows() << ' ' << m.cols() << "\n";
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        if (c) out << ' ';
        out << m(r, c);
      }
      out << "\n";
    }
  };
  for (const auto& t : tensors) dump(t.name, *t.tensor);
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    dump(tensors[i].name + ".adam_p_m", policy_adam.m[i]);
    dump(tensors[i].name + ".adam_p_v", policy_adam.v[i]);
    dump(tensors[i].name + ".adam_v_m", value_adam.m[i]);
    dump(tensors[i].name + ".adam_v_v", value_adam.v[i]);
  }
  if (!out) throw WeightsError("write failed for '" + path + "'");
}

struct TrainState {
  NetworkParams params;
  AdamState policy_adam, value_adam;
  int next_iteration = 0;
  long episodes_seen = 0;
};

inline TrainState load_training_state(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw WeightsError("cannot open train state '" + path + "'");
  std::string tag;
  int version = 0;
  if (!(in >> tag >> version) || tag != "wta-train-state" || version != 1)
    throw WeightsError("'" + path + "' is not a version-1 train state");
  TrainState st;
  auto expect_kv = [&in](const std::string& key) {
    std::string k;
    long long v;
    if (!(in >> k >> v) || k != key) throw WeightsError("train state missing " + key);
    return v;
  };
  st.next_iteration = static_cast<int>(expect_kv("next_iteration"));
  st.episodes_seen = static_cast<long>(expect_kv("episodes_seen"));
  const auto p_step = expect_kv("policy_adam_step");
  const auto v_step = expect_kv("value_adam_step");
  const int m_max = static_cast<int>(expect_kv("m_max"));
  const int n_max = static_cast<int>(expect_kv("n_max"));
  st.params = init_network(m_max, n_max, 0);
  st.policy_adam.init_like(st.params);
  st.value_adam.init_like(st.params);
  st.policy_adam.step = p_step;
  st.value_adam.step = v_step;

  auto read_into = [&in](const std::string& name, Matrix& m) {
    std::string t, n;
    Eigen::Index rows, cols;
    if (!(in >> t >> n >> rows >> cols) || t != "tensor" || n != name)
      throw WeightsError("train state: expected tensor '" + name + "'");
    if (rows != m.rows() || cols != m.cols())
      throw WeightsError("train state: shape mismatch for '" + name + "'");
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c)
        if (!(in >> m(r, c))) throw WeightsError("train state: truncated '" + name + "'");
  };
  auto tensors = st.params.tensors();
  for (auto& t : tensors) read_into(t.name, *t.tensor);
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    read_into(tensors[i].name + ".adam_p_m", st.policy_adam.m[i]);
    read_into(tensors[i].name + ".adam_p_v", st.policy_adam.v[i]);
    read_into(tensors[i].name + ".adam_v_m", st.value_adam.m[i]);
    read_into(tensors[i].name + ".adam_v_v", st.value_adam.v[i]);
  }
  return st;
}

struct LearningCurveRow {
  int iteration;
  long episodes;
  double mean_reward, min_reward, max_reward, value_loss, kl, clip_fraction;
};

inline void write_learning_curve(const std::vector<LearningCurveRow>& rows,
                                 const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  out << "iteration,episodes,mean_reward,min_reward,max_reward,value_loss,kl,clip_fraction\n";
  out.precision(10);
  for (const auto& r : rows)
    out << r.iteration << ',' << r.episodes << ',' << r.mean_reward << ',' << r.min_reward << ','
        << r.max_reward << ',' << r.value_loss << ',' << r.kl << ',' << r.clip_fraction << "\n";
}

struct TrainResult {
  NetworkParams params;
  std::vector<LearningCurveRow> curve;
};

// Full optimization loop: collect, update, log, checkpoint. Reward statistics
// are computed over each rollout before the update that consumes it. Passing
// a resume path restores weights, optimizer moments, and the iteration
// counter, reproducing the uninterrupted run exactly.
inline TrainResult train(const ScenarioConfig& scenario, const TrainConfig& tc,
                         const std::string& out_dir,
                         const std::function<void(const LearningCurveRow&)>& progress = {},
                         const std::string& resume_path = {}) {
  tc.validate();
  scenario.validate();
  namespace fs = std::filesystem;
  if (!out_dir.empty()) fs::create_directories(out_dir);

  TrainResult result;
  AdamState policy_adam, value_adam;
  int first_iteration = 0;
  long episodes_seen = 0;
  if (resume_path.empty()) {
    result.params = init_network(scenario.m_max, scenario.n_max, tc.seed);
    policy_adam.init_like(result.params);
    value_adam.init_like(result.params);
  } else {
    TrainState st = load_training_state(resume_path);
    if (st.params.m_max != scenario.m_max || st.params.n_max != scenario.n_max)
      throw WeightsError("train state size does not match the scenario");
    result.params = std::move(st.params);
    policy_adam = std::move(st.policy_adam);
    value_adam = std::move(st.value_adam);
    first_iteration = st.next_iteration;
    episodes_seen = st.episodes_seen;
  }

  for (int it = first_iteration; it < tc.max_iterations; ++it) {
    const RolloutBatch batch = collect_rollout(result.params, scenario, tc, it);
    episodes_seen += static_cast<long>(batch.size());
    const UpdateMetrics m = ppo_update(result.params, policy_adam, value_adam, batch, tc, it);
    LearningCurveRow row{it, episodes_seen, m.mean_reward, m.min_reward,
                         m.max_reward, m.value_loss, m.kl, m.clip_fraction};
    result.curve.push_back(row);
    if (progress) progress(row);
    if (!out_dir.empty()) {
      write_learning_curve(result.curve, out_dir + "/learning_curve.csv");
      if (tc.checkpoint_every > 0 && (it + 1) % tc.checkpoint_every == 0) {
        save_params(result.params, out_dir + "/checkpoint_" + std::to_string(it + 1) + ".wta");
        save_training_state(out_dir + "/train_state_" + std::to_string(it + 1) + ".wta-state",
                            result.params, policy_adam, value_adam, it + 1, episodes_seen);
      }
    }
  }
  if (!out_dir.empty()) save_params(result.params, out_dir + "/policy_final.wta");
  return result;
}

}  // namespace wta
