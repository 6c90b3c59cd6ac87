#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "uamsim/environment.hpp"
#include "uamsim/msha.hpp"

namespace uamsim {

struct TrainConfig {
  double learning_rate = 1e-5;
  double clip_epsilon = 0.2;
  double eta = 0.99;   // one-step advantage discount
  double zeta = 0.99;  // cumulative-return discount
  int episodes = 100;  // K
  int batch_size = 400;
  int epochs_per_batch = 4;
  double value_loss_coeff = 0.5;
  bool normalize_advantages = true;
  std::uint64_t seed = 0;
  int checkpoint_interval = 0;  // in episodes; 0 disables
  std::string checkpoint_dir;

  void validate() const;  // 0 < eps < 1; 0 < eta, zeta <= 1; ...
};

/// One behavior-policy step of a rollout.
struct RolloutStep {
  Observation observation;
  int action = 0;
  double log_prob_old = 0.0;
  double reward = 0.0;
  double value = 0.0;       // V(o) under the snapshot policy
  double next_value = 0.0;  // V(o'); 0 at terminal steps
  bool done = false;
  double return_cd = 0.0;   // discounted suffix return R_cd
  double advantage = 0.0;
};

struct RolloutBatch {
  std::vector<RolloutStep> steps;
};

/// Discounted suffix sums: R(t) = r(t) + zeta * R(t+1), R past the end = 0.
std::vector<double> compute_returns(const std::vector<double>& rewards, double zeta);

/// One-step advantage r + eta * v_next - v_now (v_next = 0 at terminal).
double compute_advantage(double reward, double v_next, double v_now, double eta);

struct PpoLossResult {
  double policy_loss = 0.0;  // mean clipped surrogate (to be maximized)
  double value_loss = 0.0;   // mean squared value error (to be minimized)
  std::vector<double> per_sample_terms;
  std::vector<double> per_sample_ratios;
};

/// Evaluates the clipped PPO objective and value regression over `batch`.
/// When `accumulate_grads` is set, gradients of (-policy + vf_coeff * value)
/// are accumulated into the model's parameter store (callers zero first).
PpoLossResult ppo_loss(MshaModel& model, const std::vector<const RolloutStep*>& batch,
                       double clip_epsilon, double value_loss_coeff, bool accumulate_grads);

struct CurveRow {
  int episode = 0;
  double total_reward = 0.0;
  double TD = 0.0;
  double PR = 0.0;
  double connectivity = 0.0;
};

struct TrainResult {
  std::vector<CurveRow> curve;
  int episodes_run = 0;
};

/// Per-episode callback; return true to stop training early.
using EpisodeCallback = std::function<bool(int episode, MshaModel& model, const CurveRow& row)>;

/// Rollout collection, returns/advantages, clipped policy ascent and value
/// regression with Adam. Deterministic for a fixed seed (single-threaded).
TrainResult train(const Scenario& scenario, const RadioMap& map, MshaModel& model,
                  const TrainConfig& config, const RewardWeights& weights = {},
                  const EnvConfig& env_config = {}, const EpisodeCallback& on_episode = {});

void write_learning_curve(const std::vector<CurveRow>& curve, const std::string& path);

/// Greedy (argmax) rollout of a trained policy; returns the episode trace.
EpisodeTrace greedy_rollout(const Scenario& scenario, const RadioMap& map, MshaModel& model,
                            const RewardWeights& weights = {}, const EnvConfig& env_config = {});

}  // namespace uamsim
