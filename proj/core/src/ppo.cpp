#include "uamsim/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "uamsim/errors.hpp"
#include "uamsim/metrics.hpp"
#include "uamsim/rng.hpp"

namespace uamsim {

void TrainConfig::validate() const {
  if (!(clip_epsilon > 0.0)) throw ConfigError("clip_epsilon must be positive");
  if (!(eta > 0.0 && eta <= 1.0)) throw ConfigError("eta must be in (0, 1]");
  if (!(zeta > 0.0 && zeta <= 1.0)) throw ConfigError("zeta must be in (0, 1]");
  if (episodes < 1) throw ConfigError("episodes must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs_per_batch < 1) throw ConfigError("epochs_per_batch must be >= 1");
  if (learning_rate < 0.0) throw ConfigError("learning_rate must be nonnegative");
}

std::vector<double> compute_returns(const std::vector<double>& rewards, double zeta) {
  std::vector<double> out(rewards.size());
  double suffix = 0.0;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    suffix = rewards[i] + zeta * suffix;
    out[i] = suffix;
  }
  return out;
}

double compute_advantage(double reward, double v_next, double v_now, double eta) {
  return reward + eta * v_next - v_now;
}

PpoLossResult ppo_loss(MshaModel& model, const std::vector<const RolloutStep*>& batch,
                       double clip_epsilon, double value_loss_coeff, bool accumulate_grads) {
  PpoLossResult result;
  if (batch.empty()) return result;
  double inv_n = 1.0 / static_cast<double>(batch.size());

  for (const RolloutStep* step : batch) {
    nn::Tape tape;
    MshaModel::GraphOut g = model.build(tape, step->observation);
    nn::Var logp = tape.log_(tape.pick(g.probs, static_cast<std::size_t>(step->action)));
    nn::Var ratio = tape.exp_(tape.add_const(logp, -step->log_prob_old));
    if (!std::isfinite(tape.value(ratio)[0])) {
      throw NumericError("non-finite policy ratio in ppo_loss");
    }
    nn::Var surrogate = tape.scale(ratio, step->advantage);
    nn::Var clipped = tape.scale(tape.clamp(ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon),
                                 step->advantage);
    nn::Var term = tape.min_ew(surrogate, clipped);

    nn::Var err = tape.reshape(tape.add_const(g.value, -step->return_cd), {1});
    nn::Var sq = tape.mul(err, err);

    result.policy_loss += tape.value(term)[0] * inv_n;
    result.value_loss += tape.value(sq)[0] * inv_n;
    result.per_sample_terms.push_back(tape.value(term)[0]);
    result.per_sample_ratios.push_back(tape.value(ratio)[0]);

    if (accumulate_grads) {
      // Minimized objective: -L_pf + c_v * L_vf, averaged over the batch.
      nn::Var loss = tape.add(tape.scale(term, -inv_n), tape.scale(sq, value_loss_coeff * inv_n));
      tape.backward(loss);
    }
  }
  return result;
}

namespace {

int sample_action(const std::vector<double>& probs, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double u = unit(rng);
  double acc = 0.0;
  for (std::size_t a = 0; a < probs.size(); ++a) {
    acc += probs[a];
    if (u <= acc) return static_cast<int>(a);
  }
  return static_cast<int>(probs.size()) - 1;
}

}  // namespace

TrainResult train(const Scenario& scenario, const RadioMap& map, MshaModel& model,
                  const TrainConfig& config, const RewardWeights& weights,
                  const EnvConfig& env_config, const EpisodeCallback& on_episode) {
  config.validate();
  model.params().adam.learning_rate = config.learning_rate;

  Environment env(scenario, map, weights, env_config);
  std::mt19937_64 rollout_rng = make_rng(config.seed, "rollout");
  std::mt19937_64 shuffle_rng = make_rng(config.seed, "shuffle");

  TrainResult result;
  for (int episode = 0; episode < config.episodes; ++episode) {
    // Rollout under the current policy snapshot.
    RolloutBatch batch;
    Observation obs = env.reset(substream_seed(config.seed, "env") + episode);
    MshaModel::Output out = model.forward(obs);
    double total_reward = 0.0;
    while (!env.state().done) {
      RolloutStep step;
      step.observation = obs;
      step.action = sample_action(out.probs, rollout_rng);
      step.log_prob_old = std::log(out.probs[step.action]);
      step.value = out.value;
      StepResult sr = env.step(step.action);
      step.reward = sr.reward;
      step.done = sr.done;
      total_reward += sr.reward;
      obs = sr.observation;
      if (sr.done) {
        step.next_value = 0.0;
      } else {
        out = model.forward(obs);
        step.next_value = out.value;
      }
      batch.steps.push_back(std::move(step));
    }

    // Returns and one-step advantages.
    std::vector<double> rewards;
    rewards.reserve(batch.steps.size());
    for (const RolloutStep& s : batch.steps) rewards.push_back(s.reward);
    std::vector<double> returns = compute_returns(rewards, config.zeta);
    for (std::size_t i = 0; i < batch.steps.size(); ++i) {
      batch.steps[i].return_cd = returns[i];
      batch.steps[i].advantage = compute_advantage(batch.steps[i].reward,
                                                   batch.steps[i].next_value,
                                                   batch.steps[i].value, config.eta);
    }
    if (config.normalize_advantages && batch.steps.size() > 1) {
      double mean = 0.0;
      for (const RolloutStep& s : batch.steps) mean += s.advantage;
      mean /= static_cast<double>(batch.steps.size());
      double var = 0.0;
      for (const RolloutStep& s : batch.steps) var += (s.advantage - mean) * (s.advantage - mean);
      double sd = std::sqrt(var / static_cast<double>(batch.steps.size()));
      if (sd > 1e-12) {
        for (RolloutStep& s : batch.steps) s.advantage = (s.advantage - mean) / sd;
      }
    }

    // Clipped policy ascent + value regression.
    std::vector<std::size_t> order(batch.steps.size());
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < config.epochs_per_batch; ++epoch) {
      std::shuffle(order.begin(), order.end(), shuffle_rng);
      for (std::size_t start = 0; start < order.size();
           start += static_cast<std::size_t>(config.batch_size)) {
        std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
        std::vector<const RolloutStep*> minibatch;
        minibatch.reserve(end - start);
        for (std::size_t i = start; i < end; ++i) minibatch.push_back(&batch.steps[order[i]]);
        model.params().store.zero_grads();
        try {
          ppo_loss(model, minibatch, config.clip_epsilon, config.value_loss_coeff, true);
        } catch (const NumericError& e) {
          throw NumericError("episode " + std::to_string(episode) + ": " + e.what());
        }
        nn::adam_step(model.params().store, model.params().adam);
      }
    }

    Metrics m = compute_metrics(env.trace(), scenario, scenario.sinr_threshold_dB);
    CurveRow row{episode, total_reward, m.TD, m.PR, m.connectivity};
    result.curve.push_back(row);
    result.episodes_run = episode + 1;

    if (config.checkpoint_interval > 0 && !config.checkpoint_dir.empty() &&
        (episode + 1) % config.checkpoint_interval == 0) {
      model.save_checkpoint(config.checkpoint_dir + "/checkpoint_" + std::to_string(episode + 1) +
                            ".bin");
    }
    if (on_episode && on_episode(episode, model, row)) break;
  }
  return result;
}

void write_learning_curve(const std::vector<CurveRow>& curve, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open learning curve file for writing: " + path);
  out << "episode,total_reward,TD,PR,connectivity\n";
  out.precision(12);
  for (const CurveRow& r : curve) {
    out << r.episode << "," << r.total_reward << "," << r.TD << "," << r.PR << ","
        << r.connectivity << "\n";
  }
}

EpisodeTrace greedy_rollout(const Scenario& scenario, const RadioMap& map, MshaModel& model,
                            const RewardWeights& weights, const EnvConfig& env_config) {
  Environment env(scenario, map, weights, env_config);
  Observation obs = env.reset();
  while (!env.state().done) {
    MshaModel::Output out = model.forward(obs);
    int best = 0;
    for (std::size_t a = 1; a < out.probs.size(); ++a) {
      if (out.probs[a] > out.probs[best]) best = static_cast<int>(a);
    }
    obs = env.step(best).observation;
  }
  return env.trace();
}

}  // namespace uamsim
