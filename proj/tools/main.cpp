#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "manifest.hpp"
#include "uamsim/compare.hpp"
#include "uamsim/environment.hpp"
#include "uamsim/errors.hpp"
#include "uamsim/metrics.hpp"
#include "uamsim/msha.hpp"
#include "uamsim/planners.hpp"
#include "uamsim/ppo.hpp"
#include "uamsim/radio_map.hpp"
#include "uamsim/rng.hpp"
#include "uamsim/scenario.hpp"

namespace {

// Exit codes: 0 success, 2 validation, 3 infeasibility, 4 numeric, 5 IO.
constexpr int kOk = 0;
constexpr int kOther = 1;
constexpr int kValidation = 2;
constexpr int kInfeasible = 3;
constexpr int kNumeric = 4;
constexpr int kIo = 5;

using uamsim::ChannelParams;
using uamsim::EnvConfig;
using uamsim::MshaConfig;
using uamsim::RewardWeights;
using uamsim::Scenario;
using uamsim::TrainConfig;

struct Overrides {
  nlohmann::json raw = nlohmann::json::object();

  static Overrides load(const std::string& path) {
    Overrides o;
    if (path.empty()) return o;
    std::ifstream in(path);
    if (!in) throw uamsim::IoError("cannot open config override file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    try {
      o.raw = nlohmann::json::parse(ss.str());
    } catch (const nlohmann::json::parse_error& e) {
      throw uamsim::ParseError(std::string("config override file is not valid JSON: ") + e.what());
    }
    return o;
  }

  ChannelParams channel(const Scenario& s) const {
    ChannelParams cp;
    cp.altitude_H = s.altitude_H;
    if (raw.contains("channel")) {
      cp.noise_power_sigma2_dBm =
          raw["channel"].value("noise_power_sigma2_dBm", cp.noise_power_sigma2_dBm);
    }
    return cp;
  }

  RewardWeights reward() const {
    RewardWeights w;
    if (raw.contains("reward")) {
      const auto& j = raw["reward"];
      w.omega_1 = j.value("omega_1", w.omega_1);
      w.omega_2 = j.value("omega_2", w.omega_2);
      w.omega_3 = j.value("omega_3", w.omega_3);
      w.omega_4 = j.value("omega_4", w.omega_4);
      w.omega_5 = j.value("omega_5", w.omega_5);
      w.zeta = j.value("zeta", w.zeta);
      w.task_reward_rbar = j.value("task_reward_rbar", w.task_reward_rbar);
      w.step_limit_terminal = j.value("step_limit_terminal", w.step_limit_terminal);
    }
    return w;
  }

  EnvConfig env() const {
    EnvConfig e;
    if (raw.contains("env")) {
      const auto& j = raw["env"];
      e.history_n1 = j.value("history_n1", e.history_n1);
      e.window_side = j.value("window_side", e.window_side);
      e.uncertainty_pad = j.value("uncertainty_pad", e.uncertainty_pad);
    }
    return e;
  }

  MshaConfig msha(const Scenario& s, const EnvConfig& e) const {
    MshaConfig c;
    c.n1 = e.history_n1;
    c.n2 = static_cast<int>(s.passengers.size());
    c.window_side = e.window_side;
    c.k_actions = s.action_count_k;
    if (raw.contains("msha")) {
      const auto& j = raw["msha"];
      c.c1 = j.value("c1", c.c1);
      c.c2 = j.value("c2", c.c2);
      c.h_head = j.value("h_head", c.h_head);
      c.n_win = j.value("n_win", c.n_win);
      c.d_k = j.value("d_k", c.d_k);
      c.out_width = j.value("out_width", c.out_width);
      c.enc_heads = j.value("enc_heads", c.enc_heads);
      c.variant = static_cast<uamsim::ModelVariant>(j.value("variant", 4));
    }
    c.validate();
    return c;
  }

  TrainConfig train(std::uint64_t seed) const {
    TrainConfig t;
    t.seed = seed;
    if (raw.contains("train")) {
      const auto& j = raw["train"];
      t.learning_rate = j.value("learning_rate", t.learning_rate);
      t.clip_epsilon = j.value("clip_epsilon", t.clip_epsilon);
      t.eta = j.value("eta", t.eta);
      t.zeta = j.value("zeta", t.zeta);
      t.episodes = j.value("episodes", t.episodes);
      t.batch_size = j.value("batch_size", t.batch_size);
      t.epochs_per_batch = j.value("epochs_per_batch", t.epochs_per_batch);
      t.value_loss_coeff = j.value("value_loss_coeff", t.value_loss_coeff);
      t.normalize_advantages = j.value("normalize_advantages", t.normalize_advantages);
      t.checkpoint_interval = j.value("checkpoint_interval", t.checkpoint_interval);
    }
    return t;
  }
};

std::vector<double> parse_threshold_list(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stod(item));
  }
  if (out.empty()) throw uamsim::ValidationError("empty threshold list");
  return out;
}

std::vector<std::string> parse_name_list(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int run(int argc, char** argv) {
  CLI::App app{"Communication-aware UAM ride-sharing planning toolkit"};
  app.require_subcommand(1);

  std::string scenario_path, map_path, out_dir, config_path, checkpoint_path;
  std::string method = "cptsp";
  std::string methods_csv = "cptsp,pdpcc,straight";
  std::string thresholds_csv;
  double threshold_db = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* cmd, bool needs_map) {
    cmd->add_option("--scenario", scenario_path, "Scenario JSON document")->required();
    if (needs_map) cmd->add_option("--map", map_path, "Radio map file")->required();
    cmd->add_option("--out", out_dir, "Output directory")->required();
    cmd->add_option("--config", config_path, "JSON override file");
    cmd->add_option("--seed", seed, "Master seed (sub-streams derive from it)");
  };

  CLI::App* build_map_cmd = app.add_subcommand("build-map", "Construct the expected-SINR radio map");
  add_common(build_map_cmd, false);

  CLI::App* plan_cmd = app.add_subcommand("plan", "Run a classical planner end-to-end");
  add_common(plan_cmd, true);
  plan_cmd->add_option("--method", method, "cptsp|pdpcc|straight");
  plan_cmd->add_option("--threshold-db", threshold_db, "SINR threshold override (dB)");

  CLI::App* train_cmd = app.add_subcommand("train", "Train the MSHA policy with PPO");
  add_common(train_cmd, true);

  CLI::App* eval_cmd = app.add_subcommand("eval", "Greedy rollout of a trained policy");
  add_common(eval_cmd, true);
  eval_cmd->add_option("--checkpoint", checkpoint_path, "Policy checkpoint")->required();
  eval_cmd->add_option("--threshold-db", threshold_db, "SINR threshold override (dB)");

  CLI::App* compare_cmd = app.add_subcommand("compare", "Method x threshold metric sweep");
  add_common(compare_cmd, true);
  compare_cmd->add_option("--methods", methods_csv, "Comma-separated method list");
  compare_cmd->add_option("--thresholds", thresholds_csv, "Comma-separated dB thresholds")
      ->required();
  compare_cmd->add_option("--checkpoint", checkpoint_path, "Policy checkpoint for method msha");

  CLI11_PARSE(app, argc, argv);

  Scenario scenario = uamsim::load_scenario_file(scenario_path);
  Overrides overrides = Overrides::load(config_path);
  std::filesystem::create_directories(out_dir);

  uamsim::cli::RunManifest manifest;
  manifest.scenario_path = scenario_path;
  manifest.map_path = map_path;
  manifest.config_overrides = overrides.raw;
  manifest.seed = seed;
  manifest.out_dir = out_dir;

  if (app.got_subcommand(build_map_cmd)) {
    manifest.command = "build-map";
    uamsim::RadioMap map = uamsim::build_map(scenario, overrides.channel(scenario));
    std::string bin = out_dir + "/map.bin";
    std::string csv = out_dir + "/map.csv";
    uamsim::save_radio_map(map, bin);
    uamsim::write_radio_map_csv(map, csv);
    manifest.add_artifact(bin);
    manifest.add_artifact(csv);
  } else if (app.got_subcommand(plan_cmd)) {
    manifest.command = "plan";
    auto parsed = uamsim::parse_method(method);
    if (!parsed) throw uamsim::ValidationError("unknown method: " + method);
    uamsim::RadioMap map = uamsim::load_radio_map(map_path);
    double threshold = std::isnan(threshold_db) ? scenario.sinr_threshold_dB : threshold_db;
    uamsim::EpisodeTrace trace = uamsim::run_classical(*parsed, scenario, map, threshold);
    uamsim::Metrics metrics = uamsim::compute_metrics(trace, scenario, threshold);
    std::string trace_csv = out_dir + "/trace.csv";
    std::string metrics_json = out_dir + "/metrics.json";
    uamsim::write_trace_csv(trace, trace_csv);
    uamsim::write_metrics_json(metrics, metrics_json, metrics.PR < 100.0);
    manifest.add_artifact(trace_csv);
    manifest.add_artifact(metrics_json);
  } else if (app.got_subcommand(train_cmd)) {
    manifest.command = "train";
    uamsim::RadioMap map = uamsim::load_radio_map(map_path);
    EnvConfig env_config = overrides.env();
    MshaConfig model_config = overrides.msha(scenario, env_config);
    TrainConfig train_config = overrides.train(seed);
    if (train_config.checkpoint_interval > 0) train_config.checkpoint_dir = out_dir;
    uamsim::MshaModel model(model_config, uamsim::substream_seed(seed, "init"));
    uamsim::TrainResult result = uamsim::train(scenario, map, model, train_config,
                                               overrides.reward(), env_config);
    std::string curve_csv = out_dir + "/curve.csv";
    std::string policy_bin = out_dir + "/policy.bin";
    uamsim::write_learning_curve(result.curve, curve_csv);
    model.save_checkpoint(policy_bin);
    manifest.add_artifact(curve_csv);
    manifest.add_artifact(policy_bin);
  } else if (app.got_subcommand(eval_cmd)) {
    manifest.command = "eval";
    uamsim::RadioMap map = uamsim::load_radio_map(map_path);
    uamsim::MshaModel model = uamsim::MshaModel::load_checkpoint(checkpoint_path);
    Scenario eval_scenario = scenario;
    if (!std::isnan(threshold_db)) eval_scenario.sinr_threshold_dB = threshold_db;
    EnvConfig env_config = overrides.env();
    env_config.history_n1 = model.config().n1;
    env_config.window_side = model.config().window_side;
    uamsim::EpisodeTrace trace =
        uamsim::greedy_rollout(eval_scenario, map, model, overrides.reward(), env_config);
    uamsim::Metrics metrics =
        uamsim::compute_metrics(trace, eval_scenario, eval_scenario.sinr_threshold_dB);
    std::string trace_csv = out_dir + "/trace.csv";
    std::string metrics_json = out_dir + "/metrics.json";
    uamsim::write_trace_csv(trace, trace_csv);
    uamsim::write_metrics_json(metrics, metrics_json, metrics.PR < 100.0);
    manifest.add_artifact(trace_csv);
    manifest.add_artifact(metrics_json);
  } else if (app.got_subcommand(compare_cmd)) {
    manifest.command = "compare";
    uamsim::RadioMap map = uamsim::load_radio_map(map_path);
    std::vector<std::string> methods = parse_name_list(methods_csv);
    std::vector<double> thresholds = parse_threshold_list(thresholds_csv);
    std::unique_ptr<uamsim::MshaModel> model;
    if (!checkpoint_path.empty()) {
      model = std::make_unique<uamsim::MshaModel>(
          uamsim::MshaModel::load_checkpoint(checkpoint_path));
    }
    EnvConfig env_config = overrides.env();
    if (model) {
      env_config.history_n1 = model->config().n1;
      env_config.window_side = model->config().window_side;
    }
    auto rows = uamsim::compare(scenario, map, methods, thresholds, model.get(),
                                overrides.reward(), env_config);
    std::string wide = out_dir + "/compare.csv";
    std::string json = out_dir + "/compare.json";
    std::string longf = out_dir + "/compare_long.csv";
    uamsim::write_compare_csv(rows, wide);
    uamsim::write_compare_json(rows, json);
    uamsim::write_compare_long_csv(rows, longf);
    manifest.add_artifact(wide);
    manifest.add_artifact(json);
    manifest.add_artifact(longf);
  }

  manifest.write(out_dir + "/manifest.json");
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const uamsim::UnreachableError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kInfeasible;
  } catch (const uamsim::InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kInfeasible;
  } catch (const uamsim::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const uamsim::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kIo;
  } catch (const uamsim::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kValidation;
  } catch (const uamsim::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kValidation;
  } catch (const uamsim::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kValidation;
  } catch (const std::logic_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kOther;
  }
}
