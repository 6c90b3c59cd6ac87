#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "uamsim/radio_map.hpp"
#include "uamsim/scenario.hpp"
#include "uamsim/trace.hpp"

namespace uamsim {

/// Potential-function weights and shaping constants.
struct RewardWeights {
  double omega_1 = 5.0;   // pick-up incentive
  double omega_2 = 10.0;  // delivery incentive
  double omega_3 = 1.0;   // flying-time cost
  double omega_4 = 1.0;   // repeated-exploration penalty
  double omega_5 = 10.0;  // below-threshold SINR penalty
  double zeta = 0.99;     // shaping discount
  double task_reward_rbar = 100.0;
  bool step_limit_terminal = true;  // reaching T_max ends the episode (as a failure)
};

struct PassengerStatus {
  bool known = false;
  bool onboard = false;   // alpha_n
  bool served = false;    // beta_n
  int arrival_slot = 0;
  int board_time = -1;    // step index; -1 until boarded
  int serve_time = -1;
};

struct EnvState {
  Vec2 position;
  std::vector<Vec2> trajectory;   // all past positions, most recent last
  std::vector<int> seats_history; // seats_remaining after each step, aligned with trajectory
  int seats_remaining = 0;
  int time_t = 0;
  std::vector<PassengerStatus> passenger_status;
  std::vector<double> visit_counts;    // per cell; reset counts the start placement
  std::vector<double> uncertainty_E;   // visit_counts / total placements
  bool done = false;
  bool all_served = false;
  std::mt19937_64 rng;

  int onboard_count() const;
  int served_count() const;
  int boarded_ever_count() const;
};

/// The multi-source view the policy consumes. Coordinates (and the derived
/// distance d_n) are normalized by the area side into [0,1]; seats by N_seat.
struct Observation {
  int n1 = 0;                          // history length
  int n2 = 0;                          // passenger count
  int window_side = 0;
  std::vector<double> uam_rows;        // n1 x 3: x, y, seats
  std::vector<double> passenger_rows;  // n2 x 7: Sx, Sy, Dx, Dy, d_n, alpha, beta
  std::vector<double> passenger_mask;  // n2: 1 when the request is known
  std::vector<double> sinr_window;     // window_side^2, dB
  std::vector<double> uncertainty_window;
};

struct EnvConfig {
  int history_n1 = 8;
  int window_side = 10;
  // Window padding: SINR pads with (threshold - 60 dB); the uncertainty map
  // pads with 1.0 so out-of-area cells read as fully explored.
  double uncertainty_pad = 1.0;
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool done = false;
  std::vector<TraceEvent> events;
};

class Environment {
 public:
  Environment(const Scenario& scenario, const RadioMap& map, RewardWeights weights = {},
              EnvConfig config = {});

  Observation reset();
  Observation reset(std::uint64_t seed);
  StepResult step(int action);

  const EnvState& state() const { return state_; }
  const EpisodeTrace& trace() const { return trace_; }
  const Scenario& scenario() const { return *scenario_; }
  const RewardWeights& weights() const { return weights_; }
  const EnvConfig& config() const { return config_; }

  Observation observe() const;
  double potential() const;
  /// step_length / 2: service points snap when the vehicle passes this close.
  double capture_radius() const;

 private:
  const Scenario* scenario_;
  const RadioMap* map_;
  RewardWeights weights_;
  EnvConfig config_;
  EnvState state_;
  EpisodeTrace trace_;

  void record_state(int action, double reward, std::vector<TraceEvent> events);
};

/// Flight heading for action index a of k+1 directions: a * 2*pi / (k+1),
/// a = 0 pointing along +x.
double heading_of(int action, int k);

/// Potential function over an explicit state (exposed for tests; the member
/// versions delegate here).
double potential_of(const EnvState& st, const RadioMap& map, const Scenario& s,
                    const RewardWeights& w);

/// Shaped reward: rbar (on terminal success) + zeta * Phi(next) - Phi(prev).
double shaped_reward(double phi_prev, double phi_next, bool terminal_success,
                     const RewardWeights& w);

}  // namespace uamsim
