#include "uamsim/environment.hpp"

#include <algorithm>
#include <cmath>

#include "uamsim/errors.hpp"

namespace uamsim {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

int EnvState::onboard_count() const {
  int c = 0;
  for (const auto& p : passenger_status) c += p.onboard ? 1 : 0;
  return c;
}

int EnvState::served_count() const {
  int c = 0;
  for (const auto& p : passenger_status) c += p.served ? 1 : 0;
  return c;
}

int EnvState::boarded_ever_count() const {
  int c = 0;
  for (const auto& p : passenger_status) c += p.board_time >= 0 ? 1 : 0;
  return c;
}

double heading_of(int action, int k) {
  if (action < 0 || action > k) {
    throw ValidationError("action " + std::to_string(action) + " out of range [0, " +
                          std::to_string(k) + "]");
  }
  return action * kTwoPi / (k + 1);
}

double potential_of(const EnvState& st, const RadioMap& map, const Scenario& s,
                    const RewardWeights& w) {
  double z_s = st.boarded_ever_count();
  double z_d = st.served_count();
  double z_time = static_cast<double>(st.time_t) / s.max_steps_T_max;
  CellIndex c = map.cell_of(st.position);
  double z_rep = st.uncertainty_E[static_cast<std::size_t>(c.i) * map.n_cells_per_side + c.j];
  double z_gamma = map.sinr_at(c.i, c.j) < s.sinr_threshold_dB ? 1.0 : 0.0;
  return w.omega_1 * z_s + w.omega_2 * z_d - w.omega_3 * z_time - w.omega_4 * z_rep -
         w.omega_5 * z_gamma;
}

double shaped_reward(double phi_prev, double phi_next, bool terminal_success,
                     const RewardWeights& w) {
  double rbar = terminal_success ? w.task_reward_rbar : 0.0;
  return rbar + w.zeta * phi_next - phi_prev;
}

Environment::Environment(const Scenario& scenario, const RadioMap& map, RewardWeights weights,
                         EnvConfig config)
    : scenario_(&scenario), map_(&map), weights_(weights), config_(config) {
  reset();
}

Observation Environment::reset() { return reset(scenario_->rng_seed); }

Observation Environment::reset(std::uint64_t seed) {
  int n = map_->n_cells_per_side;
  state_ = EnvState{};
  state_.position = scenario_->start_position;
  state_.trajectory = {state_.position};
  state_.seats_history = {scenario_->seats_N_seat};
  state_.seats_remaining = scenario_->seats_N_seat;
  state_.time_t = 0;
  state_.rng.seed(seed);
  state_.passenger_status.resize(scenario_->passengers.size());
  for (std::size_t i = 0; i < scenario_->passengers.size(); ++i) {
    state_.passenger_status[i] = PassengerStatus{};
    state_.passenger_status[i].arrival_slot = scenario_->passengers[i].arrival_slot;
    state_.passenger_status[i].known = scenario_->passengers[i].arrival_slot <= 0;
  }
  // The start placement counts as one visit over one step, so the repeat
  // penalty is well-defined at t = 0.
  state_.visit_counts.assign(static_cast<std::size_t>(n) * n, 0.0);
  CellIndex c = map_->cell_of(state_.position);
  state_.visit_counts[static_cast<std::size_t>(c.i) * n + c.j] = 1.0;
  state_.uncertainty_E = state_.visit_counts;

  trace_ = EpisodeTrace{};
  trace_.passengers.resize(scenario_->passengers.size());
  for (std::size_t i = 0; i < scenario_->passengers.size(); ++i) {
    trace_.passengers[i].id = scenario_->passengers[i].id;
    trace_.passengers[i].arrival_slot = scenario_->passengers[i].arrival_slot;
  }
  record_state(-1, 0.0, {});
  return observe();
}

double Environment::capture_radius() const { return step_length(*scenario_) / 2.0; }

StepResult Environment::step(int action) {
  if (state_.done) throw StateError("step called on a finished episode");
  double theta = heading_of(action, scenario_->action_count_k);
  double L = scenario_->area_side_L;

  double phi_prev = potential();

  std::vector<TraceEvent> events;
  Vec2 tentative = state_.position + Vec2{std::cos(theta), std::sin(theta)} * step_length(*scenario_);
  Vec2 next{std::clamp(tentative.x, 0.0, L), std::clamp(tentative.y, 0.0, L)};
  if (next.x != tentative.x || next.y != tentative.y) events.push_back({EventKind::Clamp});

  state_.position = next;
  state_.trajectory.push_back(next);
  int t_next = state_.time_t + 1;

  // 1. Reveal requests arriving this step.
  for (auto& p : state_.passenger_status) {
    if (!p.known && p.arrival_slot <= t_next) p.known = true;
  }
  // 2. Board known waiting passengers in ascending id order while seats last.
  double capture = capture_radius();
  for (std::size_t i = 0; i < state_.passenger_status.size(); ++i) {
    auto& p = state_.passenger_status[i];
    if (p.known && !p.onboard && !p.served && state_.seats_remaining > 0 &&
        distance(state_.position, scenario_->passengers[i].origin_S) <= capture) {
      p.onboard = true;
      p.board_time = t_next;
      --state_.seats_remaining;
      trace_.passengers[i].board_time = t_next;
      events.push_back({EventKind::Board, scenario_->passengers[i].id});
    }
  }
  // 3. Serve passengers boarded on an earlier step whose destination is in
  //    reach (board must strictly precede serve).
  for (std::size_t i = 0; i < state_.passenger_status.size(); ++i) {
    auto& p = state_.passenger_status[i];
    if (p.onboard && p.board_time < t_next &&
        distance(state_.position, scenario_->passengers[i].destination_D) <= capture) {
      p.onboard = false;
      p.served = true;
      p.serve_time = t_next;
      ++state_.seats_remaining;
      trace_.passengers[i].serve_time = t_next;
      events.push_back({EventKind::Serve, scenario_->passengers[i].id});
    }
  }
  // 4. Update the uncertainty map: one placement per step.
  int n = map_->n_cells_per_side;
  CellIndex c = map_->cell_of(state_.position);
  state_.visit_counts[static_cast<std::size_t>(c.i) * n + c.j] += 1.0;
  double total = static_cast<double>(t_next) + 1.0;
  for (std::size_t k = 0; k < state_.visit_counts.size(); ++k) {
    state_.uncertainty_E[k] = state_.visit_counts[k] / total;
  }

  state_.seats_history.push_back(state_.seats_remaining);
  state_.time_t = t_next;
  state_.all_served =
      state_.served_count() == static_cast<int>(scenario_->passengers.size());
  bool timeout = weights_.step_limit_terminal && t_next >= scenario_->max_steps_T_max;
  state_.done = state_.all_served || timeout;

  double phi_next = potential();
  double reward = shaped_reward(phi_prev, phi_next, state_.done && state_.all_served, weights_);

  record_state(action, reward, events);
  trace_.terminated = state_.done;
  trace_.all_served = state_.all_served;

  return {observe(), reward, state_.done, events};
}

Observation Environment::observe() const {
  const Scenario& s = *scenario_;
  double L = s.area_side_L;
  Observation obs;
  obs.n1 = config_.history_n1;
  obs.n2 = static_cast<int>(s.passengers.size());
  obs.window_side = config_.window_side;

  obs.uam_rows.resize(static_cast<std::size_t>(obs.n1) * 3);
  for (int r = 0; r < obs.n1; ++r) {
    // Last n1 positions, oldest first; shorter histories repeat the oldest.
    int idx = static_cast<int>(state_.trajectory.size()) - obs.n1 + r;
    if (idx < 0) idx = 0;
    const Vec2& p = state_.trajectory[idx];
    obs.uam_rows[static_cast<std::size_t>(r) * 3 + 0] = p.x / L;
    obs.uam_rows[static_cast<std::size_t>(r) * 3 + 1] = p.y / L;
    obs.uam_rows[static_cast<std::size_t>(r) * 3 + 2] =
        static_cast<double>(state_.seats_history[idx]) / s.seats_N_seat;
  }

  obs.passenger_rows.assign(static_cast<std::size_t>(obs.n2) * 7, 0.0);
  obs.passenger_mask.assign(obs.n2, 0.0);
  for (int i = 0; i < obs.n2; ++i) {
    const auto& p = state_.passenger_status[i];
    if (!p.known) continue;  // all-zero row with mask 0
    obs.passenger_mask[i] = 1.0;
    const PassengerRequest& req = s.passengers[i];
    double* row = &obs.passenger_rows[static_cast<std::size_t>(i) * 7];
    row[0] = req.origin_S.x / L;
    row[1] = req.origin_S.y / L;
    row[2] = req.destination_D.x / L;
    row[3] = req.destination_D.y / L;
    double d = 0.0;
    if (p.served) {
      d = 0.0;
    } else if (p.onboard) {
      d = distance(state_.position, req.destination_D) / L;
    } else {
      d = distance(state_.position, req.origin_S) / L;
    }
    row[4] = d;
    row[5] = p.onboard ? 1.0 : 0.0;
    row[6] = p.served ? 1.0 : 0.0;
  }

  double sinr_pad = s.sinr_threshold_dB - 60.0;
  obs.sinr_window = local_window(*map_, state_.position, config_.window_side, sinr_pad);
  obs.uncertainty_window =
      local_window_grid(state_.uncertainty_E, map_->n_cells_per_side, map_->cell_size,
                        state_.position, config_.window_side, config_.uncertainty_pad);
  return obs;
}

double Environment::potential() const {
  return potential_of(state_, *map_, *scenario_, weights_);
}

void Environment::record_state(int action, double reward, std::vector<TraceEvent> events) {
  TraceStep row;
  row.t = state_.time_t;
  row.position = state_.position;
  row.action = action;
  row.reward = reward;
  row.sinr_dB = map_->sinr_at_point(state_.position);
  row.seats_remaining = state_.seats_remaining;
  row.events = std::move(events);
  trace_.steps.push_back(std::move(row));
}

}  // namespace uamsim
