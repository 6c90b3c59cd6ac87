#include "uamsim/planners.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <set>

#include "uamsim/errors.hpp"

namespace uamsim {

namespace {

const double kSqrt2 = std::sqrt(2.0);

std::string point_str(Vec2 p) {
  return "(" + std::to_string(p.x) + ", " + std::to_string(p.y) + ")";
}

/// Exact sign of (da + db*sqrt(2)) for integer da, db.
int exact_sign(long da, long db) {
  if (da == 0 && db == 0) return 0;
  if (da >= 0 && db >= 0) return 1;
  if (da <= 0 && db <= 0) return -1;
  // Opposite signs: compare da^2 against 2*db^2 on the positive side.
  if (da > 0) {  // db < 0: positive iff da^2 > 2 db^2
    return da * da > 2 * db * db ? 1 : -1;
  }
  return 2 * db * db > da * da ? 1 : -1;  // da < 0, db > 0
}

/// Grid cost as integer counts of axis and diagonal moves.
struct MoveCost {
  long axis = 0;
  long diag = 0;
};

int compare_cost(MoveCost a, MoveCost b) { return exact_sign(a.axis - b.axis, a.diag - b.diag); }

}  // namespace

void validate_event_sequence(const EventSequence& seq, int seats,
                             const std::vector<int>& initially_onboard) {
  std::set<int> onboard(initially_onboard.begin(), initially_onboard.end());
  std::set<int> done;
  if (static_cast<int>(onboard.size()) > seats) {
    throw ValidationError("event sequence starts above seat capacity");
  }
  for (const ServiceEvent& e : seq.events) {
    if (e.kind == ServiceKind::Pickup) {
      if (onboard.count(e.passenger) || done.count(e.passenger)) {
        throw ValidationError("duplicate pickup for passenger " + std::to_string(e.passenger));
      }
      onboard.insert(e.passenger);
      if (static_cast<int>(onboard.size()) > seats) {
        throw ValidationError("onboard count exceeds seats at pickup of passenger " +
                              std::to_string(e.passenger));
      }
    } else {
      if (!onboard.count(e.passenger)) {
        throw ValidationError("dropoff before pickup for passenger " + std::to_string(e.passenger));
      }
      onboard.erase(e.passenger);
      done.insert(e.passenger);
    }
  }
}

Path dijkstra_leg(const RadioMap& map, Vec2 from, Vec2 to, double threshold_dB) {
  const int n = map.n_cells_per_side;
  CellIndex src = map.cell_of(from);
  CellIndex dst = map.cell_of(to);
  auto feasible = [&](int i, int j) { return map.sinr_at(i, j) >= threshold_dB; };
  if (!feasible(src.i, src.j)) {
    throw InfeasibleError("infeasible endpoint: cell (" + std::to_string(src.i) + ", " +
                          std::to_string(src.j) + ") at " + point_str(from) + " is below threshold");
  }
  if (!feasible(dst.i, dst.j)) {
    throw InfeasibleError("infeasible endpoint: cell (" + std::to_string(dst.i) + ", " +
                          std::to_string(dst.j) + ") at " + point_str(to) + " is below threshold");
  }

  auto id_of = [n](int i, int j) { return i * n + j; };
  const long kUnset = -1;
  std::vector<MoveCost> cost(static_cast<std::size_t>(n) * n);
  std::vector<long> pred(static_cast<std::size_t>(n) * n, kUnset);
  std::vector<char> settled(static_cast<std::size_t>(n) * n, 0);
  std::vector<char> seen(static_cast<std::size_t>(n) * n, 0);

  struct QueueItem {
    MoveCost c;
    int i, j;
  };
  auto queue_less = [](const QueueItem& a, const QueueItem& b) {
    int s = compare_cost(a.c, b.c);
    if (s != 0) return s > 0;  // min-heap on cost
    if (a.i != b.i) return a.i > b.i;
    return a.j > b.j;
  };
  std::priority_queue<QueueItem, std::vector<QueueItem>, decltype(queue_less)> queue(queue_less);

  cost[id_of(src.i, src.j)] = {0, 0};
  seen[id_of(src.i, src.j)] = 1;
  pred[id_of(src.i, src.j)] = id_of(src.i, src.j);
  queue.push({{0, 0}, src.i, src.j});

  while (!queue.empty()) {
    QueueItem top = queue.top();
    queue.pop();
    long uid = id_of(top.i, top.j);
    if (settled[uid]) continue;
    if (compare_cost(top.c, cost[uid]) != 0) continue;  // stale entry
    settled[uid] = 1;
    if (top.i == dst.i && top.j == dst.j) break;
    for (int di = -1; di <= 1; ++di) {
      for (int dj = -1; dj <= 1; ++dj) {
        if (di == 0 && dj == 0) continue;
        int vi = top.i + di, vj = top.j + dj;
        if (vi < 0 || vi >= n || vj < 0 || vj >= n) continue;
        if (!feasible(vi, vj)) continue;
        long vid = id_of(vi, vj);
        if (settled[vid]) continue;
        MoveCost cand = top.c;
        if (di != 0 && dj != 0) {
          cand.diag += 1;
        } else {
          cand.axis += 1;
        }
        int cmp = seen[vid] ? compare_cost(cand, cost[vid]) : -1;
        if (cmp < 0) {
          cost[vid] = cand;
          pred[vid] = uid;
          seen[vid] = 1;
          queue.push({cand, vi, vj});
        } else if (cmp == 0 && pred[vid] > uid) {
          // Equal cost: keep the predecessor with lower (i, j).
          pred[vid] = uid;
        }
      }
    }
  }

  long dst_id = id_of(dst.i, dst.j);
  if (!settled[dst_id]) {
    throw UnreachableError("no route from " + point_str(from) + " to " + point_str(to) +
                           " at threshold " + std::to_string(threshold_dB) + " dB");
  }

  Path path;
  std::vector<long> chain;
  for (long v = dst_id; ; v = pred[v]) {
    chain.push_back(v);
    if (v == id_of(src.i, src.j)) break;
  }
  std::reverse(chain.begin(), chain.end());
  for (long v : chain) {
    path.points.push_back(map.cell_center(static_cast<int>(v / n), static_cast<int>(v % n)));
  }
  path.axis_steps = cost[dst_id].axis;
  path.diag_steps = cost[dst_id].diag;
  path.total_length = (path.axis_steps + kSqrt2 * path.diag_steps) * map.cell_size;
  return path;
}

RoutedLegCost::RoutedLegCost(const RadioMap& map, double threshold_dB)
    : map_(&map), threshold_dB_(threshold_dB) {}

double RoutedLegCost::between(Vec2 a, Vec2 b) const {
  int n = map_->n_cells_per_side;
  CellIndex ca = map_->cell_of(a);
  CellIndex cb = map_->cell_of(b);
  long ka = static_cast<long>(ca.i) * n + ca.j;
  long kb = static_cast<long>(cb.i) * n + cb.j;
  auto key = std::minmax(ka, kb);
  auto it = cache_.find({key.first, key.second});
  if (it != cache_.end()) return it->second;
  double len = dijkstra_leg(*map_, a, b, threshold_dB_).total_length;
  cache_[{key.first, key.second}] = len;
  return len;
}

namespace {

double leg_or_throw(const LegCost& cost, Vec2 a, Vec2 b, const std::string& label) {
  try {
    return cost.between(a, b);
  } catch (const UnreachableError& e) {
    throw UnreachableError("leg " + label + ": " + e.what());
  } catch (const InfeasibleError& e) {
    throw InfeasibleError("leg " + label + ": " + e.what());
  }
}

std::string pickup_label(int id) { return "S" + std::to_string(id); }
std::string dropoff_label(int id) { return "D" + std::to_string(id); }

}  // namespace

EventSequence cptsp_order(const std::vector<PendingPassenger>& pending, Vec2 from,
                          const LegCost& cost) {
  std::vector<PendingPassenger> onboard, waiting;
  for (const auto& p : pending) (p.onboard ? onboard : waiting).push_back(p);
  auto by_id = [](const PendingPassenger& a, const PendingPassenger& b) { return a.id < b.id; };
  std::sort(onboard.begin(), onboard.end(), by_id);
  std::sort(waiting.begin(), waiting.end(), by_id);

  std::vector<int> ob_idx(onboard.size()), wa_idx(waiting.size());
  for (std::size_t i = 0; i < ob_idx.size(); ++i) ob_idx[i] = static_cast<int>(i);
  for (std::size_t i = 0; i < wa_idx.size(); ++i) wa_idx[i] = static_cast<int>(i);

  double best = std::numeric_limits<double>::infinity();
  std::vector<ServiceEvent> best_events;

  std::vector<int> ob_perm = ob_idx;
  do {
    std::vector<int> wa_perm = wa_idx;
    do {
      double total = 0.0;
      Vec2 cur = from;
      std::string cur_label = "start";
      std::vector<ServiceEvent> events;
      for (int oi : ob_perm) {
        const auto& p = onboard[oi];
        total += leg_or_throw(cost, cur, p.destination, cur_label + "->" + dropoff_label(p.id));
        cur = p.destination;
        cur_label = dropoff_label(p.id);
        events.push_back({ServiceKind::Dropoff, p.id, p.destination});
      }
      for (int wi : wa_perm) {
        const auto& p = waiting[wi];
        total += leg_or_throw(cost, cur, p.origin, cur_label + "->" + pickup_label(p.id));
        total += leg_or_throw(cost, p.origin, p.destination,
                              pickup_label(p.id) + "->" + dropoff_label(p.id));
        cur = p.destination;
        cur_label = dropoff_label(p.id);
        events.push_back({ServiceKind::Pickup, p.id, p.origin});
        events.push_back({ServiceKind::Dropoff, p.id, p.destination});
      }
      if (total < best) {
        best = total;
        best_events = std::move(events);
      }
    } while (std::next_permutation(wa_perm.begin(), wa_perm.end()));
  } while (std::next_permutation(ob_perm.begin(), ob_perm.end()));

  EventSequence seq;
  seq.events = std::move(best_events);
  seq.total_length = pending.empty() ? 0.0 : best;
  return seq;
}

namespace {

struct PdpccSearch {
  const std::vector<PendingPassenger>* pending;
  const LegCost* cost;
  int seats;
  double best = std::numeric_limits<double>::infinity();
  std::vector<ServiceEvent> best_events;
  std::vector<char> state;  // 0 waiting, 1 onboard, 2 done
  std::vector<ServiceEvent> events;
  int done_count = 0;
  int onboard_count = 0;

  void dfs(Vec2 pos, const std::string& pos_label, double so_far) {
    if (done_count == static_cast<int>(pending->size())) {
      if (so_far < best) {
        best = so_far;
        best_events = events;
      }
      return;
    }
    for (std::size_t i = 0; i < pending->size(); ++i) {
      const auto& p = (*pending)[i];
      if (state[i] == 0 && onboard_count < seats) {
        double d = leg_or_throw(*cost, pos, p.origin, pos_label + "->" + pickup_label(p.id));
        if (so_far + d < best) {
          state[i] = 1;
          ++onboard_count;
          events.push_back({ServiceKind::Pickup, p.id, p.origin});
          dfs(p.origin, pickup_label(p.id), so_far + d);
          events.pop_back();
          --onboard_count;
          state[i] = 0;
        }
      } else if (state[i] == 1) {
        double d = leg_or_throw(*cost, pos, p.destination, pos_label + "->" + dropoff_label(p.id));
        if (so_far + d < best) {
          state[i] = 2;
          --onboard_count;
          ++done_count;
          events.push_back({ServiceKind::Dropoff, p.id, p.destination});
          dfs(p.destination, dropoff_label(p.id), so_far + d);
          events.pop_back();
          --done_count;
          ++onboard_count;
          state[i] = 1;
        }
      }
    }
  }
};

}  // namespace

EventSequence pdpcc_order(const std::vector<PendingPassenger>& pending, Vec2 from, int seats,
                          const LegCost& cost) {
  std::vector<PendingPassenger> sorted = pending;
  std::sort(sorted.begin(), sorted.end(),
            [](const PendingPassenger& a, const PendingPassenger& b) { return a.id < b.id; });

  PdpccSearch search;
  search.pending = &sorted;
  search.cost = &cost;
  search.seats = seats;
  search.state.assign(sorted.size(), 0);
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (sorted[i].onboard) {
      search.state[i] = 1;
      ++search.onboard_count;
    }
  }
  if (search.onboard_count > seats) {
    throw ValidationError("more passengers onboard than seats");
  }
  search.dfs(from, "start", 0.0);

  EventSequence seq;
  seq.events = std::move(search.best_events);
  seq.total_length = sorted.empty() ? 0.0 : search.best;
  return seq;
}

EventSequence replan_on_arrival(PlannerMethod method, const std::vector<PendingPassenger>& pending,
                                Vec2 from, int seats, const LegCost& cost) {
  switch (method) {
    case PlannerMethod::Cptsp:
      return cptsp_order(pending, from, cost);
    case PlannerMethod::Pdpcc:
    case PlannerMethod::Straight:
      return pdpcc_order(pending, from, seats, cost);
  }
  throw ConfigError("unknown planner method");
}

Path straight_line_path(const EventSequence& seq, Vec2 from, double step_length) {
  Path path;
  path.points.push_back(from);
  Vec2 cur = from;
  for (const ServiceEvent& e : seq.events) {
    double d = distance(cur, e.point);
    if (d > 0) {
      Vec2 dir = (e.point - cur) * (1.0 / d);
      for (double travelled = step_length; travelled < d; travelled += step_length) {
        path.points.push_back(cur + dir * travelled);
      }
      path.points.push_back(e.point);
      path.total_length += d;
      cur = e.point;
    }
    path.events.push_back({path.points.size() - 1, e});
  }
  return path;
}

std::string method_name(PlannerMethod m) {
  switch (m) {
    case PlannerMethod::Cptsp: return "cptsp";
    case PlannerMethod::Pdpcc: return "pdpcc";
    case PlannerMethod::Straight: return "straight";
  }
  return "?";
}

std::optional<PlannerMethod> parse_method(const std::string& name) {
  if (name == "cptsp") return PlannerMethod::Cptsp;
  if (name == "pdpcc") return PlannerMethod::Pdpcc;
  if (name == "straight") return PlannerMethod::Straight;
  return std::nullopt;
}

namespace {

/// Shared execution state for the classical harness.
struct ExecState {
  const Scenario* scenario;
  const RadioMap* map;
  PlannerMethod method;
  double threshold;
  double meters_per_slot;
  Vec2 pos;
  double time_slots = 0.0;
  int seats;
  std::vector<char> known, served, onboard;
  EpisodeTrace trace;

  bool same_stop(Vec2 a, Vec2 b) const {
    if (method == PlannerMethod::Straight) return distance(a, b) < 1e-9;
    CellIndex ca = map->cell_of(a), cb = map->cell_of(b);
    return ca == cb;
  }

  void record(const std::vector<TraceEvent>& events) {
    TraceStep row;
    row.t = time_slots;
    row.position = pos;
    row.reward = 0.0;
    row.action = -1;
    row.sinr_dB = map->sinr_at_point(pos);
    row.seats_remaining = seats;
    row.events = events;
    trace.steps.push_back(row);
  }

  void annotate(TraceEvent e) { trace.steps.back().events.push_back(e); }

  bool reveal_arrivals() {
    bool any = false;
    for (std::size_t i = 0; i < scenario->passengers.size(); ++i) {
      if (!known[i] && scenario->passengers[i].arrival_slot <= time_slots + 1e-12) {
        known[i] = 1;
        any = true;
      }
    }
    return any;
  }

  std::vector<PendingPassenger> pending() const {
    std::vector<PendingPassenger> out;
    for (std::size_t i = 0; i < scenario->passengers.size(); ++i) {
      if (!known[i] || served[i]) continue;
      const PassengerRequest& p = scenario->passengers[i];
      out.push_back({p.id, p.origin_S, p.destination_D, onboard[i] != 0});
    }
    return out;
  }

  /// Applies every leading event of `seq` at the current stop; returns the
  /// count consumed.
  std::size_t apply_due(const EventSequence& seq, std::size_t idx) {
    while (idx < seq.events.size() && same_stop(pos, seq.events[idx].point)) {
      const ServiceEvent& e = seq.events[idx];
      std::size_t pi = 0;
      for (; pi < scenario->passengers.size(); ++pi) {
        if (scenario->passengers[pi].id == e.passenger) break;
      }
      if (e.kind == ServiceKind::Pickup) {
        onboard[pi] = 1;
        --seats;
        trace.passengers[pi].board_time = time_slots;
        annotate({EventKind::Board, e.passenger});
      } else {
        onboard[pi] = 0;
        served[pi] = 1;
        ++seats;
        trace.passengers[pi].serve_time = time_slots;
        annotate({EventKind::Serve, e.passenger});
      }
      ++idx;
    }
    return idx;
  }
};

}  // namespace

EpisodeTrace run_classical(PlannerMethod method, const Scenario& scenario, const RadioMap& map,
                           double threshold_dB) {
  ExecState ex;
  ex.scenario = &scenario;
  ex.map = &map;
  ex.method = method;
  ex.threshold = threshold_dB;
  ex.meters_per_slot = scenario.speed_V * scenario.slot_duration;
  ex.seats = scenario.seats_N_seat;
  std::size_t N = scenario.passengers.size();
  ex.known.assign(N, 0);
  ex.served.assign(N, 0);
  ex.onboard.assign(N, 0);
  ex.trace.passengers.resize(N);
  for (std::size_t i = 0; i < N; ++i) {
    ex.trace.passengers[i].id = scenario.passengers[i].id;
    ex.trace.passengers[i].arrival_slot = scenario.passengers[i].arrival_slot;
  }

  RoutedLegCost routed(map, threshold_dB);
  StraightLegCost straight;
  const LegCost& cost = method == PlannerMethod::Straight ? static_cast<const LegCost&>(straight)
                                                          : static_cast<const LegCost&>(routed);

  if (method == PlannerMethod::Straight) {
    ex.pos = scenario.start_position;
  } else {
    CellIndex c = map.cell_of(scenario.start_position);
    if (map.sinr_at(c.i, c.j) < threshold_dB) {
      throw InfeasibleError("start position cell is below the SINR threshold");
    }
    ex.pos = map.cell_center(c.i, c.j);
  }
  ex.reveal_arrivals();
  ex.record({});

  double sample_step = step_length(scenario);

  while (true) {
    std::vector<PendingPassenger> pending = ex.pending();
    if (pending.empty()) {
      // Idle until the next unrevealed request, if any.
      double next_arrival = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < N; ++i) {
        if (!ex.known[i]) next_arrival = std::min(next_arrival, double(scenario.passengers[i].arrival_slot));
      }
      if (!std::isfinite(next_arrival)) break;  // mission complete
      ex.time_slots = next_arrival;
      ex.reveal_arrivals();
      ex.record({});
      continue;
    }

    EventSequence seq = replan_on_arrival(method, pending, ex.pos, scenario.seats_N_seat, cost);
    std::size_t idx = ex.apply_due(seq, 0);
    bool interrupted = ex.reveal_arrivals();

    while (!interrupted && idx < seq.events.size()) {
      Vec2 target = seq.events[idx].point;
      std::vector<Vec2> waypoints;
      if (method == PlannerMethod::Straight) {
        EventSequence one;
        one.events = {seq.events[idx]};
        Path p = straight_line_path(one, ex.pos, sample_step);
        waypoints.assign(p.points.begin() + 1, p.points.end());
      } else {
        Path p = dijkstra_leg(map, ex.pos, target, threshold_dB);
        waypoints.assign(p.points.begin() + 1, p.points.end());
      }
      for (Vec2 w : waypoints) {
        double moved = distance(ex.pos, w);
        ex.pos = w;
        ex.time_slots += moved / ex.meters_per_slot;
        ex.record({});
        idx = ex.apply_due(seq, idx);
        if (ex.reveal_arrivals()) {
          interrupted = true;
          break;
        }
      }
      if (!interrupted && idx < seq.events.size() && ex.same_stop(ex.pos, seq.events[idx].point)) {
        idx = ex.apply_due(seq, idx);
      }
    }
  }

  ex.trace.terminated = true;
  ex.trace.all_served = true;
  for (std::size_t i = 0; i < N; ++i) {
    if (!ex.served[i]) ex.trace.all_served = false;
  }
  return ex.trace;
}

}  // namespace uamsim
