#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "uamsim/radio_map.hpp"
#include "uamsim/scenario.hpp"
#include "uamsim/trace.hpp"

namespace uamsim {

enum class ServiceKind { Pickup, Dropoff };

struct ServiceEvent {
  ServiceKind kind;
  int passenger = 0;
  Vec2 point;
};

/// Ordered pickup/drop-off events. For each passenger present with both
/// events, pickup precedes dropoff; running onboard count stays within
/// [0, seats].
struct EventSequence {
  std::vector<ServiceEvent> events;
  double total_length = 0.0;  // routed length used by the solver, meters
};

/// Throws ValidationError when ordering or capacity rules are broken.
/// `initially_onboard` lists passengers already in the cabin whose pickups
/// are not part of the sequence.
void validate_event_sequence(const EventSequence& seq, int seats,
                             const std::vector<int>& initially_onboard = {});

struct PathEvent {
  std::size_t waypoint = 0;  // index into points
  ServiceEvent event;
};

/// Cell-level (or sampled) trajectory realizing an event sequence. Paths from
/// the constrained router step between 4-/8-neighbor cell centers and only
/// visit cells with SINR >= threshold; straight-line paths are free-form.
struct Path {
  std::vector<Vec2> points;
  double total_length = 0.0;
  std::vector<PathEvent> events;
  // Move-count decomposition for router paths: total_length ==
  // (axis_steps + sqrt(2)*diag_steps) * cell_size.
  long axis_steps = 0;
  long diag_steps = 0;
};

/// Shortest 8-connected path over cells with SINR >= threshold_dB. Edge
/// weights are cell_size (axis) and cell_size*sqrt(2) (diagonal); equal-cost
/// relaxations tie-break toward the predecessor with lower i, then lower j.
Path dijkstra_leg(const RadioMap& map, Vec2 from, Vec2 to, double threshold_dB);

/// Passenger still requiring service. `onboard` passengers only need their
/// dropoff; the rest need pickup then dropoff.
struct PendingPassenger {
  int id = 0;
  Vec2 origin;
  Vec2 destination;
  bool onboard = false;
};

/// Leg-distance oracle used by the ordering solvers. Routed implementations
/// memoize Dijkstra lengths; the straight-line planner uses Euclidean
/// distance and never fails.
class LegCost {
 public:
  virtual ~LegCost() = default;
  /// Throws UnreachableError/InfeasibleError naming the leg when no route exists.
  virtual double between(Vec2 a, Vec2 b) const = 0;
};

class RoutedLegCost : public LegCost {
 public:
  RoutedLegCost(const RadioMap& map, double threshold_dB);
  double between(Vec2 a, Vec2 b) const override;

 private:
  const RadioMap* map_;
  double threshold_dB_;
  mutable std::map<std::pair<long, long>, double> cache_;  // keyed by flattened cell ids
};

class StraightLegCost : public LegCost {
 public:
  double between(Vec2 a, Vec2 b) const override { return distance(a, b); }
};

/// One-passenger-at-a-time service order minimizing total routed length;
/// exhaustive over permutations, intended for |pending| <= 7. Onboard
/// passengers are dropped off first (permuted among themselves).
EventSequence cptsp_order(const std::vector<PendingPassenger>& pending, Vec2 from,
                          const LegCost& cost);

/// Ride-sharing order under seat capacity minimizing total routed length;
/// branch-and-bound over event interleavings, exact, intended for
/// |pending| <= 5.
EventSequence pdpcc_order(const std::vector<PendingPassenger>& pending, Vec2 from, int seats,
                          const LegCost& cost);

enum class PlannerMethod { Cptsp, Pdpcc, Straight };

/// Re-solves the ordering over all unserved requests from the vehicle's
/// current position; already-onboard passengers are treated as
/// pickup-complete.
EventSequence replan_on_arrival(PlannerMethod method, const std::vector<PendingPassenger>& pending,
                                Vec2 from, int seats, const LegCost& cost);

/// Concatenated straight segments through the event points, sampled at
/// step_length intervals; ignores the SINR constraint.
Path straight_line_path(const EventSequence& seq, Vec2 from, double step_length);

/// Runs a classical method end-to-end with arrival-driven replanning and
/// returns the flown trace (planner time advances in fractional slots).
EpisodeTrace run_classical(PlannerMethod method, const Scenario& scenario, const RadioMap& map,
                           double threshold_dB);

std::string method_name(PlannerMethod m);
std::optional<PlannerMethod> parse_method(const std::string& name);

}  // namespace uamsim
