#pragma once

#include <string>
#include <vector>

#include "uamsim/geometry.hpp"

namespace uamsim {

enum class EventKind { Board, Serve, Clamp };

struct TraceEvent {
  EventKind kind;
  int passenger = -1;  // unused for Clamp
};

/// One row per state: row 0 is the initial state, each later row the state
/// after one flown step (environment steps or planner cell moves).
struct TraceStep {
  double t = 0.0;  // time in slots; integral for RL episodes, fractional for planners
  Vec2 position;
  int action = -1;          // -1 when not action-driven
  double reward = 0.0;
  double sinr_dB = 0.0;     // map SINR of the cell containing `position`
  int seats_remaining = 0;
  std::vector<TraceEvent> events;
};

struct PassengerTimeline {
  int id = 0;
  double arrival_slot = 0.0;
  double board_time = -1.0;  // slots; -1 when never boarded
  double serve_time = -1.0;  // slots; -1 when never served
};

struct EpisodeTrace {
  std::vector<TraceStep> steps;
  std::vector<PassengerTimeline> passengers;
  bool terminated = false;  // true once the episode/plan ran to completion
  bool all_served = false;

  int onboard_at(std::size_t row) const;  // passengers onboard after row's events
};

std::string format_events(const std::vector<TraceEvent>& events);

/// CSV export: t,x,y,action,reward,sinr_dB,seats,event with events joined by '|'.
void write_trace_csv(const EpisodeTrace& trace, const std::string& path);

}  // namespace uamsim
