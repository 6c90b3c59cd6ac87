#include "uamsim/trace.hpp"

#include <fstream>

#include "uamsim/errors.hpp"

namespace uamsim {

int EpisodeTrace::onboard_at(std::size_t row) const {
  double t = steps[row].t;
  int count = 0;
  for (const PassengerTimeline& p : passengers) {
    if (p.board_time >= 0 && p.board_time <= t && (p.serve_time < 0 || p.serve_time > t)) ++count;
  }
  return count;
}

std::string format_events(const std::vector<TraceEvent>& events) {
  if (events.empty()) return "none";
  std::string out;
  for (const TraceEvent& e : events) {
    if (!out.empty()) out += "|";
    switch (e.kind) {
      case EventKind::Board: out += "board:" + std::to_string(e.passenger); break;
      case EventKind::Serve: out += "serve:" + std::to_string(e.passenger); break;
      case EventKind::Clamp: out += "clamp"; break;
    }
  }
  return out;
}

void write_trace_csv(const EpisodeTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open trace file for writing: " + path);
  out << "t,x,y,action,reward,sinr_dB,seats,event\n";
  out.precision(12);
  for (const TraceStep& s : trace.steps) {
    out << s.t << "," << s.position.x << "," << s.position.y << "," << s.action << "," << s.reward
        << "," << s.sinr_dB << "," << s.seats_remaining << "," << format_events(s.events) << "\n";
  }
}

}  // namespace uamsim
