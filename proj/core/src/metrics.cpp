#include "uamsim/metrics.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "uamsim/errors.hpp"

namespace uamsim {

Metrics compute_metrics(const EpisodeTrace& trace, const Scenario& scenario, double threshold_dB) {
  if (!trace.terminated) throw StateError("compute_metrics requires a terminated episode trace");
  if (trace.steps.empty()) throw StateError("empty trace");

  Metrics m;
  std::size_t transitions = trace.steps.size() - 1;

  for (std::size_t k = 1; k < trace.steps.size(); ++k) {
    m.TD += distance(trace.steps[k - 1].position, trace.steps[k].position);
  }

  int served = 0;
  double sum_wait = 0.0, sum_total = 0.0;
  for (const PassengerTimeline& p : trace.passengers) {
    if (p.serve_time < 0) continue;
    ++served;
    sum_wait += (p.board_time - p.arrival_slot) * scenario.slot_duration;
    sum_total += (p.serve_time - p.arrival_slot) * scenario.slot_duration;
  }
  if (served > 0) {
    m.AWT = sum_wait / served;
    m.ATT = sum_total / served;
  } else {
    m.AWT = std::numeric_limits<double>::quiet_NaN();
    m.ATT = std::numeric_limits<double>::quiet_NaN();
  }
  m.PR = trace.passengers.empty()
             ? 100.0
             : 100.0 * served / static_cast<double>(trace.passengers.size());

  if (transitions > 0) {
    std::size_t empty_steps = 0, connected_steps = 0;
    for (std::size_t k = 1; k < trace.steps.size(); ++k) {
      if (trace.onboard_at(k - 1) == 0) ++empty_steps;
      if (trace.steps[k].sinr_dB >= threshold_dB) ++connected_steps;
    }
    m.ELR = 100.0 * empty_steps / static_cast<double>(transitions);
    m.connectivity = 100.0 * connected_steps / static_cast<double>(transitions);
  } else {
    m.ELR = 0.0;
    m.connectivity = 100.0;
  }

  m.completion_time_T = trace.steps.back().t * scenario.slot_duration;
  return m;
}

std::string metrics_to_json(const Metrics& m, bool withhold_non_pr) {
  nlohmann::json j;
  auto put = [&](const char* key, double v) {
    if (std::isnan(v)) {
      j[key] = nullptr;
    } else {
      j[key] = v;
    }
  };
  put("PR", m.PR);
  if (withhold_non_pr) {
    j["TD"] = nullptr;
    j["ATT"] = nullptr;
    j["AWT"] = nullptr;
    j["ELR"] = nullptr;
    j["connectivity"] = nullptr;
    j["completion_time_T"] = nullptr;
    j["task_status"] = "Failure";
  } else {
    put("TD", m.TD);
    put("ATT", m.ATT);
    put("AWT", m.AWT);
    put("ELR", m.ELR);
    put("connectivity", m.connectivity);
    put("completion_time_T", m.completion_time_T);
    j["task_status"] = "Success";
  }
  // Connectivity is sampled at step resolution: the cell of each flown step.
  j["connectivity_resolution"] = "per-step-cell";
  return j.dump(2);
}

void write_metrics_json(const Metrics& m, const std::string& path, bool withhold_non_pr) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open metrics file for writing: " + path);
  out << metrics_to_json(m, withhold_non_pr) << "\n";
}

}  // namespace uamsim
