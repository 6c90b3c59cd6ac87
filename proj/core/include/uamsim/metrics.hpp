#pragma once

#include <string>

#include "uamsim/scenario.hpp"
#include "uamsim/trace.hpp"

namespace uamsim {

/// The evaluation metrics of a finished episode. ATT/AWT are means over
/// served passengers only and NaN when nothing was served; rate fields are
/// percentages in [0, 100].
struct Metrics {
  double TD = 0.0;            // total distance, meters
  double ATT = 0.0;           // average total time per served passenger, seconds
  double AWT = 0.0;           // average waiting time per served passenger, seconds
  double ELR = 0.0;           // empty-loaded rate, percent of steps
  double PR = 0.0;            // pick-up rate, percent of passengers served
  double connectivity = 0.0;  // percent of flown steps with cell SINR >= threshold
  double completion_time_T = 0.0;  // seconds
};

/// Computes the metrics from a terminated trace. Steps are the trace's state
/// transitions; ELR counts a transition as empty when nobody was onboard at
/// its start, and connectivity samples the cell SINR of each arrival state
/// against `threshold_dB`.
Metrics compute_metrics(const EpisodeTrace& trace, const Scenario& scenario, double threshold_dB);

std::string metrics_to_json(const Metrics& m, bool withhold_non_pr = false);
void write_metrics_json(const Metrics& m, const std::string& path, bool withhold_non_pr = false);

}  // namespace uamsim
