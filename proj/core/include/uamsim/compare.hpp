#pragma once

#include <optional>
#include <string>
#include <vector>

#include "uamsim/metrics.hpp"
#include "uamsim/msha.hpp"
#include "uamsim/planners.hpp"

namespace uamsim {

struct CompareRow {
  std::string method;
  double threshold_dB = 0.0;
  bool success = false;        // PR == 100 and the method ran to completion
  Metrics metrics;             // PR always meaningful; others withheld on failure
  std::string error;           // infeasibility/unreachable message when the method failed
};

/// Runs each method across the threshold sweep; one row per
/// (method, threshold). Methods: cptsp, pdpcc, straight, and msha when a
/// trained model is supplied. Failures become Failure rows instead of
/// aborting the sweep.
std::vector<CompareRow> compare(const Scenario& scenario, const RadioMap& map,
                                const std::vector<std::string>& methods,
                                const std::vector<double>& thresholds_dB,
                                MshaModel* policy = nullptr,
                                const RewardWeights& weights = {},
                                const EnvConfig& env_config = {});

/// Wide CSV: method,threshold_dB,status,PR,TD,ATT,AWT,ELR,connectivity.
/// Non-PR metrics are left empty on Failure rows.
void write_compare_csv(const std::vector<CompareRow>& rows, const std::string& path);

/// JSON document mirroring the CSV.
void write_compare_json(const std::vector<CompareRow>& rows, const std::string& path);

/// Plot-ready long format: method,threshold_dB,metric,value.
void write_compare_long_csv(const std::vector<CompareRow>& rows, const std::string& path);

}  // namespace uamsim
