#include "uamsim/compare.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "uamsim/errors.hpp"
#include "uamsim/ppo.hpp"

namespace uamsim {

std::vector<CompareRow> compare(const Scenario& scenario, const RadioMap& map,
                                const std::vector<std::string>& methods,
                                const std::vector<double>& thresholds_dB, MshaModel* policy,
                                const RewardWeights& weights, const EnvConfig& env_config) {
  std::vector<CompareRow> rows;
  for (const std::string& method : methods) {
    for (double threshold : thresholds_dB) {
      CompareRow row;
      row.method = method;
      row.threshold_dB = threshold;
      try {
        EpisodeTrace trace;
        if (method == "msha") {
          if (policy == nullptr) throw ConfigError("method msha requires a trained policy");
          Scenario at_threshold = scenario;
          at_threshold.sinr_threshold_dB = threshold;
          trace = greedy_rollout(at_threshold, map, *policy, weights, env_config);
        } else {
          auto parsed = parse_method(method);
          if (!parsed) throw ConfigError("unknown method: " + method);
          trace = run_classical(*parsed, scenario, map, threshold);
        }
        row.metrics = compute_metrics(trace, scenario, threshold);
        row.success = row.metrics.PR >= 100.0;
      } catch (const InfeasibleError& e) {
        row.success = false;
        row.error = e.what();
        row.metrics.PR = 0.0;
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

namespace {

std::string cell_or_empty(double v, bool withheld) {
  if (withheld || std::isnan(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace

void write_compare_csv(const std::vector<CompareRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open compare CSV for writing: " + path);
  out << "method,threshold_dB,status,PR,TD,ATT,AWT,ELR,connectivity\n";
  for (const CompareRow& r : rows) {
    bool withhold = !r.success;  // PR < 100 renders the other indicators meaningless
    out << r.method << "," << r.threshold_dB << "," << (r.success ? "Success" : "Failure") << ","
        << cell_or_empty(r.metrics.PR, false) << "," << cell_or_empty(r.metrics.TD, withhold)
        << "," << cell_or_empty(r.metrics.ATT, withhold) << ","
        << cell_or_empty(r.metrics.AWT, withhold) << "," << cell_or_empty(r.metrics.ELR, withhold)
        << "," << cell_or_empty(r.metrics.connectivity, withhold) << "\n";
  }
}

void write_compare_json(const std::vector<CompareRow>& rows, const std::string& path) {
  nlohmann::json arr = nlohmann::json::array();
  for (const CompareRow& r : rows) {
    nlohmann::json j;
    j["method"] = r.method;
    j["threshold_dB"] = r.threshold_dB;
    j["status"] = r.success ? "Success" : "Failure";
    j["PR"] = r.metrics.PR;
    auto put = [&](const char* key, double v) {
      if (!r.success || std::isnan(v)) {
        j[key] = nullptr;
      } else {
        j[key] = v;
      }
    };
    put("TD", r.metrics.TD);
    put("ATT", r.metrics.ATT);
    put("AWT", r.metrics.AWT);
    put("ELR", r.metrics.ELR);
    put("connectivity", r.metrics.connectivity);
    if (!r.error.empty()) j["error"] = r.error;
    arr.push_back(std::move(j));
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot open compare JSON for writing: " + path);
  out << arr.dump(2) << "\n";
}

void write_compare_long_csv(const std::vector<CompareRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open long-format CSV for writing: " + path);
  out << "method,threshold_dB,metric,value\n";
  for (const CompareRow& r : rows) {
    auto emit = [&](const char* metric, double v, bool withheld) {
      std::string cell = cell_or_empty(v, withheld);
      if (cell.empty()) return;
      out << r.method << "," << r.threshold_dB << "," << metric << "," << cell << "\n";
    };
    emit("PR", r.metrics.PR, false);
    emit("TD", r.metrics.TD, !r.success);
    emit("ATT", r.metrics.ATT, !r.success);
    emit("AWT", r.metrics.AWT, !r.success);
    emit("ELR", r.metrics.ELR, !r.success);
    emit("connectivity", r.metrics.connectivity, !r.success);
  }
}

}  // namespace uamsim
