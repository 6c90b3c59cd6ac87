#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "uamsim/geometry.hpp"

namespace uamsim {

/// Ground base station.
struct Gbs {
  Vec2 position;
  double height = 15.0;          // meters
  double tx_power_P_dBm = 30.0;  // transmit power
  double load_factor_l = 1.0;    // mean fraction of reused frequency bands
  double gain_G_dB = 0.0;        // isotropic antenna gain
  double carrier_freq_fc_GHz = 2.0;
};

struct PassengerRequest {
  int id = 0;
  Vec2 origin_S;
  Vec2 destination_D;
  int arrival_slot = 0;  // time step at which the request becomes known
};

/// Full experiment description: geometry, base stations, buildings,
/// passengers and vehicle parameters. Immutable after load; safe to share
/// read-only across parallel workers.
struct Scenario {
  double area_side_L = 0.0;        // meters, flight area is [0,L]^2
  double cell_size_delta_C = 0.0;  // meters
  double altitude_H = 100.0;       // meters
  double speed_V = 0.0;            // meters/second
  double slot_duration = 0.0;      // seconds
  int seats_N_seat = 1;
  double sinr_threshold_dB = 0.0;
  Vec2 start_position;
  std::vector<Gbs> gbs_list;
  std::vector<double> building_raster;  // n_cells^2 heights, row-major (i*n+j)
  std::vector<PassengerRequest> passengers;
  int max_steps_T_max = 1;
  int action_count_k = 15;  // max action index; k+1 headings
  std::uint64_t rng_seed = 0;

  int n_cells() const;  // area_side_L / cell_size_delta_C, validated integer
  double building_height(int i, int j) const;
};

/// Parses and validates a scenario JSON document. `base_dir` resolves a
/// referenced building-raster file, when present.
Scenario load_scenario(const std::string& json_text, const std::string& base_dir = ".");
Scenario load_scenario_file(const std::string& path);

/// Serializes back to the document schema; load(serialize(s)) == s.
std::string serialize_scenario(const Scenario& s);

/// Re-checks every invariant; throws ValidationError naming the first broken
/// rule. load_scenario calls this before returning.
void validate_scenario(const Scenario& s);

/// Distance flown per time step: speed_V * slot_duration.
double step_length(const Scenario& s);

/// Convenience generator for request sets with staggered arrivals. Makes no
/// claim about matching any particular arrival distribution.
std::vector<PassengerRequest> generate_passenger_requests(double area_side_L, int count,
                                                          int max_arrival_slot,
                                                          std::uint64_t seed);

bool operator==(const Gbs& a, const Gbs& b);
bool operator==(const PassengerRequest& a, const PassengerRequest& b);
bool operator==(const Scenario& a, const Scenario& b);

}  // namespace uamsim
