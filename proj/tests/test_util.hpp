#pragma once

#include <vector>

#include "uamsim/radio_map.hpp"
#include "uamsim/scenario.hpp"

namespace uamsim::testutil {

/// Minimal valid scenario on an n x n grid of `cell`-sized cells.
inline Scenario make_scenario(int n = 20, double cell = 100.0) {
  Scenario s;
  s.area_side_L = n * cell;
  s.cell_size_delta_C = cell;
  s.altitude_H = 100.0;
  s.speed_V = 120000.0 / 3600.0;  // 120 km/h
  s.slot_duration = 3.0;
  s.seats_N_seat = 2;
  s.sinr_threshold_dB = -5.0;
  s.start_position = {cell * 1.5, cell * 1.5};
  s.max_steps_T_max = 100;
  s.action_count_k = 15;
  s.rng_seed = 1;
  s.gbs_list = {
      {{cell * 2, cell * 2}, 15.0, 30.0, 0.5, 0.0, 2.0},
      {{s.area_side_L - cell * 2, cell * 2}, 15.0, 30.0, 0.5, 0.0, 2.0},
  };
  s.passengers = {
      {0, {cell * 3.5, cell * 2.5}, {s.area_side_L - cell * 3.5, cell * 3.5}, 0},
  };
  return s;
}

/// Radio map with a constant SINR everywhere (geometry only).
inline RadioMap make_flat_map(int n, double cell, double sinr_db) {
  RadioMap map;
  map.n_cells_per_side = n;
  map.cell_size = cell;
  map.origin_u_R = {cell / 2.0, cell / 2.0};
  map.sinr_dB.assign(static_cast<std::size_t>(n) * n, sinr_db);
  map.serving_gbs.assign(static_cast<std::size_t>(n) * n, 0);
  return map;
}

/// Radio map with explicit per-cell values (row-major i*n+j).
inline RadioMap make_map(int n, double cell, const std::vector<double>& sinr_db) {
  RadioMap map = make_flat_map(n, cell, 0.0);
  map.sinr_dB = sinr_db;
  return map;
}

}  // namespace uamsim::testutil
