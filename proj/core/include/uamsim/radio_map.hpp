#pragma once

#include <string>
#include <vector>

#include "uamsim/geometry.hpp"
#include "uamsim/scenario.hpp"

namespace uamsim {

/// Receiver-side channel parameters not tied to a particular base station.
struct ChannelParams {
  double noise_power_sigma2_dBm = -96.0;
  double altitude_H = 100.0;
};

enum class LosState { LOS, NLOS };

/// Per-cell expected SINR grid plus geometry metadata; the planner's
/// communication oracle. Immutable after construction.
struct RadioMap {
  int n_cells_per_side = 0;
  double cell_size = 0.0;
  Vec2 origin_u_R;                  // center of cell (0,0)
  std::vector<double> sinr_dB;      // row-major i*n+j
  std::vector<int> serving_gbs;     // argmax GBS index per cell

  double sinr_at(int i, int j) const { return sinr_dB[static_cast<std::size_t>(i) * n_cells_per_side + j]; }
  int serving_at(int i, int j) const { return serving_gbs[static_cast<std::size_t>(i) * n_cells_per_side + j]; }
  Vec2 cell_center(int i, int j) const { return origin_u_R + Vec2{i * cell_size, j * cell_size}; }
  /// Index of the cell containing a point, clamped to the grid.
  CellIndex cell_of(Vec2 p) const;
  double sinr_at_point(Vec2 p) const;
};

// Channel gains. All returned values are amplitude gains in dB: the paper's
// h-bar formulas carry a 1/2 factor, so linear power gain is 10^(2*g/10).

/// Half the standard free-space path loss, negated: -(20 log10 d + 20 log10 fc + 32.45)/2,
/// d in meters, fc in GHz.
double free_space_gain(double d_m, double fc_GHz);

/// UMi line-of-sight gain: G/2 + min{FS power loss term, UMi LOS term}/2.
double los_gain(double d_m, double H_m, double fc_GHz, double G_dB);

/// UMi non-line-of-sight gain: G/2 + min{LOS power term, UMi NLOS term}/2.
double nlos_gain(double d_m, double H_m, double fc_GHz, double G_dB);

/// Ray-based LOS classification: samples the 3-D segment between the GBS
/// antenna and the cell center at flight altitude every <= cell/2 meters of
/// ground distance; blocked when any sample's segment altitude is <= the
/// building height of the ground cell below it (ties count as blocked).
LosState classify_los(const Gbs& gbs, Vec2 cell_center, double altitude, const Scenario& s);

/// Expected SINR of one cell (dB) and the serving GBS index: the max over
/// candidate GBSs of P_m h_m^2 / (sum_{m' != m} l_m' P_m' h_m'^2 + sigma^2).
/// Uses the 3-D distance between the GBS antenna and the cell center at
/// flight altitude, floored at 1 m (the UMi model is not calibrated below).
std::pair<double, int> expected_sinr_cell(int i, int j, const Scenario& s, const ChannelParams& cp);

RadioMap build_map(const Scenario& s, const ChannelParams& cp);

/// side x side block of cells centered on the cell containing `center`
/// (rows [c - side/2, c + side - 1 - side/2]); out-of-map cells filled with
/// `pad_value`. Returned row-major, side*side values.
std::vector<double> local_window(const RadioMap& map, Vec2 center, int side, double pad_value);

/// Same windowing over an arbitrary row-major grid (used for the uncertainty map).
std::vector<double> local_window_grid(const std::vector<double>& grid, int n, double cell,
                                      Vec2 center, int side, double pad_value);

// Serialization: one text header line "uamsim.radiomap 1 <n> <cell> <ux> <uy>"
// followed by n^2 little-endian float64 SINR values then n^2 little-endian
// float64 serving indices, both row-major.
void save_radio_map(const RadioMap& map, const std::string& path);
RadioMap load_radio_map(const std::string& path);

/// CSV dump (i, j, x, y, sinr_dB, serving_gbs) for plotting.
void write_radio_map_csv(const RadioMap& map, const std::string& path);

}  // namespace uamsim
