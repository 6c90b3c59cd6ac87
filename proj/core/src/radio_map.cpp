#include "uamsim/radio_map.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "uamsim/errors.hpp"

namespace uamsim {

namespace {

double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }

/// Linear power gain from an amplitude gain in dB (half-dB convention).
double amp_db_to_linear_power(double g_dB) { return std::pow(10.0, 2.0 * g_dB / 10.0); }

void write_f64_le(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  unsigned char b[8];
  for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>((bits >> (8 * k)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 8);
}

double read_f64_le(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t bits = 0;
  for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(b[k]) << (8 * k);
  double v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

}  // namespace

CellIndex RadioMap::cell_of(Vec2 p) const {
  auto clamp_idx = [this](double coord) {
    int idx = static_cast<int>(std::floor(coord / cell_size));
    return std::clamp(idx, 0, n_cells_per_side - 1);
  };
  return {clamp_idx(p.x), clamp_idx(p.y)};
}

double RadioMap::sinr_at_point(Vec2 p) const {
  CellIndex c = cell_of(p);
  return sinr_at(c.i, c.j);
}

double free_space_gain(double d_m, double fc_GHz) {
  if (!(d_m > 0)) throw std::domain_error("free_space_gain: distance must be positive");
  if (!(fc_GHz > 0)) throw std::domain_error("free_space_gain: frequency must be positive");
  return -0.5 * (20.0 * std::log10(d_m) + 20.0 * std::log10(fc_GHz) + 32.45);
}

double los_gain(double d_m, double H_m, double fc_GHz, double G_dB) {
  if (!(H_m > 0)) throw std::domain_error("los_gain: altitude must be positive");
  double fs_power = 2.0 * free_space_gain(d_m, fc_GHz);
  double umi_los = -30.9 - (22.25 - 0.5 * std::log10(H_m)) * std::log10(d_m) - 20.0 * std::log10(fc_GHz);
  return G_dB / 2.0 + 0.5 * std::min(fs_power, umi_los);
}

double nlos_gain(double d_m, double H_m, double fc_GHz, double G_dB) {
  double los_power = 2.0 * (los_gain(d_m, H_m, fc_GHz, G_dB) - G_dB / 2.0);
  double umi_nlos = -32.4 - (43.2 - 7.6 * std::log10(H_m)) * std::log10(d_m) - 20.0 * std::log10(fc_GHz);
  return G_dB / 2.0 + 0.5 * std::min(los_power, umi_nlos);
}

LosState classify_los(const Gbs& gbs, Vec2 cell_center, double altitude, const Scenario& s) {
  if (s.building_raster.empty()) return LosState::LOS;
  Vec2 a = gbs.position;
  Vec2 b = cell_center;
  double ground_dist = distance(a, b);
  double spacing = s.cell_size_delta_C / 2.0;
  int samples = std::max(1, static_cast<int>(std::ceil(ground_dist / spacing)));
  int n = s.n_cells();
  for (int k = 0; k <= samples; ++k) {
    double t = static_cast<double>(k) / samples;
    Vec2 p = a + (b - a) * t;
    double seg_alt = gbs.height + (altitude - gbs.height) * t;
    int ci = static_cast<int>(std::floor(p.x / s.cell_size_delta_C));
    int cj = static_cast<int>(std::floor(p.y / s.cell_size_delta_C));
    if (ci < 0 || ci >= n || cj < 0 || cj >= n) continue;
    if (seg_alt <= s.building_height(ci, cj)) return LosState::NLOS;
  }
  return LosState::LOS;
}

std::pair<double, int> expected_sinr_cell(int i, int j, const Scenario& s, const ChannelParams& cp) {
  Vec2 center = Vec2{s.cell_size_delta_C / 2.0, s.cell_size_delta_C / 2.0} +
                Vec2{i * s.cell_size_delta_C, j * s.cell_size_delta_C};
  double sigma2 = dbm_to_mw(cp.noise_power_sigma2_dBm);

  std::size_t M = s.gbs_list.size();
  std::vector<double> rx_power(M);  // P_m * hbar_m^2 in mW
  for (std::size_t m = 0; m < M; ++m) {
    const Gbs& g = s.gbs_list[m];
    double dz = cp.altitude_H - g.height;
    double d = std::hypot(distance(g.position, center), dz);
    d = std::max(d, 1.0);  // channel model is calibrated for d >= 1 m
    double gain = classify_los(g, center, cp.altitude_H, s) == LosState::LOS
                      ? los_gain(d, cp.altitude_H, g.carrier_freq_fc_GHz, g.gain_G_dB)
                      : nlos_gain(d, cp.altitude_H, g.carrier_freq_fc_GHz, g.gain_G_dB);
    rx_power[m] = dbm_to_mw(g.tx_power_P_dBm) * amp_db_to_linear_power(gain);
  }

  double best = -1.0;
  int best_m = 0;
  for (std::size_t m = 0; m < M; ++m) {
    double interference = 0.0;
    for (std::size_t m2 = 0; m2 < M; ++m2) {
      if (m2 == m) continue;
      interference += s.gbs_list[m2].load_factor_l * rx_power[m2];
    }
    double sinr = rx_power[m] / (interference + sigma2);
    if (sinr > best) {
      best = sinr;
      best_m = static_cast<int>(m);
    }
  }
  return {10.0 * std::log10(best), best_m};
}

RadioMap build_map(const Scenario& s, const ChannelParams& cp) {
  RadioMap map;
  map.n_cells_per_side = s.n_cells();
  map.cell_size = s.cell_size_delta_C;
  map.origin_u_R = {s.cell_size_delta_C / 2.0, s.cell_size_delta_C / 2.0};
  int n = map.n_cells_per_side;
  map.sinr_dB.resize(static_cast<std::size_t>(n) * n);
  map.serving_gbs.resize(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      auto [sinr, serving] = expected_sinr_cell(i, j, s, cp);
      map.sinr_dB[static_cast<std::size_t>(i) * n + j] = sinr;
      map.serving_gbs[static_cast<std::size_t>(i) * n + j] = serving;
    }
  }
  return map;
}

std::vector<double> local_window_grid(const std::vector<double>& grid, int n, double cell,
                                      Vec2 center, int side, double pad_value) {
  auto clamp_idx = [&](double coord) {
    int idx = static_cast<int>(std::floor(coord / cell));
    return std::clamp(idx, 0, n - 1);
  };
  int ci = clamp_idx(center.x);
  int cj = clamp_idx(center.y);
  int half = side / 2;
  std::vector<double> out(static_cast<std::size_t>(side) * side, pad_value);
  for (int a = 0; a < side; ++a) {
    int i = ci - half + a;
    if (i < 0 || i >= n) continue;
    for (int b = 0; b < side; ++b) {
      int j = cj - half + b;
      if (j < 0 || j >= n) continue;
      out[static_cast<std::size_t>(a) * side + b] = grid[static_cast<std::size_t>(i) * n + j];
    }
  }
  return out;
}

std::vector<double> local_window(const RadioMap& map, Vec2 center, int side, double pad_value) {
  return local_window_grid(map.sinr_dB, map.n_cells_per_side, map.cell_size, center, side,
                           pad_value);
}

void save_radio_map(const RadioMap& map, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open map file for writing: " + path);
  out << "uamsim.radiomap 1 " << map.n_cells_per_side << " ";
  out.precision(17);
  out << map.cell_size << " " << map.origin_u_R.x << " " << map.origin_u_R.y << "\n";
  for (double v : map.sinr_dB) write_f64_le(out, v);
  for (int g : map.serving_gbs) write_f64_le(out, static_cast<double>(g));
  if (!out) throw IoError("write failed: " + path);
}

RadioMap load_radio_map(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open map file: " + path);
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  std::string magic;
  int version = 0;
  RadioMap map;
  hs >> magic >> version >> map.n_cells_per_side >> map.cell_size >> map.origin_u_R.x >>
      map.origin_u_R.y;
  if (magic != "uamsim.radiomap" || version != 1 || map.n_cells_per_side <= 0) {
    throw ParseError("not a radio map file: " + path);
  }
  std::size_t count = static_cast<std::size_t>(map.n_cells_per_side) * map.n_cells_per_side;
  map.sinr_dB.resize(count);
  map.serving_gbs.resize(count);
  for (std::size_t k = 0; k < count; ++k) map.sinr_dB[k] = read_f64_le(in);
  for (std::size_t k = 0; k < count; ++k) map.serving_gbs[k] = static_cast<int>(read_f64_le(in));
  if (!in) throw ParseError("truncated radio map file: " + path);
  return map;
}

void write_radio_map_csv(const RadioMap& map, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open CSV file for writing: " + path);
  out << "i,j,x,y,sinr_dB,serving_gbs\n";
  out.precision(12);
  int n = map.n_cells_per_side;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      Vec2 c = map.cell_center(i, j);
      out << i << "," << j << "," << c.x << "," << c.y << "," << map.sinr_at(i, j) << ","
          << map.serving_at(i, j) << "\n";
    }
  }
}

}  // namespace uamsim
