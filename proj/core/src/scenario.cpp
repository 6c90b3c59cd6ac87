#include "uamsim/scenario.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "uamsim/errors.hpp"
#include "uamsim/rng.hpp"

namespace uamsim {

using nlohmann::json;

namespace {

const json& require_field(const json& j, const char* field, const char* ctx) {
  auto it = j.find(field);
  if (it == j.end()) {
    throw ParseError(std::string("missing field '") + field + "' in " + ctx);
  }
  return *it;
}

double require_number(const json& j, const char* field, const char* ctx) {
  const json& v = require_field(j, field, ctx);
  if (!v.is_number()) {
    throw ParseError(std::string("field '") + field + "' in " + ctx + " must be a number");
  }
  return v.get<double>();
}

int require_int(const json& j, const char* field, const char* ctx) {
  const json& v = require_field(j, field, ctx);
  if (!v.is_number_integer()) {
    throw ParseError(std::string("field '") + field + "' in " + ctx + " must be an integer");
  }
  return v.get<int>();
}

Vec2 require_point(const json& j, const char* field, const char* ctx) {
  const json& v = require_field(j, field, ctx);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
    throw ParseError(std::string("field '") + field + "' in " + ctx + " must be [x, y]");
  }
  return {v[0].get<double>(), v[1].get<double>()};
}

std::vector<double> read_raster_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open building raster file: " + path);
  std::vector<double> heights;
  double h;
  while (in >> h) heights.push_back(h);
  return heights;
}

bool in_area(Vec2 p, double L) { return p.x >= 0 && p.x <= L && p.y >= 0 && p.y <= L; }

}  // namespace

int Scenario::n_cells() const {
  double ratio = area_side_L / cell_size_delta_C;
  return static_cast<int>(std::llround(ratio));
}

double Scenario::building_height(int i, int j) const {
  if (building_raster.empty()) return 0.0;
  int n = n_cells();
  if (i < 0 || i >= n || j < 0 || j >= n) return 0.0;  // no buildings outside the area
  return building_raster[static_cast<std::size_t>(i) * n + j];
}

void validate_scenario(const Scenario& s) {
  auto fail = [](const std::string& rule) { throw ValidationError("scenario invariant: " + rule); };

  if (!(s.area_side_L > 0)) fail("area_side_L > 0");
  if (!(s.cell_size_delta_C > 0)) fail("cell_size_delta_C > 0");
  double ratio = s.area_side_L / s.cell_size_delta_C;
  if (std::abs(ratio - std::llround(ratio)) > 1e-9 || std::llround(ratio) < 1) {
    fail("area_side_L / cell_size_delta_C must be a positive integer");
  }
  if (!(s.altitude_H > 0)) fail("altitude_H > 0");
  if (!(s.speed_V > 0)) fail("speed_V > 0");
  if (!(s.slot_duration > 0)) fail("slot_duration > 0");
  if (s.seats_N_seat < 1) fail("seats_N_seat >= 1");
  if (s.action_count_k < 3) fail("action_count_k >= 3");
  if (s.max_steps_T_max < 1) fail("max_steps_T_max >= 1");
  if (!in_area(s.start_position, s.area_side_L)) fail("start_position out of bounds");
  if (s.gbs_list.size() < 2) fail("gbs_list must have more than one entry");
  for (std::size_t m = 0; m < s.gbs_list.size(); ++m) {
    const Gbs& g = s.gbs_list[m];
    if (!(g.height > 0)) fail("gbs[" + std::to_string(m) + "].height > 0");
    if (g.load_factor_l < 0 || g.load_factor_l > 1) {
      fail("gbs[" + std::to_string(m) + "].load_factor_l in [0,1]");
    }
    if (!(g.carrier_freq_fc_GHz > 0)) fail("gbs[" + std::to_string(m) + "].carrier_freq_fc_GHz > 0");
  }
  for (const PassengerRequest& p : s.passengers) {
    std::string who = "passenger " + std::to_string(p.id);
    if (!in_area(p.origin_S, s.area_side_L)) fail(who + " origin_S out of bounds");
    if (!in_area(p.destination_D, s.area_side_L)) fail(who + " destination_D out of bounds");
    if (p.origin_S == p.destination_D) fail(who + " origin_S must differ from destination_D");
    if (p.arrival_slot < 0) fail(who + " arrival_slot >= 0");
  }
  if (!s.building_raster.empty()) {
    std::size_t n = static_cast<std::size_t>(s.n_cells());
    if (s.building_raster.size() != n * n) {
      fail("building_raster must have n_cells^2 entries (" + std::to_string(n * n) + ")");
    }
    for (double h : s.building_raster) {
      if (h < 0) fail("building heights must be nonnegative");
    }
  }
}

Scenario load_scenario(const std::string& json_text, const std::string& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("scenario document is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("scenario document must be a JSON object");

  Scenario s;
  s.area_side_L = require_number(j, "area_side_L", "scenario");
  s.cell_size_delta_C = require_number(j, "cell_size_delta_C", "scenario");
  s.altitude_H = require_number(j, "altitude_H", "scenario");
  s.speed_V = require_number(j, "speed_V", "scenario");
  s.slot_duration = require_number(j, "slot_duration", "scenario");
  s.seats_N_seat = require_int(j, "seats_N_seat", "scenario");
  s.sinr_threshold_dB = require_number(j, "sinr_threshold_dB", "scenario");
  s.start_position = require_point(j, "start_position", "scenario");
  s.max_steps_T_max = require_int(j, "max_steps_T_max", "scenario");
  s.action_count_k = j.contains("action_count_k") ? require_int(j, "action_count_k", "scenario") : 15;
  s.rng_seed = j.contains("rng_seed") ? require_field(j, "rng_seed", "scenario").get<std::uint64_t>() : 0;

  const json& gbs_arr = require_field(j, "gbs_list", "scenario");
  if (!gbs_arr.is_array()) throw ParseError("field 'gbs_list' in scenario must be an array");
  for (std::size_t m = 0; m < gbs_arr.size(); ++m) {
    const json& gj = gbs_arr[m];
    std::string ctx = "gbs_list[" + std::to_string(m) + "]";
    Gbs g;
    g.position = require_point(gj, "position", ctx.c_str());
    g.height = require_number(gj, "height", ctx.c_str());
    if (gj.contains("tx_power_P_dBm")) g.tx_power_P_dBm = require_number(gj, "tx_power_P_dBm", ctx.c_str());
    if (gj.contains("load_factor_l")) g.load_factor_l = require_number(gj, "load_factor_l", ctx.c_str());
    if (gj.contains("gain_G_dB")) g.gain_G_dB = require_number(gj, "gain_G_dB", ctx.c_str());
    if (gj.contains("carrier_freq_fc_GHz")) {
      g.carrier_freq_fc_GHz = require_number(gj, "carrier_freq_fc_GHz", ctx.c_str());
    }
    s.gbs_list.push_back(g);
  }

  const json& pax = require_field(j, "passengers", "scenario");
  if (!pax.is_array()) throw ParseError("field 'passengers' in scenario must be an array");
  for (std::size_t n = 0; n < pax.size(); ++n) {
    const json& pj = pax[n];
    std::string ctx = "passengers[" + std::to_string(n) + "]";
    PassengerRequest p;
    p.id = pj.contains("id") ? require_int(pj, "id", ctx.c_str()) : static_cast<int>(n);
    p.origin_S = require_point(pj, "origin_S", ctx.c_str());
    p.destination_D = require_point(pj, "destination_D", ctx.c_str());
    p.arrival_slot = pj.contains("arrival_slot") ? require_int(pj, "arrival_slot", ctx.c_str()) : 0;
    s.passengers.push_back(p);
  }

  if (j.contains("building_raster")) {
    const json& br = j["building_raster"];
    if (br.is_string()) {
      s.building_raster = read_raster_file(base_dir + "/" + br.get<std::string>());
    } else if (br.is_array()) {
      for (const json& row : br) {
        if (!row.is_array()) throw ParseError("field 'building_raster' must be a 2-D array or a file path");
        for (const json& v : row) {
          if (!v.is_number()) throw ParseError("building_raster entries must be numbers");
          s.building_raster.push_back(v.get<double>());
        }
      }
    } else {
      throw ParseError("field 'building_raster' must be a 2-D array or a file path");
    }
  }

  validate_scenario(s);
  return s;
}

Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scenario file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  std::string dir = ".";
  auto slash = path.find_last_of('/');
  if (slash != std::string::npos) dir = path.substr(0, slash);
  return load_scenario(ss.str(), dir);
}

std::string serialize_scenario(const Scenario& s) {
  json j;
  j["area_side_L"] = s.area_side_L;
  j["cell_size_delta_C"] = s.cell_size_delta_C;
  j["altitude_H"] = s.altitude_H;
  j["speed_V"] = s.speed_V;
  j["slot_duration"] = s.slot_duration;
  j["seats_N_seat"] = s.seats_N_seat;
  j["sinr_threshold_dB"] = s.sinr_threshold_dB;
  j["start_position"] = {s.start_position.x, s.start_position.y};
  j["max_steps_T_max"] = s.max_steps_T_max;
  j["action_count_k"] = s.action_count_k;
  j["rng_seed"] = s.rng_seed;
  j["gbs_list"] = json::array();
  for (const Gbs& g : s.gbs_list) {
    j["gbs_list"].push_back({{"position", {g.position.x, g.position.y}},
                             {"height", g.height},
                             {"tx_power_P_dBm", g.tx_power_P_dBm},
                             {"load_factor_l", g.load_factor_l},
                             {"gain_G_dB", g.gain_G_dB},
                             {"carrier_freq_fc_GHz", g.carrier_freq_fc_GHz}});
  }
  j["passengers"] = json::array();
  for (const PassengerRequest& p : s.passengers) {
    j["passengers"].push_back({{"id", p.id},
                               {"origin_S", {p.origin_S.x, p.origin_S.y}},
                               {"destination_D", {p.destination_D.x, p.destination_D.y}},
                               {"arrival_slot", p.arrival_slot}});
  }
  if (!s.building_raster.empty()) {
    int n = s.n_cells();
    json rows = json::array();
    for (int i = 0; i < n; ++i) {
      json row = json::array();
      for (int jj = 0; jj < n; ++jj) row.push_back(s.building_raster[static_cast<std::size_t>(i) * n + jj]);
      rows.push_back(row);
    }
    j["building_raster"] = rows;
  }
  return j.dump(2);
}

double step_length(const Scenario& s) { return s.speed_V * s.slot_duration; }

std::vector<PassengerRequest> generate_passenger_requests(double area_side_L, int count,
                                                          int max_arrival_slot,
                                                          std::uint64_t seed) {
  std::mt19937_64 rng = make_rng(seed, "passenger-gen");
  std::uniform_real_distribution<double> coord(0.0, area_side_L);
  std::uniform_int_distribution<int> slot(0, max_arrival_slot);
  std::vector<PassengerRequest> out;
  for (int n = 0; n < count; ++n) {
    PassengerRequest p;
    p.id = n;
    p.origin_S = {coord(rng), coord(rng)};
    do {
      p.destination_D = {coord(rng), coord(rng)};
    } while (p.destination_D == p.origin_S);
    p.arrival_slot = n == 0 ? 0 : slot(rng);  // at least one request known at start
    out.push_back(p);
  }
  return out;
}

bool operator==(const Gbs& a, const Gbs& b) {
  return a.position == b.position && a.height == b.height && a.tx_power_P_dBm == b.tx_power_P_dBm &&
         a.load_factor_l == b.load_factor_l && a.gain_G_dB == b.gain_G_dB &&
         a.carrier_freq_fc_GHz == b.carrier_freq_fc_GHz;
}

bool operator==(const PassengerRequest& a, const PassengerRequest& b) {
  return a.id == b.id && a.origin_S == b.origin_S && a.destination_D == b.destination_D &&
         a.arrival_slot == b.arrival_slot;
}

bool operator==(const Scenario& a, const Scenario& b) {
  return a.area_side_L == b.area_side_L && a.cell_size_delta_C == b.cell_size_delta_C &&
         a.altitude_H == b.altitude_H && a.speed_V == b.speed_V && a.slot_duration == b.slot_duration &&
         a.seats_N_seat == b.seats_N_seat && a.sinr_threshold_dB == b.sinr_threshold_dB &&
         a.start_position == b.start_position && a.gbs_list == b.gbs_list &&
         a.building_raster == b.building_raster && a.passengers == b.passengers &&
         a.max_steps_T_max == b.max_steps_T_max && a.action_count_k == b.action_count_k &&
         a.rng_seed == b.rng_seed;
}

}  // namespace uamsim
