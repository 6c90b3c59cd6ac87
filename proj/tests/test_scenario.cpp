#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "test_util.hpp"
#include "uamsim/errors.hpp"
#include "uamsim/scenario.hpp"

using namespace uamsim;

namespace {

std::string minimal_doc(double origin_x = 500.0) {
  return R"({
    "area_side_L": 2000.0,
    "cell_size_delta_C": 100.0,
    "altitude_H": 100.0,
    "speed_V": 33.0,
    "slot_duration": 3.0,
    "seats_N_seat": 2,
    "sinr_threshold_dB": -5.0,
    "start_position": [100.0, 100.0],
    "max_steps_T_max": 500,
    "gbs_list": [
      {"position": [0.0, 0.0], "height": 15.0},
      {"position": [2000.0, 2000.0], "height": 15.0}
    ],
    "passengers": [
      {"id": 0, "origin_S": [)" +
         std::to_string(origin_x) + R"(, 500.0], "destination_D": [1500.0, 1500.0]}
    ]
  })";
}

}  // namespace

TEST_CASE("minimal document maps fields directly") {
  Scenario s = load_scenario(minimal_doc());
  CHECK(s.n_cells() == 20);
  CHECK(s.area_side_L == 2000.0);
  CHECK(s.gbs_list.size() == 2);
  CHECK(s.passengers.size() == 1);
  CHECK(s.action_count_k == 15);  // default
  CHECK(s.gbs_list[0].tx_power_P_dBm == 30.0);  // default
}

TEST_CASE("out-of-bounds passenger origin is a validation error") {
  CHECK_THROWS_WITH_AS(load_scenario(minimal_doc(2001.0)),
                       doctest::Contains("out of bounds"), ValidationError);
}

TEST_CASE("missing field is a parse error naming the field") {
  CHECK_THROWS_WITH_AS(load_scenario(R"({"area_side_L": 100.0})"),
                       doctest::Contains("cell_size_delta_C"), ParseError);
}

TEST_CASE("Berlin-style parameters are accepted") {
  Scenario s;
  s.area_side_L = 3200.0;
  s.cell_size_delta_C = 100.0;
  s.altitude_H = 100.0;
  s.speed_V = 120000.0 / 3600.0;
  s.slot_duration = 3.0;
  s.seats_N_seat = 2;
  s.sinr_threshold_dB = -5.0;
  s.start_position = {100.0, 100.0};
  s.max_steps_T_max = 2500;
  s.gbs_list = {{{500.0, 500.0}, 15.0, 30.0, 0.5, 0.0, 2.0},
                {{2500.0, 2500.0}, 15.0, 30.0, 0.5, 0.0, 2.0}};
  s.passengers = {{0, {200.0, 200.0}, {3000.0, 3000.0}, 0},
                  {1, {400.0, 1200.0}, {2800.0, 400.0}, 0},
                  {2, {1600.0, 300.0}, {800.0, 2900.0}, 0},
                  {3, {2400.0, 1800.0}, {300.0, 2400.0}, 17}};
  CHECK_NOTHROW(validate_scenario(s));
  Scenario loaded = load_scenario(serialize_scenario(s));
  CHECK(loaded == s);
}

TEST_CASE("non-integer grid ratio is rejected") {
  Scenario s = testutil::make_scenario();
  s.cell_size_delta_C = 130.0;
  CHECK_THROWS_AS(validate_scenario(s), ValidationError);
}

TEST_CASE("single GBS is rejected") {
  Scenario s = testutil::make_scenario();
  s.gbs_list.resize(1);
  CHECK_THROWS_WITH_AS(validate_scenario(s), doctest::Contains("more than one"), ValidationError);
}

TEST_CASE("step_length") {
  Scenario s = testutil::make_scenario();
  SUBCASE("120 km/h, 3 s slot gives 100 m") {
    s.speed_V = 120000.0 / 3600.0;
    s.slot_duration = 3.0;
    CHECK(step_length(s) == doctest::Approx(100.0).epsilon(1e-12));
  }
  SUBCASE("36 km/h, 1 s gives 10 m") {
    s.speed_V = 36000.0 / 3600.0;
    s.slot_duration = 1.0;
    CHECK(step_length(s) == doctest::Approx(10.0).epsilon(1e-12));
  }
  SUBCASE("halving the speed halves the step") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> speed(1.0, 80.0);
    for (int i = 0; i < 50; ++i) {
      s.speed_V = speed(rng);
      double full = step_length(s);
      s.speed_V /= 2.0;
      CHECK(step_length(s) == full / 2.0);
    }
  }
}

TEST_CASE("serialize/load round-trip is identity") {
  Scenario s = testutil::make_scenario();
  s.building_raster.assign(static_cast<std::size_t>(s.n_cells()) * s.n_cells(), 0.0);
  s.building_raster[5 * s.n_cells() + 7] = 120.0;
  Scenario back = load_scenario(serialize_scenario(s));
  CHECK(back == s);
  CHECK(serialize_scenario(back) == serialize_scenario(s));
}

TEST_CASE("generated documents always satisfy the invariants") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> n_cells(2, 25);
  std::uniform_real_distribution<double> cell(10.0, 300.0);
  std::uniform_int_distribution<int> gbs_count(2, 5);
  std::uniform_int_distribution<int> pax_count(1, 5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  for (int trial = 0; trial < 60; ++trial) {
    Scenario s;
    int n = n_cells(rng);
    s.cell_size_delta_C = cell(rng);
    s.area_side_L = n * s.cell_size_delta_C;
    s.altitude_H = 50.0 + 100.0 * unit(rng);
    s.speed_V = 5.0 + 50.0 * unit(rng);
    s.slot_duration = 0.5 + 5.0 * unit(rng);
    s.seats_N_seat = 1 + static_cast<int>(3 * unit(rng));
    s.sinr_threshold_dB = -20.0 + 25.0 * unit(rng);
    s.start_position = {s.area_side_L * unit(rng), s.area_side_L * unit(rng)};
    s.max_steps_T_max = 50 + static_cast<int>(200 * unit(rng));
    int m = gbs_count(rng);
    for (int g = 0; g < m; ++g) {
      s.gbs_list.push_back({{s.area_side_L * unit(rng), s.area_side_L * unit(rng)},
                            5.0 + 40.0 * unit(rng),
                            20.0 + 15.0 * unit(rng),
                            unit(rng),
                            0.0,
                            2.0});
    }
    s.passengers = generate_passenger_requests(s.area_side_L, pax_count(rng), 20, trial);

    Scenario loaded = load_scenario(serialize_scenario(s));
    CHECK_NOTHROW(validate_scenario(loaded));
    CHECK(loaded == s);
    // Spot invariants directly.
    CHECK(loaded.gbs_list.size() > 1);
    for (const auto& p : loaded.passengers) {
      CHECK(p.arrival_slot >= 0);
      CHECK(!(p.origin_S == p.destination_D));
      CHECK(p.origin_S.x >= 0.0);
      CHECK(p.origin_S.x <= loaded.area_side_L);
    }
  }
}
