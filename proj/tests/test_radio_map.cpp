#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <random>

#include "test_util.hpp"
#include "uamsim/errors.hpp"
#include "uamsim/radio_map.hpp"

using namespace uamsim;

namespace {

// Independent re-evaluation of the expected-SINR formula, written from the
// equations with its own dB handling and ray sampler. Tests compare the
// implementation against this path in the linear domain.
namespace oracle {

double fs_power_loss_db(double d, double fc) {
  return 20.0 * std::log10(d) + 20.0 * std::log10(fc) + 32.45;
}

double los_amp_db(double d, double H, double fc, double G) {
  double umi = -30.9 - (22.25 - 0.5 * std::log10(H)) * std::log10(d) - 20.0 * std::log10(fc);
  double fs = -fs_power_loss_db(d, fc);
  return G / 2.0 + 0.5 * (umi < fs ? umi : fs);
}

double nlos_amp_db(double d, double H, double fc, double G) {
  double umi = -32.4 - (43.2 - 7.6 * std::log10(H)) * std::log10(d) - 20.0 * std::log10(fc);
  double los_power = 2.0 * (los_amp_db(d, H, fc, G) - G / 2.0);
  return G / 2.0 + 0.5 * (umi < los_power ? umi : los_power);
}

bool blocked(const Scenario& s, Vec2 a, double ha, Vec2 b, double hb) {
  if (s.building_raster.empty()) return false;
  double ground = std::hypot(b.x - a.x, b.y - a.y);
  int n_samples = std::max(1, (int)std::ceil(ground / (s.cell_size_delta_C / 2.0)));
  for (int k = 0; k <= n_samples; ++k) {
    double t = double(k) / n_samples;
    double x = a.x + (b.x - a.x) * t;
    double y = a.y + (b.y - a.y) * t;
    double alt = ha + (hb - ha) * t;
    int ci = (int)std::floor(x / s.cell_size_delta_C);
    int cj = (int)std::floor(y / s.cell_size_delta_C);
    if (ci < 0 || ci >= s.n_cells() || cj < 0 || cj >= s.n_cells()) continue;
    if (alt <= s.building_raster[(std::size_t)ci * s.n_cells() + cj]) return true;
  }
  return false;
}

/// Linear expected SINR of cell (i, j) plus the serving index.
std::pair<double, int> cell_sinr_linear(int i, int j, const Scenario& s, double sigma2_dbm,
                                        double altitude) {
  Vec2 center{(i + 0.5) * s.cell_size_delta_C, (j + 0.5) * s.cell_size_delta_C};
  std::vector<double> rx;
  for (const Gbs& g : s.gbs_list) {
    double d3 = std::sqrt(std::pow(g.position.x - center.x, 2) +
                          std::pow(g.position.y - center.y, 2) +
                          std::pow(altitude - g.height, 2));
    if (d3 < 1.0) d3 = 1.0;
    double amp = blocked(s, g.position, g.height, center, altitude)
                     ? nlos_amp_db(d3, altitude, g.carrier_freq_fc_GHz, g.gain_G_dB)
                     : los_amp_db(d3, altitude, g.carrier_freq_fc_GHz, g.gain_G_dB);
    rx.push_back(std::pow(10.0, (g.tx_power_P_dBm + 2.0 * amp) / 10.0));
  }
  double noise = std::pow(10.0, sigma2_dbm / 10.0);
  double best = -1.0;
  int best_m = 0;
  for (std::size_t m = 0; m < rx.size(); ++m) {
    double interf = 0.0;
    for (std::size_t o = 0; o < rx.size(); ++o) {
      if (o != m) interf += s.gbs_list[o].load_factor_l * rx[o];
    }
    double sinr = rx[m] / (interf + noise);
    if (sinr > best) {
      best = sinr;
      best_m = (int)m;
    }
  }
  return {best, best_m};
}

}  // namespace oracle

Scenario scenario_no_validation(int n, double cell, std::vector<Gbs> gbs) {
  Scenario s;
  s.area_side_L = n * cell;
  s.cell_size_delta_C = cell;
  s.altitude_H = 100.0;
  s.speed_V = 30.0;
  s.slot_duration = 3.0;
  s.seats_N_seat = 1;
  s.start_position = {0.0, 0.0};
  s.max_steps_T_max = 10;
  s.gbs_list = std::move(gbs);
  return s;
}

}  // namespace

TEST_CASE("free_space_gain spot values") {
  // 20*log10(1000) + 20*log10(2) + 32.45 = 98.4706, halved and negated.
  CHECK(free_space_gain(1000.0, 2.0) == doctest::Approx(-49.2352999566).epsilon(1e-9));
  // d = 1 m, fc = 1 GHz leaves only the constant.
  CHECK(free_space_gain(1.0, 1.0) == doctest::Approx(-16.225).epsilon(1e-12));
  SUBCASE("doubling the distance costs 3.01 dB") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> dist(1.0, 5000.0);
    for (int i = 0; i < 20; ++i) {
      double d = dist(rng);
      CHECK(free_space_gain(2 * d, 2.0) - free_space_gain(d, 2.0) ==
            doctest::Approx(-10.0 * std::log10(2.0) / 2.0 * 2.0).epsilon(1e-9));
    }
  }
  CHECK_THROWS_AS(free_space_gain(0.0, 2.0), std::domain_error);
  CHECK_THROWS_AS(free_space_gain(-5.0, 2.0), std::domain_error);
}

TEST_CASE("los_gain spot values") {
  // UMi term -30.9 - 21.25*3 - 6.0206 = -100.6706 beats free space -98.4706.
  double expected = oracle::los_amp_db(1000.0, 100.0, 2.0, 0.0);
  CHECK(expected == doctest::Approx(-50.3352999566).epsilon(1e-9));
  CHECK(los_gain(1000.0, 100.0, 2.0, 0.0) == doctest::Approx(expected).epsilon(1e-12));

  SUBCASE("free space dominates at small distance") {
    double d = 5.0;
    CHECK(los_gain(d, 100.0, 2.0, 0.0) ==
          doctest::Approx(free_space_gain(d, 2.0)).epsilon(1e-12));
  }
  SUBCASE("+6 dB antenna gain adds exactly +3 dB") {
    CHECK(los_gain(1000.0, 100.0, 2.0, 6.0) - los_gain(1000.0, 100.0, 2.0, 0.0) ==
          doctest::Approx(3.0).epsilon(1e-12));
  }
}

TEST_CASE("nlos_gain spot value confirmed by the oracle") {
  // NLOS term: -32.4 - (43.2 - 7.6*2)*3 - 20*log10(2) = -122.4206 (power dB),
  // below the doubled LOS amplitude gain; halved to -61.2103.
  double expected = oracle::nlos_amp_db(1000.0, 100.0, 2.0, 0.0);
  CHECK(expected == doctest::Approx(-61.2102999566).epsilon(1e-9));
  CHECK(nlos_gain(1000.0, 100.0, 2.0, 0.0) == doctest::Approx(expected).epsilon(1e-12));

  SUBCASE("NLOS never exceeds LOS, which never exceeds free space + G/2") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> dist(1.5, 20000.0);
    std::uniform_real_distribution<double> height(10.0, 300.0);
    std::uniform_real_distribution<double> gain(-3.0, 9.0);
    for (int i = 0; i < 200; ++i) {
      double d = dist(rng), H = height(rng), G = gain(rng);
      double nl = nlos_gain(d, H, 2.0, G);
      double lo = los_gain(d, H, 2.0, G);
      CHECK(nl <= lo + 1e-12);
      CHECK(lo <= free_space_gain(d, 2.0) + G / 2.0 + 1e-12);
    }
  }
  SUBCASE("raising the altitude raises the NLOS gain for d > 1") {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> dist(2.0, 10000.0);
    std::uniform_real_distribution<double> height(10.0, 200.0);
    for (int i = 0; i < 100; ++i) {
      double d = dist(rng);
      double h1 = height(rng), h2 = h1 + 20.0;
      CHECK(nlos_gain(d, h2, 2.0, 0.0) >= nlos_gain(d, h1, 2.0, 0.0) - 1e-12);
    }
  }
}

TEST_CASE("classify_los") {
  Scenario s = scenario_no_validation(
      20, 100.0, {{{50.0, 50.0}, 15.0, 30.0, 1.0, 0.0, 2.0}});
  SUBCASE("empty raster is LOS everywhere") {
    for (int i = 0; i < 20; i += 5) {
      for (int j = 0; j < 20; j += 5) {
        Vec2 c{(i + 0.5) * 100.0, (j + 0.5) * 100.0};
        CHECK(classify_los(s.gbs_list[0], c, 100.0, s) == LosState::LOS);
      }
    }
  }
  SUBCASE("a 200 m wall blocks a 15 m GBS to 100 m cell link") {
    s.building_raster.assign(400, 0.0);
    // Wall column between the GBS cell (0,0) and the target cell (10,0).
    for (int j = 0; j < 20; ++j) s.building_raster[5 * 20 + j] = 200.0;
    Vec2 target{1050.0, 50.0};
    CHECK(classify_los(s.gbs_list[0], target, 100.0, s) == LosState::NLOS);
  }
  SUBCASE("a 50 m wall exactly midway stays under the 57.5 m segment") {
    s.building_raster.assign(400, 0.0);
    s.building_raster[5 * 20 + 0] = 50.0;  // midpoint cell of the link below
    // GBS at x=50, target at x=1050: midpoint x=550 falls in cell i=5.
    Vec2 target{1050.0, 50.0};
    CHECK(classify_los(s.gbs_list[0], target, 100.0, s) == LosState::LOS);
    SUBCASE("but a 60 m wall blocks it") {
      s.building_raster[5 * 20 + 0] = 60.0;
      CHECK(classify_los(s.gbs_list[0], target, 100.0, s) == LosState::NLOS);
    }
  }
}

TEST_CASE("expected_sinr_cell degenerate and symmetric cases") {
  ChannelParams cp;
  cp.noise_power_sigma2_dBm = -96.0;
  cp.altitude_H = 100.0;

  SUBCASE("M = 1 reduces to P h^2 / sigma^2") {
    Scenario s = scenario_no_validation(4, 100.0, {{{200.0, 200.0}, 15.0, 30.0, 1.0, 0.0, 2.0}});
    auto [sinr_db, serving] = expected_sinr_cell(1, 1, s, cp);
    CHECK(serving == 0);
    auto [lin, m] = oracle::cell_sinr_linear(1, 1, s, -96.0, 100.0);
    CHECK(std::pow(10.0, sinr_db / 10.0) == doctest::Approx(lin).epsilon(1e-12));
  }
  SUBCASE("two identical equidistant GBSs with l=1 give linear SINR < 1") {
    // Cell (1,1) center is (150, 150); both GBSs sit 150 m away at y=150.
    Scenario s = scenario_no_validation(4, 100.0,
                                        {{{0.0, 150.0}, 15.0, 30.0, 1.0, 0.0, 2.0},
                                         {{300.0, 150.0}, 15.0, 30.0, 1.0, 0.0, 2.0}});
    auto [sinr_db, serving] = expected_sinr_cell(1, 1, s, cp);
    CHECK(std::pow(10.0, sinr_db / 10.0) < 1.0);
    // Symmetric: P h^2 / (P h^2 + sigma^2), slightly under 0 dB.
    CHECK(sinr_db == doctest::Approx(0.0).epsilon(0.01));
  }
}

TEST_CASE("build_map equals the brute-force oracle on random scenarios") {
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> grid(2, 8);
  std::uniform_int_distribution<int> gbs_count(1, 4);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  for (int trial = 0; trial < 12; ++trial) {
    int n = grid(rng);
    double cell = 50.0 + 200.0 * unit(rng);
    std::vector<Gbs> gbs;
    int m = gbs_count(rng);
    for (int g = 0; g < m; ++g) {
      gbs.push_back({{n * cell * unit(rng), n * cell * unit(rng)},
                     5.0 + 30.0 * unit(rng),
                     20.0 + 20.0 * unit(rng),
                     unit(rng),
                     -2.0 + 6.0 * unit(rng),
                     1.0 + 3.0 * unit(rng)});
    }
    Scenario s = scenario_no_validation(n, cell, std::move(gbs));
    if (unit(rng) < 0.5) {
      s.building_raster.assign((std::size_t)n * n, 0.0);
      for (auto& h : s.building_raster) {
        if (unit(rng) < 0.3) h = 150.0 * unit(rng);
      }
    }
    ChannelParams cp;
    cp.noise_power_sigma2_dBm = -110.0 + 40.0 * unit(rng);
    cp.altitude_H = 60.0 + 100.0 * unit(rng);

    RadioMap map = build_map(s, cp);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        auto [lin, serving] = oracle::cell_sinr_linear(i, j, s, cp.noise_power_sigma2_dBm,
                                                       cp.altitude_H);
        double got = std::pow(10.0, map.sinr_at(i, j) / 10.0);
        CHECK(got == doctest::Approx(lin).epsilon(1e-9));
        CHECK(map.serving_at(i, j) == serving);
      }
    }
  }
}

TEST_CASE("SINR monotonicity properties") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Scenario s = scenario_no_validation(6, 100.0,
                                      {{{100.0, 100.0}, 15.0, 30.0, 0.5, 0.0, 2.0},
                                       {{500.0, 100.0}, 20.0, 28.0, 0.7, 0.0, 2.0},
                                       {{300.0, 500.0}, 12.0, 32.0, 0.3, 0.0, 2.0}});
  ChannelParams cp;
  cp.noise_power_sigma2_dBm = -90.0;

  SUBCASE("raising the noise power strictly lowers every cell") {
    RadioMap base = build_map(s, cp);
    ChannelParams noisier = cp;
    noisier.noise_power_sigma2_dBm = -80.0;
    RadioMap worse = build_map(s, noisier);
    for (std::size_t k = 0; k < base.sinr_dB.size(); ++k) {
      CHECK(worse.sinr_dB[k] < base.sinr_dB[k]);
    }
  }
  SUBCASE("raising an interferer's load never raises a cell it does not serve") {
    RadioMap base = build_map(s, cp);
    for (int victim = 0; victim < 3; ++victim) {
      Scenario bumped = s;
      bumped.gbs_list[victim].load_factor_l =
          std::min(1.0, bumped.gbs_list[victim].load_factor_l + 0.3);
      RadioMap after = build_map(bumped, cp);
      for (int i = 0; i < 6; ++i) {
        for (int j = 0; j < 6; ++j) {
          if (base.serving_at(i, j) != victim) {
            CHECK(after.sinr_at(i, j) <= base.sinr_at(i, j) + 1e-12);
          }
        }
      }
    }
  }
  SUBCASE("serving choice is invariant under uniform power scaling") {
    RadioMap base = build_map(s, cp);
    Scenario scaled = s;
    for (Gbs& g : scaled.gbs_list) g.tx_power_P_dBm += 7.0;
    RadioMap after = build_map(scaled, cp);
    bool all_equal = true;
    for (std::size_t k = 0; k < base.serving_gbs.size(); ++k) {
      // With noise > 0 the argmax is preserved: scaling multiplies every
      // candidate's numerator and interference identically.
      if (after.serving_gbs[k] != base.serving_gbs[k]) all_equal = false;
    }
    CHECK(all_equal);
  }
}

TEST_CASE("local_window") {
  int n = 20;
  RadioMap map = testutil::make_flat_map(n, 100.0, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) map.sinr_dB[(std::size_t)i * n + j] = i * 100 + j;
  }
  SUBCASE("mid-map window is an exact sub-grid copy") {
    Vec2 center = map.cell_center(10, 10);
    auto w = local_window(map, center, 10, -999.0);
    for (int a = 0; a < 10; ++a) {
      for (int b = 0; b < 10; ++b) {
        CHECK(w[(std::size_t)a * 10 + b] == map.sinr_at(10 - 5 + a, 10 - 5 + b));
      }
    }
  }
  SUBCASE("corner window pads 75% of entries") {
    auto w = local_window(map, map.cell_center(0, 0), 10, -999.0);
    int padded = 0;
    for (double v : w) padded += v == -999.0 ? 1 : 0;
    CHECK(padded == 75);
  }
  SUBCASE("side 1 returns the containing cell") {
    auto w = local_window(map, map.cell_center(7, 3), 1, -999.0);
    REQUIRE(w.size() == 1);
    CHECK(w[0] == map.sinr_at(7, 3));
  }
}

TEST_CASE("radio map file round-trip and CSV dump") {
  Scenario s = testutil::make_scenario(5, 100.0);
  ChannelParams cp;
  RadioMap map = build_map(s, cp);
  std::string path = "test_map_roundtrip.bin";
  save_radio_map(map, path);
  RadioMap back = load_radio_map(path);
  CHECK(back.n_cells_per_side == map.n_cells_per_side);
  CHECK(back.cell_size == map.cell_size);
  CHECK(back.sinr_dB == map.sinr_dB);   // bit-exact
  CHECK(back.serving_gbs == map.serving_gbs);
  std::remove(path.c_str());
}
