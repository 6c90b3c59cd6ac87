#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <functional>
#include <random>

#include "uamsim/errors.hpp"
#include "uamsim/nn/checkpoint.hpp"
#include "uamsim/nn/tensor.hpp"

using namespace uamsim;
using nn::Param;
using nn::ParamStore;
using nn::Tape;
using nn::Var;

namespace {

std::vector<double> random_values(std::size_t n, std::mt19937_64& rng, double lo = -1.0,
                                  double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> out(n);
  for (double& v : out) v = dist(rng);
  return out;
}

/// Central finite differences against the tape gradient for every parameter
/// coordinate of `store`. `build` must rebuild the scalar loss from scratch.
void gradient_check(ParamStore& store, const std::function<Var(Tape&)>& build,
                    double tol = 1e-4, double h = 1e-5) {
  Tape tape;
  Var loss = build(tape);
  store.zero_grads();
  tape.backward(loss);
  std::vector<std::vector<double>> analytic;
  for (Param& p : store.params) analytic.push_back(p.grad);

  for (std::size_t pi = 0; pi < store.params.size(); ++pi) {
    Param& p = store.params[pi];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      double orig = p.value[i];
      p.value[i] = orig + h;
      Tape tp;
      double fp = tp.value(build(tp))[0];
      p.value[i] = orig - h;
      Tape tm;
      double fm = tm.value(build(tm))[0];
      p.value[i] = orig;
      double numeric = (fp - fm) / (2 * h);
      double denom = std::max({std::abs(numeric), std::abs(analytic[pi][i]), 1e-6});
      double rel = std::abs(numeric - analytic[pi][i]) / denom;
      INFO("param ", p.name, " index ", i, " analytic ", analytic[pi][i], " numeric ", numeric);
      CHECK(rel < tol);
    }
  }
}

}  // namespace

TEST_CASE("forward spot checks") {
  Tape tape;
  SUBCASE("relu clips negatives") {
    Var x = tape.input({3}, {-1.0, 0.0, 2.0});
    CHECK(tape.value(tape.relu(x)) == std::vector<double>{0.0, 0.0, 2.0});
  }
  SUBCASE("softmax of equal logits is uniform") {
    Var x = tape.input({1, 4}, {0.7, 0.7, 0.7, 0.7});
    for (double v : tape.value(tape.softmax(x, -1))) {
      CHECK(v == doctest::Approx(0.25).epsilon(1e-14));
    }
  }
  SUBCASE("softmax rows sum to one") {
    std::mt19937_64 rng(3);
    Var x = tape.input({5, 7}, random_values(35, rng, -30.0, 30.0));
    Var y = tape.softmax(x, -1);
    for (int r = 0; r < 5; ++r) {
      double sum = 0.0;
      for (int c = 0; c < 7; ++c) sum += tape.value(y)[r * 7 + c];
      CHECK(std::abs(sum - 1.0) < 1e-12);
    }
  }
  SUBCASE("softmax is invariant to constant logit shifts") {
    std::mt19937_64 rng(5);
    std::vector<double> vals = random_values(8, rng, -5.0, 5.0);
    Var a = tape.input({1, 8}, vals);
    for (double& v : vals) v += 123.456;
    Var b = tape.input({1, 8}, vals);
    auto pa = tape.value(tape.softmax(a, -1));
    auto pb = tape.value(tape.softmax(b, -1));
    for (int i = 0; i < 8; ++i) CHECK(std::abs(pa[i] - pb[i]) < 1e-12);
  }
  SUBCASE("a delta kernel reproduces the input image") {
    std::mt19937_64 rng(7);
    std::vector<double> img = random_values(25, rng);
    Var image = tape.input({5, 5, 1}, img);
    std::vector<double> kernel(9, 0.0);
    kernel[4] = 1.0;  // center tap
    Var k = tape.input({3, 3, 1, 1}, kernel);
    CHECK(tape.value(tape.conv2d(image, k)) == img);
  }
  SUBCASE("shape mismatches name both shapes") {
    Var a = tape.input({2, 3}, std::vector<double>(6, 0.0));
    Var b = tape.input({4, 2}, std::vector<double>(8, 0.0));
    CHECK_THROWS_WITH_AS(tape.matmul(a, b), doctest::Contains("(2,3)"), ShapeError);
  }
}

TEST_CASE("backward basics") {
  SUBCASE("gradient of sum(x) is all ones") {
    ParamStore store;
    Param& p = store.add("x", {4});
    p.value = {0.5, -1.5, 2.0, 0.0};
    Tape tape;
    Var x = tape.param(p);
    Var loss = tape.scale(tape.mean_all(x), 4.0);  // sum
    tape.backward(loss);
    for (double g : p.grad) CHECK(g == doctest::Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("gradient of sum((Wx)^2) equals 2(Wx)x^T on a 2x2 fixture") {
    ParamStore store;
    Param& w = store.add("W", {2, 2});
    w.value = {1.0, 2.0, -0.5, 3.0};
    std::vector<double> xv = {0.3, -0.7};
    Tape tape;
    Var W = tape.param(w);
    Var x = tape.input({2, 1}, xv);
    Var y = tape.matmul(W, x);
    Var loss = tape.scale(tape.mean_all(tape.mul(y, y)), 2.0);
    tape.backward(loss);
    // y = (1*0.3 + 2*(-0.7), -0.5*0.3 + 3*(-0.7)) = (-1.1, -2.25)
    double y0 = -1.1, y1 = -2.25;
    CHECK(w.grad[0] == doctest::Approx(2 * y0 * 0.3).epsilon(1e-12));
    CHECK(w.grad[1] == doctest::Approx(2 * y0 * -0.7).epsilon(1e-12));
    CHECK(w.grad[2] == doctest::Approx(2 * y1 * 0.3).epsilon(1e-12));
    CHECK(w.grad[3] == doctest::Approx(2 * y1 * -0.7).epsilon(1e-12));
  }
  SUBCASE("backward requires a scalar loss") {
    Tape tape;
    ParamStore store;
    Param& p = store.add("x", {3});
    Var x = tape.param(p);
    CHECK_THROWS_AS(tape.backward(x), StateError);
  }
}

TEST_CASE("finite differences validate every primitive") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    std::mt19937_64 rng(seed);
    ParamStore store;
    Param& a = store.add("a", {3, 4});
    a.value = random_values(12, rng);
    Param& b = store.add("b", {3, 4});
    b.value = random_values(12, rng, 0.2, 1.5);  // positive side for log
    Param& w = store.add("w", {4, 2});
    w.value = random_values(8, rng);
    Param& row = store.add("row", {4});
    row.value = random_values(4, rng);
    Param& img = store.add("img", {4, 4, 2});
    img.value = random_values(32, rng);
    Param& ker = store.add("ker", {3, 3, 2, 2});
    ker.value = random_values(36, rng);

    std::vector<double> probe12 = random_values(12, rng);
    std::vector<double> probe8 = random_values(8, rng);
    std::vector<double> probe6 = random_values(6, rng);
    std::vector<double> probe32 = random_values(32, rng);
    std::vector<double> probe9 = random_values(9, rng);
    std::vector<double> probe48 = random_values(48, rng);
    std::vector<double> mask = {1.0, 0.0, 1.0, 1.0};

    auto weighted = [](Tape& t, Var x, const std::vector<double>& probe, const nn::Shape& shape) {
      return t.mean_all(t.mul(x, t.input(shape, probe)));
    };

    using Build = std::function<Var(Tape&)>;
    std::vector<std::pair<const char*, Build>> cases = {
        {"add", [&](Tape& t) { return weighted(t, t.add(t.param(a), t.param(b)), probe12, {3, 4}); }},
        {"sub", [&](Tape& t) { return weighted(t, t.sub(t.param(a), t.param(b)), probe12, {3, 4}); }},
        {"mul", [&](Tape& t) { return weighted(t, t.mul(t.param(a), t.param(b)), probe12, {3, 4}); }},
        {"scale_addc",
         [&](Tape& t) {
           return weighted(t, t.add_const(t.scale(t.param(a), -1.7), 0.3), probe12, {3, 4});
         }},
        {"relu", [&](Tape& t) { return weighted(t, t.relu(t.param(a)), probe12, {3, 4}); }},
        {"sigmoid", [&](Tape& t) { return weighted(t, t.sigmoid(t.param(a)), probe12, {3, 4}); }},
        {"tanh", [&](Tape& t) { return weighted(t, t.tanh_(t.param(a)), probe12, {3, 4}); }},
        {"exp", [&](Tape& t) { return weighted(t, t.exp_(t.param(a)), probe12, {3, 4}); }},
        {"log", [&](Tape& t) { return weighted(t, t.log_(t.param(b)), probe12, {3, 4}); }},
        {"min_ew",
         [&](Tape& t) { return weighted(t, t.min_ew(t.param(a), t.param(b)), probe12, {3, 4}); }},
        {"clamp",
         [&](Tape& t) { return weighted(t, t.clamp(t.param(a), -0.6, 0.6), probe12, {3, 4}); }},
        {"matmul",
         [&](Tape& t) { return weighted(t, t.matmul(t.param(a), t.param(w)), probe6, {3, 2}); }},
        {"matmul_nt",
         [&](Tape& t) {
           return weighted(t, t.matmul_nt(t.param(a), t.param(b)), probe9, {3, 3});
         }},
        {"add_rowvec",
         [&](Tape& t) {
           return weighted(t, t.add_rowvec(t.param(a), t.param(row)), probe12, {3, 4});
         }},
        {"reshape",
         [&](Tape& t) {
           return weighted(t, t.reshape(t.param(a), {4, 3}), probe12, {4, 3});
         }},
        {"concat",
         [&](Tape& t) {
           Var c = t.concat({t.param(a), t.param(b)}, 1);
           std::vector<double> probe = probe12;
           probe.insert(probe.end(), probe12.rbegin(), probe12.rend());
           return weighted(t, c, probe, {3, 8});
         }},
        {"slice",
         [&](Tape& t) { return weighted(t, t.slice(t.param(a), 1, 1, 3), probe6, {3, 2}); }},
        {"gather_rows",
         [&](Tape& t) {
           return weighted(t, t.gather_rows(t.param(a), {2, 0, 2}), probe12, {3, 4});
         }},
        {"broadcast",
         [&](Tape& t) {
           return weighted(t, t.broadcast_row_to_hwc(t.param(row), 2, 4), probe32, {2, 4, 4});
         }},
        {"mean_axis0",
         [&](Tape& t) {
           std::vector<double> probe(probe12.begin(), probe12.begin() + 4);
           return weighted(t, t.mean_axis0(t.param(a)), probe, {1, 4});
         }},
        {"softmax", [&](Tape& t) { return weighted(t, t.softmax(t.param(a), -1), probe12, {3, 4}); }},
        {"masked_softmax",
         [&](Tape& t) {
           return weighted(t, t.masked_softmax(t.param(a), mask), probe12, {3, 4});
         }},
        {"pick", [&](Tape& t) { return t.pick(t.param(a), 5); }},
        {"conv2d",
         [&](Tape& t) {
           return weighted(t, t.conv2d(t.param(img), t.param(ker)), probe32, {4, 4, 2});
         }},
        {"composite",
         [&](Tape& t) {
           Var h = t.tanh_(t.matmul(t.param(a), t.param(w)));
           Var s = t.softmax(h, -1);
           return t.mean_all(t.mul(s, t.input({3, 2}, probe6)));
         }},
    };
    for (auto& [name, build] : cases) {
      INFO("primitive ", name, " seed ", seed);
      gradient_check(store, build);
    }
  }
}

TEST_CASE("adam_step") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    ParamStore store;
    Param& p = store.add("p", {3});
    p.value = {1.0, -2.0, 0.5};
    auto before = p.value;
    nn::AdamState st = nn::AdamState::for_params(store, 0.1);
    store.zero_grads();
    nn::adam_step(store, st);
    CHECK(p.value == before);
  }
  SUBCASE("first step with unit gradient moves by about the learning rate") {
    ParamStore store;
    Param& p = store.add("p", {1});
    p.value = {0.0};
    nn::AdamState st = nn::AdamState::for_params(store, 0.1);
    p.grad = {1.0};
    nn::adam_step(store, st);
    // Bias-corrected m-hat = 1, v-hat = 1: update = lr / (1 + eps).
    CHECK(p.value[0] == doctest::Approx(-0.1).epsilon(1e-7));
  }
  SUBCASE("equal gradients update equal parameters identically") {
    ParamStore store;
    Param& p = store.add("p", {2});
    p.value = {0.7, 0.7};
    nn::AdamState st = nn::AdamState::for_params(store, 0.05);
    for (int iter = 0; iter < 5; ++iter) {
      p.grad = {0.3, 0.3};
      nn::adam_step(store, st);
      CHECK(p.value[0] == p.value[1]);
    }
  }
}

TEST_CASE("determinism: identical seeds produce bit-identical results") {
  auto run = [](std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    ParamStore store;
    Param& a = store.add("a", {4, 4});
    a.value = random_values(16, rng);
    Param& w = store.add("w", {4, 4});
    w.value = random_values(16, rng);
    Tape tape;
    Var y = tape.softmax(tape.matmul(tape.tanh_(tape.param(a)), tape.param(w)), -1);
    Var loss = tape.mean_all(y);
    store.zero_grads();
    tape.backward(loss);
    return std::make_pair(tape.value(y), store.params[0].grad);
  };
  auto [v1, g1] = run(42);
  auto [v2, g2] = run(42);
  CHECK(v1 == v2);
  CHECK(g1 == g2);
}

TEST_CASE("checkpoint round-trips exactly") {
  std::mt19937_64 rng(11);
  ParamStore store;
  store.add("layer1.w", {3, 5}).value = random_values(15, rng, -10.0, 10.0);
  store.add("layer1.b", {5}).value = {0.0, -0.0, 1e-300, 1e300, 0.1 + 0.2};
  store.add("layer2.w", {5, 1}).value = random_values(5, rng);

  std::string path = "test_ckpt_roundtrip.bin";
  nn::save_checkpoint(store, "{\"config\":\"echo\"}", path);
  nn::LoadedCheckpoint loaded = nn::load_checkpoint(path);
  CHECK(loaded.header == "{\"config\":\"echo\"}");
  REQUIRE(loaded.store.params.size() == store.params.size());
  for (std::size_t i = 0; i < store.params.size(); ++i) {
    CHECK(loaded.store.params[i].name == store.params[i].name);
    CHECK(loaded.store.params[i].shape == store.params[i].shape);
    CHECK(loaded.store.params[i].value == store.params[i].value);  // bit-exact
  }
  std::remove(path.c_str());
}
