// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <vector>

#include "crossyield/adam.hpp"
#include "crossyield/rng.hpp"

using namespace crossyield;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double lo = -1.0,
                     double hi = 1.0) {
  Matrix m(rows, cols);
  for (double& v : m.flat()) v = rng.uniform(lo, hi);
  return m;
}

// Straight-line per-coordinate reference with state in plain vectors.
struct ScalarAdam {
  std::vector<double> m, v;
  long long t = 0;

  explicit ScalarAdam(std::size_t n) : m(n, 0.0), v(n, 0.0) {}

  void step(std::vector<double>& theta, const std::vector<double>& g, const AdamConfig& c) {
    t += 1;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      theta[i] -= c.learning_rate * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + c.epsilon);
    }
  }
};

}  // namespace

TEST_SUITE("adam") {

TEST_CASE("fresh state is all zeros") {
  Matrix a(3, 4);
  Matrix b(2, 2);
  AdamState state = make_adam_state({&a, &b});
  CHECK(state.step == 0);
  REQUIRE(state.m.size() == 2);
  REQUIRE(state.v.size() == 2);
  CHECK(state.m[0].rows() == 3);
  CHECK(state.m[0].cols() == 4);
  for (double v : state.m[0].flat()) CHECK(v == 0.0);
  for (double v : state.v[1].flat()) CHECK(v == 0.0);
}

TEST_CASE("zero gradients leave parameters bit-identical") {
  Rng rng(11);
  Matrix theta = random_matrix(5, 7, rng);
  const Matrix before = theta;
  Matrix g(5, 7);  // zeros
  AdamState state = make_adam_state({&theta});
  AdamConfig cfg;
  for (int i = 0; i < 25; ++i) adam_step({&theta}, {&g}, state, cfg);
  CHECK(theta == before);
  CHECK(state.step == 25);
}

TEST_CASE("matches a scalar reference over random gradient sequences") {
  Rng rng(42);
  Matrix a = random_matrix(4, 3, rng);
  Matrix b = random_matrix(1, 6, rng);
  std::vector<double> flat;
  for (double v : a.flat()) flat.push_back(v);
  for (double v : b.flat()) flat.push_back(v);

  AdamConfig cfg;
  cfg.learning_rate = 0.01;
  AdamState state = make_adam_state({&a, &b});
  ScalarAdam ref(flat.size());

  for (int it = 0; it < 40; ++it) {
    Matrix ga = random_matrix(4, 3, rng, -2.0, 2.0);
    Matrix gb = random_matrix(1, 6, rng, -2.0, 2.0);
    std::vector<double> gflat;
    for (double v : ga.flat()) gflat.push_back(v);
    for (double v : gb.flat()) gflat.push_back(v);

    adam_step({&a, &b}, {&ga, &gb}, state, cfg);
    ref.step(flat, gflat, cfg);

    for (std::size_t i = 0; i < a.size(); ++i)
      CHECK(std::abs(a.data()[i] - flat[i]) < 1e-12);
    for (std::size_t i = 0; i < b.size(); ++i)
      CHECK(std::abs(b.data()[i] - flat[a.size() + i]) < 1e-12);
  }
}

TEST_CASE("first step from fresh state moves by ~lr against the gradient sign") {
  // With fresh moments, m_hat = g and v_hat = g^2, so the first update is
  // lr * g / (|g| + eps): magnitude just under lr, direction -sign(g).
  Matrix theta(1, 4);
  Matrix g(1, 4);
  g(0, 0) = 0.5;
  g(0, 1) = -3.0;
  g(0, 2) = 1e-3;
  g(0, 3) = 40.0;
  AdamState state = make_adam_state({&theta});
  AdamConfig cfg;
  cfg.learning_rate = 0.05;
  adam_step({&theta}, {&g}, state, cfg);
  for (std::size_t j = 0; j < 4; ++j) {
    const double step = theta(0, j);
    CHECK(std::abs(step) <= cfg.learning_rate * (1.0 + 1e-9));
    CHECK(std::abs(step) > cfg.learning_rate * 0.999);
    CHECK(step * g(0, j) < 0.0);
  }
}

TEST_CASE("constant gradient keeps per-step magnitude at lr") {
  Matrix theta(2, 2);
  Matrix g(2, 2);
  g.fill(0.37);
  g(1, 1) = -5.2;
  AdamState state = make_adam_state({&theta});
  AdamConfig cfg;
  cfg.learning_rate = 2e-3;
  Matrix prev = theta;
  for (int it = 0; it < 500; ++it) {
    prev = theta;
    adam_step({&theta}, {&g}, state, cfg);
  }
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double step = theta.data()[i] - prev.data()[i];
    CHECK(std::abs(std::abs(step) - cfg.learning_rate) < 1e-4 * cfg.learning_rate);
    CHECK(step * g.data()[i] < 0.0);
  }
}

TEST_CASE("shape and list-size mismatches are fatal") {
  Matrix theta(3, 3);
  Matrix g_ok(3, 3);
  Matrix g_bad(3, 2);
  AdamState state = make_adam_state({&theta});
  AdamConfig cfg;
  CHECK_THROWS_AS(adam_step({&theta}, {&g_bad}, state, cfg), ShapeError);
  CHECK_THROWS_AS(adam_step({&theta}, {}, state, cfg), ShapeError);
  AdamState wrong = make_adam_state({&g_bad});
  CHECK_THROWS_AS(adam_step({&theta}, {&g_ok}, wrong, cfg), ShapeError);
}

TEST_CASE("config validation") {
  AdamConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  AdamConfig bad = cfg;
  bad.learning_rate = 0.0;
  CHECK_THROWS_AS(bad.validate(), InputError);
  bad = cfg;
  bad.beta1 = 1.0;
  CHECK_THROWS_AS(bad.validate(), InputError);
  bad = cfg;
  bad.beta2 = -0.1;
  CHECK_THROWS_AS(bad.validate(), InputError);
  bad = cfg;
  bad.epsilon = 0.0;
  CHECK_THROWS_AS(bad.validate(), InputError);
}

}  // TEST_SUITE
