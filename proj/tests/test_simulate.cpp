#include "emlq/errors.hpp"
#include "emlq/oracles.hpp"
#include "emlq/simulate.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using namespace emlq;
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using testing::scalar;

namespace {

// dy = (-0.5 y + 0.8 M + sin t) dt + (0.3 y + 0.2) dW, y(0) = 1.
LinearSdeModel scalar_model(double dt, double noise_scale = 1.0) {
  LinearSdeModel m;
  m.grid = build_time_grid(1.0, dt);
  m.dim = 1;
  m.s0 = Vec::Ones(1);
  const int N = m.grid.steps();
  for (int k = 0; k <= N; ++k) {
    m.Fx.push_back(scalar(-0.5));
    m.Fm.push_back(scalar(0.8));
    m.f.push_back(Vec::Constant(1, std::sin(m.grid.node(k))));
    m.Gx.push_back(scalar(0.3 * noise_scale));
    m.g.push_back(Vec::Constant(1, 0.2 * noise_scale));
  }
  return m;
}

double noise_free_error(double dt) {
  const LinearSdeModel m = scalar_model(dt);
  SimulationOptions opt;
  opt.n_paths = 1;
  opt.noise_free = true;
  opt.store_paths = true;
  const PathEnsemble e = simulate(m, opt);
  const auto ref = oracle::memory_ode_rk4([](double) { return scalar(-0.5); },
                                          [](double) { return scalar(0.8); },
                                          [](double t) { return Vec::Constant(1, std::sin(t)); },
                                          Vec::Ones(1), 1.0, 4000);
  const int N = m.grid.steps();
  const int stride = 4000 / N;
  double err = 0.0;
  for (int k = 0; k <= N; ++k) err = std::max(err, std::abs(e.paths[0][k](0) - ref[k * stride](0)));
  return err;
}

}  // namespace

TEST_CASE("noise-free paths converge to the memory ODE at first order") {
  const double e1 = noise_free_error(0.01), e2 = noise_free_error(0.005);
  CHECK(e1 < 0.05);
  CHECK(e1 / e2 == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("second moment at T against the moment equation") {
  // Seed fixed in advance; tolerance is 4 standard errors plus the O(dt) bias.
  const LinearSdeModel m = scalar_model(1e-3);
  SimulationOptions opt;
  opt.n_paths = 20000;
  opt.seed = 12345;
  const PathEnsemble e = simulate(m, opt);
  const int last = static_cast<int>(e.checkpoints.size()) - 1;
  REQUIRE(e.checkpoints[last] == m.grid.steps());
  double s1 = 0.0, s2 = 0.0;
  for (int p = 0; p < opt.n_paths; ++p) {
    const double y2 = std::pow(e.state(p, last)(0), 2);
    s1 += y2;
    s2 += y2 * y2;
  }
  const double mean = s1 / opt.n_paths;
  const double se = std::sqrt((s2 / opt.n_paths - mean * mean) / (opt.n_paths - 1));
  const double ref = oracle::continuous_second_moment(m)(0, 0);
  CHECK(std::abs(mean - ref) <= 4.0 * se + 5e-3 * ref);
}

TEST_CASE("results do not depend on the thread count") {
  const LinearSdeModel m = scalar_model(1e-2);
  SimulationOptions opt;
  opt.n_paths = 257;
  opt.seed = 99;
  const PathEnsemble a = simulate(m, opt);
  opt.threads = 4;
  const PathEnsemble b = simulate(m, opt);
  CHECK(a.state_at == b.state_at);
  CHECK(a.memory_at == b.memory_at);
  CHECK(a.digest == b.digest);
}

TEST_CASE("common random numbers across models") {
  SimulationOptions opt;
  opt.n_paths = 50;
  const PathEnsemble a = simulate(scalar_model(1e-2), opt);
  const PathEnsemble b = simulate(scalar_model(1e-2, 2.0), opt);
  CHECK(a.digest == b.digest);
  CHECK(a.state_at != b.state_at);
  opt.seed = 43;
  CHECK(simulate(scalar_model(1e-2), opt).digest != a.digest);
}

TEST_CASE("path seeds are distinct") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 100000; ++i) seen.insert(path_seed(42, i));
  CHECK(seen.size() == 100000);
  CHECK(path_seed(42, 0) != path_seed(43, 0));
}

TEST_CASE("simulate rejects bad options and shapes") {
  const LinearSdeModel m = scalar_model(0.1);
  SimulationOptions opt;
  opt.n_paths = 0;
  CHECK_THROWS_AS(simulate(m, opt), ConfigError);
  opt.n_paths = 1;
  opt.checkpoints = 1;
  CHECK_THROWS_AS(simulate(m, opt), ConfigError);
  LinearSdeModel bad = m;
  bad.s0 = Vec::Ones(2);
  CHECK_THROWS_AS(simulate(bad, SimulationOptions{}), ShapeError);
}
