#include "emlq/errors.hpp"
#include "emlq/memory.hpp"
#include "emlq/oracles.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace emlq;
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

namespace {

std::vector<Vec> sampled(const TimeGrid& g, double (*f)(double)) {
  std::vector<Vec> v;
  for (int k = 0; k <= g.steps(); ++k) v.push_back(Vec::Constant(1, f(g.node(k))));
  return v;
}

MatrixFunction extended(const TimeGrid& g, double (*f)(double)) {
  std::vector<Mat> v;
  for (int k = 0; k <= g.steps(); ++k) v.push_back(Mat::Constant(1, 1, f(g.node(k))));
  return zero_extend(sample_on(g, v), g);
}

double smooth(double t) { return std::cos(3.0 * t) + t * t; }

}  // namespace

TEST_CASE("memory of a linear path is exact") {
  const TimeGrid g = build_time_grid(2.0, 0.01);
  const PathSample x(g, sampled(g, [](double t) { return 1.0 + 2.0 * t; }));
  CHECK(memory_integral(x, 1.0)(0) == doctest::Approx(2.0));
  CHECK(memory_integral(x, 2.0)(0) == doctest::Approx(6.0));
  CHECK(memory_integral(x, 1.0, MemoryKind::Average)(0) == doctest::Approx(2.0));
  CHECK(memory_integral(x, 0.0)(0) == 0.0);
}

TEST_CASE("piecewise-linear memory against Simpson") {
  // Simpson is exact when every kink sits on an even node; the trapezoid is
  // exact for any kink on a node.
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const TimeGrid g = build_time_grid(2.0, 0.01);  // kinks every 0.1 = 10 steps
  std::vector<double> knots(21);
  for (double& k : knots) k = u(rng);
  std::vector<Vec> v;
  std::vector<double> f;
  for (int k = 0; k <= g.steps(); ++k) {
    const int i = std::min(k / 10, 19);
    const double w = (k - 10 * i) / 10.0;
    f.push_back((1 - w) * knots[i] + w * knots[i + 1]);
    v.push_back(Vec::Constant(1, f.back()));
  }
  const PathSample x(g, v);
  const double ref = oracle::simpson(f, g.dt());
  CHECK(std::abs(memory_integral(x, 2.0)(0) - ref) <= 1e-10 * std::max(1.0, std::abs(ref)));
}

TEST_CASE("running integral converges at second order against Simpson") {
  double err[2];
  for (int level = 0; level < 2; ++level) {
    const TimeGrid g = build_time_grid(1.0, level == 0 ? 0.01 : 0.005);
    const PathSample x(g, sampled(g, smooth));
    std::vector<double> f;
    for (int k = 0; k <= g.steps(); ++k) f.push_back(smooth(g.node(k)));
    err[level] = std::abs(x.running_integral().back()(0) - oracle::simpson(f, g.dt()));
  }
  CHECK(err[0] / err[1] == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("star transforms against direct quadrature") {
  const TimeGrid g = build_time_grid(1.0, 1e-3);
  const MatrixFunction phi = extended(g, smooth);
  auto f = [](double t) { return Mat::Constant(1, 1, t <= 1.0 ? smooth(t) : 0.0); };
  for (double t : {0.0, 0.2, 0.37, 0.5, 0.8, 1.0}) {
    for (StarVariant v : {StarVariant::Window, StarVariant::Adjoint}) {
      const double ref = oracle::star_quadrature(f, v, t, 1.0, 256)(0, 0);
      CHECK(star(v, phi, t)(0, 0) == doctest::Approx(ref).epsilon(1e-6));
    }
  }
}

TEST_CASE("window and adjoint stars agree on [T/2, T]") {
  const TimeGrid g = build_time_grid(1.0, 1e-3);
  const MatrixFunction phi = extended(g, smooth);
  for (int k = g.steps() / 2; k <= g.steps(); k += 7)
    CHECK(star_window(phi, g.node(k))(0, 0) == star_adjoint(phi, g.node(k))(0, 0));
  CHECK(star_end_index(StarVariant::Window, 100, g.steps()) == 200);
  CHECK(star_end_index(StarVariant::Window, 700, g.steps()) == 1000);
  CHECK(star_end_index(StarVariant::Adjoint, 100, g.steps()) == 1000);
}

TEST_CASE("star requires a zero-extended function") {
  const TimeGrid g = build_time_grid(1.0, 0.01);
  std::vector<Mat> v(g.steps() + 1, Mat::Ones(1, 1));
  CHECK_THROWS_AS(star_window(sample_on(g, v), 0.3), ShapeError);
}

TEST_CASE("duality residual is small and second order for random pairs") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    const double a = u(rng), b = u(rng), c = u(rng), d = u(rng);
    double res[2];
    for (int level = 0; level < 2; ++level) {
      const TimeGrid g = build_time_grid(2.0, level == 0 ? 0.01 : 0.005);
      std::vector<Mat> p;
      std::vector<Vec> x;
      for (int k = 0; k <= g.steps(); ++k) {
        const double t = g.node(k);
        p.push_back(Mat::Constant(1, 1, a * std::sin(3 * t) + b));
        x.push_back(Vec::Constant(1, c * std::cos(2 * t) + d * t));
      }
      res[level] = duality_residual(zero_extend(sample_on(g, p), g), PathSample(g, x));
    }
    CHECK(res[0] < 1e-3);
    if (res[1] > 1e-12) CHECK(res[0] / res[1] == doctest::Approx(4.0).epsilon(0.15));
  }
}
