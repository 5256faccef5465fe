#include "emlq/memory.hpp"

#include "emlq/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace emlq {

std::string to_string(StarVariant v) {
  return v == StarVariant::Window ? "window" : "adjoint";
}

StarVariant parse_star_variant(const std::string& s) {
  if (s == "window") return StarVariant::Window;
  if (s == "adjoint") return StarVariant::Adjoint;
  throw ConfigError("star variant must be 'window' or 'adjoint', got '" + s +
                    "'");
}

std::vector<Eigen::VectorXd> cumulative_trapezoid(
    const std::vector<Eigen::VectorXd>& values, double dt) {
  std::vector<Eigen::VectorXd> out(values.size());
  if (values.empty()) return out;
  out[0] = Eigen::VectorXd::Zero(values[0].size());
  for (std::size_t k = 1; k < values.size(); ++k)
    out[k] = out[k - 1] + 0.5 * dt * (values[k - 1] + values[k]);
  return out;
}

PathSample::PathSample(const TimeGrid& grid, std::vector<Eigen::VectorXd> values)
    : grid_(grid), values_(std::move(values)) {
  if (static_cast<int>(values_.size()) != grid.steps() + 1)
    throw ShapeError("path sample: expected one value per node on [0, T]");
  const auto dim = values_[0].size();
  for (const auto& v : values_)
    if (v.size() != dim) throw ShapeError("path sample: ragged values");
  integral_ = cumulative_trapezoid(values_, grid.dt());
}

Eigen::VectorXd memory_integral(const PathSample& x, double t, MemoryKind kind) {
  const TimeGrid& grid = x.grid();
  const double T = grid.horizon();
  if (!(t >= 0.0 && t <= T * (1 + 1e-12))) {
    std::ostringstream msg;
    msg << "memory_integral: t = " << t << " outside [0, " << T << "]";
    throw RangeError(msg.str());
  }
  const double h = grid.dt();
  const double pos = std::min(t, T) / h;
  const double nearest = std::round(pos);
  Eigen::VectorXd m;
  if (std::abs(pos - nearest) <= 1e-9) {
    m = x.running_integral()[static_cast<int>(nearest)];
  } else {
    // Exact integral of the linear interpolant on the partial segment.
    const int k = std::min(static_cast<int>(std::floor(pos)), grid.steps() - 1);
    const double tau = t - grid.node(k);
    const auto& v = x.values();
    m = x.running_integral()[k] + tau * v[k] +
        (tau * tau / (2.0 * h)) * (v[k + 1] - v[k]);
  }
  if (kind == MemoryKind::Average) m /= std::max(t, h);
  return m;
}

int star_end_index(StarVariant v, int k, int steps) {
  if (v == StarVariant::Adjoint) return steps;
  return std::min(2 * k, steps);
}

namespace {

void check_star_time(double t, double T) {
  if (!(t >= 0.0 && t <= T * (1 + 1e-12))) {
    std::ostringstream msg;
    msg << "star operator: t = " << t << " outside [0, " << T << "]";
    throw RangeError(msg.str());
  }
}

}  // namespace

Eigen::MatrixXd star_window(const MatrixFunction& phi, double t) {
  if (!phi.extended())
    throw ShapeError("star_window: function is not zero-extended to 2T");
  const double T = phi.grid().horizon();
  check_star_time(t, T);
  t = std::min(t, T);
  // The zero extension makes the window end at T; the interpolant on
  // (T, T+dt) is not part of the model.
  return phi.integrate(t, std::min(2.0 * t, T));
}

Eigen::MatrixXd star_adjoint(const MatrixFunction& phi, double t) {
  const double T = phi.grid().horizon();
  check_star_time(t, T);
  return phi.integrate(std::min(t, T), T);
}

Eigen::MatrixXd star(StarVariant v, const MatrixFunction& phi, double t) {
  return v == StarVariant::Window ? star_window(phi, t) : star_adjoint(phi, t);
}

MatrixFunction star_transform(const MatrixFunction& phi, StarVariant v) {
  if (!phi.extended())
    throw ShapeError("star_transform: function is not zero-extended to 2T");
  const TimeGrid& grid = phi.grid();
  const int N = grid.steps();
  const double h = grid.dt();
  std::vector<Eigen::MatrixXd> cum(N + 1);
  cum[0] = Eigen::MatrixXd::Zero(phi.rows(), phi.cols());
  for (int k = 1; k <= N; ++k)
    cum[k] = cum[k - 1] + 0.5 * h * (phi[k - 1] + phi[k]);
  std::vector<Eigen::MatrixXd> out(grid.size(),
                                   Eigen::MatrixXd::Zero(phi.rows(), phi.cols()));
  for (int k = 0; k <= N; ++k) out[k] = cum[star_end_index(v, k, N)] - cum[k];
  return MatrixFunction(grid, std::move(out));
}

double duality_residual(const MatrixFunction& phi, const PathSample& x) {
  if (!(phi.grid() == x.grid()))
    throw ShapeError("duality_residual: different grids");
  if (phi.rows() != x.dim())
    throw ShapeError("duality_residual: phi rows must match the path dimension");
  const MatrixFunction full = phi.extended() ? phi : zero_extend(phi, phi.grid());
  const MatrixFunction adj = star_transform(full, StarVariant::Adjoint);
  const int N = x.grid().steps();
  const double h = x.grid().dt();
  const auto& m = x.running_integral();
  const auto& v = x.values();
  Eigen::VectorXd lhs = Eigen::VectorXd::Zero(phi.cols());
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(phi.cols());
  for (int k = 0; k <= N; ++k) {
    const double w = (k == 0 || k == N) ? 0.5 * h : h;
    lhs += w * full[k].transpose() * m[k];
    rhs += w * adj[k].transpose() * v[k];
  }
  return (lhs - rhs).norm();
}

}  // namespace emlq
