#include "emlq/model.hpp"

#include "emlq/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace emlq {

TimeGrid::TimeGrid(double horizon, double dt) {
  if (!(horizon > 0.0) || !std::isfinite(horizon))
    throw ConfigError("time grid: horizon T must be positive");
  if (!(dt > 0.0) || !std::isfinite(dt))
    throw ConfigError("time grid: step dt must be positive");
  const double ratio = horizon / dt;
  const double steps = std::round(ratio);
  if (steps < 1.0 || std::abs(ratio - steps) > 1e-9 * std::max(1.0, ratio)) {
    std::ostringstream msg;
    msg << "time grid: T = " << horizon << " is not an integer multiple of dt = "
        << dt;
    throw ConfigError(msg.str());
  }
  if (steps > 5e7) throw ConfigError("time grid: too many steps");
  horizon_ = horizon;
  steps_ = static_cast<int>(steps);
  dt_ = horizon / steps_;
}

double TimeGrid::node(int k) const {
  if (k == steps_) return horizon_;
  if (k == 2 * steps_) return 2.0 * horizon_;
  return k * dt_;
}

TimeGrid build_time_grid(double horizon, double dt) {
  return TimeGrid(horizon, dt);
}

MatrixFunction::MatrixFunction(const TimeGrid& grid, int rows, int cols)
    : grid_(grid),
      rows_(rows),
      cols_(cols),
      values_(grid.size(), Eigen::MatrixXd::Zero(rows, cols)) {}

MatrixFunction::MatrixFunction(const TimeGrid& grid,
                               std::vector<Eigen::MatrixXd> values)
    : grid_(grid), values_(std::move(values)) {
  const int count = static_cast<int>(values_.size());
  if (count != grid.steps() + 1 && count != grid.size()) {
    std::ostringstream msg;
    msg << "matrix function: " << count << " samples do not match a grid with "
        << grid.steps() + 1 << " or " << grid.size() << " nodes";
    throw ShapeError(msg.str());
  }
  rows_ = static_cast<int>(values_[0].rows());
  cols_ = static_cast<int>(values_[0].cols());
  for (const auto& v : values_) {
    if (v.rows() != rows_ || v.cols() != cols_)
      throw ShapeError("matrix function: samples have different shapes");
  }
}

MatrixFunction MatrixFunction::constant(const TimeGrid& grid,
                                        const Eigen::MatrixXd& value) {
  return MatrixFunction(
      grid, std::vector<Eigen::MatrixXd>(grid.steps() + 1, value));
}

double MatrixFunction::end_time() const {
  return extended() ? 2.0 * grid_.horizon() : grid_.horizon();
}

Eigen::MatrixXd MatrixFunction::eval(double t) const {
  const double end = end_time();
  const double slack = 1e-12 * end;
  if (!(t >= -slack && t <= end + slack)) {
    std::ostringstream msg;
    msg << "matrix function: t = " << t << " outside [0, " << end << "]";
    throw RangeError(msg.str());
  }
  const double pos = std::clamp(t, 0.0, end) / grid_.dt();
  const double nearest = std::round(pos);
  if (std::abs(pos - nearest) <= 1e-9) return values_[static_cast<int>(nearest)];
  const int k = std::min(static_cast<int>(std::floor(pos)), size() - 2);
  const double w = pos - k;
  return (1.0 - w) * values_[k] + w * values_[k + 1];
}

Eigen::MatrixXd MatrixFunction::integrate(double a, double b) const {
  if (b < a) return -integrate(b, a);
  Eigen::MatrixXd total = Eigen::MatrixXd::Zero(rows_, cols_);
  if (b == a) return total;
  const double h = grid_.dt();
  const double end = end_time();
  if (a < -1e-12 * end || b > end + 1e-12 * end)
    throw RangeError("matrix function: integration bounds outside domain");
  a = std::max(a, 0.0);
  b = std::min(b, end);
  int k = std::min(static_cast<int>(std::floor(a / h)), size() - 2);
  while (k < size() - 1) {
    const double left = grid_.node(k);
    const double right = grid_.node(k + 1);
    const double lo = std::max(a, left);
    const double hi = std::min(b, right);
    if (hi > lo) {
      // Linear interpolant on the segment, integrated exactly.
      const double width = right - left;
      const double wl = (lo - left) / width;
      const double wh = (hi - left) / width;
      const Eigen::MatrixXd vl = (1 - wl) * values_[k] + wl * values_[k + 1];
      const Eigen::MatrixXd vh = (1 - wh) * values_[k] + wh * values_[k + 1];
      total += 0.5 * (hi - lo) * (vl + vh);
    }
    if (right >= b) break;
    ++k;
  }
  return total;
}

MatrixFunction MatrixFunction::transposed() const {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(values_.size());
  for (const auto& v : values_) out.push_back(v.transpose());
  return MatrixFunction(grid_, std::move(out));
}

double MatrixFunction::max_abs() const {
  double m = 0.0;
  for (const auto& v : values_)
    if (v.size() > 0) m = std::max(m, v.cwiseAbs().maxCoeff());
  return m;
}

MatrixFunction zero_extend(const MatrixFunction& f, const TimeGrid& grid) {
  if (f.empty()) throw ShapeError("zero_extend: empty function");
  if (!(f.grid() == grid))
    throw ShapeError("zero_extend: function sampled on a different grid");
  std::vector<Eigen::MatrixXd> values(grid.size(),
                                      Eigen::MatrixXd::Zero(f.rows(), f.cols()));
  for (int k = 0; k <= grid.steps(); ++k) values[k] = f[k];
  return MatrixFunction(grid, std::move(values));
}

MatrixFunction sample_on(const TimeGrid& grid,
                         const std::vector<Eigen::MatrixXd>& values) {
  return MatrixFunction(grid, values);
}

bool is_symmetric(const Eigen::MatrixXd& m, double rel_tol) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& m) {
  return 0.5 * (m + m.transpose());
}

namespace {

void require_shape(const MatrixFunction& f, int rows, int cols,
                   const char* name) {
  if (f.empty()) throw ConfigError(std::string("coefficient ") + name + " missing");
  if (f.rows() != rows || f.cols() != cols) {
    std::ostringstream msg;
    msg << "coefficient " << name << " has shape " << f.rows() << "x" << f.cols()
        << ", expected " << rows << "x" << cols;
    throw ConfigError(msg.str());
  }
}

void require_finite(const MatrixFunction& f, const char* name) {
  for (int k = 0; k < f.size(); ++k) {
    if (!f[k].allFinite())
      throw ConfigError(std::string("coefficient ") + name +
                        " has a non-finite sample");
  }
}

void require_symmetric(const MatrixFunction& f, const char* name) {
  for (int k = 0; k < f.size(); ++k) {
    if (!is_symmetric(f[k], 1e-12)) {
      std::ostringstream msg;
      msg << "coefficient " << name << " is not symmetric at node " << k;
      throw ConfigError(msg.str());
    }
  }
}

}  // namespace

void validate(const GameCoefficients& g) {
  const int n = g.n, k1 = g.k1, k2 = g.k2;
  if (n < 1 || k1 < 1 || k2 < 1)
    throw ConfigError("dimensions n, k1, k2 must be positive");
  struct Entry {
    const MatrixFunction* f;
    int rows, cols;
    const char* name;
  };
  const Entry entries[] = {
      {&g.a1, n, n, "a1"},       {&g.a2, n, n, "a2"},
      {&g.c1, n, n, "c1"},       {&g.c2, n, n, "c2"},
      {&g.b1, n, k1, "b1"},      {&g.d1, n, k1, "d1"},
      {&g.b2, n, k2, "b2"},      {&g.d2, n, k2, "d2"},
      {&g.l1, n, n, "l1"},       {&g.l2, n, n, "l2"},
      {&g.lbar1, n, n, "lbar1"}, {&g.lbar2, n, n, "lbar2"},
      {&g.r1, k1, k1, "r1"},     {&g.r2, k2, k2, "r2"},
  };
  for (const auto& e : entries) {
    require_shape(*e.f, e.rows, e.cols, e.name);
    if (!e.f->extended() || !(e.f->grid() == g.grid))
      throw ConfigError(std::string("coefficient ") + e.name +
                        " is not zero-extended on the model grid");
    require_finite(*e.f, e.name);
  }
  for (const auto& e : entries) {
    const std::string name = e.name;
    if (name[0] == 'l' || name[0] == 'r') require_symmetric(*e.f, e.name);
  }
  for (const auto* f : {&g.lbar1, &g.lbar2, &g.r1, &g.r2}) {
    for (int k = g.grid.steps() + 1; k < g.grid.size(); ++k) {
      if ((*f)[k].cwiseAbs().maxCoeff() != 0.0)
        throw ConfigError("l-bar and r weights must vanish on (T, 2T]");
    }
  }
  if (g.g1.rows() != n || g.g1.cols() != n || g.g2.rows() != n ||
      g.g2.cols() != n)
    throw ConfigError("terminal weights g1, g2 must be n x n");
  if (!is_symmetric(g.g1, 1e-12) || !is_symmetric(g.g2, 1e-12))
    throw ConfigError("terminal weights g1, g2 must be symmetric");
  if (!g.g1.allFinite() || !g.g2.allFinite())
    throw ConfigError("terminal weights must be finite");
  if (g.x0.size() != n || !g.x0.allFinite())
    throw ConfigError("initial state x0 must be a finite n-vector");
}

GameCoefficients make_game(const TimeGrid& grid, const CoefficientSet& set) {
  GameCoefficients g;
  g.grid = grid;
  if (set.a1.empty() || set.b1.empty() || set.b2.empty())
    throw ConfigError("coefficients a1, b1, b2 are required");
  g.n = set.a1.rows();
  g.k1 = set.b1.cols();
  g.k2 = set.b2.cols();
  auto ext = [&](const MatrixFunction& f, const char* name) {
    if (f.empty()) throw ConfigError(std::string("coefficient ") + name + " missing");
    if (!(f.grid() == grid))
      throw ConfigError(std::string("coefficient ") + name +
                        " sampled on a different grid");
    return zero_extend(f, grid);
  };
  g.a1 = ext(set.a1, "a1");
  g.a2 = ext(set.a2, "a2");
  g.c1 = ext(set.c1, "c1");
  g.c2 = ext(set.c2, "c2");
  g.b1 = ext(set.b1, "b1");
  g.d1 = ext(set.d1, "d1");
  g.b2 = ext(set.b2, "b2");
  g.d2 = ext(set.d2, "d2");
  g.l1 = ext(set.l1, "l1");
  g.l2 = ext(set.l2, "l2");
  g.lbar1 = ext(set.lbar1, "lbar1");
  g.lbar2 = ext(set.lbar2, "lbar2");
  g.r1 = ext(set.r1, "r1");
  g.r2 = ext(set.r2, "r2");
  g.g1 = set.g1;
  g.g2 = set.g2;
  g.x0 = set.x0;
  validate(g);
  return g;
}

CoefficientSet to_coefficient_set(const TimeGrid& grid,
                                  const ConstantCoefficients& c) {
  auto k = [&](const Eigen::MatrixXd& m) {
    return MatrixFunction::constant(grid, m);
  };
  CoefficientSet s;
  s.a1 = k(c.a1);
  s.a2 = k(c.a2);
  s.c1 = k(c.c1);
  s.c2 = k(c.c2);
  s.b1 = k(c.b1);
  s.d1 = k(c.d1);
  s.b2 = k(c.b2);
  s.d2 = k(c.d2);
  s.l1 = k(c.l1);
  s.l2 = k(c.l2);
  s.lbar1 = k(c.lbar1);
  s.lbar2 = k(c.lbar2);
  s.r1 = k(c.r1);
  s.r2 = k(c.r2);
  s.g1 = c.g1;
  s.g2 = c.g2;
  s.x0 = c.x0;
  return s;
}

GameCoefficients make_game(const TimeGrid& grid,
                           const ConstantCoefficients& c) {
  return make_game(grid, to_coefficient_set(grid, c));
}

}  // namespace emlq
