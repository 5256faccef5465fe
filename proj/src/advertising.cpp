#include "emlq/advertising.hpp"

#include "emlq/csv.hpp"
#include "emlq/errors.hpp"

#include <cmath>
#include <sstream>

namespace emlq {

double AdvertisingScenario::b1() const { return -lambda_r * std::exp(-tau1); }
double AdvertisingScenario::b2() const { return lambda_m * std::exp(-tau2); }
double AdvertisingScenario::rate() const { return c1 * c1 - tau - 2.0 * delta; }
double AdvertisingScenario::root_sigma() const { return std::sqrt(sigma_m + sigma_r); }

double AdvertisingScenario::resolved_d1() const {
  if (!std::isnan(d1)) return d1;
  return c1 != 0.0 ? -b1() / c1 : std::numeric_limits<double>::quiet_NaN();
}

std::vector<std::string> scenario_violations(const AdvertisingScenario& s) {
  std::vector<std::string> out;
  const double fields[] = {s.lambda_m, s.lambda_r, s.delta,   s.tau,   s.tau1, s.tau2,
                           s.mu_m,     s.mu_r,     s.pi_m,    s.pi_r,  s.sigma_m,
                           s.sigma_r,  s.m1,       s.m2,      s.c1,    s.d2,
                           s.lbar1,    s.lbar2,    s.x0,      s.horizon};
  for (double v : fields) {
    if (!std::isfinite(v)) {
      out.push_back("all parameters must be finite");
      break;
    }
  }
  if (!(s.horizon > 0.0)) out.push_back("horizon T must be positive");
  if (!(s.sigma_m + s.sigma_r >= 0.0)) out.push_back("sigma_m + sigma_r must be >= 0");
  const double d1 = s.resolved_d1();
  if (!std::isfinite(d1) || d1 == 0.0) out.push_back("d1 != 0 violated");
  if (s.rate() < 0.0) {
    std::ostringstream m;
    m << "c1^2 - tau - 2 delta >= 0 violated (" << s.rate() << ")";
    out.push_back(m.str());
  }
  if (std::isfinite(d1)) {
    const double gap = s.b1() + s.c1 * d1;
    const double scale = std::max(std::abs(s.b1()), std::abs(s.c1 * d1));
    if (std::abs(gap) > 1e-12 * std::max(1.0, scale)) {
      std::ostringstream m;
      m << "b1 + c1 d1 = 0 violated (" << gap << ")";
      out.push_back(m.str());
    }
  }
  const double bound = s.pi_r * s.root_sigma() * std::exp(s.rate() * s.horizon);
  if (s.m1 < bound) {
    std::ostringstream m;
    m << "m1 >= pi_r sqrt(sigma_m + sigma_r) e^{(c1^2 - tau - 2 delta) T} violated (bound "
      << bound << ")";
    out.push_back(m.str());
  }
  return out;
}

GameCoefficients build_scenario(const AdvertisingScenario& s, const TimeGrid& grid) {
  const auto bad = scenario_violations(s);
  if (!bad.empty()) {
    std::string msg = "advertising scenario:";
    for (const auto& b : bad) msg += "\n  " + b;
    throw ConfigError(msg);
  }
  if (std::abs(grid.horizon() - s.horizon) > 1e-12 * s.horizon)
    throw ConfigError("advertising scenario: grid horizon differs from T");
  auto one = [](double v) { return Eigen::MatrixXd::Constant(1, 1, v); };
  const double d1 = s.resolved_d1();
  ConstantCoefficients c;
  c.a1 = one(-0.5 * s.tau - s.delta);
  c.a2 = one(0.0);
  c.c1 = one(s.c1);
  c.c2 = one(0.0);
  c.b1 = one(s.b1());
  c.d1 = one(d1);
  c.b2 = one(s.b2());
  c.d2 = one(s.d2);
  c.l1 = one(-s.pi_r * s.root_sigma());
  c.l2 = one(-s.pi_m * s.root_sigma());
  c.lbar1 = one(s.lbar1);
  c.lbar2 = one(s.lbar2);
  c.r1 = one(0.5 * s.mu_r * std::exp(-s.tau1) * d1 * d1);
  c.r2 = one(0.5 * s.mu_m * std::exp(-s.tau2));
  c.g1 = one(s.m1);
  c.g2 = one(s.m2);
  c.x0 = Eigen::VectorXd::Constant(1, s.x0);
  return make_game(grid, c);
}

MatrixFunction pi_bar(const AdvertisingScenario& s, const MatrixFunction& pi1) {
  const TimeGrid& grid = pi1.grid();
  const int N = grid.steps();
  const double shift = 0.5 * s.mu_r * std::exp(-s.tau1);
  std::vector<Eigen::MatrixXd> v(N + 1);
  for (int k = 0; k <= N; ++k) v[k] = pi1[k].array() + shift;
  return zero_extend(MatrixFunction(grid, std::move(v)), grid);
}

double linear_ode_solution(double m, double p, double k, double T, double t) {
  if (k == 0.0) return m - p * (T - t);
  return (m - p / k) * std::exp(k * (T - t)) + p / k;
}

double displayed_solution(double m, double p, double k, double T, double t) {
  if (k == 0.0) return m - p * (T - t);
  return m - p * std::expm1(k * (T - t)) / k;
}

std::vector<FigureRow> figure_data(const AdvertisingScenario& s, const RiccatiSolution& ric) {
  const TimeGrid& grid = ric.pi1.grid();
  const int N = grid.steps();
  const double k = s.rate();
  const double T = grid.horizon();
  const double p1 = s.pi_r * s.root_sigma();
  const double p2 = s.pi_m * s.root_sigma();
  std::vector<FigureRow> rows(N + 1);
  for (int j = 0; j <= N; ++j) {
    const double t = grid.node(j);
    rows[j] = {t, ric.pi1[j](0, 0), ric.pi2[j](0, 0), displayed_solution(s.m1, p1, k, T, t),
               displayed_solution(s.m2, p2, k, T, t)};
  }
  return rows;
}

void export_figure_data(const std::vector<FigureRow>& rows, const std::string& path) {
  CsvTable table({"t", "pi1", "pi2", "pi1_paper_display", "pi2_paper_display"});
  for (const auto& r : rows)
    table.add_numbers({r.t, r.pi1, r.pi2, r.pi1_display, r.pi2_display});
  table.write(path);
}

}  // namespace emlq
