#pragma once

#include "emlq/model.hpp"
#include "emlq/riccati.hpp"

#include <limits>
#include <string>
#include <vector>

namespace emlq {

// Cooperative advertising model: manufacturer (leader) and retailer
// (follower) share the cost of building a brand image. All quantities are
// scalars. d1 = NaN means "derive from b1 + c1 d1 = 0".
struct AdvertisingScenario {
  double lambda_m = 1.0, lambda_r = 1.0;
  double delta = 0.3, tau = 0.2;
  double tau1 = 0.1, tau2 = 0.1;
  double mu_m = 1.0, mu_r = 1.0;
  double pi_m = 0.002, pi_r = 0.1;
  double sigma_m = 0.3, sigma_r = 0.7;
  double m1 = 1000.0, m2 = 2000.0;
  double c1 = 1.0;
  double d1 = std::numeric_limits<double>::quiet_NaN();
  double d2 = 0.0;
  double lbar1 = 0.0, lbar2 = 0.0;
  double x0 = 1.0;
  double horizon = 10.0;

  double b1() const;
  double b2() const;
  // c1^2 - tau - 2 delta: growth rate of both value functions backward in time.
  double rate() const;
  double root_sigma() const;
  // d1 with the derivation rule applied.
  double resolved_d1() const;
};

// One message per violated standing constraint; empty when valid.
std::vector<std::string> scenario_violations(const AdvertisingScenario& s);

// Throws ConfigError listing every violated constraint.
GameCoefficients build_scenario(const AdvertisingScenario& s, const TimeGrid& grid);

// Pi1 + (mu_r / 2) e^{-tau1}, so that Xi1 = Pibar d1^2.
MatrixFunction pi_bar(const AdvertisingScenario& s, const MatrixFunction& pi1);

// Solution of P' = -k P + p with P(T) = m, at time t.
double linear_ode_solution(double m, double p, double k, double T, double t);
// The closed form printed next to the figures: m - p int_t^T e^{k(s-t)} ds.
double displayed_solution(double m, double p, double k, double T, double t);

struct FigureRow {
  double t, pi1, pi2, pi1_display, pi2_display;
};

std::vector<FigureRow> figure_data(const AdvertisingScenario& s,
                                   const RiccatiSolution& riccati);

// CSV with header t,pi1,pi2,pi1_paper_display,pi2_paper_display.
void export_figure_data(const std::vector<FigureRow>& rows, const std::string& path);

}  // namespace emlq
