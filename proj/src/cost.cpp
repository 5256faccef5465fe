#include "emlq/cost.hpp"

#include "emlq/errors.hpp"
#include "emlq/riccati.hpp"

#include <cmath>
#include <sstream>

namespace emlq {

namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

struct Moments {
  double mean = 0.0;
  double se = 0.0;
};

// Two-pass mean and standard error of the mean.
Moments moments(const std::vector<double>& x) {
  Moments m;
  const std::size_t n = x.size();
  if (n == 0) return m;
  double sum = 0.0;
  for (double v : x) sum += v;
  m.mean = sum / n;
  if (n < 2) return m;
  double ss = 0.0;
  for (double v : x) ss += (v - m.mean) * (v - m.mean);
  m.se = std::sqrt(ss / (n - 1) / n);
  return m;
}

void check_player(int player) {
  if (player != 1 && player != 2) throw ShapeError("cost: player must be 1 or 2");
}

}  // namespace

CostEstimate estimate(const std::vector<double>& samples, double dt, int player) {
  const Moments m = moments(samples);
  CostEstimate out;
  out.value = m.mean;
  out.std_error = m.se;
  out.n_paths = static_cast<int>(samples.size());
  out.dt = dt;
  out.player = player;
  return out;
}

CostEstimate evaluate_cost(const PathEnsemble& ens, int player) {
  check_player(player);
  if (static_cast<int>(ens.cost.size()) < player)
    throw ShapeError("evaluate_cost: ensemble carries no cost for this player");
  return estimate(ens.cost[player - 1], ens.grid.dt(), player);
}

CostEstimate evaluate_cost_from_paths(const PathEnsemble& ens, const GameCoefficients& g,
                                      int player, int offset) {
  check_player(player);
  if (ens.paths.empty()) throw ShapeError("evaluate_cost_from_paths: paths were not stored");
  if (static_cast<int>(ens.control_paths.size()) < player)
    throw ShapeError("evaluate_cost_from_paths: missing controls for this player");
  const int N = ens.grid.steps();
  const double dt = ens.grid.dt();
  const int n = g.n;
  const MatrixFunction& l = player == 1 ? g.l1 : g.l2;
  const MatrixFunction& lbar = player == 1 ? g.lbar1 : g.lbar2;
  const MatrixFunction& r = player == 1 ? g.r1 : g.r2;
  const Mat& gT = player == 1 ? g.g1 : g.g2;
  std::vector<double> samples(ens.n_paths);
  for (int p = 0; p < ens.n_paths; ++p) {
    double J = 0.0;
    for (int k = 0; k <= N; ++k) {
      const Vec x = ens.paths[p][k].segment(offset, n);
      const Vec m = ens.memories[p][k].segment(offset, n);
      const Vec& u = ens.control_paths[player - 1][p][k];
      const double run = x.dot(l[k] * x) + m.dot(lbar[k] * m) + u.dot(r[k] * u);
      J += ((k == 0 || k == N) ? 0.5 * dt : dt) * run;
    }
    const Vec xT = ens.paths[p][N].segment(offset, n);
    samples[p] = J + xT.dot(gT * xT);
  }
  return estimate(samples, dt, player);
}

double follower_closed_form_cost(const GameCoefficients& g, const MatrixFunction& pi1,
                                 const AdjointSolution& eta1, const MatrixFunction& xi1,
                                 const std::vector<Vec>& u2) {
  const int N = g.grid.steps();
  const double dt = g.grid.dt();
  if (static_cast<int>(u2.size()) != N + 1)
    throw ShapeError("follower_closed_form_cost: u2 needs N+1 samples");
  double integral = 0.0;
  for (int k = 0; k <= N; ++k) {
    Eigen::LDLT<Mat> ldlt(xi1[k]);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        ldlt.vectorD().minCoeff() <= 0.0) {
      std::ostringstream msg;
      msg << "follower_closed_form_cost: Xi1 is not positive definite at node " << k;
      throw ConditioningError(msg.str());
    }
    const Mat& P = pi1[k];
    const Vec eta = eta1.at(k);
    const Vec du = g.d2[k] * u2[k];
    const Vec v = g.b1[k].transpose() * eta + g.d1[k].transpose() * P * du;
    const double run = du.dot(P * du) + 2.0 * (g.b2[k].transpose() * eta).dot(u2[k]) -
                       v.dot(ldlt.solve(v));
    integral += ((k == 0 || k == N) ? 0.5 * dt : dt) * run;
  }
  const Vec& x0 = g.x0;
  return x0.dot(pi1[0] * x0) + 2.0 * eta1.at(0).dot(x0) + integral;
}

double leader_closed_form_cost(const MatrixFunction& pi2, const AdjointSolution& eta2,
                               const Vec& x0) {
  return x0.dot(pi2[0] * x0 + eta2.at(0));
}

Agreement compare(double reference, double reference_se, const CostEstimate& mc,
                  double multiple) {
  Agreement a;
  a.reference = reference;
  a.estimate = mc.value;
  a.difference = std::abs(mc.value - reference);
  a.combined_se = std::sqrt(mc.std_error * mc.std_error + reference_se * reference_se);
  a.multiple = multiple;
  a.pass = a.difference <= multiple * a.combined_se;
  return a;
}

DirectionalCheck central_difference(const std::function<PerturbedRun(double)>& run,
                                    double eps, double multiple) {
  if (!(eps > 0.0)) throw ConfigError("central_difference: epsilon must be positive");
  const PerturbedRun plus = run(eps);
  const PerturbedRun base = run(0.0);
  const PerturbedRun minus = run(-eps);
  const std::size_t n = base.costs.size();
  if (plus.costs.size() != n || minus.costs.size() != n)
    throw ShapeError("central_difference: runs have different path counts");
  std::vector<double> d(n), c(n);
  double scale = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    d[p] = (plus.costs[p] - minus.costs[p]) / (2.0 * eps);
    c[p] = (plus.costs[p] - 2.0 * base.costs[p] + minus.costs[p]) / (eps * eps);
    scale = std::max(scale, std::abs(base.costs[p]));
  }
  const Moments md = moments(d), mc = moments(c);
  DirectionalCheck out;
  out.epsilon = eps;
  out.derivative = md.mean;
  out.derivative_se = md.se;
  out.curvature = mc.mean;
  out.curvature_se = mc.se;
  // Round-off floor so that noise-free runs are judged sensibly.
  const double floor = 1e-9 * std::max(1.0, scale) / eps;
  out.derivative_ok = std::abs(md.mean) <= multiple * md.se + floor;
  out.curvature_ok = mc.mean > 0.0;
  out.crn_ok = plus.digest == base.digest && minus.digest == base.digest;
  return out;
}

StationarityReport stationarity_check(const GameCoefficients& g, const ControlLaw& u1,
                                      const ControlLaw& u2,
                                      const std::vector<std::vector<Vec>>& directions,
                                      const std::vector<double>& epsilons, int player,
                                      const SimulationOptions& opt, double multiple) {
  check_player(player);
  const int N = g.grid.steps();
  const ControlLaw& target = player == 1 ? u1 : u2;
  for (const auto& v : directions) {
    if (static_cast<int>(v.size()) != N + 1)
      throw ShapeError("stationarity_check: direction needs N+1 samples");
    for (const auto& x : v) {
      if (x.size() != target.dim)
        throw ShapeError("stationarity_check: direction has the wrong dimension");
    }
  }
  StationarityReport rep;
  rep.player = player;
  rep.seed = opt.seed;
  // Only the checked player's cost is accumulated.
  auto run_model = [&](const ControlLaw& a, const ControlLaw& b) {
    LinearSdeModel m = open_loop_model(g, a, b);
    m.costs = {m.costs[player - 1]};
    PathEnsemble ens = simulate(m, opt);
    return PerturbedRun{std::move(ens.cost[0]), std::move(ens.digest)};
  };
  const PerturbedRun base = run_model(u1, u2);
  const CostEstimate est = estimate(base.costs, g.grid.dt(), player);
  rep.base_cost = est.value;
  rep.base_se = est.std_error;
  rep.pass = true;
  for (const auto& v : directions) {
    for (double eps : epsilons) {
      auto run = [&](double e) {
        if (e == 0.0) return base;
        ControlLaw a = u1, b = u2;
        ControlLaw& law = player == 1 ? a : b;
        if (law.ff.empty()) law.ff.assign(N + 1, Vec::Zero(law.dim));
        for (int k = 0; k <= N; ++k) law.ff[k] += e * v[k];
        return run_model(a, b);
      };
      DirectionalCheck c = central_difference(run, eps, multiple);
      rep.pass = rep.pass && c.derivative_ok && c.curvature_ok && c.crn_ok;
      rep.checks.push_back(c);
    }
  }
  return rep;
}

}  // namespace emlq
