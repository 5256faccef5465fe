#include "emlq/riccati.hpp"

#include "emlq/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace emlq {

Eigen::MatrixXd lyapunov_rhs(const Eigen::MatrixXd& X, const Eigen::MatrixXd& a,
                             const Eigen::MatrixXd& c,
                             const Eigen::MatrixXd& l) {
  Eigen::MatrixXd out = -X * a - a.transpose() * X - l;
  if (c.size() > 0) out.noalias() -= c.transpose() * X * c;
  return out;
}

Eigen::MatrixXd rk4_backward_step(const Eigen::MatrixXd& X, double dt,
                                  const Eigen::MatrixXd& a_left,
                                  const Eigen::MatrixXd& a_right,
                                  const Eigen::MatrixXd& c_left,
                                  const Eigen::MatrixXd& c_right,
                                  const Eigen::MatrixXd& l_left,
                                  const Eigen::MatrixXd& l_mid,
                                  const Eigen::MatrixXd& l_right) {
  const Eigen::MatrixXd a_mid = 0.5 * (a_left + a_right);
  Eigen::MatrixXd c_mid;
  if (c_left.size() > 0) c_mid = 0.5 * (c_left + c_right);
  const double h = -dt;
  const Eigen::MatrixXd k1 = lyapunov_rhs(X, a_right, c_right, l_right);
  const Eigen::MatrixXd k2 = lyapunov_rhs(X + 0.5 * h * k1, a_mid, c_mid, l_mid);
  const Eigen::MatrixXd k3 = lyapunov_rhs(X + 0.5 * h * k2, a_mid, c_mid, l_mid);
  const Eigen::MatrixXd k4 = lyapunov_rhs(X + h * k3, a_left, c_left, l_left);
  return X + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

MatrixFunction solve_backward_matrix_ode(const MatrixFunction& a,
                                         const MatrixFunction& c,
                                         const MatrixFunction& l,
                                         const Eigen::MatrixXd& g,
                                         const TimeGrid& grid) {
  const int n = static_cast<int>(g.rows());
  if (g.cols() != n) throw ShapeError("riccati: terminal matrix must be square");
  for (const auto* f : {&a, &c, &l}) {
    if (f->rows() != n || f->cols() != n)
      throw ShapeError("riccati: coefficient shape does not match terminal");
    if (!(f->grid() == grid))
      throw ShapeError("riccati: coefficient sampled on a different grid");
  }
  if (!is_symmetric(g, 1e-12))
    throw ConfigError("riccati: terminal matrix must be symmetric");
  const int N = grid.steps();
  const double h = grid.dt();
  std::vector<Eigen::MatrixXd> values(grid.size(), Eigen::MatrixXd::Zero(n, n));
  values[N] = g;
  for (int k = N - 1; k >= 0; --k) {
    const Eigen::MatrixXd l_mid = 0.5 * (l[k] + l[k + 1]);
    Eigen::MatrixXd next =
        rk4_backward_step(values[k + 1], h, a[k], a[k + 1], c[k], c[k + 1],
                          l[k], l_mid, l[k + 1]);
    next = symmetrize(next);
    if (!next.allFinite()) {
      std::ostringstream msg;
      msg << "riccati: divergence at t = " << grid.node(k);
      throw DivergenceError(msg.str());
    }
    values[k] = std::move(next);
  }
  return MatrixFunction(grid, std::move(values));
}

MatrixFunction assemble_xi(int which, const MatrixFunction& pi,
                           const GameCoefficients& coeffs,
                           const MatrixFunction* dbar) {
  const TimeGrid& grid = coeffs.grid;
  std::vector<Eigen::MatrixXd> values(grid.size());
  for (int k = 0; k < grid.size(); ++k) {
    switch (which) {
      case 1:
        values[k] = coeffs.r1[k] + coeffs.d1[k].transpose() * pi[k] * coeffs.d1[k];
        break;
      case 2: {
        if (dbar == nullptr) throw ShapeError("assemble_xi: Xi2 needs dbar");
        const Eigen::MatrixXd& d = (*dbar)[k];
        values[k] = coeffs.r2[k] + d.transpose() * pi[k] * d;
        break;
      }
      case 3:
        values[k] = coeffs.r2[k];
        break;
      default:
        throw ShapeError("assemble_xi: which must be 1, 2 or 3");
    }
    values[k] = symmetrize(values[k]);
  }
  return MatrixFunction(grid, std::move(values));
}

std::vector<double> min_eigenvalues(const MatrixFunction& f) {
  const int N = f.grid().steps();
  std::vector<double> out(N + 1);
  for (int k = 0; k <= N; ++k) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrize(f[k]),
                                                      Eigen::EigenvaluesOnly);
    out[k] = es.eigenvalues().minCoeff();
  }
  return out;
}

RiccatiSolution solve_riccati(const GameCoefficients& coeffs) {
  RiccatiSolution sol;
  sol.pi1 = solve_backward_matrix_ode(coeffs.a1, coeffs.c1, coeffs.l1,
                                      coeffs.g1, coeffs.grid);
  // The leader's Riccati equation runs on (abar1, cbar1) = (a1, c1).
  sol.pi2 = solve_backward_matrix_ode(coeffs.a1, coeffs.c1, coeffs.l2,
                                      coeffs.g2, coeffs.grid);
  sol.xi1 = assemble_xi(1, sol.pi1, coeffs);
  sol.xi3 = assemble_xi(3, sol.pi2, coeffs);
  sol.xi1_min_eig = min_eigenvalues(sol.xi1);
  return sol;
}

void complete_xi2(RiccatiSolution& sol, const GameCoefficients& coeffs,
                  const MatrixFunction& dbar) {
  sol.xi2 = assemble_xi(2, sol.pi2, coeffs, &dbar);
  sol.xi2_min_eig = min_eigenvalues(sol.xi2);
}

bool checked_inverse(const Eigen::MatrixXd& m, Eigen::MatrixXd* inverse,
                     double rel_tol) {
  if (m.rows() != m.cols() || m.size() == 0) return false;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& s = svd.singularValues();
  const double largest = s(0);
  const double smallest = s(s.size() - 1);
  if (!(largest > 0.0) || !std::isfinite(largest) ||
      smallest <= rel_tol * largest)
    return false;
  *inverse = m.partialPivLu().inverse();
  return inverse->allFinite();
}

double operator_norm(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  if (m.rows() == 1 || m.cols() == 1) return m.norm();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues()(0);
}

const AssumptionLine& AssumptionReport::line(const std::string& id) const {
  for (const auto& l : lines)
    if (l.id == id) return l;
  throw std::out_of_range("assumption report: no line " + id);
}

bool AssumptionReport::group_ok(const std::string& group) const {
  for (const auto& l : lines)
    if (l.id.rfind(group + ".", 0) == 0 && !l.pass) return false;
  if (group == "A1") return xi1_positive;
  if (group == "A2") return xi2_positive;
  return true;
}

bool AssumptionReport::all_ok() const {
  return group_ok("A1") && group_ok("A2") && group_ok("A3");
}

AssumptionReport check_assumptions(const GameCoefficients& g,
                                   const MatrixFunction& pi1,
                                   const MatrixFunction& pi2,
                                   const MatrixFunction& xi1, double tol) {
  const int N = g.grid.steps();
  const double inf = std::numeric_limits<double>::infinity();
  AssumptionReport rep;
  rep.tol = tol;
  const char* ids[] = {"A1.1", "A1.2", "A1.3", "A2.1", "A2.2",
                       "A2.3", "A2.4", "A3.1", "A3.2"};
  const char* formulas[] = {
      "c1' P1 d1 + P1 b1",
      "c1' P1 c2 + P1 a2",
      "c2' P1 c2 + lbar1 - c2' P1 d1 Xi1^-1 d1' P1 c2",
      "c1' P2 d1 + P2 b1",
      "c1' P2 c2 + P2 a2",
      "c1' P2 d2 + P2 b2",
      "cbar2' P2 cbar2 + lbar2 - cbar2' P2 dbar Xi2^-1 dbar' P2 cbar2",
      "I - d1 Xi1^-1 d1' P1",
      "a2 - b1 Xi1^-1 d1' P1 c2",
  };
  for (int i = 0; i < 9; ++i) {
    AssumptionLine line;
    line.id = ids[i];
    line.formula = formulas[i];
    line.residual.assign(N + 1, 0.0);
    rep.lines.push_back(std::move(line));
  }
  rep.xi1_min_eig.assign(N + 1, 0.0);
  rep.xi2_min_eig.assign(N + 1, -inf);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(g.n, g.n);
  for (int k = 0; k <= N; ++k) {
    const Eigen::MatrixXd &a2 = g.a2[k], &c1 = g.c1[k], &c2 = g.c2[k];
    const Eigen::MatrixXd &b1 = g.b1[k], &d1 = g.d1[k], &b2 = g.b2[k],
                          &d2 = g.d2[k];
    const Eigen::MatrixXd &P1 = pi1[k], &P2 = pi2[k];
    auto set = [&](int i, double v) { rep.lines[i].residual[k] = v; };
    set(0, operator_norm(c1.transpose() * P1 * d1 + P1 * b1));
    set(1, operator_norm(c1.transpose() * P1 * c2 + P1 * a2));
    set(3, operator_norm(c1.transpose() * P2 * d1 + P2 * b1));
    set(4, operator_norm(c1.transpose() * P2 * c2 + P2 * a2));
    set(5, operator_norm(c1.transpose() * P2 * d2 + P2 * b2));

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es1(symmetrize(xi1[k]),
                                                       Eigen::EigenvaluesOnly);
    rep.xi1_min_eig[k] = es1.eigenvalues().minCoeff();
    Eigen::MatrixXd xi1_inv;
    if (!checked_inverse(xi1[k], &xi1_inv)) {
      for (int i : {2, 6, 7, 8}) set(i, inf);
      continue;
    }
    const Eigen::MatrixXd proj = d1 * xi1_inv * d1.transpose() * P1;
    set(2, operator_norm(c2.transpose() * P1 * c2 + g.lbar1[k] -
                         c2.transpose() * P1 * d1 * xi1_inv * d1.transpose() *
                             P1 * c2));
    set(7, operator_norm(I - proj));
    set(8, operator_norm(a2 - b1 * xi1_inv * d1.transpose() * P1 * c2));

    const Eigen::MatrixXd cbar2 = c2 - proj * c2;
    const Eigen::MatrixXd dbar = d2 - proj * d2;
    const Eigen::MatrixXd xi2 =
        symmetrize(g.r2[k] + dbar.transpose() * P2 * dbar);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es2(xi2, Eigen::EigenvaluesOnly);
    rep.xi2_min_eig[k] = es2.eigenvalues().minCoeff();
    Eigen::MatrixXd xi2_inv;
    if (!checked_inverse(xi2, &xi2_inv)) {
      set(6, inf);
      continue;
    }
    set(6, operator_norm(cbar2.transpose() * P2 * cbar2 + g.lbar2[k] -
                         cbar2.transpose() * P2 * dbar * xi2_inv *
                             dbar.transpose() * P2 * cbar2));
  }
  for (auto& line : rep.lines) {
    line.max_residual = *std::max_element(line.residual.begin(), line.residual.end());
    line.pass = line.max_residual <= tol;
  }
  rep.xi1_positive =
      *std::min_element(rep.xi1_min_eig.begin(), rep.xi1_min_eig.end()) > 0.0;
  rep.xi2_positive =
      *std::min_element(rep.xi2_min_eig.begin(), rep.xi2_min_eig.end()) > 0.0;
  return rep;
}

}  // namespace emlq
