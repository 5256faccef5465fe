#include "emlq/adjoint.hpp"

#include "emlq/errors.hpp"
#include "emlq/riccati.hpp"

#include <sstream>

namespace emlq {

namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Star transform of per-node samples on [0,T].
std::vector<Mat> star_of(const TimeGrid& grid, std::vector<Mat> values, StarVariant v) {
  const int N = grid.steps();
  const MatrixFunction f = zero_extend(MatrixFunction(grid, std::move(values)), grid);
  const MatrixFunction s = star_transform(f, v);
  return std::vector<Mat>(s.values().begin(), s.values().begin() + N + 1);
}

Mat regularized_inverse(const Mat& x, double reg_scale) {
  const double lam = reg_scale * (1.0 + operator_norm(x));
  return (x + lam * Mat::Identity(x.rows(), x.cols())).partialPivLu().inverse();
}

void check_path(const std::vector<Vec>& u, int N, int dim, const char* what) {
  if (static_cast<int>(u.size()) != N + 1) {
    std::ostringstream msg;
    msg << what << ": expected " << N + 1 << " samples, got " << u.size();
    throw ShapeError(msg.str());
  }
  for (const auto& v : u) {
    if (v.size() != dim) throw ShapeError(std::string(what) + ": wrong dimension");
  }
}

AdjointSolution package(const TimeGrid& grid, MatrixFunction eta, const char* name,
                        const AdjointOptions& opt, AdjointForm form) {
  AdjointSolution out;
  out.eta_bar = MatrixFunction(grid, eta.rows(), 1);
  out.eta = std::move(eta);
  out.equation = name;
  out.star = opt.star;
  out.form = form;
  return out;
}

}  // namespace

std::string to_string(AdjointForm f) {
  return f == AdjointForm::ExactAdjoint ? "exact-adjoint" : "product-of-stars";
}

MatrixFunction solve_anticipated_linear(const TimeGrid& grid, const std::vector<Mat>& A,
                                       const std::vector<Vec>& h,
                                       const std::vector<AnticipatedTerm>& terms,
                                       StarVariant star) {
  const int N = grid.steps();
  const double dt = grid.dt();
  if (static_cast<int>(A.size()) != N + 1 || static_cast<int>(h.size()) != N + 1)
    throw ShapeError("solve_anticipated_linear: need N+1 samples of A and h");
  const int n = static_cast<int>(A[0].rows());
  const Mat I = Mat::Identity(n, n);

  struct State {
    std::vector<Vec> s, R;
    int m = 0;
    bool has_P = false, has_q = false;
  };
  std::vector<State> st(terms.size());
  for (std::size_t t = 0; t < terms.size(); ++t) {
    const AnticipatedTerm& term = terms[t];
    if (static_cast<int>(term.Z.size()) != N + 1)
      throw ShapeError("solve_anticipated_linear: Z needs N+1 samples");
    st[t].has_P = !term.P.empty();
    st[t].has_q = !term.q.empty();
    st[t].m = static_cast<int>(term.Z[0].cols());
    if (term.Z[0].rows() != n)
      throw ShapeError("solve_anticipated_linear: Z rows must match eta");
    st[t].s.assign(N + 1, Vec::Zero(st[t].m));
    st[t].R.assign(N + 1, Vec::Zero(st[t].m));
    if (st[t].has_q) st[t].s[N] = term.q[N];
  }

  std::vector<Vec> eta(grid.size(), Vec::Zero(n));
  Vec F_next = h[N];  // eta(T) = 0 and the window at T is empty
  for (int k = N - 1; k >= 0; --k) {
    const int e = star_end_index(star, k, N);
    const double sigma = e > k ? 0.5 * dt : 0.0;
    Mat lhs = I + 0.5 * dt * A[k];
    Vec rhs = eta[k + 1] - 0.5 * dt * (F_next + h[k]);
    Vec anticipated = Vec::Zero(n);
    std::vector<Vec> known(terms.size());
    for (std::size_t t = 0; t < terms.size(); ++t) {
      const AnticipatedTerm& term = terms[t];
      known[t] = Vec::Zero(st[t].m);
      if (e > k) {
        known[t] = st[t].R[k + 1] - st[t].R[e] + 0.5 * dt * st[t].s[k + 1];
        if (st[t].has_q) known[t] += 0.5 * dt * term.q[k];
      }
      anticipated += term.Z[k] * known[t];
      if (st[t].has_P) lhs += 0.5 * dt * sigma * term.Z[k] * term.P[k];
    }
    rhs -= 0.5 * dt * anticipated;
    eta[k] = lhs.partialPivLu().solve(rhs);
    if (!eta[k].allFinite()) {
      std::ostringstream msg;
      msg << "anticipated backward sweep: non-finite value at t = " << grid.node(k);
      throw DivergenceError(msg.str());
    }
    Vec F = A[k] * eta[k] + h[k];
    for (std::size_t t = 0; t < terms.size(); ++t) {
      const AnticipatedTerm& term = terms[t];
      Vec s = st[t].has_q ? Vec(term.q[k]) : Vec(Vec::Zero(st[t].m));
      if (st[t].has_P) s += term.P[k] * eta[k];
      st[t].s[k] = s;
      st[t].R[k] = st[t].R[k + 1] + 0.5 * dt * (st[t].s[k] + st[t].s[k + 1]);
      Vec window = known[t];
      if (st[t].has_P) window += sigma * term.P[k] * eta[k];
      F += term.Z[k] * window;
    }
    F_next = F;
  }
  std::vector<Mat> values(grid.size());
  for (int k = 0; k < grid.size(); ++k) values[k] = eta[k];
  return MatrixFunction(grid, std::move(values));
}

AdjointSolution solve_eta1(const GameCoefficients& g, const MatrixFunction& pi1,
                           const MatrixFunction& xi1, const std::vector<Vec>& u2,
                           const AdjointOptions& opt) {
  const TimeGrid& grid = g.grid;
  const int N = grid.steps();
  check_path(u2, N, g.k2, "solve_eta1: u2");
  std::vector<Mat> A(N + 1);
  std::vector<Vec> h(N + 1);
  for (int k = 0; k <= N; ++k) {
    A[k] = -g.a1[k].transpose();
    h[k] = -(pi1[k] * g.b2[k] + g.c1[k].transpose() * pi1[k] * g.d2[k]) * u2[k];
  }
  std::vector<AnticipatedTerm> terms;
  if (opt.form == AdjointForm::ExactAdjoint) {
    AnticipatedTerm t;
    t.Z.assign(N + 1, Mat::Identity(g.n, g.n));
    t.P.resize(N + 1);
    t.q.resize(N + 1);
    for (int k = 0; k <= N; ++k) {
      Mat inv;
      if (!checked_inverse(xi1[k], &inv)) {
        std::ostringstream msg;
        msg << "solve_eta1: Xi1 is singular at node " << k;
        throw ConditioningError(msg.str());
      }
      const Mat& P = pi1[k];
      const Mat c2P = g.c2[k].transpose() * P;
      const Mat gain = c2P * g.d1[k] * inv;
      t.P[k] = -g.a2[k].transpose() + gain * g.b1[k].transpose();
      t.q[k] = (gain * g.d1[k].transpose() * P * g.d2[k] - c2P * g.d2[k]) * u2[k];
    }
    terms.push_back(std::move(t));
  } else {
    std::vector<Mat> c2Pd1(N + 1), xi(N + 1);
    for (int k = 0; k <= N; ++k) {
      c2Pd1[k] = g.c2[k].transpose() * pi1[k] * g.d1[k];
      xi[k] = xi1[k];
    }
    const std::vector<Mat> c2Pd1_star = star_of(grid, std::move(c2Pd1), opt.star);
    const std::vector<Mat> xi_star = star_of(grid, std::move(xi), opt.star);
    AnticipatedTerm plain, product;
    plain.Z.assign(N + 1, Mat::Identity(g.n, g.n));
    plain.P.resize(N + 1);
    plain.q.resize(N + 1);
    product.Z.resize(N + 1);
    product.P.resize(N + 1);
    product.q.resize(N + 1);
    for (int k = 0; k <= N; ++k) {
      const Mat& P = pi1[k];
      plain.P[k] = -g.a2[k].transpose();
      plain.q[k] = -g.c2[k].transpose() * P * g.d2[k] * u2[k];
      product.Z[k] = c2Pd1_star[k] * regularized_inverse(xi_star[k], opt.reg_scale);
      product.P[k] = g.b1[k].transpose();
      product.q[k] = g.d1[k].transpose() * P * g.d2[k] * u2[k];
    }
    terms.push_back(std::move(plain));
    terms.push_back(std::move(product));
  }
  return package(grid, solve_anticipated_linear(grid, A, h, terms, opt.star), "eta1",
                 opt, opt.form);
}

AdjointSolution solve_eta2(const GameCoefficients& g, const BarredCoefficients& b,
                           const MatrixFunction& pi2, const MatrixFunction& xi2,
                           const std::vector<Vec>& xi_path, const AdjointSolution& eta1,
                           const AdjointOptions& opt) {
  const TimeGrid& grid = g.grid;
  const int N = grid.steps();
  const int n = g.n;
  std::vector<Vec> xi_in = xi_path;
  if (xi_in.empty()) xi_in.assign(N + 1, Vec::Zero(n));
  check_path(xi_in, N, n, "solve_eta2: xi");
  const std::vector<Vec> mem = cumulative_trapezoid(xi_in, grid.dt());

  std::vector<Mat> cPd(N + 1), xi(N + 1), bt(N + 1), a2t(N + 1), dPk(N + 1), cPk(N + 1);
  for (int k = 0; k <= N; ++k) {
    const Mat& P = pi2[k];
    const Mat c2t = b.cbar2[k].transpose();
    cPd[k] = c2t * P * b.dbar[k];
    xi[k] = xi2[k];
    bt[k] = b.bbar[k].transpose();
    a2t[k] = b.abar2[k].transpose();
    dPk[k] = b.dbar[k].transpose() * P * b.kbar[k];
    cPk[k] = c2t * P * b.kbar[k];
  }
  const auto cPd_s = star_of(grid, std::move(cPd), opt.star);
  const auto xi_s = star_of(grid, std::move(xi), opt.star);
  const auto bt_s = star_of(grid, std::move(bt), opt.star);
  const auto a2t_s = star_of(grid, std::move(a2t), opt.star);
  const auto dPk_s = star_of(grid, std::move(dPk), opt.star);
  const auto cPk_s = star_of(grid, std::move(cPk), opt.star);

  std::vector<Mat> A(N + 1);
  std::vector<Vec> h(N + 1, Vec::Zero(n));
  AnticipatedTerm self, source, follower;
  self.Z.resize(N + 1);
  self.P.assign(N + 1, Mat::Identity(n, n));
  source.Z.resize(N + 1);
  source.q.resize(N + 1);
  follower.Z.resize(N + 1);
  follower.q.resize(N + 1);
  for (int k = 0; k <= N; ++k) {
    A[k] = -b.abar1[k].transpose();
    const Mat Z = cPd_s[k] * regularized_inverse(xi_s[k], opt.reg_scale);
    self.Z[k] = Z * bt_s[k] - a2t_s[k];
    source.Z[k] = -Z;
    source.q[k] = b.qbar1[k].transpose() * mem[k] + b.qbar2[k].transpose() * xi_in[k];
    follower.Z[k] = Z * dPk_s[k] - cPk_s[k];
    follower.q[k] = eta1.at(k);
  }
  std::vector<AnticipatedTerm> terms{std::move(self), std::move(source),
                                     std::move(follower)};
  return package(grid, solve_anticipated_linear(grid, A, h, terms, opt.star), "eta2",
                 opt, AdjointForm::ProductOfStars);
}

}  // namespace emlq
