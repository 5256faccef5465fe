#include "emlq/oracles.hpp"

#include "emlq/errors.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>

namespace emlq::oracle {

namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

int steps_for(double T, double dt) {
  const int n = static_cast<int>(std::lround(T / dt));
  if (n < 1 || std::abs(n * dt - T) > 1e-9 * T)
    throw ConfigError("oracle: dt must divide T");
  return n;
}

template <int D>
GammaLambdaReference picard_fixed(const BlockSpec& b, double T, double dt, double damping,
                                  double tol, int max_iter) {
  using M = Eigen::Matrix<double, D, D>;
  const int N = steps_for(T, dt);
  if (N % 2 != 0) throw ConfigError("picard_gamma_lambda: T/2 must be a grid node");
  const int d = static_cast<int>(b.A1.rows());
  std::vector<M> phi(N + 1);
  for (int m = 0; m <= N; ++m) phi[m] = Mat((b.A1 * (m * dt)).exp());

  std::vector<M> L(N + 1, M::Zero(d, d)), gamma(N + 1), window(N + 1);
  auto lambda_at = [&](int j, int k) -> M {
    return phi[k - j].transpose() * L[k] * phi[k - j];
  };
  auto update_gamma = [&]() {
    // Gamma(t) = -int_t^{T/2} Phi(s-t)' Lambda(s, 2s) Phi(s-t) ds
    for (int j = 0; j <= N; ++j) {
      M acc = M::Zero(d, d);
      for (int i = j; i <= N / 2 && N / 2 > j; ++i) {
        const double w = (i == j || i == N / 2) ? 0.5 : 1.0;
        acc += w * (phi[i - j].transpose() * lambda_at(i, 2 * i) * phi[i - j]);
      }
      gamma[j] = -dt * acc;
    }
  };
  auto update_window = [&]() {
    for (int j = 0; j <= N; ++j) {
      const int e = std::min(2 * j, N);
      M acc = M::Zero(d, d);
      for (int k = j; k <= e && e > j; ++k) {
        const double w = (k == j || k == e) ? 0.5 : 1.0;
        acc += w * lambda_at(j, k);
      }
      window[j] = dt * acc;
    }
  };

  GammaLambdaReference out;
  out.dt = dt;
  for (int it = 1; it <= max_iter; ++it) {
    update_gamma();
    update_window();
    double change = 0.0, scale = 1.0;
    std::vector<M> next(N + 1);
    for (int j = 0; j <= N; ++j) {
      const OmegaValues om = omega(b, Mat(gamma[j]));
      const M W = window[j];
      next[j] = M(W * om.omega1 + om.omega1.transpose() * W + W * om.omega2 * W + om.omega3);
      change = std::max(change, (next[j] - L[j]).cwiseAbs().maxCoeff());
      scale = std::max(scale, next[j].cwiseAbs().maxCoeff());
    }
    for (int j = 0; j <= N; ++j) L[j] = (1.0 - damping) * L[j] + damping * next[j];
    out.iterations = it;
    out.change = change / scale;
    if (out.change < tol) {
      out.converged = true;
      break;
    }
  }
  update_gamma();
  update_window();
  for (int j = 0; j <= N; ++j) {
    out.gamma.push_back(gamma[j]);
    out.diagonal.push_back(L[j]);
    out.window.push_back(window[j]);
  }
  return out;
}

}  // namespace

double simpson(const std::vector<double>& f, double h) {
  const int n = static_cast<int>(f.size()) - 1;
  if (n < 2) throw ShapeError("simpson: need at least two intervals");
  const int even = n % 2 == 0 ? n : n - 3;
  double s = 0.0;
  for (int i = 0; i + 2 <= even; i += 2) s += f[i] + 4.0 * f[i + 1] + f[i + 2];
  s *= h / 3.0;
  if (even != n)
    s += 3.0 * h / 8.0 * (f[n - 3] + 3.0 * f[n - 2] + 3.0 * f[n - 1] + f[n]);
  return s;
}

double scalar_riccati(double a, double c, double l, double g, double T, double t) {
  const double k = 2.0 * a + c * c;
  const double tau = T - t;
  const double growth = std::exp(k * tau);
  const double integral = k == 0.0 ? tau : std::expm1(k * tau) / k;
  return g * growth + l * integral;
}

Mat lyapunov_expm(const Mat& a, const Mat& c, const Mat& l, const Mat& g,
                  double time_to_go) {
  const int n = static_cast<int>(a.rows());
  const Mat I = Mat::Identity(n, n);
  const Mat at = a.transpose(), ct = c.transpose();
  const int m = n * n;
  Mat aug = Mat::Zero(m + 1, m + 1);
  aug.topLeftCorner(m, m) = kron(I, at) + kron(at, I) + kron(ct, ct);
  aug.topRightCorner(m, 1) = Eigen::Map<const Vec>(l.data(), m);
  Vec start(m + 1);
  start.head(m) = Eigen::Map<const Vec>(g.data(), m);
  start(m) = 1.0;
  const Mat flow = (aug * time_to_go).exp();
  const Vec end = flow * start;
  return Eigen::Map<const Mat>(end.data(), n, n);
}

Mat lambda_flow(const Mat& A, const Mat& diagonal, double tau) {
  const Mat e = (A * tau).exp();
  return e.transpose() * diagonal * e;
}

OmegaValues omega(const BlockSpec& b, const Mat& G) {
  const int d = static_cast<int>(G.rows());
  const Mat I = Mat::Identity(d, d);
  const Mat R = (I - G * b.Cbar).inverse();
  const Mat Xi = b.xi3.inverse();
  const Mat E = b.Abar1 + b.C.transpose() * G;
  const Mat S = b.G2.transpose() - b.D.transpose() * G;
  OmegaValues out;
  out.omega1 = b.B * G + b.C * R * G * E + b.D * Xi * S;
  out.omega2 = -b.B - b.C * R * G * b.C.transpose() + b.D * Xi * b.D.transpose();
  out.omega3 = (b.G2 - G * b.D) * Xi * S - E.transpose() * R * G * E - G * b.B * G;
  return out;
}

GammaLambdaReference picard_gamma_lambda(const BlockSpec& blocks, double T, double dt,
                                         double damping, double tol, int max_iter) {
  if (blocks.A1.rows() == 2) return picard_fixed<2>(blocks, T, dt, damping, tol, max_iter);
  return picard_fixed<Eigen::Dynamic>(blocks, T, dt, damping, tol, max_iter);
}

double star_end(StarVariant star, double t, double T) {
  return star == StarVariant::Adjoint ? T : std::min(2.0 * t, T);
}

Mat star_quadrature(const std::function<Mat(double)>& f, StarVariant star, double t,
                    double T, int panels) {
  const double end = star_end(star, t, T);
  const Mat first = f(t);
  if (!(end > t)) return Mat::Zero(first.rows(), first.cols());
  const int n = 2 * std::max(panels, 1);
  const double h = (end - t) / n;
  Mat s = first + f(end);
  for (int i = 1; i < n; ++i) s += (i % 2 == 1 ? 4.0 : 2.0) * f(t + i * h);
  return s * (h / 3.0);
}

AnticipatedReference picard_anticipated(double T, double dt, int n,
                                        const std::function<Mat(double)>& A,
                                        const std::function<Vec(double)>& h,
                                        const std::vector<AnticipatedSource>& terms,
                                        StarVariant star, double tol, int max_iter) {
  const int N = steps_for(T, dt);
  auto node = [&](int k) { return k * dt; };
  auto end_index = [&](int k) { return star == StarVariant::Adjoint ? N : std::min(2 * k, N); };

  std::vector<Vec> eta(N + 1, Vec::Zero(n));
  AnticipatedReference out;
  out.dt = dt;
  for (int it = 1; it <= max_iter; ++it) {
    std::vector<Vec> src(N + 1);
    for (int k = 0; k <= N; ++k) src[k] = h(node(k));
    for (const auto& term : terms) {
      // Integrand samples and their cumulative trapezoid from the right.
      std::vector<Vec> g(N + 1);
      for (int k = 0; k <= N; ++k) {
        const double t = node(k);
        Vec v = term.q ? term.q(t) : Vec();
        if (term.P) v = v.size() ? Vec(v + term.P(t) * eta[k]) : Vec(term.P(t) * eta[k]);
        g[k] = v;
      }
      std::vector<Vec> tail(N + 1, Vec::Zero(g[0].size()));
      for (int k = N - 1; k >= 0; --k) tail[k] = tail[k + 1] + 0.5 * dt * (g[k] + g[k + 1]);
      for (int k = 0; k <= N; ++k) src[k] += term.Z(node(k)) * (tail[k] - tail[end_index(k)]);
    }
    std::vector<Vec> next(N + 1, Vec::Zero(n));
    for (int k = N; k > 0; --k) {
      // RK4 from t_k down to t_{k-1}; the source midpoint is interpolated.
      const double t1 = node(k), t0 = node(k - 1), tm = 0.5 * (t0 + t1);
      const Vec sm = 0.5 * (src[k] + src[k - 1]);
      auto rhs = [&](double t, const Vec& y, const Vec& s) -> Vec { return A(t) * y + s; };
      const Vec& y = next[k];
      const Vec k1 = rhs(t1, y, src[k]);
      const Vec k2 = rhs(tm, y - 0.5 * dt * k1, sm);
      const Vec k3 = rhs(tm, y - 0.5 * dt * k2, sm);
      const Vec k4 = rhs(t0, y - dt * k3, src[k - 1]);
      next[k - 1] = y - dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    double change = 0.0, scale = 1.0;
    for (int k = 0; k <= N; ++k) {
      change = std::max(change, (next[k] - eta[k]).cwiseAbs().maxCoeff());
      scale = std::max(scale, next[k].cwiseAbs().maxCoeff());
    }
    eta = std::move(next);
    out.iterations = it;
    if (change <= tol * scale) {
      out.converged = true;
      break;
    }
  }
  out.eta = std::move(eta);
  return out;
}

std::vector<Vec> memory_ode_rk4(const std::function<Mat(double)>& F,
                                const std::function<Mat(double)>& Fm,
                                const std::function<Vec(double)>& f, const Vec& y0,
                                double T, int steps) {
  const int d = static_cast<int>(y0.size());
  const double h = T / steps;
  auto rhs = [&](double t, const Vec& z) {
    Vec out(2 * d);
    out.head(d) = F(t) * z.head(d) + Fm(t) * z.tail(d) + f(t);
    out.tail(d) = z.head(d);
    return out;
  };
  Vec z = Vec::Zero(2 * d);
  z.head(d) = y0;
  std::vector<Vec> ys{y0};
  for (int k = 0; k < steps; ++k) {
    const double t = k * h;
    const Vec k1 = rhs(t, z);
    const Vec k2 = rhs(t + 0.5 * h, z + 0.5 * h * k1);
    const Vec k3 = rhs(t + 0.5 * h, z + 0.5 * h * k2);
    const Vec k4 = rhs(t + h, z + h * k3);
    z += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    ys.push_back(z.head(d));
  }
  return ys;
}

namespace {

Mat at_or_zero(const std::vector<Mat>& v, int k, int rows, int cols) {
  return v.empty() ? Mat::Zero(rows, cols) : v[k];
}

Vec at_or_zero(const std::vector<Vec>& v, int k, int rows) {
  return v.empty() ? Vec::Zero(rows) : v[k];
}

// [F | Fm | f] and [G | Gm | g] at node k.
void drift_diffusion(const LinearSdeModel& m, int k, Mat* F, Mat* G) {
  const int d = m.dim;
  F->resize(d, 2 * d + 1);
  G->resize(d, 2 * d + 1);
  *F << at_or_zero(m.Fx, k, d, d), at_or_zero(m.Fm, k, d, d), at_or_zero(m.f, k, d);
  *G << at_or_zero(m.Gx, k, d, d), at_or_zero(m.Gm, k, d, d), at_or_zero(m.g, k, d);
}

}  // namespace

double scheme_expected_cost(const LinearSdeModel& m, int which) {
  const int N = m.grid.steps(), d = m.dim, zd = 2 * d + 1;
  const double dt = m.grid.dt();
  const CostSpec& cs = m.costs.at(which);
  const ControlLaw& law = m.controls.at(cs.control);
  Vec z0 = Vec::Zero(zd);
  z0.head(d) = m.s0;
  z0(zd - 1) = 1.0;
  Mat P = z0 * z0.transpose();
  Mat Ex = Mat::Zero(cs.n, zd), Em = Mat::Zero(cs.n, zd);
  Ex.middleCols(cs.offset, cs.n).setIdentity();
  Em.middleCols(d + cs.offset, cs.n).setIdentity();
  double J = 0.0;
  for (int k = 0; k <= N; ++k) {
    // Average memory feeds M / max(t, dt) to everything that reads it.
    Mat S = Mat::Identity(zd, zd);
    if (m.memory == MemoryKind::Average)
      S.block(d, d, d, d) *= 1.0 / std::max(k * dt, dt);
    Mat U(law.dim, zd);
    U << at_or_zero(law.Ux, k, law.dim, d), at_or_zero(law.Um, k, law.dim, d),
        at_or_zero(law.ff, k, law.dim);
    const Mat Q = Ex.transpose() * cs.l[k] * Ex + Em.transpose() * cs.lbar[k] * Em +
                  U.transpose() * cs.r[k] * U;
    const Mat Pz = S * P * S.transpose();
    J += ((k == 0 || k == N) ? 0.5 * dt : dt) * (Q * Pz).trace();
    if (k == N) {
      J += (cs.g * Pz.block(cs.offset, cs.offset, cs.n, cs.n)).trace();
      break;
    }
    Mat F, G;
    drift_diffusion(m, k, &F, &G);
    // s' = s + F z dt + G z dW, M' = M + dt (s + s') / 2.
    Mat A = Mat::Identity(zd, zd), B = Mat::Zero(zd, zd);
    A.topRows(d) += dt * F * S;
    A.block(d, 0, d, d) += dt * Mat::Identity(d, d);
    A.middleRows(d, d) += 0.5 * dt * dt * F * S;
    B.topRows(d) = G * S;
    B.middleRows(d, d) = 0.5 * dt * G * S;
    P = A * P * A.transpose() + dt * B * P * B.transpose();
  }
  return J;
}

Mat continuous_second_moment(const LinearSdeModel& m, int substeps) {
  const int N = m.grid.steps(), d = m.dim, zd = 2 * d + 1;
  const double dt = m.grid.dt();
  if (m.memory != MemoryKind::Integral)
    throw ConfigError("continuous_second_moment: integral memory only");
  auto generators = [&](int k, Mat* Ft, Mat* Gt) {
    Mat F, G;
    drift_diffusion(m, k, &F, &G);
    *Ft = Mat::Zero(zd, zd);
    *Gt = Mat::Zero(zd, zd);
    Ft->topRows(d) = F;
    Ft->block(d, 0, d, d).setIdentity();
    Gt->topRows(d) = G;
  };
  Vec z0 = Vec::Zero(zd);
  z0.head(d) = m.s0;
  z0(zd - 1) = 1.0;
  Mat P = z0 * z0.transpose();
  const double h = dt / substeps;
  for (int k = 0; k < N; ++k) {
    Mat F0, G0, F1, G1;
    generators(k, &F0, &G0);
    generators(k + 1, &F1, &G1);
    auto rhs = [&](double s, const Mat& X) {
      const Mat F = (1.0 - s) * F0 + s * F1, G = (1.0 - s) * G0 + s * G1;
      return Mat(F * X + X * F.transpose() + G * X * G.transpose());
    };
    for (int j = 0; j < substeps; ++j) {
      const double s = static_cast<double>(j) / substeps, ds = 1.0 / substeps;
      const Mat k1 = rhs(s, P);
      const Mat k2 = rhs(s + 0.5 * ds, P + 0.5 * h * k1);
      const Mat k3 = rhs(s + 0.5 * ds, P + 0.5 * h * k2);
      const Mat k4 = rhs(s + ds, P + h * k3);
      P += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
  }
  return P.topLeftCorner(d, d);
}

ScalarBarred scalar_barred(const ScalarGame& g, double P) {
  const double xi = g.r1 + g.d1 * g.d1 * P;
  if (xi == 0.0) throw ConditioningError("scalar_barred: Xi1 = 0");
  const double inv = 1.0 / xi;
  ScalarBarred b;
  b.abar1 = g.a1;
  b.abar2 = g.a2 - g.b1 * inv * g.d1 * P * g.c2;
  b.bbar = g.b2 - g.b1 * inv * g.d1 * P * g.d2;
  b.cbar1 = g.c1;
  b.cbar2 = g.c2 - g.d1 * inv * g.d1 * P * g.c2;
  b.dbar = g.d2 - g.d1 * inv * g.d1 * P * g.d2;
  b.fbar = -g.b1 * inv * g.b1;
  b.hbar = -g.b1 * inv * g.d1;
  b.kbar = -g.d1 * inv * g.b1;
  b.pbar = -g.d1 * inv * g.d1;
  b.qbar1 = -g.c2 * P * (1.0 - g.d1 * inv * g.d1 * P) * g.d2;
  b.qbar2 = -P * g.b2 - g.c1 * P * g.d2;
  return b;
}

BlockSpec scalar_stacked(const ScalarBarred& b, double P2, double xi2, double xi3) {
  auto m2 = [](double a, double c, double d, double e) {
    Mat m(2, 2);
    m << a, c, d, e;
    return m;
  };
  auto col = [](double a, double c) {
    Mat m(2, 1);
    m << a, c;
    return m;
  };
  BlockSpec s;
  s.A1 = m2(b.abar1, b.fbar * P2 + b.kbar * P2 * b.cbar1, 0.0, b.abar1);
  s.A2 = m2(b.abar2, b.kbar * P2 * b.cbar2, 0.0, b.abar2);
  s.Abar1 = m2(b.cbar1, b.hbar * P2 + b.pbar * P2 * b.cbar1, 0.0, b.cbar1);
  s.Abar2 = m2(b.cbar2, b.pbar * P2 * b.cbar2, 0.0, b.cbar2);
  s.B = m2(b.kbar * P2 * b.kbar, b.fbar, b.fbar, 0.0);
  s.C = m2(b.kbar * P2 * b.pbar, b.kbar, b.hbar, 0.0);
  s.Cbar = m2(b.pbar * P2 * b.pbar, b.pbar, b.pbar, 0.0);
  s.D = col(b.kbar * P2 * b.dbar, b.bbar);
  s.Dbar = col(b.pbar * P2 * b.dbar, b.dbar);
  s.G1 = col(b.qbar1, -b.cbar2 * P2 * b.dbar);
  s.G2 = col(b.qbar2, 0.0);
  s.H = m2(0.0, 0.0, 0.0, -b.cbar2 * P2 * b.dbar / xi2 * b.dbar * P2 * b.cbar2);
  s.xi3 = Mat::Constant(1, 1, xi3);
  return s;
}

AdvertisingGains advertising_gains(const AdvertisingGainInput& in) {
  const double c = in.c1, d = in.d1, pb = in.pi_bar, P1 = in.pi1, P2 = in.pi2;
  const double g1 = in.gamma(0, 0), g2 = in.gamma(0, 1), g3 = in.gamma(1, 1);
  const double w1 = in.window(0, 0), w2 = in.window(0, 1), w3 = in.window(1, 1);
  const double b1 = -c * d;  // b1 + c1 d1 = 0
  const double xi1 = pb * d * d;

  // First row of [I - Gamma Cbar]^{-1}.
  const double delta = (g2 + pb) * (g2 + pb) - g1 * g3 - g1 * P2;
  const double r0 = (g2 * pb + pb * pb) / delta;
  const double r1 = -g1 * pb / delta;
  const double rg0 = r0 * g1 + r1 * g2, rg1 = r0 * g2 + r1 * g3;
  // Abar1 + C' Gamma = (c / pb) E.
  const double e00 = g2 + pb - g1 * P2 / pb, e01 = g3 - g2 * P2 / pb;
  const double e10 = g1, e11 = g2 + pb;
  const double x0 = c / pb * (rg0 * e00 + rg1 * e10);
  const double x1 = c / pb * (rg0 * e01 + rg1 * e11);

  const double bbar = in.b2 + c * in.d2 * P1 / pb;
  const double dbar = in.d2 * (1.0 - P1 / pb);
  const double D0 = c / pb * P2 * dbar, D1 = bbar;
  const double q2 = -P1 * (in.b2 + c * in.d2);
  const double kappa = d * P1 * in.d2;

  AdvertisingGains out;
  out.L1 << 0.0, 0.0;
  out.L2 << (-b1 * g1 - d * x0) / xi1, (-b1 * g2 - d * x1) / xi1;

  // First row of [I - Gamma Cbar]^{-1} Gamma C' (C is symmetric here).
  const double rc0 = -rg0 * c * P2 / (pb * pb) + rg1 * c / pb;
  const double rc1 = rg0 * c / pb;
  const double v0 = kappa / in.xi3 * D0 - b1 - d * rc0;
  const double v1 = kappa / in.xi3 * D1 - d * rc1;
  const double s0 = D0 * g1 + D1 * g2 - q2, s1 = D0 * g2 + D1 * g3;
  out.L3 << (kappa / in.xi3 * s0 - (v0 * w1 + v1 * w2)) / xi1,
      (kappa / in.xi3 * s1 - (v0 * w2 + v1 * w3)) / xi1;

  out.Lu2 << -(s0 - (D0 * w1 + D1 * w2)) / in.xi3, -(s1 - (D0 * w2 + D1 * w3)) / in.xi3;
  return out;
}

}  // namespace emlq::oracle
