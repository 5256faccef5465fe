#include "emlq/simulate.hpp"

#include "emlq/adjoint.hpp"
#include "emlq/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <exception>
#include <random>
#include <sstream>
#include <thread>

namespace emlq {

namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

Mat inverse_or_throw(const Mat& m, const char* what, int k) {
  Mat inv;
  if (!checked_inverse(m, &inv)) {
    std::ostringstream msg;
    msg << what << " is singular at node " << k;
    throw ConditioningError(msg.str());
  }
  return inv;
}

Mat hcat(const Mat& left, const Mat& right) {
  Mat out(left.rows(), left.cols() + right.cols());
  out << left, right;
  return out;
}

// y = A x for a row-major rows x cols block. Positive template arguments fix
// the sizes at compile time.
template <int R, int K>
inline void matvec(const double* A, const double* x, double* y, int rows, int cols) {
  const int r = R > 0 ? R : rows;
  const int c = K > 0 ? K : cols;
  for (int i = 0; i < r; ++i) {
    double acc = 0.0;
    const double* row = A + i * c;
    for (int j = 0; j < c; ++j) acc += row[j] * x[j];
    y[i] = acc;
  }
}

template <int K>
inline double quad_form(const double* Q, const double* x, int n) {
  const int m = K > 0 ? K : n;
  double acc = 0.0;
  for (int i = 0; i < m; ++i) {
    double row = 0.0;
    for (int j = 0; j < m; ++j) row += Q[i * m + j] * x[j];
    acc += x[i] * row;
  }
  return acc;
}

// Everything acts on z = (s, M, 1), so each step is two small mat-vecs and
// one quadratic form per cost.
struct FlatControl {
  int dim = 0;
  std::vector<double> U;  // dim x (2d+1) per node
};

struct FlatCost {
  std::vector<double> Q;  // (2d+1) x (2d+1) per node
  std::vector<double> g;  // d x d
};

struct FlatModel {
  int N = 0, dim = 0;
  double dt = 0.0;
  std::vector<double> F, G, s0;  // d x (2d+1) per node
  std::vector<FlatControl> controls;
  std::vector<FlatCost> costs;
  bool average = false;
};

void append_row_major(const Mat& m, std::vector<double>& out) {
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
}

Mat check_shape(const Mat& m, int rows, int cols, const char* what) {
  if (m.rows() != rows || m.cols() != cols)
    throw ShapeError(std::string("simulate: shape mismatch in ") + what);
  return m;
}

Mat node_or_zero(const std::vector<Mat>& v, int k, int rows, int cols, const char* what) {
  if (v.empty()) return Mat::Zero(rows, cols);
  if (static_cast<int>(v.size()) <= k)
    throw ShapeError(std::string("simulate: ") + what + " needs one sample per node");
  return check_shape(v[k], rows, cols, what);
}

Vec node_or_zero(const std::vector<Vec>& v, int k, int rows, const char* what) {
  if (v.empty()) return Vec::Zero(rows);
  if (static_cast<int>(v.size()) <= k)
    throw ShapeError(std::string("simulate: ") + what + " needs one sample per node");
  if (v[k].size() != rows) throw ShapeError(std::string("simulate: shape mismatch in ") + what);
  return v[k];
}

FlatModel flatten_model(const LinearSdeModel& m) {
  FlatModel out;
  const int N = m.grid.steps();
  const int d = m.dim;
  const int z = 2 * d + 1;
  if (d <= 0 || m.s0.size() != d) throw ShapeError("simulate: bad state dimension");
  out.N = N;
  out.dim = d;
  out.dt = m.grid.dt();
  out.s0.assign(m.s0.data(), m.s0.data() + d);
  out.average = m.memory == MemoryKind::Average;
  std::vector<Mat> U(m.controls.size());
  out.controls.resize(m.controls.size());
  out.costs.resize(m.costs.size());
  for (std::size_t c = 0; c < m.costs.size(); ++c) {
    const CostSpec& spec = m.costs[c];
    if (spec.control < 0 || spec.control >= static_cast<int>(m.controls.size()))
      throw ShapeError("simulate: cost refers to a missing control");
    if (spec.offset < 0 || spec.offset + spec.n > d)
      throw ShapeError("simulate: cost block outside the state");
    Mat E = Mat::Zero(spec.n, d);
    E.middleCols(spec.offset, spec.n).setIdentity();
    append_row_major(E.transpose() * check_shape(spec.g, spec.n, spec.n, "terminal weight") * E,
                     out.costs[c].g);
  }
  for (int k = 0; k <= N; ++k) {
    Mat Fz(d, z), Gz(d, z);
    Fz << node_or_zero(m.Fx, k, d, d, "Fx"), node_or_zero(m.Fm, k, d, d, "Fm"),
        node_or_zero(m.f, k, d, "f");
    Gz << node_or_zero(m.Gx, k, d, d, "Gx"), node_or_zero(m.Gm, k, d, d, "Gm"),
        node_or_zero(m.g, k, d, "g");
    append_row_major(Fz, out.F);
    append_row_major(Gz, out.G);
    for (std::size_t c = 0; c < m.controls.size(); ++c) {
      const ControlLaw& law = m.controls[c];
      U[c].resize(law.dim, z);
      U[c] << node_or_zero(law.Ux, k, law.dim, d, "control Ux"),
          node_or_zero(law.Um, k, law.dim, d, "control Um"),
          node_or_zero(law.ff, k, law.dim, "control ff");
      out.controls[c].dim = law.dim;
      append_row_major(U[c], out.controls[c].U);
    }
    for (std::size_t c = 0; c < m.costs.size(); ++c) {
      const CostSpec& spec = m.costs[c];
      const int n = spec.n;
      const int kc = m.controls[spec.control].dim;
      Mat Ex = Mat::Zero(n, z), Em = Mat::Zero(n, z);
      Ex.middleCols(spec.offset, n).setIdentity();
      Em.middleCols(d + spec.offset, n).setIdentity();
      const Mat Q = Ex.transpose() * node_or_zero(spec.l, k, n, n, "cost l") * Ex +
                    Em.transpose() * node_or_zero(spec.lbar, k, n, n, "cost lbar") * Em +
                    U[spec.control].transpose() * node_or_zero(spec.r, k, kc, kc, "cost r") *
                        U[spec.control];
      append_row_major(Q, out.costs[c].Q);
    }
  }
  return out;
}

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// D > 0 fixes the state dimension at compile time so the small loops unroll.
template <int D>
void run_path(const FlatModel& m, const SimulationOptions& opt, int p,
              std::uint64_t master, PathEnsemble& ens) {
  constexpr int ZD = D > 0 ? 2 * D + 1 : 0;
  const int N = m.N, d = D > 0 ? D : m.dim;
  const int zd = 2 * d + 1;
  const std::size_t fstride = static_cast<std::size_t>(d) * zd;
  const std::size_t qstride = static_cast<std::size_t>(zd) * zd;
  const double dt = m.dt;
  const int sub = opt.noise_substeps;
  const double sub_scale = std::sqrt(dt / sub);
  std::mt19937_64 rng(path_seed(master, static_cast<std::uint64_t>(p)));
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<double> s(m.s0), M(d, 0.0), z(zd, 0.0), drift(d), diff(d);
  std::vector<std::vector<double>> u(m.controls.size());
  for (std::size_t c = 0; c < m.controls.size(); ++c) u[c].assign(m.controls[c].dim, 0.0);
  std::vector<double> cost(m.costs.size(), 0.0);
  std::uint64_t digest = 0xcbf29ce484222325ULL;
  const int C = static_cast<int>(ens.checkpoints.size());
  int next_cp = 0;
  const bool store = opt.store_paths;
  z[2 * d] = 1.0;

  for (int k = 0; k <= N; ++k) {
    const double scale = m.average ? 1.0 / std::max(k * dt, dt) : 1.0;
    for (int i = 0; i < d; ++i) {
      z[i] = s[i];
      z[d + i] = M[i] * scale;
    }
    const double w = (k == 0 || k == N) ? 0.5 * dt : dt;
    for (std::size_t c = 0; c < m.costs.size(); ++c) {
      const FlatCost& fc = m.costs[c];
      cost[c] += w * quad_form<ZD>(fc.Q.data() + k * qstride, z.data(), zd);
      if (k == N) cost[c] += quad_form<D>(fc.g.data(), s.data(), d);
    }
    const bool at_cp = next_cp < C && ens.checkpoints[next_cp] == k;
    if (at_cp || store) {
      for (std::size_t c = 0; c < m.controls.size(); ++c) {
        const FlatControl& fc = m.controls[c];
        matvec<0, ZD>(fc.U.data() + static_cast<std::size_t>(k) * fc.dim * zd, z.data(),
                      u[c].data(), fc.dim, zd);
      }
    }
    if (at_cp) {
      const std::size_t base = (static_cast<std::size_t>(p) * C + next_cp) * d;
      std::copy(s.begin(), s.end(), ens.state_at.begin() + base);
      std::copy(z.begin() + d, z.begin() + 2 * d, ens.memory_at.begin() + base);
      for (std::size_t c = 0; c < u.size(); ++c) {
        const std::size_t cb = (static_cast<std::size_t>(p) * C + next_cp) * u[c].size();
        std::copy(u[c].begin(), u[c].end(), ens.control_at[c].begin() + cb);
      }
      ++next_cp;
    }
    if (store) {
      ens.paths[p][k] = Eigen::Map<const Vec>(s.data(), d);
      ens.memories[p][k] = Eigen::Map<const Vec>(z.data() + d, d);
      for (std::size_t c = 0; c < u.size(); ++c)
        ens.control_paths[c][p][k] =
            Eigen::Map<const Vec>(u[c].data(), static_cast<int>(u[c].size()));
    }
    if (k == N) break;

    double dW = 0.0;
    if (!opt.noise_free) {
      for (int j = 0; j < sub; ++j) dW += normal(rng);
      dW *= sub_scale;
      std::uint64_t bits;
      std::memcpy(&bits, &dW, sizeof bits);
      digest = (digest ^ bits) * 0x100000001b3ULL;
    }
    matvec<D, ZD>(m.F.data() + k * fstride, z.data(), drift.data(), d, zd);
    matvec<D, ZD>(m.G.data() + k * fstride, z.data(), diff.data(), d, zd);
    bool finite = true;
    for (int i = 0; i < d; ++i) {
      const double next = s[i] + drift[i] * dt + diff[i] * dW;
      M[i] += 0.5 * dt * (s[i] + next);
      s[i] = next;
      finite = finite && std::isfinite(next);
    }
    if (!finite) {
      std::ostringstream msg;
      msg << "simulation diverged on path " << p << " at step " << k + 1;
      throw DivergenceError(msg.str());
    }
  }
  for (std::size_t c = 0; c < cost.size(); ++c) ens.cost[c][p] = cost[c];
  ens.digest[p] = digest;
}

std::vector<Mat> head(const MatrixFunction& f, int N) {
  return std::vector<Mat>(f.values().begin(), f.values().begin() + N + 1);
}

Mat law_at(const std::vector<Mat>& m, int k, int rows, int cols) {
  return m.empty() ? Mat::Zero(rows, cols) : m[k];
}

Vec ff_at(const std::vector<Vec>& v, int k, int rows) {
  return v.empty() ? Vec::Zero(rows) : v[k];
}

}  // namespace

std::uint64_t path_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(splitmix64(master) ^ (index * 0xD1B54A32D192ED03ULL));
}

Eigen::VectorXd PathEnsemble::state(int path, int cp) const {
  const std::size_t C = checkpoints.size();
  return Eigen::Map<const Vec>(state_at.data() + (path * C + cp) * dim, dim);
}

Eigen::VectorXd PathEnsemble::memory(int path, int cp) const {
  const std::size_t C = checkpoints.size();
  return Eigen::Map<const Vec>(memory_at.data() + (path * C + cp) * dim, dim);
}

Eigen::VectorXd PathEnsemble::control(int which, int path, int cp) const {
  const std::size_t C = checkpoints.size();
  const int k = control_dims[which];
  return Eigen::Map<const Vec>(control_at[which].data() + (path * C + cp) * k, k);
}

PathEnsemble simulate(const LinearSdeModel& model, const SimulationOptions& opt) {
  if (opt.n_paths < 1) throw ConfigError("simulate: n_paths must be >= 1");
  if (opt.threads < 1) throw ConfigError("simulate: threads must be >= 1");
  if (opt.noise_substeps < 1) throw ConfigError("simulate: noise_substeps must be >= 1");
  if (opt.checkpoints < 2) throw ConfigError("simulate: need at least 2 checkpoints");
  const FlatModel flat = flatten_model(model);
  const int N = flat.N;
  const int P = opt.n_paths;

  PathEnsemble ens;
  ens.grid = model.grid;
  ens.dim = flat.dim;
  ens.n_paths = P;
  ens.seed = opt.seed;
  for (int c = 0; c < opt.checkpoints; ++c) {
    const int k = static_cast<int>(std::llround(static_cast<double>(c) * N / (opt.checkpoints - 1)));
    if (ens.checkpoints.empty() || ens.checkpoints.back() != k) ens.checkpoints.push_back(k);
  }
  const std::size_t C = ens.checkpoints.size();
  ens.state_at.assign(P * C * flat.dim, 0.0);
  ens.memory_at.assign(P * C * flat.dim, 0.0);
  for (const auto& c : flat.controls) {
    ens.control_dims.push_back(c.dim);
    ens.control_at.emplace_back(P * C * c.dim, 0.0);
  }
  ens.cost.assign(flat.costs.size(), std::vector<double>(P, 0.0));
  ens.digest.assign(P, 0);
  if (opt.store_paths) {
    ens.paths.assign(P, std::vector<Vec>(N + 1));
    ens.memories.assign(P, std::vector<Vec>(N + 1));
    ens.control_paths.assign(flat.controls.size(),
                             std::vector<std::vector<Vec>>(P, std::vector<Vec>(N + 1)));
  }

  const int T = std::min(opt.threads, P);
  std::vector<std::exception_ptr> errors(T);
  std::vector<int> error_path(T, -1);
  auto worker = [&](int w) {
    for (int p = w; p < P; p += T) {
      try {
        if (flat.dim == 1)
          run_path<1>(flat, opt, p, opt.seed, ens);
        else if (flat.dim == 2)
          run_path<2>(flat, opt, p, opt.seed, ens);
        else
          run_path<0>(flat, opt, p, opt.seed, ens);
      } catch (...) {
        errors[w] = std::current_exception();
        error_path[w] = p;
        return;
      }
    }
  };
  if (T == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < T; ++w) pool.emplace_back(worker, w);
    for (auto& t : pool) t.join();
  }
  // Report the failure with the lowest path index so the message does not
  // depend on scheduling.
  int first = -1;
  for (int w = 0; w < T; ++w) {
    if (error_path[w] >= 0 && (first < 0 || error_path[w] < error_path[first])) first = w;
  }
  if (first >= 0) std::rethrow_exception(errors[first]);
  return ens;
}

LinearSdeModel open_loop_model(const GameCoefficients& g, const ControlLaw& u1,
                               const ControlLaw& u2) {
  const int N = g.grid.steps();
  const int n = g.n;
  if (u1.dim != g.k1 || u2.dim != g.k2)
    throw ShapeError("open_loop_model: control dimensions do not match the game");
  LinearSdeModel m;
  m.grid = g.grid;
  m.dim = n;
  m.s0 = g.x0;
  m.Fx.resize(N + 1);
  m.Fm.resize(N + 1);
  m.Gx.resize(N + 1);
  m.Gm.resize(N + 1);
  m.f.resize(N + 1);
  m.g.resize(N + 1);
  for (int k = 0; k <= N; ++k) {
    const Mat U1x = law_at(u1.Ux, k, g.k1, n), U1m = law_at(u1.Um, k, g.k1, n);
    const Mat U2x = law_at(u2.Ux, k, g.k2, n), U2m = law_at(u2.Um, k, g.k2, n);
    const Vec f1 = ff_at(u1.ff, k, g.k1), f2 = ff_at(u2.ff, k, g.k2);
    m.Fx[k] = g.a1[k] + g.b1[k] * U1x + g.b2[k] * U2x;
    m.Fm[k] = g.a2[k] + g.b1[k] * U1m + g.b2[k] * U2m;
    m.f[k] = g.b1[k] * f1 + g.b2[k] * f2;
    m.Gx[k] = g.c1[k] + g.d1[k] * U1x + g.d2[k] * U2x;
    m.Gm[k] = g.c2[k] + g.d1[k] * U1m + g.d2[k] * U2m;
    m.g[k] = g.d1[k] * f1 + g.d2[k] * f2;
  }
  m.controls = {u1, u2};
  CostSpec c1{0, n, 0, head(g.l1, N), head(g.lbar1, N), head(g.r1, N), g.g1};
  CostSpec c2{0, n, 1, head(g.l2, N), head(g.lbar2, N), head(g.r2, N), g.g2};
  m.costs = {std::move(c1), std::move(c2)};
  return m;
}

PathEnsemble simulate_open_loop(const GameCoefficients& g, const std::vector<Vec>& u1,
                                const std::vector<Vec>& u2,
                                const SimulationOptions& opt) {
  ControlLaw l1, l2;
  l1.dim = g.k1;
  l1.ff = u1;
  l2.dim = g.k2;
  l2.ff = u2;
  return simulate(open_loop_model(g, l1, l2), opt);
}

FollowerGains follower_gains(const GameCoefficients& g, const MatrixFunction& pi1,
                             const MatrixFunction& xi1) {
  const int N = g.grid.steps();
  std::vector<Mat> kx(N + 1), ke(N + 1), keb(N + 1), ku(N + 1);
  for (int k = 0; k <= N; ++k) {
    const Mat inv = inverse_or_throw(xi1[k], "follower_gains: Xi1", k);
    const Mat d1tP = g.d1[k].transpose() * pi1[k];
    kx[k] = -inv * d1tP * g.c2[k];
    ke[k] = -inv * g.b1[k].transpose();
    keb[k] = -inv * g.d1[k].transpose();
    ku[k] = -inv * d1tP * g.d2[k];
  }
  FollowerGains out;
  out.Kx = MatrixFunction(g.grid, std::move(kx));
  out.Keta = MatrixFunction(g.grid, std::move(ke));
  out.Keta_bar = MatrixFunction(g.grid, std::move(keb));
  out.Ku = MatrixFunction(g.grid, std::move(ku));
  return out;
}

ControlLaw follower_law(const GameCoefficients& g, const MatrixFunction& pi1,
                        const MatrixFunction& xi1, const AdjointSolution& eta1,
                        const std::vector<Vec>& u2) {
  const int N = g.grid.steps();
  if (static_cast<int>(u2.size()) != N + 1)
    throw ShapeError("follower_law: u2 needs N+1 samples");
  const FollowerGains K = follower_gains(g, pi1, xi1);
  ControlLaw law;
  law.dim = g.k1;
  law.Um.resize(N + 1);
  law.ff.resize(N + 1);
  for (int k = 0; k <= N; ++k) {
    law.Um[k] = K.Kx[k];
    law.ff[k] = K.Keta[k] * eta1.at(k) + K.Ku[k] * u2[k];
  }
  return law;
}

ControlLaw open_loop_law(int dim, std::vector<Vec> values) {
  ControlLaw law;
  law.dim = dim;
  law.ff = std::move(values);
  return law;
}

GainNode gains_at(const GameCoefficients& g, const RiccatiSolution& ric,
                  const StackedBlocks& blocks, int k, const Mat& G, const Mat& W,
                  double cond_cap) {
  const int n = g.n;
  const Mat xi1_inv = inverse_or_throw(ric.xi1[k], "gains: Xi1", k);
  const Mat xi3_inv = inverse_or_throw(ric.xi3[k], "gains: Xi3", k);
  const Mat& C = blocks.C[k];
  const Mat& D = blocks.D[k];
  const Mat G2t = blocks.G2[k].transpose();
  const Mat R = resolvent(G, blocks.Cbar[k], cond_cap, k) * G;
  const Mat& P1 = ric.pi1[k];
  const Mat b1row = hcat(g.b1[k].transpose(), Mat::Zero(g.k1, n));
  const Mat d1row = hcat(g.d1[k].transpose(), Mat::Zero(g.k1, n));
  const Mat d1Pd2 = g.d1[k].transpose() * P1 * g.d2[k];
  GainNode out;
  out.L1 = -xi1_inv * hcat(Mat::Zero(g.k1, n), g.d1[k].transpose() * P1 * g.c2[k]);
  out.L2 = xi1_inv * (-b1row * G - d1row * R * (blocks.Abar1[k] + C.transpose() * G));
  out.L3 = xi1_inv * (d1Pd2 * xi3_inv * (D.transpose() * G - G2t) -
                      (d1Pd2 * xi3_inv * D.transpose() - b1row - d1row * R * C.transpose()) * W);
  out.Lu2 = -xi3_inv * (D.transpose() * G - G2t - D.transpose() * W);
  return out;
}

FeedbackGains synthesize_gains(const GameCoefficients& g, const RiccatiSolution& ric,
                               const StackedBlocks& blocks, const GammaLambdaSolution& gl,
                               double cond_cap) {
  if (!gl.converged) {
    std::ostringstream msg;
    msg << "synthesize_gains: Gamma/Lambda did not converge (residual " << gl.residual
        << " after " << gl.iterations << " iterations";
    if (!gl.diagnostics.empty()) msg << "; " << gl.diagnostics;
    msg << ")";
    throw ConvergenceError(msg.str());
  }
  const int N = g.grid.steps();
  std::vector<Mat> L1(N + 1), L2(N + 1), L3(N + 1), Lu(N + 1);
  for (int k = 0; k <= N; ++k) {
    GainNode node = gains_at(g, ric, blocks, k, gl.gamma[k], gl.window[k], cond_cap);
    L1[k] = std::move(node.L1);
    L2[k] = std::move(node.L2);
    L3[k] = std::move(node.L3);
    Lu[k] = std::move(node.Lu2);
  }
  FeedbackGains out;
  out.L1 = MatrixFunction(g.grid, std::move(L1));
  out.L2 = MatrixFunction(g.grid, std::move(L2));
  out.L3 = MatrixFunction(g.grid, std::move(L3));
  out.Lu2 = MatrixFunction(g.grid, std::move(Lu));
  out.theta = gl.theta;
  return out;
}

LinearSdeModel closed_loop_model(const GameCoefficients& g, const StackedBlocks& b,
                                 const GammaLambdaSolution& gl, const FeedbackGains& gains,
                                 double cond_cap) {
  const int N = g.grid.steps();
  const int n = g.n;
  const int d = 2 * n;
  LinearSdeModel m;
  m.grid = g.grid;
  m.dim = d;
  m.s0 = Vec::Zero(d);
  m.s0.tail(n) = g.x0;
  m.Fx.resize(N + 1);
  m.Fm.resize(N + 1);
  m.Gx.resize(N + 1);
  m.Gm.resize(N + 1);
  ControlLaw u1, u2;
  u1.dim = g.k1;
  u2.dim = g.k2;
  u1.Ux.resize(N + 1);
  u1.Um.resize(N + 1);
  u2.Ux.resize(N + 1);
  for (int k = 0; k <= N; ++k) {
    const Mat& G = gl.gamma[k];
    const Mat GW = G - gl.window[k];
    const Mat Rinv = resolvent(G, b.Cbar[k], cond_cap, k);
    const Mat P = Rinv * G * (b.Abar1[k] + b.C[k].transpose() * GW);
    const Mat& L = gains.Lu2[k];
    m.Fx[k] = b.A1[k] + b.B[k] * GW + b.C[k] * P + b.D[k] * L;
    m.Fm[k] = b.A2[k];
    m.Gx[k] = b.Abar1[k] + b.C[k].transpose() * GW + b.Cbar[k] * P + b.Dbar[k] * L;
    m.Gm[k] = b.Abar2[k];
    u1.Ux[k] = gains.L2[k] + gains.L3[k];
    u1.Um[k] = gains.L1[k];
    u2.Ux[k] = L;
  }
  m.controls = {std::move(u1), std::move(u2)};
  CostSpec c1{n, n, 0, head(g.l1, N), head(g.lbar1, N), head(g.r1, N), g.g1};
  CostSpec c2{n, n, 1, head(g.l2, N), head(g.lbar2, N), head(g.r2, N), g.g2};
  m.costs = {std::move(c1), std::move(c2)};
  return m;
}

PathEnsemble simulate_closed_loop(const GameCoefficients& g, const StackedBlocks& b,
                                  const GammaLambdaSolution& gl, const FeedbackGains& gains,
                                  const SimulationOptions& opt) {
  return simulate(closed_loop_model(g, b, gl, gains), opt);
}

StackedBlocks zero_diffusion(const StackedBlocks& blocks) {
  StackedBlocks out = blocks;
  const TimeGrid& grid = blocks.A1.grid();
  auto zero_like = [&](const MatrixFunction& f) {
    return MatrixFunction(grid, f.rows(), f.cols());
  };
  out.Abar1 = zero_like(blocks.Abar1);
  out.Abar2 = zero_like(blocks.Abar2);
  out.C = zero_like(blocks.C);
  out.Cbar = zero_like(blocks.Cbar);
  out.Dbar = zero_like(blocks.Dbar);
  return out;
}

std::vector<Vec> psi_backward(const StackedBlocks& b, const std::vector<Vec>& phi,
                              const std::vector<Vec>& u2, StarVariant star) {
  const TimeGrid& grid = b.A1.grid();
  const int N = grid.steps();
  const int d = b.dim();
  if (static_cast<int>(phi.size()) != N + 1 || static_cast<int>(u2.size()) != N + 1)
    throw ShapeError("psi_backward: paths need N+1 samples");
  const std::vector<Vec> mem = cumulative_trapezoid(phi, grid.dt());
  std::vector<Mat> A(N + 1);
  std::vector<Vec> h(N + 1);
  AnticipatedTerm memory_term, self, source;
  self.Z.assign(N + 1, -Mat::Identity(d, d));
  self.P.resize(N + 1);
  memory_term.Z.assign(N + 1, Mat::Identity(d, d));
  memory_term.q.resize(N + 1);
  source.Z.assign(N + 1, Mat::Identity(d, d));
  source.q.resize(N + 1);
  for (int k = 0; k <= N; ++k) {
    A[k] = -b.A1[k].transpose();
    h[k] = b.G2[k] * u2[k];
    self.P[k] = b.A2[k].transpose();
    memory_term.q[k] = b.H[k] * mem[k];
    source.q[k] = b.G1[k] * u2[k];
  }
  const MatrixFunction psi = solve_anticipated_linear(
      grid, A, h, {std::move(self), std::move(memory_term), std::move(source)}, star);
  std::vector<Vec> out(N + 1);
  for (int k = 0; k <= N; ++k) out[k] = psi[k].col(0);
  return out;
}

}  // namespace emlq
