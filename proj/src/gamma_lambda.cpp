#include "emlq/gamma_lambda.hpp"

#include "emlq/errors.hpp"
#include "emlq/riccati.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace emlq {

namespace {

using Mat = Eigen::MatrixXd;
// Stack-allocated storage for the 2n x 2n blocks; 2n <= 20 covers n <= 10.
using SmallMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 20, 20>;

template <typename M>
M flow_rhs(const M& X, const M& A) {
  M out = -X * A;
  out.noalias() -= A.transpose() * X;
  return out;
}

// RK4 step of X' = -(X A + A' X) from t_{j+1} to t_j.
template <typename M>
M flow_step(const M& X, const M& A_left, const M& A_mid, const M& A_right,
            double dt) {
  const double h = -dt;
  const M k1 = flow_rhs<M>(X, A_right);
  const M k2 = flow_rhs<M>(X + 0.5 * h * k1, A_mid);
  const M k3 = flow_rhs<M>(X + 0.5 * h * k2, A_mid);
  const M k4 = flow_rhs<M>(X + h * k3, A_left);
  M out = X + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  return 0.5 * (out + out.transpose());
}

template <typename M>
void propagate_into(TriangleField& field, const std::vector<Mat>& diagonal,
                    const MatrixFunction& A1) {
  const TimeGrid& grid = field.grid();
  const int N = grid.steps();
  const double dt = grid.dt();
  std::vector<M> A(N + 1), A_mid(N);
  for (int j = 0; j <= N; ++j) A[j] = A1[j];
  for (int j = 0; j < N; ++j) A_mid[j] = 0.5 * (A[j] + A[j + 1]);
  int jmin = 0;
  for (int k = 0; k <= N; ++k) {
    while (field.row_end(jmin) < k) ++jmin;
    M X = diagonal[k];
    field.at(k, k) = X;
    for (int j = k - 1; j >= jmin; --j) {
      X = flow_step<M>(X, A[j], A_mid[j], A[j + 1], dt);
      if (!X.allFinite()) {
        std::ostringstream msg;
        msg << "propagate_lambda: overflow at t = " << grid.node(j)
            << ", s = " << grid.node(k);
        throw DivergenceError(msg.str());
      }
      field.at(j, k) = X;
    }
  }
}

struct Sweep {
  TriangleField lambda;
  std::vector<Mat> window;
  std::vector<Mat> diag_new;
  MatrixFunction gamma_new;
};

Sweep sweep(const StackedBlocks& blocks, const std::vector<Mat>& xi3_inv,
            const MatrixFunction& gamma, const std::vector<Mat>& diagonal,
            const ThetaPolicy& theta, double cond_cap) {
  const TimeGrid& grid = blocks.A1.grid();
  const int N = grid.steps();
  Sweep s;
  s.lambda = propagate_lambda(diagonal, blocks.A1, theta);
  s.window.resize(N + 1);
  s.diag_new.resize(N + 1);
  for (int j = 0; j <= N; ++j) {
    s.window[j] = s.lambda.window_integral(j);
    const OmegaNode om = omega_at(blocks, j, gamma[j], xi3_inv[j], cond_cap);
    s.diag_new[j] = symmetrize(diagonal_update(s.window[j], om));
  }
  s.gamma_new = integrate_gamma(s.lambda, blocks.A1);
  return s;
}

std::vector<Mat> inverse_xi3(const MatrixFunction& xi3) {
  const int N = xi3.grid().steps();
  std::vector<Mat> out(N + 1);
  for (int k = 0; k <= N; ++k) {
    if (!checked_inverse(xi3[k], &out[k])) {
      std::ostringstream msg;
      msg << "Gamma/Lambda: Xi3 is singular at node " << k;
      throw ConditioningError(msg.str());
    }
  }
  return out;
}

double max_abs(const std::vector<Mat>& v) {
  double m = 0.0;
  for (const auto& x : v) m = std::max(m, x.cwiseAbs().maxCoeff());
  return m;
}

double defect_of(const Sweep& s, const MatrixFunction& gamma,
                 const std::vector<Mat>& diagonal, std::vector<double>* node) {
  const int N = gamma.grid().steps();
  const double scale = std::max({1.0, gamma.max_abs(), max_abs(diagonal)});
  double worst = 0.0;
  if (node != nullptr) node->assign(N + 1, 0.0);
  for (int j = 0; j <= N; ++j) {
    const double d = std::max((s.diag_new[j] - diagonal[j]).cwiseAbs().maxCoeff(),
                              (s.gamma_new[j] - gamma[j]).cwiseAbs().maxCoeff()) /
                     scale;
    if (!std::isfinite(d)) return INFINITY;
    worst = std::max(worst, d);
    if (node != nullptr) (*node)[j] = d;
  }
  return worst;
}

}  // namespace

int ThetaPolicy::steps_at(int j, const TimeGrid& grid) const {
  if (kind == Kind::Full) return j;
  return static_cast<int>(std::llround(value / grid.dt()));
}

int ThetaPolicy::window_end(int j, const TimeGrid& grid) const {
  return std::min(j + steps_at(j, grid), grid.steps());
}

bool ThetaPolicy::source_active(int j, const TimeGrid& grid) const {
  return j + steps_at(j, grid) <= grid.steps();
}

std::string ThetaPolicy::label() const {
  if (kind == Kind::Full) return "full";
  std::ostringstream s;
  s.precision(17);
  s << "const:" << value;
  return s.str();
}

ThetaPolicy parse_theta(const std::string& s) {
  if (s == "full") return ThetaPolicy::full();
  if (s.rfind("const:", 0) == 0) {
    const std::string rest = s.substr(6);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(rest, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != rest.size() || rest.empty() || !(v >= 0.0) || !std::isfinite(v))
      throw ConfigError("theta: bad constant window '" + s + "'");
    return ThetaPolicy::constant(v);
  }
  throw ConfigError("theta must be 'full' or 'const:VALUE', got '" + s + "'");
}

TriangleField::TriangleField(const TimeGrid& grid, int dim, const ThetaPolicy& theta)
    : grid_(grid), dim_(dim), theta_(theta) {
  const int N = grid.steps();
  row_end_.resize(N + 1);
  offset_.resize(N + 2);
  offset_[0] = 0;
  const std::size_t block = static_cast<std::size_t>(dim) * dim;
  for (int j = 0; j <= N; ++j) {
    row_end_[j] = theta.window_end(j, grid);
    offset_[j + 1] = offset_[j] + block * (row_end_[j] - j + 1);
  }
  data_.assign(offset_[N + 1], 0.0);
}

Eigen::Map<Eigen::MatrixXd> TriangleField::at(int j, int k) {
  return Eigen::Map<Eigen::MatrixXd>(
      data_.data() + offset_[j] + static_cast<std::size_t>(k - j) * dim_ * dim_,
      dim_, dim_);
}

Eigen::Map<const Eigen::MatrixXd> TriangleField::at(int j, int k) const {
  return Eigen::Map<const Eigen::MatrixXd>(
      data_.data() + offset_[j] + static_cast<std::size_t>(k - j) * dim_ * dim_,
      dim_, dim_);
}

Eigen::MatrixXd TriangleField::window_integral(int j) const {
  Mat sum = Mat::Zero(dim_, dim_);
  const int end = row_end_[j];
  if (end == j) return sum;
  const double h = grid_.dt();
  sum += 0.5 * h * (at(j, j) + at(j, end));
  for (int k = j + 1; k < end; ++k) sum += h * at(j, k);
  return sum;
}

double TriangleField::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

TriangleField propagate_lambda(const std::vector<Eigen::MatrixXd>& diagonal,
                               const MatrixFunction& A1, const ThetaPolicy& theta) {
  const TimeGrid& grid = A1.grid();
  const int N = grid.steps();
  const int dim = A1.rows();
  if (static_cast<int>(diagonal.size()) < N + 1)
    throw ShapeError("propagate_lambda: need one diagonal sample per node");
  for (int k = 0; k <= N; ++k) {
    if (diagonal[k].rows() != dim || diagonal[k].cols() != dim)
      throw ShapeError("propagate_lambda: diagonal shape mismatch");
  }
  TriangleField field(grid, dim, theta);
  if (dim <= 20)
    propagate_into<SmallMat>(field, diagonal, A1);
  else
    propagate_into<Mat>(field, diagonal, A1);
  return field;
}

MatrixFunction integrate_gamma(const TriangleField& lambda, const MatrixFunction& A1) {
  const TimeGrid& grid = lambda.grid();
  const int N = grid.steps();
  const int dim = lambda.dim();
  const double dt = grid.dt();
  const ThetaPolicy& theta = lambda.theta();
  std::vector<Mat> source(N + 1, Mat::Zero(dim, dim));
  for (int j = 0; j <= N; ++j) {
    if (theta.source_active(j, grid)) source[j] = lambda.at(j, lambda.row_end(j));
  }
  std::vector<Mat> values(grid.size(), Mat::Zero(dim, dim));
  const Mat none;
  for (int j = N - 1; j >= 0; --j) {
    // The source switches off for t + theta > T; a step is driven only when
    // both of its ends are inside the active region.
    Mat l_left = Mat::Zero(dim, dim), l_right = l_left, l_mid = l_left;
    if (theta.source_active(j + 1, grid)) {
      l_left = -source[j];
      l_right = -source[j + 1];
      l_mid = 0.5 * (l_left + l_right);
    }
    Mat next = rk4_backward_step(values[j + 1], dt, A1[j], A1[j + 1], none, none,
                                 l_left, l_mid, l_right);
    values[j] = symmetrize(next);
    if (!values[j].allFinite()) {
      std::ostringstream msg;
      msg << "integrate_gamma: overflow at t = " << grid.node(j);
      throw DivergenceError(msg.str());
    }
  }
  return MatrixFunction(grid, std::move(values));
}

Eigen::MatrixXd diagonal_update(const Eigen::MatrixXd& W, const OmegaNode& om) {
  return W * om.omega1 + om.omega1.transpose() * W + W * om.omega2 * W + om.omega3;
}

double gamma_lambda_defect(const StackedBlocks& blocks, const MatrixFunction& xi3,
                           const MatrixFunction& gamma,
                           const std::vector<Eigen::MatrixXd>& diagonal,
                           const ThetaPolicy& theta, double cond_cap,
                           std::vector<double>* node_defect) {
  const Sweep s = sweep(blocks, inverse_xi3(xi3), gamma, diagonal, theta, cond_cap);
  return defect_of(s, gamma, diagonal, node_defect);
}

GammaLambdaSolution solve_gamma_lambda(const StackedBlocks& blocks,
                                       const MatrixFunction& xi3,
                                       const GammaLambdaOptions& opt) {
  if (!(opt.damping > 0.0 && opt.damping <= 1.0))
    throw ConfigError("Gamma/Lambda: damping must lie in (0, 1]");
  if (opt.max_iter < 1) throw ConfigError("Gamma/Lambda: max_iter must be >= 1");
  if (!(opt.tol > 0.0)) throw ConfigError("Gamma/Lambda: tol must be positive");
  const TimeGrid& grid = blocks.A1.grid();
  const int N = grid.steps();
  const int dim = blocks.dim();
  const std::vector<Mat> xi3_inv = inverse_xi3(xi3);

  GammaLambdaSolution out;
  out.theta = opt.theta;
  MatrixFunction gamma(grid, dim, dim);
  std::vector<Mat> diagonal(N + 1, Mat::Zero(dim, dim));
  int rising = 0;
  double previous = INFINITY;
  for (int it = 1; it <= opt.max_iter; ++it) {
    Sweep s;
    try {
      s = sweep(blocks, xi3_inv, gamma, diagonal, opt.theta, opt.cond_cap);
    } catch (const ConditioningError& e) {
      std::ostringstream msg;
      msg << e.what() << " (fixed-point iteration " << it << ")";
      throw ConditioningError(msg.str());
    }
    const double defect = defect_of(s, gamma, diagonal, &out.node_defect);
    out.trace.push_back(defect);
    out.iterations = it;
    out.residual = defect;
    out.gamma = gamma;
    out.lambda = std::move(s.lambda);
    out.window = std::move(s.window);
    if (defect <= opt.tol) {
      out.converged = true;
      return out;
    }
    if (!std::isfinite(defect)) {
      out.diagnostics = "defect is not finite";
      return out;
    }
    rising = defect > previous ? rising + 1 : 0;
    previous = defect;
    if (rising >= opt.oscillation_window) {
      std::ostringstream msg;
      msg << "defect increased on " << rising << " consecutive iterations";
      out.diagnostics = msg.str();
      return out;
    }
    const double lam = opt.damping;
    for (int j = 0; j <= N; ++j) {
      gamma[j] = symmetrize((1.0 - lam) * gamma[j] + lam * s.gamma_new[j]);
      diagonal[j] = symmetrize((1.0 - lam) * diagonal[j] + lam * s.diag_new[j]);
    }
  }
  std::ostringstream msg;
  msg << "no convergence after " << opt.max_iter << " iterations";
  out.diagnostics = msg.str();
  return out;
}

double relation_defect(const MatrixFunction& gamma,
                       const std::vector<Eigen::MatrixXd>& window,
                       const std::vector<std::vector<Eigen::VectorXd>>& phi,
                       const std::vector<std::vector<Eigen::VectorXd>>& psi,
                       const std::vector<int>& checkpoints) {
  if (phi.size() != psi.size())
    throw ShapeError("relation_defect: ensembles have different path counts");
  double worst = 0.0;
  for (std::size_t p = 0; p < phi.size(); ++p) {
    if (phi[p].size() != psi[p].size())
      throw ShapeError("relation_defect: paths have different lengths");
    for (int k : checkpoints) {
      if (k < 0 || k >= static_cast<int>(phi[p].size()) ||
          k >= static_cast<int>(window.size()))
        throw ShapeError("relation_defect: checkpoint outside the paths");
      const Eigen::VectorXd r = psi[p][k] - (gamma[k] - window[k]) * phi[p][k];
      worst = std::max(worst, r.norm());
    }
  }
  return worst;
}

}  // namespace emlq
