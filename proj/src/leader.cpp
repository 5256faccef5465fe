#include "emlq/leader.hpp"

#include "emlq/errors.hpp"
#include "emlq/riccati.hpp"

#include <cmath>
#include <sstream>

namespace emlq {

namespace {

using Mat = Eigen::MatrixXd;

// Zero-extended function from [0,T] samples.
MatrixFunction extended(const TimeGrid& grid, std::vector<Mat> values) {
  return zero_extend(MatrixFunction(grid, std::move(values)), grid);
}

Mat block2(const Mat& tl, const Mat& tr, const Mat& bl, const Mat& br) {
  Mat out(tl.rows() + bl.rows(), tl.cols() + tr.cols());
  out << tl, tr, bl, br;
  return out;
}

Mat stack2(const Mat& top, const Mat& bottom) {
  Mat out(top.rows() + bottom.rows(), top.cols());
  out << top, bottom;
  return out;
}

}  // namespace

BarredCoefficients assemble_barred(const GameCoefficients& g,
                                   const MatrixFunction& pi1,
                                   const MatrixFunction& xi1) {
  const TimeGrid& grid = g.grid;
  const int N = grid.steps();
  const int n = g.n;
  const Mat I = Mat::Identity(n, n);
  std::vector<Mat> abar1(N + 1), abar2(N + 1), cbar1(N + 1), cbar2(N + 1),
      bbar(N + 1), dbar(N + 1), fbar(N + 1), hbar(N + 1), kbar(N + 1),
      pbar(N + 1), qbar1(N + 1), qbar2(N + 1);
  for (int k = 0; k <= N; ++k) {
    Mat inv;
    if (!checked_inverse(xi1[k], &inv)) {
      std::ostringstream msg;
      msg << "assemble_barred: Xi1 is singular at node " << k
          << " (t = " << grid.node(k) << ")";
      throw ConditioningError(msg.str());
    }
    const Mat &a1 = g.a1[k], &a2 = g.a2[k], &c1 = g.c1[k], &c2 = g.c2[k];
    const Mat &b1 = g.b1[k], &d1 = g.d1[k], &b2 = g.b2[k], &d2 = g.d2[k];
    const Mat& P = pi1[k];
    const Mat d1tP = d1.transpose() * P;
    abar1[k] = a1;
    abar2[k] = a2 - b1 * inv * d1tP * c2;
    bbar[k] = b2 - b1 * inv * d1tP * d2;
    cbar1[k] = c1;
    cbar2[k] = c2 - d1 * inv * d1tP * c2;
    dbar[k] = d2 - d1 * inv * d1tP * d2;
    fbar[k] = -b1 * inv * b1.transpose();
    hbar[k] = -b1 * inv * d1.transpose();
    kbar[k] = -d1 * inv * b1.transpose();
    pbar[k] = -d1 * inv * d1.transpose();
    qbar1[k] = -c2.transpose() * P * (I - d1 * inv * d1tP) * d2;
    qbar2[k] = -P * b2 - c1.transpose() * P * d2;
  }
  BarredCoefficients out;
  out.abar1 = extended(grid, std::move(abar1));
  out.abar2 = extended(grid, std::move(abar2));
  out.cbar1 = extended(grid, std::move(cbar1));
  out.cbar2 = extended(grid, std::move(cbar2));
  out.bbar = extended(grid, std::move(bbar));
  out.dbar = extended(grid, std::move(dbar));
  out.fbar = extended(grid, std::move(fbar));
  out.hbar = extended(grid, std::move(hbar));
  out.kbar = extended(grid, std::move(kbar));
  out.pbar = extended(grid, std::move(pbar));
  out.qbar1 = extended(grid, std::move(qbar1));
  out.qbar2 = extended(grid, std::move(qbar2));
  return out;
}

StackedBlocks assemble_stacked(const BarredCoefficients& b,
                               const MatrixFunction& pi2,
                               const MatrixFunction& xi2) {
  const TimeGrid& grid = b.abar1.grid();
  const int N = grid.steps();
  const int n = b.abar1.rows();
  const int k2 = b.bbar.cols();
  if (pi2.rows() != n || xi2.rows() != k2)
    throw ShapeError("assemble_stacked: Pi2 or Xi2 shape mismatch");
  const Mat Z = Mat::Zero(n, n);
  const Mat Zk = Mat::Zero(n, k2);
  std::vector<Mat> A1(N + 1), A2(N + 1), Abar1(N + 1), Abar2(N + 1), B(N + 1),
      C(N + 1), Cbar(N + 1), H(N + 1), D(N + 1), Dbar(N + 1), G1(N + 1),
      G2(N + 1);
  for (int k = 0; k <= N; ++k) {
    const Mat& P = pi2[k];
    const Mat &a1 = b.abar1[k], &a2 = b.abar2[k], &c1 = b.cbar1[k],
              &c2 = b.cbar2[k];
    const Mat &f = b.fbar[k], &h = b.hbar[k], &kk = b.kbar[k], &p = b.pbar[k];
    const Mat &bb = b.bbar[k], &d = b.dbar[k];
    const Mat kt = kk.transpose(), pt = p.transpose(), ft = f.transpose();
    A1[k] = block2(a1, ft * P + kt * P * c1, Z, a1);
    A2[k] = block2(a2, kt * P * c2, Z, a2);
    Abar1[k] = block2(c1, h.transpose() * P + pt * P * c1, Z, c1);
    Abar2[k] = block2(c2, pt * P * c2, Z, c2);
    B[k] = block2(kt * P * kk, ft, f, Z);
    C[k] = block2(kt * P * p, kt, h, Z);
    Cbar[k] = block2(pt * P * p, pt, p, Z);
    D[k] = stack2(kt * P * d, bb);
    Dbar[k] = stack2(pt * P * d, d);
    G1[k] = stack2(b.qbar1[k], -c2.transpose() * P * d);
    G2[k] = stack2(b.qbar2[k], Zk);
    const Mat coupling = c2.transpose() * P * d;
    Mat corner = Z;
    if (coupling.cwiseAbs().maxCoeff() > 0.0) {
      Mat inv;
      if (!checked_inverse(xi2[k], &inv)) {
        std::ostringstream msg;
        msg << "assemble_stacked: Xi2 is singular at node " << k;
        throw ConditioningError(msg.str());
      }
      corner = -coupling * inv * coupling.transpose();
    }
    H[k] = block2(Z, Z, Z, corner);
  }
  StackedBlocks out;
  out.A1 = extended(grid, std::move(A1));
  out.A2 = extended(grid, std::move(A2));
  out.Abar1 = extended(grid, std::move(Abar1));
  out.Abar2 = extended(grid, std::move(Abar2));
  out.B = extended(grid, std::move(B));
  out.C = extended(grid, std::move(C));
  out.Cbar = extended(grid, std::move(Cbar));
  out.H = extended(grid, std::move(H));
  out.D = extended(grid, std::move(D));
  out.Dbar = extended(grid, std::move(Dbar));
  out.G1 = extended(grid, std::move(G1));
  out.G2 = extended(grid, std::move(G2));
  return out;
}

Eigen::MatrixXd resolvent(const Eigen::MatrixXd& gamma, const Eigen::MatrixXd& cbar,
                          double cond_cap, int node, double* condition) {
  const Mat M = Mat::Identity(gamma.rows(), gamma.cols()) - gamma * cbar;
  Eigen::PartialPivLU<Mat> lu(M);
  const double rcond = lu.rcond();
  const double cond = rcond > 0.0 ? 1.0 / rcond : INFINITY;
  if (condition != nullptr) *condition = cond;
  if (!std::isfinite(cond) || cond > cond_cap) {
    std::ostringstream msg;
    msg << "I - Gamma*Cbar is near singular at node " << node
        << " (condition estimate " << cond << ")";
    throw ConditioningError(msg.str());
  }
  return lu.inverse();
}

OmegaNode omega_at(const StackedBlocks& blocks, int k, const Eigen::MatrixXd& G,
                   const Eigen::MatrixXd& xi3_inv, double cond_cap) {
  OmegaNode out;
  const Mat& B = blocks.B[k];
  const Mat& C = blocks.C[k];
  const Mat& Ab = blocks.Abar1[k];
  const Mat& D = blocks.D[k];
  const Mat& G2 = blocks.G2[k];
  out.resolvent = resolvent(G, blocks.Cbar[k], cond_cap, k, &out.condition);
  const Mat RG = out.resolvent * G;  // [I - G Cbar]^{-1} G
  const Mat AC = Ab + C.transpose() * G;
  const Mat S = G2.transpose() - D.transpose() * G;  // G2' - D' G
  out.omega1 = B * G + C * RG * AC + D * xi3_inv * S;
  out.omega2 = -B - C * RG * C.transpose() + D * xi3_inv * D.transpose();
  out.omega3 = S.transpose() * xi3_inv * S - AC.transpose() * RG * AC - G * B * G;
  return out;
}

OmegaTerms assemble_omegas(const StackedBlocks& blocks, const MatrixFunction& gamma,
                           const MatrixFunction& xi3, double cond_cap) {
  const TimeGrid& grid = blocks.A1.grid();
  const int N = grid.steps();
  std::vector<Mat> o1(N + 1), o2(N + 1), o3(N + 1);
  OmegaTerms out;
  out.condition.resize(N + 1);
  for (int k = 0; k <= N; ++k) {
    Mat inv;
    if (!checked_inverse(xi3[k], &inv)) {
      std::ostringstream msg;
      msg << "assemble_omegas: Xi3 is singular at node " << k;
      throw ConditioningError(msg.str());
    }
    OmegaNode node = omega_at(blocks, k, gamma[k], inv, cond_cap);
    o1[k] = std::move(node.omega1);
    o2[k] = std::move(node.omega2);
    o3[k] = std::move(node.omega3);
    out.condition[k] = node.condition;
  }
  out.omega1 = extended(grid, std::move(o1));
  out.omega2 = extended(grid, std::move(o2));
  out.omega3 = extended(grid, std::move(o3));
  return out;
}

}  // namespace emlq
