#include "ddpi/lyapunov_riccati.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ddpi/errors.hpp"
#include "ddpi/tensor_ops.hpp"

namespace ddpi {

namespace {

constexpr double kSchurMargin = 1e-9;
constexpr double kMaxOperatorCond = 1e12;

struct LyapSolve {
  MatrixXd P;
  double cond;
};

// Solves P = S + Acl' P Acl through its Kronecker form.
LyapSolve lyap_solve(const MatrixXd& Acl, const MatrixXd& S) {
  const Eigen::Index n = Acl.rows();
  const MatrixXd At = Acl.transpose();
  const MatrixXd op = MatrixXd::Identity(n * n, n * n) - kron(At, At);
  Eigen::JacobiSVD<MatrixXd> svd(op);
  const auto& sv = svd.singularValues();
  const double smin = sv(sv.size() - 1);
  const double cond = smin > 0.0 ? sv(0) / smin : INFINITY;
  const VectorXd p = op.partialPivLu().solve(vec(S));
  return {symmetrize(unvec(p, n, n)), cond};
}

}  // namespace

void CostSpec::validate(Eigen::Index nx, Eigen::Index nu) const {
  if (Q.rows() != nx || Q.cols() != nx) throw DomainError("Q must be " + std::to_string(nx) + "x" + std::to_string(nx));
  if (R.rows() != nu || R.cols() != nu) throw DomainError("R must be " + std::to_string(nu) + "x" + std::to_string(nu));
  if (!is_symmetric(Q) || !is_symmetric(R)) throw DomainError("Q and R must be symmetric");
  if (min_eig(Q) < -1e-12) throw DomainError("Q must be positive semidefinite");
  if (min_eig(R) <= 0.0) throw DomainError("R must be positive definite");
}

double min_eig(const MatrixXd& m) {
  return Eigen::SelfAdjointEigenSolver<MatrixXd>(symmetrize(m), Eigen::EigenvaluesOnly)
      .eigenvalues()
      .minCoeff();
}

bool psd_geq(const MatrixXd& m1, const MatrixXd& m2, double tol) { return min_eig(m1 - m2) >= -tol; }

double spectral_norm(const MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  return Eigen::JacobiSVD<MatrixXd>(m).singularValues()(0);
}

MatrixXd policy_evaluate(const LinearSystem& sys, const MatrixXd& K, const CostSpec& cost) {
  const MatrixXd Acl = sys.A + sys.B * K;
  const double rho = spectral_radius(Acl);
  if (!(rho < 1.0 - kSchurMargin)) {
    throw NotStabilizing("closed loop spectral radius " + std::to_string(rho) + " >= 1");
  }
  return lyap_solve(Acl, cost.Q + K.transpose() * cost.R * K).P;
}

double lyapunov_residual(const LinearSystem& sys, const MatrixXd& K, const CostSpec& cost,
                         const MatrixXd& P) {
  const MatrixXd Acl = sys.A + sys.B * K;
  return (P - cost.Q - K.transpose() * cost.R * K - Acl.transpose() * P * Acl).norm();
}

MatrixXd policy_improve(const LinearSystem& sys, const MatrixXd& P, const MatrixXd& R) {
  const MatrixXd BtP = sys.B.transpose() * P;
  return -(R + BtP * sys.B).ldlt().solve(BtP * sys.A);
}

namespace {

MatrixXd riccati_map(const LinearSystem& sys, const CostSpec& cost, const MatrixXd& P) {
  const MatrixXd BtPA = sys.B.transpose() * P * sys.A;
  const MatrixXd G = cost.R + sys.B.transpose() * P * sys.B;
  return symmetrize(cost.Q + sys.A.transpose() * P * sys.A - BtPA.transpose() * G.ldlt().solve(BtPA));
}

}  // namespace

DareSolution solve_dare(const LinearSystem& sys, const CostSpec& cost, const DareOptions& opts) {
  if (!is_stabilizable(sys)) throw NotStabilizable("(A, B) is not stabilizable");
  MatrixXd P = opts.P_init ? symmetrize(*opts.P_init) : cost.Q;
  int it = 0;
  double step = INFINITY;
  // Phase 1 reaches the tolerance; phase 2 keeps going while the step still shrinks,
  // which drives P to the floating-point fixed point.
  while (it < opts.max_iters) {
    MatrixXd Pn = riccati_map(sys, cost, P);
    step = (Pn - P).norm();
    P = std::move(Pn);
    ++it;
    if (step <= opts.tol * std::max(1.0, P.norm())) break;
  }
  if (!(step <= opts.tol * std::max(1.0, P.norm()))) {
    throw NotConverged("Riccati iteration did not converge in " + std::to_string(it) + " steps");
  }
  for (int extra = 0; extra < 200 && step > 0.0; ++extra) {
    MatrixXd Pn = riccati_map(sys, cost, P);
    const double s = (Pn - P).norm();
    if (s >= step) break;
    step = s;
    P = std::move(Pn);
    ++it;
  }
  DareSolution sol{P, policy_improve(sys, P, cost.R), it};
  if (!is_schur_stable(sys.A + sys.B * sol.K, kSchurMargin)) {
    throw NotConverged("Riccati limit does not stabilize (A, B)");
  }
  return sol;
}

double dare_residual(const LinearSystem& sys, const CostSpec& cost, const MatrixXd& P) {
  return (riccati_map(sys, cost, P) - P).norm();
}

PiTrace pi_run(const LinearSystem& sys, const CostSpec& cost, const MatrixXd& K1, int max_iters,
               double tol) {
  const DareSolution star = solve_dare(sys, cost);
  PiTrace trace;
  trace.P_star = star.P;
  trace.K_star = star.K;
  MatrixXd K = K1;
  for (int i = 0; i < max_iters; ++i) {
    MatrixXd P = policy_evaluate(sys, K, cost);
    const double err = (P - star.P).norm();
    const bool done = !trace.iterates.empty() && (P - trace.iterates.back().P).norm() <= tol;
    MatrixXd Kn = policy_improve(sys, P, cost.R);
    trace.iterates.push_back({std::move(K), std::move(P), err});
    if (done) {
      trace.converged = true;
      break;
    }
    K = std::move(Kn);
  }
  return trace;
}

MatrixXd vectorized_pi_step(const LinearSystem& sys, const CostSpec& cost, const MatrixXd& P_i) {
  const MatrixXd K = policy_improve(sys, P_i, cost.R);
  const LyapSolve s = lyap_solve(sys.A + sys.B * K, cost.Q + K.transpose() * cost.R * K);
  if (!(s.cond <= kMaxOperatorCond)) {
    throw SingularOperator("vectorized operator condition number " + std::to_string(s.cond));
  }
  return s.P;
}

double estimate_contraction(const PiTrace& trace) {
  double c = -1.0;
  for (std::size_t i = 0; i + 1 < trace.iterates.size(); ++i) {
    const double den = trace.iterates[i].err;
    if (den < 1e-13) continue;
    c = std::max(c, trace.iterates[i + 1].err / den);
  }
  if (c < 0.0) throw InsufficientTrace("no iterate pair with error above 1e-13");
  if (!(c < 1.0)) throw InsufficientTrace("contraction estimate " + std::to_string(c) + " is not below 1");
  return c;
}

}  // namespace ddpi
