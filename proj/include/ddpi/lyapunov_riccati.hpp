#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "ddpi/lti_sim.hpp"

namespace ddpi {

/// Stage cost x'Qx + u'Ru with Q >= 0, R > 0.
struct CostSpec {
  MatrixXd Q;  // nx x nx
  MatrixXd R;  // nu x nu

  /// Throws DomainError on shape, symmetry or definiteness violations.
  void validate(Eigen::Index nx, Eigen::Index nu) const;
};

/// Kernel P of the cost-to-go of u = Kx: P = Q + K'RK + (A+BK)'P(A+BK).
/// Throws NotStabilizing unless A+BK has spectral radius < 1 - 1e-9.
MatrixXd policy_evaluate(const LinearSystem& sys, const MatrixXd& K, const CostSpec& cost);

/// Frobenius norm of P - Q - K'RK - (A+BK)'P(A+BK).
double lyapunov_residual(const LinearSystem& sys, const MatrixXd& K, const CostSpec& cost,
                         const MatrixXd& P);

/// K = -(R + B'PB)^{-1} B'PA.
MatrixXd policy_improve(const LinearSystem& sys, const MatrixXd& P, const MatrixXd& R);

struct DareOptions {
  double tol = 1e-12;  // on ||P_{k+1} - P_k||_F / max(1, ||P_k||_F)
  int max_iters = 1000000;
  std::optional<MatrixXd> P_init;  // defaults to Q
};

struct DareSolution {
  MatrixXd P;
  MatrixXd K;
  int iterations = 0;
};

/// Riccati value iteration. Throws NotStabilizable when (A, B) fails PBH, and
/// NotConverged when the iteration cap is hit or the limit does not stabilize.
DareSolution solve_dare(const LinearSystem& sys, const CostSpec& cost, const DareOptions& opts = {});

double dare_residual(const LinearSystem& sys, const CostSpec& cost, const MatrixXd& P);

struct PiIterate {
  MatrixXd K;  // gain evaluated at this step
  MatrixXd P;  // its kernel
  double err;  // ||P - P*||_F
};

struct PiTrace {
  std::vector<PiIterate> iterates;
  MatrixXd P_star;
  MatrixXd K_star;
  bool converged = false;
};

/// Model-based policy iteration from K1. Stops once ||P_{i+1} - P_i||_F <= tol.
/// Throws NotStabilizing if K1 does not stabilize.
PiTrace pi_run(const LinearSystem& sys, const CostSpec& cost, const MatrixXd& K1, int max_iters,
               double tol);

/// One improvement plus evaluation as a single linear solve
///   (I - Acl' (x) Acl') vec(P_{i+1}) = vec(Q + K'RK),  K = improve(P_i), Acl = A + BK.
/// Throws SingularOperator if the operator condition number exceeds 1e12.
MatrixXd vectorized_pi_step(const LinearSystem& sys, const CostSpec& cost, const MatrixXd& P_i);

/// max_i err_{i+1} / err_i over ratios with err_i >= 1e-13. Throws
/// InsufficientTrace if no ratio qualifies or the estimate is not below 1.
double estimate_contraction(const PiTrace& trace);

/// Smallest eigenvalue of a symmetric matrix.
double min_eig(const MatrixXd& m);

/// m1 - m2 >= -tol I.
bool psd_geq(const MatrixXd& m1, const MatrixXd& m2, double tol);

double spectral_norm(const MatrixXd& m);

}  // namespace ddpi
