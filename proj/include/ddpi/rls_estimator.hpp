#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "ddpi/lti_sim.hpp"

namespace ddpi {

/// RLS estimate of theta = [A B] from x_{t+1} = theta d_t.
/// H stays positive definite and nondecreasing; H_inv tracks H^{-1}.
struct EstimatorState {
  MatrixXd theta_hat;   // nx x (nx+nu)
  MatrixXd H;           // (nx+nu) square
  MatrixXd H_inv;
  double a = 1.0;       // H_0 = a I
  MatrixXd theta_hat0;
  std::uint64_t samples = 0;
  std::uint64_t since_refactor = 0;

  /// Throws DomainError unless a > 0.
  static EstimatorState init(const MatrixXd& theta_hat0, double a);
  Eigen::Index nx() const { return theta_hat.rows(); }
  Eigen::Index nd() const { return theta_hat.cols(); }
};

/// Rank-one updates between full refactorizations of H_inv.
inline constexpr std::uint64_t kRefactorInterval = 1000;

/// A rank-one downdate with d' H_inv d above this cancels about log10 of it in
/// digits, so such a step re-solves theta_hat and H_inv from H instead.
inline constexpr double kCancellationGuard = 1e3;

/// H += d d'; H_inv by Sherman-Morrison; theta_hat += (x_next - theta_hat d) d' H_inv.
EstimatorState rls_update(EstimatorState s, const VectorXd& d, const VectorXd& x_next);

/// Sufficient statistics of one episode: D = sum d d', XD = sum x_{t+1} d'.
struct EpisodeSums {
  MatrixXd D;
  MatrixXd XD;
  std::size_t count = 0;

  static EpisodeSums from(const Trajectory& episode);
};

/// Batch form H_i = H + D, theta_i = (theta H + XD) H_i^{-1}.
/// Agrees with folding rls_update over the same samples.
EstimatorState episode_update(EstimatorState s, const EpisodeSums& sums);
EstimatorState episode_update(EstimatorState s, const Trajectory& episode);

/// f + g with f = a n ||dtheta0|| / (a + floor(i / N_max) alpha_min), g = ||dtheta0|| jnon_inf.
/// `n` is nx+nu. Throws DomainError outside a > 0, N_max >= 1, alpha_min > 0, 0 <= jnon_inf <= n.
double theorem3_bound(double delta_theta0_norm, double a, int n, long long N_max, double alpha_min,
                      int jnon_inf, long long i);

/// Diagnostics that need the true parameters. Kept apart so the estimator never reads them.
namespace oracle {

/// ||(theta_hat0 - theta) H_0||_F * ||H^{-1}||_F.
double error_upper_bound(const EstimatorState& s, const MatrixXd& theta_true);

/// ||(theta_hat - theta) - (theta_hat0 - theta) H_0 H^{-1}||_F.
double error_identity_residual(const EstimatorState& s, const MatrixXd& theta_true);

struct EstimatorTraceRow {
  std::uint64_t t;
  double error;
  double upper;
  double lambda_min_H;
};

EstimatorTraceRow trace_row(const EstimatorState& s, const MatrixXd& theta_true);

/// Columns: t, theta_err, dtheta_upper, lambda_min_H.
void write_trace_csv(const std::vector<EstimatorTraceRow>& rows, std::ostream& os);

}  // namespace oracle

}  // namespace ddpi
