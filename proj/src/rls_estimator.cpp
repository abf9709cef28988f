#include "ddpi/rls_estimator.hpp"

#include <cmath>
#include <string>

#include "ddpi/csv.hpp"
#include "ddpi/errors.hpp"
#include "ddpi/lyapunov_riccati.hpp"
#include "ddpi/tensor_ops.hpp"

namespace ddpi {

EstimatorState EstimatorState::init(const MatrixXd& theta_hat0, double a) {
  if (!(a > 0.0) || !std::isfinite(a)) throw DomainError("H_0 scale a must be positive");
  if (theta_hat0.rows() == 0 || theta_hat0.cols() <= theta_hat0.rows()) {
    throw DomainError("theta_hat0 must be nx x (nx+nu)");
  }
  const Eigen::Index nd = theta_hat0.cols();
  EstimatorState s;
  s.theta_hat = theta_hat0;
  s.theta_hat0 = theta_hat0;
  s.a = a;
  s.H = a * MatrixXd::Identity(nd, nd);
  s.H_inv = MatrixXd::Identity(nd, nd) / a;
  return s;
}

namespace {

void refactor(EstimatorState& s) {
  s.H_inv = symmetrize(s.H.llt().solve(MatrixXd::Identity(s.nd(), s.nd())));
  s.since_refactor = 0;
}

}  // namespace

EstimatorState rls_update(EstimatorState s, const VectorXd& d, const VectorXd& x_next) {
  if (d.size() != s.nd() || x_next.size() != s.nx()) throw DomainError("rls_update: dimension mismatch");
  const VectorXd g = s.H_inv * d;
  const double gain = d.dot(g);
  ++s.samples;
  if (gain > kCancellationGuard) {
    // theta_hat H is accurate even where theta_hat is not, so carry it through a solve.
    const MatrixXd rhs = s.theta_hat * s.H + x_next * d.transpose();
    s.H.noalias() += d * d.transpose();
    const Eigen::LLT<MatrixXd> llt(s.H);
    s.theta_hat = llt.solve(rhs.transpose()).transpose();
    s.H_inv = symmetrize(llt.solve(MatrixXd::Identity(s.nd(), s.nd())));
    s.since_refactor = 0;
    return s;
  }
  s.H.noalias() += d * d.transpose();
  s.H_inv -= (g * g.transpose()) / (1.0 + gain);
  if (++s.since_refactor >= kRefactorInterval) refactor(s);
  const VectorXd innovation = x_next - s.theta_hat * d;
  s.theta_hat += innovation * (s.H_inv * d).transpose();
  return s;
}

EpisodeSums EpisodeSums::from(const Trajectory& episode) {
  if (episode.length() == 0) throw DomainError("episode is empty");
  const Eigen::Index nx = episode.states.front().size();
  const Eigen::Index nd = nx + episode.inputs.front().size();
  EpisodeSums sums{MatrixXd::Zero(nd, nd), MatrixXd::Zero(nx, nd), episode.length()};
  for (std::size_t t = 0; t < episode.length(); ++t) {
    const VectorXd d = episode.regressor(t);
    sums.D.noalias() += d * d.transpose();
    sums.XD.noalias() += episode.states[t + 1] * d.transpose();
  }
  return sums;
}

EstimatorState episode_update(EstimatorState s, const EpisodeSums& sums) {
  if (sums.count == 0) throw DomainError("episode is empty");
  if (sums.D.rows() != s.nd() || sums.XD.rows() != s.nx() || sums.XD.cols() != s.nd()) {
    throw DomainError("episode_update: dimension mismatch");
  }
  const MatrixXd rhs = s.theta_hat * s.H + sums.XD;
  s.H = symmetrize(s.H + sums.D);
  const Eigen::LLT<MatrixXd> llt(s.H);
  s.theta_hat = llt.solve(rhs.transpose()).transpose();
  s.H_inv = symmetrize(llt.solve(MatrixXd::Identity(s.nd(), s.nd())));
  s.samples += sums.count;
  s.since_refactor = 0;
  return s;
}

EstimatorState episode_update(EstimatorState s, const Trajectory& episode) {
  return episode_update(std::move(s), EpisodeSums::from(episode));
}

double theorem3_bound(double delta_theta0_norm, double a, int n, long long N_max, double alpha_min,
                      int jnon_inf, long long i) {
  if (!(a > 0.0)) throw DomainError("theorem3_bound: a must be positive");
  if (N_max < 1) throw DomainError("theorem3_bound: N_max must be at least 1");
  if (!(alpha_min > 0.0)) throw DomainError("theorem3_bound: alpha_min must be positive");
  if (n < 1 || jnon_inf < 0 || jnon_inf > n) throw DomainError("theorem3_bound: jnon out of range");
  if (i < 0 || !(delta_theta0_norm >= 0.0)) throw DomainError("theorem3_bound: negative input");
  const double windows = static_cast<double>(i / N_max);
  const double f = a * n * delta_theta0_norm / (a + windows * alpha_min);
  const double g = delta_theta0_norm * jnon_inf;
  return f + g;
}

namespace oracle {

double error_upper_bound(const EstimatorState& s, const MatrixXd& theta_true) {
  return ((s.theta_hat0 - theta_true) * s.a).norm() * s.H_inv.norm();
}

double error_identity_residual(const EstimatorState& s, const MatrixXd& theta_true) {
  const MatrixXd predicted = (s.theta_hat0 - theta_true) * s.a * s.H_inv;
  return ((s.theta_hat - theta_true) - predicted).norm();
}

EstimatorTraceRow trace_row(const EstimatorState& s, const MatrixXd& theta_true) {
  return {s.samples, (s.theta_hat - theta_true).norm(), error_upper_bound(s, theta_true), min_eig(s.H)};
}

void write_trace_csv(const std::vector<EstimatorTraceRow>& rows, std::ostream& os) {
  CsvWriter w(os);
  w.header({"t", "theta_err", "dtheta_upper", "lambda_min_H"});
  for (const auto& r : rows) {
    w.field(r.t);
    w.field(r.error);
    w.field(r.upper);
    w.field(r.lambda_min_H);
    w.end_row();
  }
}

}  // namespace oracle

}  // namespace ddpi
