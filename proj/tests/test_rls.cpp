#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "ddpi/errors.hpp"
#include "ddpi/rls_estimator.hpp"
#include "support/gen.hpp"

using namespace ddpi;
using ddpi::testing::for_all;
using ddpi::testing::Gen;

namespace {

struct Stream {
  std::vector<VectorXd> d;
  std::vector<VectorXd> x_next;
};

Stream noise_free_stream(Gen& g, const MatrixXd& theta, std::size_t T, double scale = 1.0) {
  Stream s;
  for (std::size_t t = 0; t < T; ++t) {
    const VectorXd d = g.vector(theta.cols(), scale);
    s.d.push_back(d);
    s.x_next.push_back(theta * d);
  }
  return s;
}

// Direct (I + ...)^{-1} path, the oracle for Sherman-Morrison.
MatrixXd explicit_estimate(const MatrixXd& theta0, double a, const Stream& s, std::size_t upto) {
  const Eigen::Index nd = theta0.cols();
  MatrixXd H = a * MatrixXd::Identity(nd, nd);
  MatrixXd XD = a * theta0;
  for (std::size_t t = 0; t < upto; ++t) {
    H += s.d[t] * s.d[t].transpose();
    XD += s.x_next[t] * s.d[t].transpose();
  }
  return XD * H.inverse();
}

}  // namespace

TEST(RlsUpdate, ZeroRegressorLeavesStateUnchanged) {
  const EstimatorState s0 = EstimatorState::init(MatrixXd::Constant(2, 3, 0.7), 0.5);
  const EstimatorState s1 = rls_update(s0, VectorXd::Zero(3), VectorXd::Constant(2, 4.0));
  EXPECT_EQ(s1.theta_hat, s0.theta_hat);
  EXPECT_EQ(s1.H, s0.H);
  EXPECT_LE((s1.H_inv - s0.H_inv).norm(), 0.0);
}

TEST(RlsUpdate, ScalarHandComputation) {
  // H = I + e1 e1', so theta_hat = [2 0] diag(1/2, 1).
  const EstimatorState s0 = EstimatorState::init(MatrixXd::Zero(1, 2), 1.0);
  const EstimatorState s1 = rls_update(s0, Eigen::Vector2d(1, 0), VectorXd::Constant(1, 2.0));
  EXPECT_DOUBLE_EQ(s1.H(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(s1.H(1, 1), 1.0);
  EXPECT_DOUBLE_EQ(s1.theta_hat(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(s1.theta_hat(0, 1), 0.0);
}

TEST(RlsUpdate, ShermanMorrisonMatchesExplicitInverse) {
  for_all(30, 31, [](Gen& g) {
    const Eigen::Index nx = g.integer(1, 4), nu = g.integer(1, 3);
    const MatrixXd theta = g.matrix(nx, nx + nu);
    const MatrixXd theta0 = g.matrix(nx, nx + nu);
    const double a = std::pow(10.0, g.uniform(-2, 1));
    const Stream s = noise_free_stream(g, theta, 60);
    EstimatorState st = EstimatorState::init(theta0, a);
    for (std::size_t t = 0; t < s.d.size(); ++t) {
      st = rls_update(st, s.d[t], s.x_next[t]);
      const MatrixXd oracle = explicit_estimate(theta0, a, s, t + 1);
      EXPECT_LE((st.theta_hat - oracle).norm(), 1e-8 * std::max(1.0, oracle.norm()));
      EXPECT_LE((st.H * st.H_inv - MatrixXd::Identity(st.nd(), st.nd())).norm(), 1e-8);
    }
  });
}

TEST(RlsUpdate, RecoversParametersFromSpanningData) {
  Gen g(32);
  const MatrixXd theta = g.matrix(3, 5);
  EstimatorState st = EstimatorState::init(MatrixXd::Zero(3, 5), 1e-10);
  for (int t = 0; t < 10; ++t) {
    const VectorXd d = g.vector(5);
    st = rls_update(st, d, theta * d);
  }
  EXPECT_LE((st.theta_hat - theta).norm(), 1e-8);
}

TEST(RlsUpdate, RefactorKeepsInverseAccurateOnLongRuns) {
  Gen g(33);
  const MatrixXd theta = g.matrix(2, 3);
  EstimatorState st = EstimatorState::init(MatrixXd::Zero(2, 3), 0.01);
  for (int t = 0; t < 5000; ++t) {
    const VectorXd d = g.vector(3);
    st = rls_update(st, d, theta * d);
  }
  EXPECT_LE((st.H * st.H_inv - MatrixXd::Identity(3, 3)).norm(), 1e-8);
  EXPECT_LT(st.since_refactor, kRefactorInterval);
}

TEST(EpisodeUpdate, MatchesStreamingFold) {
  for_all(20, 34, [](Gen& g) {
    const auto st = g.stabilized(g.integer(1, 3), g.integer(1, 2));
    const MatrixXd theta = st.sys.theta();
    const double a = 0.01;
    EstimatorState stream = EstimatorState::init(MatrixXd::Zero(theta.rows(), theta.cols()), a);
    EstimatorState batch = stream;
    EstimatorState single = stream;
    DitherGenerator dither(DitherPolicy{DitherKind::gaussian, MatrixXd::Identity(st.sys.nu(), st.sys.nu()), 5},
                           st.sys.nu());
    VectorXd x = g.vector(st.sys.nx());
    std::vector<Trajectory> eps;
    const std::size_t tau = static_cast<std::size_t>(g.integer(1, 6));
    for (int e = 0; e < 8; ++e) {
      const Trajectory tr = rollout(st.sys, st.K, dither, x, tau);
      x = tr.states.back();
      for (std::size_t t = 0; t < tr.length(); ++t) stream = rls_update(stream, tr.regressor(t), tr.states[t + 1]);
      batch = episode_update(batch, tr);
      eps.push_back(tr);
      EXPECT_LE((batch.theta_hat - stream.theta_hat).norm(), 1e-9 * std::max(1.0, theta.norm()));
    }
    // Two episodes folded into one give the same estimate.
    Trajectory joined = eps[0];
    joined.inputs.insert(joined.inputs.end(), eps[1].inputs.begin(), eps[1].inputs.end());
    joined.states.insert(joined.states.end(), eps[1].states.begin() + 1, eps[1].states.end());
    const EstimatorState two = episode_update(episode_update(single, eps[0]), eps[1]);
    const EstimatorState one = episode_update(single, joined);
    EXPECT_LE((two.theta_hat - one.theta_hat).norm(), 1e-9 * std::max(1.0, theta.norm()));
  });
}

TEST(EpisodeUpdate, SingleSampleEqualsRlsUpdate) {
  Gen g(35);
  const LinearSystem s{g.matrix(2, 2), g.matrix(2, 1)};
  Trajectory tr;
  tr.states = {g.vector(2)};
  tr.inputs = {g.vector(1)};
  tr.states.push_back(step(s, tr.states[0], tr.inputs[0]));
  const EstimatorState s0 = EstimatorState::init(g.matrix(2, 3), 0.3);
  const EstimatorState a = episode_update(s0, tr);
  const EstimatorState b = rls_update(s0, tr.regressor(0), tr.states[1]);
  EXPECT_LE((a.theta_hat - b.theta_hat).norm(), 1e-12);
  EXPECT_LE((a.H - b.H).norm(), 1e-12);
}

TEST(ErrorBound, DominatesAndNeverIncreases) {
  for_all(30, 36, [](Gen& g) {
    const MatrixXd theta = g.matrix(g.integer(1, 3), 4);
    const MatrixXd theta0 = g.matrix(theta.rows(), 4);
    EstimatorState st = EstimatorState::init(theta0, std::pow(10.0, g.uniform(-3, 0)));
    double prev = oracle::error_upper_bound(st, theta);
    for (int t = 0; t < 80; ++t) {
      // Occasionally rank-deficient regressors.
      VectorXd d = g.vector(4);
      if (g.coin(0.3)) d.tail(2).setZero();
      st = rls_update(st, d, theta * d);
      const double ub = oracle::error_upper_bound(st, theta);
      EXPECT_LE((st.theta_hat - theta).norm(), ub * (1.0 + 1e-12) + 1e-15);
      EXPECT_LE(ub, prev * (1.0 + 1e-12));
      EXPECT_LE(oracle::error_identity_residual(st, theta), 1e-9);
      prev = ub;
    }
  });
}

TEST(ErrorBound, DefinitionalValues) {
  const MatrixXd theta = MatrixXd::Constant(2, 3, 1.0);
  const EstimatorState exact = EstimatorState::init(theta, 0.2);
  EXPECT_EQ(oracle::error_upper_bound(exact, theta), 0.0);
  const EstimatorState zero = EstimatorState::init(MatrixXd::Zero(2, 3), 0.2);
  // ||dtheta0 a||_F ||(a I)^{-1}||_F = ||dtheta0||_F sqrt(n).
  EXPECT_NEAR(oracle::error_upper_bound(zero, theta), theta.norm() * std::sqrt(3.0), 1e-12);
}

TEST(Theorem3Bound, ClosedForm) {
  EXPECT_EQ(theorem3_bound(0.0, 0.1, 6, 3, 0.5, 2, 10), 0.0);
  EXPECT_DOUBLE_EQ(theorem3_bound(2.0, 0.1, 6, 3, 0.5, 1, 0), 6 * 2.0 + 2.0);
  EXPECT_DOUBLE_EQ(theorem3_bound(2.0, 0.1, 6, 3, 0.5, 0, 7), 0.1 * 6 * 2.0 / (0.1 + 2 * 0.5));
  EXPECT_THROW(theorem3_bound(1.0, 0.0, 6, 3, 0.5, 0, 1), DomainError);
  EXPECT_THROW(theorem3_bound(1.0, 1.0, 6, 0, 0.5, 0, 1), DomainError);
  EXPECT_THROW(theorem3_bound(1.0, 1.0, 6, 1, 0.0, 0, 1), DomainError);
  EXPECT_THROW(theorem3_bound(1.0, 1.0, 6, 1, 1.0, 7, 1), DomainError);
}

TEST(Theorem3Bound, DominatesOnLocallyPersistentData) {
  // Basis cycling with one redundant sample per window: N = 4, M = 4, alpha = 1.
  for_all(10, 37, [](Gen& g) {
    const Eigen::Index nd = 3;
    const MatrixXd theta = g.matrix(2, nd);
    const MatrixXd theta0 = g.matrix(2, nd);
    const double a = 0.05;
    EstimatorState st = EstimatorState::init(theta0, a);
    const double d0 = (theta0 - theta).norm();
    for (long long i = 1; i <= 80; ++i) {
      const long long k = (i - 1) % 4;
      VectorXd d = VectorXd::Zero(nd);
      if (k < nd) d(k) = 1.0;
      else d = g.vector(nd, 0.1);
      st = rls_update(st, d, theta * d);
      EXPECT_LE((st.theta_hat - theta).norm(), theorem3_bound(d0, a, static_cast<int>(nd), 4, 1.0, 0, i) + 1e-12);
    }
  });
}

TEST(EstimatorTrace, CsvColumns) {
  Gen g(38);
  const MatrixXd theta = g.matrix(1, 2);
  EstimatorState st = EstimatorState::init(MatrixXd::Zero(1, 2), 1.0);
  std::vector<oracle::EstimatorTraceRow> rows{oracle::trace_row(st, theta)};
  st = rls_update(st, Eigen::Vector2d(1, 0), theta * Eigen::Vector2d(1, 0));
  rows.push_back(oracle::trace_row(st, theta));
  std::ostringstream os;
  oracle::write_trace_csv(rows, os);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "t,theta_err,dtheta_upper,lambda_min_H");
  EXPECT_DOUBLE_EQ(rows[1].lambda_min_H, 1.0);
  EXPECT_EQ(rows[1].t, 1u);
}
