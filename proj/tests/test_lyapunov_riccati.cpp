#include <cmath>

#include <gtest/gtest.h>

#include "ddpi/errors.hpp"
#include "ddpi/lyapunov_riccati.hpp"
#include "support/gen.hpp"

using namespace ddpi;
using ddpi::testing::for_all;
using ddpi::testing::Gen;
using ddpi::testing::scalar_cost;
using ddpi::testing::scalar_plant;

namespace {

double quad_cost(const LinearSystem& s, const CostSpec& c, const MatrixXd& P, const MatrixXd& K, const VectorXd& x) {
  const VectorXd u = K * x;
  const VectorXd xn = s.A * x + s.B * u;
  return x.dot(c.Q * x) + u.dot(c.R * u) + xn.dot(P * xn);
}

}  // namespace

TEST(PolicyEvaluate, ScalarClosedForms) {
  const MatrixXd k0 = MatrixXd::Zero(1, 1);
  EXPECT_NEAR(policy_evaluate(scalar_plant(0.0, 1.0), k0, scalar_cost(1, 1))(0, 0), 1.0, 1e-14);
  EXPECT_NEAR(policy_evaluate(scalar_plant(0.5, 1.0), k0, scalar_cost(1, 1))(0, 0), 4.0 / 3.0, 1e-14);
}

TEST(PolicyEvaluate, CoupledPlantInitialGain) {
  const auto sys = ddpi::testing::coupled_plant();
  const auto cost = ddpi::testing::coupled_cost();
  const MatrixXd P = policy_evaluate(sys, ddpi::testing::coupled_K1(), cost);
  EXPECT_GE(min_eig(P), 0.0);
  EXPECT_LE(lyapunov_residual(sys, ddpi::testing::coupled_K1(), cost, P), 1e-10);
}

TEST(PolicyEvaluate, RejectsNonStabilizingGain) {
  EXPECT_THROW(policy_evaluate(ddpi::testing::coupled_plant(), MatrixXd::Zero(3, 3), ddpi::testing::coupled_cost()),
               NotStabilizing);
}

TEST(PolicyEvaluate, ResidualOnRandomSystems) {
  for_all(60, 21, [](Gen& g) {
    const Eigen::Index nx = g.integer(1, 5), nu = g.integer(1, 3);
    const auto st = g.stabilized(nx, nu);
    const CostSpec c{g.psd(nx, nx), g.spd(nu)};
    const MatrixXd P = policy_evaluate(st.sys, st.K, c);
    EXPECT_LE(lyapunov_residual(st.sys, st.K, c, P), 1e-10 * std::max(1.0, P.norm()));
    EXPECT_GE(min_eig(P), -1e-10);
  });
}

TEST(PolicyImprove, ScalarAndNoActuation) {
  EXPECT_NEAR(policy_improve(scalar_plant(1, 1), MatrixXd::Constant(1, 1, 2.0), MatrixXd::Identity(1, 1))(0, 0), -2.0 / 3.0,
              1e-15);
  LinearSystem s{MatrixXd::Identity(2, 2), MatrixXd::Zero(2, 1)};
  EXPECT_EQ(policy_improve(s, MatrixXd::Identity(2, 2), MatrixXd::Identity(1, 1)), MatrixXd::Zero(1, 2));
}

TEST(PolicyImprove, MinimizesOneStepObjective) {
  for_all(20, 22, [](Gen& g) {
    const Eigen::Index nx = g.integer(1, 4), nu = g.integer(1, 3);
    const LinearSystem s{g.matrix(nx, nx), g.matrix(nx, nu)};
    const CostSpec c{g.psd(nx, nx), g.spd(nu)};
    const MatrixXd P = g.psd(nx, nx);
    const MatrixXd K = policy_improve(s, P, c.R);
    for (int k = 0; k < 100; ++k) {
      const MatrixXd Kr = g.matrix(nu, nx);
      const VectorXd x = g.vector(nx);
      const double best = quad_cost(s, c, P, K, x);
      EXPECT_LE(best, quad_cost(s, c, P, Kr, x) + 1e-10 * std::max(1.0, std::abs(best)));
    }
  });
}

TEST(SolveDare, ScalarQuadraticRoot) {
  const DareSolution sol = solve_dare(scalar_plant(0.5, 1.0), scalar_cost(1, 1));
  EXPECT_NEAR(sol.P(0, 0), ddpi::testing::scalar_dare_root(), 1e-12);
  EXPECT_NEAR(sol.K(0, 0), -0.5 * sol.P(0, 0) / (1.0 + sol.P(0, 0)), 1e-14);
}

TEST(SolveDare, ZeroStateCostOnStablePlant) {
  LinearSystem s{0.5 * MatrixXd::Identity(2, 2), MatrixXd::Identity(2, 1)};
  const DareSolution sol = solve_dare(s, CostSpec{MatrixXd::Zero(2, 2), MatrixXd::Identity(1, 1)});
  EXPECT_LE(sol.P.norm(), 1e-14);
}

TEST(SolveDare, RejectsUnstabilizable) {
  MatrixXd A(2, 2);
  A << 2, 0, 0, 0.5;
  MatrixXd B(2, 1);
  B << 0, 1;
  EXPECT_THROW(solve_dare({A, B}, CostSpec{MatrixXd::Identity(2, 2), MatrixXd::Identity(1, 1)}), NotStabilizable);
}

TEST(SolveDare, CoupledPlantResidualAndStability) {
  const auto sys = ddpi::testing::coupled_plant();
  const auto cost = ddpi::testing::coupled_cost();
  const DareSolution sol = solve_dare(sys, cost);
  EXPECT_LE(dare_residual(sys, cost, sol.P), 1e-10);
  EXPECT_TRUE(is_schur_stable(sys.A + sys.B * sol.K));
}

TEST(SolveDare, AgreesWithPolicyIterationOnRandomSystems) {
  for_all(40, 23, [](Gen& g) {
    const Eigen::Index nx = g.integer(1, 4), nu = g.integer(1, 3);
    const auto st = g.stabilized(nx, nu);
    const CostSpec c{g.spd(nx), g.spd(nu)};
    const DareSolution sol = solve_dare(st.sys, c);
    EXPECT_LE(dare_residual(st.sys, c, sol.P), 1e-10 * std::max(1.0, sol.P.norm()));
    const PiTrace tr = pi_run(st.sys, c, st.K, 200, 1e-13);
    EXPECT_LE((tr.iterates.back().P - sol.P).norm(), 1e-8 * std::max(1.0, sol.P.norm()));
  });
}

TEST(PiRun, StartingAtOptimumIsFixedPoint) {
  const auto sys = ddpi::testing::coupled_plant();
  const auto cost = ddpi::testing::coupled_cost();
  const DareSolution sol = solve_dare(sys, cost);
  const PiTrace tr = pi_run(sys, cost, sol.K, 50, 1e-12);
  EXPECT_LE((tr.iterates.front().P - sol.P).norm(), 1e-10);
  EXPECT_LE(tr.iterates.size(), 2u);
}

TEST(PiRun, ScalarConvergesToRoot) {
  const PiTrace tr = pi_run(scalar_plant(0.5, 1.0), scalar_cost(1, 1), MatrixXd::Zero(1, 1), 100, 1e-15);
  EXPECT_TRUE(tr.converged);
  EXPECT_NEAR(tr.iterates.back().P(0, 0), ddpi::testing::scalar_dare_root(), 1e-12);
}

TEST(PiRun, CoupledPlantMonotoneAndFast) {
  const auto sys = ddpi::testing::coupled_plant();
  const auto cost = ddpi::testing::coupled_cost();
  const PiTrace tr = pi_run(sys, cost, ddpi::testing::coupled_K1(), 30, 1e-14);
  for (std::size_t i = 1; i < tr.iterates.size(); ++i) {
    EXPECT_TRUE(psd_geq(tr.iterates[i - 1].P, tr.iterates[i].P, 1e-9)) << "iteration " << i;
  }
  EXPECT_LE(tr.iterates.back().err, 1e-9);
  EXPECT_LE(tr.iterates.size(), 30u);
}

TEST(PiRun, MonotoneAndStabilizingOnRandomSystems) {
  for_all(40, 24, [](Gen& g) {
    const Eigen::Index nx = g.integer(1, 4), nu = g.integer(1, 3);
    const auto st = g.stabilized(nx, nu);
    const CostSpec c{g.spd(nx), g.spd(nu)};
    const PiTrace tr = pi_run(st.sys, c, st.K + 0.05 * g.matrix(nu, nx), 100, 1e-13);
    for (std::size_t i = 0; i < tr.iterates.size(); ++i) {
      EXPECT_TRUE(is_schur_stable(st.sys.A + st.sys.B * tr.iterates[i].K));
      EXPECT_TRUE(psd_geq(tr.iterates[i].P, tr.P_star, 1e-9 * std::max(1.0, tr.P_star.norm())));
      if (i > 0) {
        EXPECT_TRUE(psd_geq(tr.iterates[i - 1].P, tr.iterates[i].P, 1e-9 * std::max(1.0, tr.P_star.norm())));
        EXPECT_LE(tr.iterates[i].err, tr.iterates[i - 1].err + 1e-9 * std::max(1.0, tr.P_star.norm()));
      }
    }
  });
}

TEST(PiRun, QuadraticTailRate) {
  const auto sys = ddpi::testing::coupled_plant();
  const auto cost = ddpi::testing::coupled_cost();
  const PiTrace tr = pi_run(sys, cost, ddpi::testing::coupled_K1(), 30, 1e-15);
  // err_{i+1} / err_i^2 stays bounded once the error is small but above roundoff.
  double worst = 0.0;
  for (std::size_t i = 0; i + 1 < tr.iterates.size(); ++i) {
    const double e = tr.iterates[i].err, e1 = tr.iterates[i + 1].err;
    if (e < 0.5 && e > 1e-6) worst = std::max(worst, e1 / (e * e));
  }
  EXPECT_GT(worst, 0.0);
  EXPECT_LT(worst, 1e3);
}

TEST(VectorizedPiStep, MatchesTwoStepIteration) {
  for_all(40, 25, [](Gen& g) {
    const Eigen::Index nx = g.integer(1, 3), nu = g.integer(1, 2);
    const auto st = g.stabilized(nx, nu);
    const CostSpec c{g.spd(nx), g.spd(nu)};
    const MatrixXd P = policy_evaluate(st.sys, st.K, c);
    const MatrixXd two_step = policy_evaluate(st.sys, policy_improve(st.sys, P, c.R), c);
    EXPECT_LE((vectorized_pi_step(st.sys, c, P) - two_step).norm(), 1e-9 * std::max(1.0, two_step.norm()));
  });
}

TEST(VectorizedPiStep, FixedPointAndScalarOperator) {
  const auto sys = ddpi::testing::coupled_plant();
  const auto cost = ddpi::testing::coupled_cost();
  const DareSolution sol = solve_dare(sys, cost);
  EXPECT_LE((vectorized_pi_step(sys, cost, sol.P) - sol.P).norm(), 1e-10);

  // Scalar: P+ = (q + r k^2) / (1 - (a + b k)^2), k = improve(P).
  const auto s = scalar_plant(0.5, 1.0);
  const auto c = scalar_cost(1, 1);
  const double P0 = 2.0;
  const double k = -0.5 * P0 / (1.0 + P0);
  const double expect = (1.0 + k * k) / (1.0 - (0.5 + k) * (0.5 + k));
  EXPECT_NEAR(vectorized_pi_step(s, c, MatrixXd::Constant(1, 1, P0))(0, 0), expect, 1e-13);
}

TEST(VectorizedPiStep, SingularOperatorThrows) {
  // P = 0 with B = 0 leaves K = 0 and a marginally stable closed loop.
  LinearSystem s{MatrixXd::Identity(1, 1), MatrixXd::Zero(1, 1)};
  EXPECT_THROW(vectorized_pi_step(s, scalar_cost(1, 1), MatrixXd::Zero(1, 1)), SingularOperator);
}

TEST(EstimateContraction, RatiosBelowOne) {
  const PiTrace scalar = pi_run(scalar_plant(0.5, 1.0), scalar_cost(1, 1), MatrixXd::Zero(1, 1), 100, 1e-15);
  const double cs = estimate_contraction(scalar);
  EXPECT_GT(cs, 0.0);
  EXPECT_LT(cs, 1.0);
  const PiTrace coupled =
      pi_run(ddpi::testing::coupled_plant(), ddpi::testing::coupled_cost(), ddpi::testing::coupled_K1(), 200, 1e-14);
  EXPECT_LT(estimate_contraction(coupled), 1.0);
}

TEST(EstimateContraction, TraceAtOptimumIsInsufficient) {
  const auto sys = ddpi::testing::coupled_plant();
  const auto cost = ddpi::testing::coupled_cost();
  const PiTrace tr = pi_run(sys, cost, solve_dare(sys, cost).K, 50, 1e-12);
  EXPECT_THROW(estimate_contraction(tr), InsufficientTrace);
}
