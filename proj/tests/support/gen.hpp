#pragma once

// Seeded generators for property tests. Every case is reproducible from its index.

#include <cstdint>
#include <functional>
#include <random>
#include <string>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "ddpi/lti_sim.hpp"
#include "ddpi/lyapunov_riccati.hpp"

namespace ddpi::testing {

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool coin(double p = 0.5) { return uniform(0.0, 1.0) < p; }

  Eigen::MatrixXd matrix(Eigen::Index r, Eigen::Index c, double scale = 1.0) {
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
      for (Eigen::Index i = 0; i < r; ++i) m(i, j) = scale * normal();
    return m;
  }
  Eigen::VectorXd vector(Eigen::Index n, double scale = 1.0) { return matrix(n, 1, scale).col(0); }

  Eigen::MatrixXd symmetric(Eigen::Index n) {
    const Eigen::MatrixXd m = matrix(n, n);
    return 0.5 * (m + m.transpose());
  }

  /// PSD with the given rank (rank == n gives positive definite almost surely).
  Eigen::MatrixXd psd(Eigen::Index n, Eigen::Index rank, double scale = 1.0) {
    const Eigen::MatrixXd f = matrix(n, rank, scale);
    return f * f.transpose();
  }
  Eigen::MatrixXd spd(Eigen::Index n, double floor = 0.1) {
    return psd(n, n) + floor * Eigen::MatrixXd::Identity(n, n);
  }

  /// Matrix with spectral norm exactly `norm2`.
  Eigen::MatrixXd with_spectral_norm(Eigen::Index n, double norm2) {
    Eigen::MatrixXd m = matrix(n, n);
    const double s = Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues()(0);
    return m * (norm2 / s);
  }

  /// Random (A, B) plus a gain that makes A + BK Schur stable.
  struct Stabilized {
    LinearSystem sys;
    Eigen::MatrixXd K;
  };
  Stabilized stabilized(Eigen::Index nx, Eigen::Index nu) {
    LinearSystem s;
    s.A = matrix(nx, nx, 0.6);
    s.B = matrix(nx, nu);
    const CostSpec c{Eigen::MatrixXd::Identity(nx, nx), Eigen::MatrixXd::Identity(nu, nu)};
    for (int attempt = 0; attempt < 50; ++attempt) {
      if (is_stabilizable(s)) {
        try {
          return {s, solve_dare(s, c).K};
        } catch (const std::exception&) {
        }
      }
      s.B = matrix(nx, nu);
    }
    s.B = Eigen::MatrixXd::Identity(nx, nu);
    s.A = with_spectral_norm(nx, 0.5);
    return {s, Eigen::MatrixXd::Zero(nu, nx)};
  }

  std::mt19937_64& rng() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

/// Runs `body` on `cases` independent generators; a failure names its case seed.
inline void for_all(int cases, std::uint64_t base_seed, const std::function<void(Gen&)>& body) {
  for (int k = 0; k < cases; ++k) {
    const std::uint64_t seed = base_seed * 1000003ULL + static_cast<std::uint64_t>(k);
    SCOPED_TRACE("property case seed " + std::to_string(seed));
    Gen g(seed);
    body(g);
    if (::testing::Test::HasFatalFailure()) return;
  }
}

/// The three-state coupled plant used throughout the experiments.
inline LinearSystem coupled_plant() {
  LinearSystem s;
  s.A.resize(3, 3);
  s.A << 1.01, 0.01, 0, 0.01, 1.01, 0.01, 0, 0.01, 1.01;
  s.B = Eigen::MatrixXd::Identity(3, 3);
  return s;
}
inline CostSpec coupled_cost() { return {0.001 * Eigen::MatrixXd::Identity(3, 3), Eigen::MatrixXd::Identity(3, 3)}; }
inline Eigen::MatrixXd coupled_K1() { return Eigen::Vector3d(-1.5, -1.0, -0.5).asDiagonal(); }

inline LinearSystem scalar_plant(double a, double b) {
  LinearSystem s;
  s.A = Eigen::MatrixXd::Constant(1, 1, a);
  s.B = Eigen::MatrixXd::Constant(1, 1, b);
  return s;
}
inline CostSpec scalar_cost(double q, double r) {
  return {Eigen::MatrixXd::Constant(1, 1, q), Eigen::MatrixXd::Constant(1, 1, r)};
}

/// Positive root of p^2 - 0.25 p - 1 = 0, the scalar DARE for a = 0.5, b = q = r = 1.
inline double scalar_dare_root() { return (0.25 + std::sqrt(4.0625)) / 2.0; }

}  // namespace ddpi::testing
