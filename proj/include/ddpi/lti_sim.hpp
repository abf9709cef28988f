#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace ddpi {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct LinearSystem {
  MatrixXd A;  // nx x nx
  MatrixXd B;  // nx x nu

  Eigen::Index nx() const { return A.rows(); }
  Eigen::Index nu() const { return B.cols(); }

  /// Throws DomainError on inconsistent dimensions.
  void validate() const;

  /// theta = [A B], nx x (nx+nu).
  MatrixXd theta() const;
  static LinearSystem from_theta(const MatrixXd& theta, Eigen::Index nx);
};

double spectral_radius(const MatrixXd& m);

/// Spectral radius below 1 - margin.
bool is_schur_stable(const MatrixXd& m, double margin = 1e-9);

/// PBH test: rank [A - lambda I, B] = nx for every eigenvalue with |lambda| >= 1 - margin.
bool is_stabilizable(const LinearSystem& sys, double margin = 1e-9);

enum class DitherKind { zero, gaussian, paired };

struct DitherPolicy {
  DitherKind kind = DitherKind::zero;
  MatrixXd W;  // nu x nu covariance; unused for zero
  std::uint64_t seed = 0;
};

/// Stateful dither source. Generator: std::mt19937_64 seeded with `seed`,
/// std::normal_distribution<double>, colored by a symmetric square root of W.
/// For `paired`, samples 0, 2, 4, ... are fresh and sample 2k+1 is the negation of 2k.
class DitherGenerator {
 public:
  DitherGenerator(const DitherPolicy& policy, Eigen::Index nu);
  VectorXd next();
  std::uint64_t count() const { return count_; }

 private:
  DitherKind kind_;
  Eigen::Index nu_;
  MatrixXd root_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  VectorXd last_;
  std::uint64_t count_ = 0;
};

/// states has T+1 entries x_0..x_T; inputs has T entries u_0..u_{T-1}.
struct Trajectory {
  std::vector<VectorXd> states;
  std::vector<VectorXd> inputs;

  std::size_t length() const { return inputs.size(); }
  /// d_t = (x_t; u_t).
  VectorXd regressor(std::size_t t) const;
  /// One row per step: t, x_t..., u_t...
  void write_csv(std::ostream& os) const;
};

/// Ax + Bu. Throws DomainError on dimension mismatch.
VectorXd step(const LinearSystem& sys, const VectorXd& x, const VectorXd& u);

/// u_t = K x_t + dither_t for t = 0..T-1; consumes T samples from `dither`.
Trajectory rollout(const LinearSystem& sys, const MatrixXd& K, DitherGenerator& dither,
                   const VectorXd& x0, std::size_t T);

Trajectory rollout(const LinearSystem& sys, const MatrixXd& K, const DitherPolicy& dither,
                   const VectorXd& x0, std::size_t T);

}  // namespace ddpi
