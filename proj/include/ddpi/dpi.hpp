#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "ddpi/lti_sim.hpp"
#include "ddpi/lyapunov_riccati.hpp"

namespace ddpi {

struct DpiConfig {
  std::size_t tau = 2;  // even
  std::size_t episodes = 1;
  MatrixXd K1;
  MatrixXd W;  // dither covariance, nu x nu, nonzero PSD
  std::uint64_t seed = 0;
  VectorXd x0;
  double max_gram_cond = 1e16;  // noise-free solves lose about sqrt(cond) * eps
  double divergence_norm = 1e6;  // ||K_hat||_F above this marks the run diverged

  /// Evenness, shapes and a nonzero dither. The sample minimum is left to the regressions.
  void validate(Eigen::Index nx, Eigen::Index nu) const;
};

/// Smallest even integer >= max(nx(nx+1), nu(nu+1)/2 + nu nx).
long long min_episode_length(long long nx, long long nu);

struct Sample {
  VectorXd x;
  VectorXd u;
  VectorXd x_next;
};

/// One episode of paired-dither data. `pi` holds the raw triples; `pe` holds the
/// pair sums (x_{2k-1}+x_{2k}, u_{2k-1}+u_{2k}, x_{2k}+x_{2k+1}) with 1-based k.
struct DpiEpisodeData {
  std::vector<Sample> pi;
  std::vector<Sample> pe;

  /// Throws DomainError for an odd or empty trajectory.
  static DpiEpisodeData from(const Trajectory& traj);
};

struct RegressionInfo {
  Eigen::Index rows = 0;
  Eigen::Index unknowns = 0;
  double gram_cond = 0.0;  // (sigma_max / sigma_min)^2 of the stacked regressors
};

/// phi_k = vecv(s_k) - vecv(s'_k).
VectorXd phi_regressor(const Sample& pair);

/// Gamma_t = [2 x (x) eta; vecv(u) - vecv(K x)], eta = u - K x.
VectorXd gamma_regressor(const Sample& s, const MatrixXd& K);

/// Kernel of K from the pair regression sum phi phi' vecs(P) = sum phi R_k.
/// Throws Underdetermined when rows < unknowns or the Gram condition exceeds max_cond.
MatrixXd dpi_evaluate(const DpiEpisodeData& data, const MatrixXd& K, const CostSpec& cost,
                      double max_cond = 1e16, RegressionInfo* info = nullptr);

struct DpiImprovement {
  MatrixXd K_next;
  MatrixXd BtPA;  // nu x nx
  MatrixXd BtPB;  // nu x nu
  RegressionInfo info;
};

/// Recovers B'PA and B'PB from sum Gamma Gamma' xi = sum Gamma c_t and returns
/// K_next = -(R + B'PB)^{-1} B'PA. Throws Underdetermined as dpi_evaluate.
DpiImprovement dpi_improve(const DpiEpisodeData& data, const MatrixXd& K, const MatrixXd& P,
                           const CostSpec& cost, double max_cond = 1e16);

struct DpiEpisode {
  std::size_t episode = 0;
  std::size_t t_begin = 0;
  std::size_t t_end = 0;
  MatrixXd K_hat;
  MatrixXd P_hat;
  MatrixXd K_next;
  double P_err = 0.0;
  double K_err = 0.0;
  double K_next_err = 0.0;
  double cond_phi = 0.0;
  double cond_gamma = 0.0;
  bool phi_persistent = false;    // local persistency, N = M = tau / 2
  bool gamma_persistent = false;  // local persistency, N = M = tau
  double pair_residual = 0.0;     // max ||s'_k - (A + B K) s_k||, from the true system
};

struct DpiTrace {
  std::vector<DpiEpisode> episodes;
  MatrixXd P_star;
  MatrixXd K_star;
  bool diverged = false;
  std::size_t total_steps = 0;
};

/// Direct data-driven PI. Throws Underdetermined carrying the failing episode.
DpiTrace dpi_run(const LinearSystem& sys_true, const CostSpec& cost, const DpiConfig& cfg);

/// Columns: episode, t_end, P_err, K_err, K_next_err, cond_phi, cond_gamma, phi_persistent, gamma_persistent.
void write_trace_csv(const DpiTrace& trace, std::ostream& os);

}  // namespace ddpi
