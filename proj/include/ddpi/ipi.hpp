#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "ddpi/bounds.hpp"
#include "ddpi/lti_sim.hpp"
#include "ddpi/lyapunov_riccati.hpp"
#include "ddpi/persistency.hpp"
#include "ddpi/rls_estimator.hpp"

namespace ddpi {

struct IpiConfig {
  std::size_t tau = 1;
  std::size_t episodes = 1;
  MatrixXd K1;
  MatrixXd theta_hat0;  // nx x (nx+nu)
  double a = 1.0;       // H_0 = a I
  DitherPolicy dither;
  VectorXd x0;
  bool monitor_assumption2 = true;
  int dare_max_iters = 20000;

  /// Throws DomainError on shape or range violations.
  void validate(Eigen::Index nx, Eigen::Index nu) const;
};

enum IpiFlag : std::uint32_t {
  kIpiNotStabilizable = 1u << 0,     // estimate failed PBH; improvement skipped
  kIpiReinitialized = 1u << 1,       // K_hat replaced by the estimate's DARE gain
  kIpiEvalSkipped = 1u << 2,         // no stabilizing gain for the estimate; previous kernel kept
  kIpiAssumption2Violated = 1u << 3,
  kIpiAssumption2Unknown = 1u << 4,  // estimate DARE unavailable
  kIpiEpsClamped = 1u << 5,
  kIpiEpsMaxClamped = 1u << 6,
};

struct Assumption1Check {
  bool stabilizable = false;
  // Filled only when the true system and a reference gain K_st are supplied.
  std::optional<double> threshold;   // (1 - ||A + B K_st||_2) / (1 + ||K_st||_2)
  std::optional<double> dtheta_2;    // ||theta_hat - theta||_2
  bool guaranteed = false;           // dtheta_2 < threshold
};

struct StabilityReference {
  LinearSystem truth;
  MatrixXd K_st;
};

Assumption1Check check_assumption1(const MatrixXd& theta_hat, Eigen::Index nx,
                                   const StabilityReference* ref = nullptr);

struct Assumption2Check {
  bool holds = false;          // P_hat - P*_est >= -1e-9 I
  double gap = 0.0;            // min eigenvalue of P_hat - P*_est
  bool gain_stabilizes = false;  // K_hat stabilizes the estimate
  MatrixXd P_star_est;
};

/// Throws NotStabilizable when the estimate fails PBH and NotConverged when its
/// DARE does not settle within the iteration cap.
Assumption2Check check_assumption2(const MatrixXd& theta_hat, Eigen::Index nx, const MatrixXd& P_hat,
                                   const CostSpec& cost, const MatrixXd& K_hat,
                                   const std::optional<MatrixXd>& warm = std::nullopt,
                                   int max_iters = 20000);

/// Episode e (1-based) covers timesteps [(e-1) tau, e tau). Kernel index k = e - 1.
struct IpiEpisode {
  std::size_t episode = 0;
  std::size_t t_begin = 0;
  std::size_t t_end = 0;
  MatrixXd K_hat;      // gain evaluated and applied during the episode
  MatrixXd P_hat;      // kernel of K_hat on the estimate from before the episode
  MatrixXd theta_hat;  // estimate after the episode
  MatrixXd K_next;     // improved gain from P_hat and theta_hat
  double P_err = 0.0;
  double K_err = 0.0;
  double K_next_err = 0.0;
  double theta_err = 0.0;     // after the episode
  double dtheta_upper = 0.0;  // after the episode
  std::uint32_t flags = 0;
  Assumption1Check a1;
  std::optional<Assumption2Check> a2;
  double eps_true = 0.0;  // ||A + B K_hat||_2
  double eps_est = 0.0;   // max of estimated closed-loop norms at evaluation and improvement
  EpisodeSums sums;

  double theorem6 = 0.0;
  double corollary3_min = 0.0;  // tightest restart bound over admissible anchors
  double eq33 = 0.0;
  double theorem3 = 0.0;        // bound on ||theta_hat - theta|| after the episode
};

struct IpiBoundAudit {
  std::size_t theorem6_ok = 0;
  std::size_t corollary3_ok = 0;
  std::size_t eq33_ok = 0;
  std::size_t theorem3_ok = 0;
  std::size_t upper_ok = 0;  // ||theta_hat - theta|| <= dtheta_upper
  std::size_t checked = 0;
  bool all() const {
    return theorem6_ok == checked && corollary3_ok == checked && eq33_ok == checked &&
           theorem3_ok == checked && upper_ok == checked;
  }
};

struct IpiTrace {
  std::vector<IpiEpisode> episodes;
  MatrixXd theta_true;
  MatrixXd P_star;
  MatrixXd K_star;
  std::vector<double> dtheta_upper;  // index j: after j episodes
  std::vector<double> theta_err;     // index j: after j episodes
  double a = 1.0;  // H_0 scale of the run
  double c_hat = 0.0;
  BoundInputs inputs;
  RhoCoefficients rho{};
  double sigma0 = 0.0;
  PersistencyReport persistency;  // over the episode sums D_i
  bool eps_clamped = false;
  bool eps_max_clamped = false;
  IpiBoundAudit audit;
  std::size_t total_steps = 0;
};

/// Algorithm: evaluate K_hat on the previous estimate, excite for tau steps with
/// u = K_hat x + e streaming RLS updates, then improve on the new estimate.
/// Diagnostics and bounds are filled from the true system.
IpiTrace ipi_run(const LinearSystem& sys_true, const CostSpec& cost, const IpiConfig& cfg);

double theorem6_bound(const IpiTrace& trace, std::size_t k);
double corollary3_restart_bound(const IpiTrace& trace, std::size_t k_re, std::size_t k);
double composed_error_bound(const IpiTrace& trace, std::size_t k);

/// Replays the run through the batch estimator and the single-solve PI operator
/// using the recorded episode sums. Returns max ||P_replay - P_hat||_F and
/// max ||theta_replay - theta_hat||_F over episodes.
struct ReplayResult {
  double max_P_diff = 0.0;
  double max_theta_diff = 0.0;
};
ReplayResult replay_dynamical_form(const IpiTrace& trace, const CostSpec& cost, const IpiConfig& cfg);

/// Columns: episode, t_end, P_err, K_err, K_next_err, theta_err, dtheta_upper,
/// theorem6, corollary3, eq33, theorem3, flags.
void write_trace_csv(const IpiTrace& trace, std::ostream& os);

}  // namespace ddpi
