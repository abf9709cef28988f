#include "ddpi/ipi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include "ddpi/csv.hpp"
#include "ddpi/errors.hpp"

namespace ddpi {

namespace {

constexpr double kEpsCap = 1.0 - 1e-6;
constexpr double kInf = std::numeric_limits<double>::infinity();

bool dominated(double measured, double bound) { return measured <= bound + 1e-12 * std::max(1.0, bound); }

}  // namespace

void IpiConfig::validate(Eigen::Index nx, Eigen::Index nu) const {
  if (tau < 1) throw DomainError("IPI episode length must be at least 1");
  if (K1.rows() != nu || K1.cols() != nx) throw DomainError("K1 must be nu x nx");
  if (theta_hat0.rows() != nx || theta_hat0.cols() != nx + nu) throw DomainError("theta_hat0 must be nx x (nx+nu)");
  if (!(a > 0.0)) throw DomainError("H_0 scale a must be positive");
  if (x0.size() != nx) throw DomainError("x0 must have nx entries");
  if (dare_max_iters < 1) throw DomainError("dare_max_iters must be positive");
}

Assumption1Check check_assumption1(const MatrixXd& theta_hat, Eigen::Index nx, const StabilityReference* ref) {
  Assumption1Check out;
  out.stabilizable = is_stabilizable(LinearSystem::from_theta(theta_hat, nx));
  if (ref) {
    const double L = spectral_norm(ref->truth.A + ref->truth.B * ref->K_st);
    out.threshold = (1.0 - L) / (1.0 + spectral_norm(ref->K_st));
    out.dtheta_2 = spectral_norm(theta_hat - ref->truth.theta());
    out.guaranteed = *out.dtheta_2 < *out.threshold;
  }
  return out;
}

Assumption2Check check_assumption2(const MatrixXd& theta_hat, Eigen::Index nx, const MatrixXd& P_hat,
                                   const CostSpec& cost, const MatrixXd& K_hat,
                                   const std::optional<MatrixXd>& warm, int max_iters) {
  const LinearSystem est = LinearSystem::from_theta(theta_hat, nx);
  DareOptions opts;
  opts.max_iters = max_iters;
  opts.P_init = warm;
  const DareSolution sol = solve_dare(est, cost, opts);
  Assumption2Check out;
  out.gap = min_eig(P_hat - sol.P);
  out.holds = out.gap >= -1e-9;
  out.gain_stabilizes = is_schur_stable(est.A + est.B * K_hat);
  out.P_star_est = sol.P;
  return out;
}

IpiTrace ipi_run(const LinearSystem& sys_true, const CostSpec& cost, const IpiConfig& cfg) {
  sys_true.validate();
  const Eigen::Index nx = sys_true.nx();
  const Eigen::Index nu = sys_true.nu();
  cost.validate(nx, nu);
  cfg.validate(nx, nu);

  IpiTrace tr;
  tr.theta_true = sys_true.theta();
  tr.a = cfg.a;
  const DareSolution star = solve_dare(sys_true, cost);
  tr.P_star = star.P;
  tr.K_star = star.K;

  EstimatorState est = EstimatorState::init(cfg.theta_hat0, cfg.a);
  DitherGenerator gen(cfg.dither, nu);
  const StabilityReference ref{sys_true, cfg.K1};
  VectorXd x = cfg.x0;
  MatrixXd K = cfg.K1;
  std::optional<MatrixXd> P_prev;
  std::optional<MatrixXd> warm;
  tr.dtheta_upper.push_back(oracle::error_upper_bound(est, tr.theta_true));
  tr.theta_err.push_back((est.theta_hat - tr.theta_true).norm());
  tr.episodes.reserve(cfg.episodes);

  for (std::size_t e = 1; e <= cfg.episodes; ++e) {
    IpiEpisode ep;
    ep.episode = e;
    ep.t_begin = (e - 1) * cfg.tau;
    ep.t_end = e * cfg.tau;

    // Evaluation on the estimate from before this episode.
    const LinearSystem before = LinearSystem::from_theta(est.theta_hat, nx);
    bool skip_eval = false;
    if (!is_schur_stable(before.A + before.B * K)) {
      try {
        DareOptions opts;
        opts.max_iters = cfg.dare_max_iters;
        opts.P_init = warm;
        K = solve_dare(before, cost, opts).K;
        ep.flags |= kIpiReinitialized;
      } catch (const DdpiError&) {
        if (!P_prev) throw NotStabilizing("K1 does not stabilize the initial estimate");
        skip_eval = true;
        ep.flags |= kIpiEvalSkipped;
      }
    }
    MatrixXd P = skip_eval ? *P_prev : policy_evaluate(before, K, cost);
    const double eps_eval = spectral_norm(before.A + before.B * K);

    // Excitation and streaming identification.
    const Trajectory traj = rollout(sys_true, K, gen, x, cfg.tau);
    for (std::size_t t = 0; t < traj.length(); ++t) est = rls_update(std::move(est), traj.regressor(t), traj.states[t + 1]);
    x = traj.states.back();
    ep.sums = EpisodeSums::from(traj);

    // Improvement on the updated estimate.
    const LinearSystem after = LinearSystem::from_theta(est.theta_hat, nx);
    ep.a1 = check_assumption1(est.theta_hat, nx, &ref);
    MatrixXd K_next = K;
    if (ep.a1.stabilizable) {
      K_next = policy_improve(after, P, cost.R);
    } else {
      ep.flags |= kIpiNotStabilizable;
    }
    if (cfg.monitor_assumption2 && ep.a1.stabilizable) {
      try {
        ep.a2 = check_assumption2(est.theta_hat, nx, P, cost, K, warm, cfg.dare_max_iters);
        warm = ep.a2->P_star_est;
        if (!ep.a2->holds) ep.flags |= kIpiAssumption2Violated;
      } catch (const DdpiError&) {
        ep.flags |= kIpiAssumption2Unknown;
      }
    }

    ep.eps_true = spectral_norm(sys_true.A + sys_true.B * K);
    ep.eps_est = std::max(eps_eval, spectral_norm(after.A + after.B * K_next));
    ep.K_hat = K;
    ep.P_hat = P;
    ep.theta_hat = est.theta_hat;
    ep.K_next = K_next;
    ep.P_err = (P - tr.P_star).norm();
    ep.K_err = (K - tr.K_star).norm();
    ep.K_next_err = (K_next - tr.K_star).norm();
    ep.theta_err = (est.theta_hat - tr.theta_true).norm();
    ep.dtheta_upper = oracle::error_upper_bound(est, tr.theta_true);
    tr.dtheta_upper.push_back(ep.dtheta_upper);
    tr.theta_err.push_back(ep.theta_err);
    tr.episodes.push_back(std::move(ep));

    K = std::move(K_next);
    P_prev = std::move(P);
  }
  tr.total_steps = cfg.episodes * cfg.tau;
  if (tr.episodes.empty()) return tr;

  // Bound constants.
  const PiTrace mb = pi_run(sys_true, cost, cfg.K1, 200, 1e-14);
  tr.c_hat = estimate_contraction(mb);
  double eps = 0.0, eps_max = 0.0;
  for (const auto& ep : tr.episodes) {
    eps = std::max({eps, ep.eps_true, spectral_norm(sys_true.A + sys_true.B * ep.K_next)});
    eps_max = std::max(eps_max, ep.eps_est);
  }
  if (eps > kEpsCap) {
    eps = kEpsCap;
    tr.eps_clamped = true;
  }
  if (eps_max > kEpsCap) {
    eps_max = kEpsCap;
    tr.eps_max_clamped = true;
  }
  tr.inputs.normA = sys_true.A.norm();
  tr.inputs.normB = sys_true.B.norm();
  tr.inputs.normQ = cost.Q.norm();
  tr.inputs.normR = cost.R.norm();
  tr.inputs.normRinv = cost.R.inverse().norm();
  tr.inputs.normP0 = tr.episodes.front().P_hat.norm();
  tr.inputs.eps = eps;
  tr.inputs.eps_max = eps_max;
  tr.inputs.nx = static_cast<int>(nx);
  tr.rho = rho_coefficients(tr.inputs);
  tr.sigma0 = sigma(tr.rho, tr.dtheta_upper.front());

  PsdStream stream;
  stream.reserve(tr.episodes.size());
  for (const auto& ep : tr.episodes) stream.push_back(ep.sums.D);
  tr.persistency = analyze_persistency(stream);

  const std::uint32_t global_flags = (tr.eps_clamped ? kIpiEpsClamped : 0u) | (tr.eps_max_clamped ? kIpiEpsMaxClamped : 0u);
  const std::size_t E = tr.episodes.size();
  const double c = tr.c_hat;
  std::vector<double> cpow(E + 1, 1.0);
  for (std::size_t m = 1; m <= E; ++m) cpow[m] = cpow[m - 1] * c;
  std::vector<double> disturbance(E);
  for (std::size_t j = 0; j < E; ++j) disturbance[j] = sigma(tr.rho, tr.dtheta_upper[j]) * tr.dtheta_upper[j] / (1.0 - c);

  const double dtheta0 = tr.theta_err.front();
  const int nd = static_cast<int>(nx + nu);
  const int jinf = tr.persistency.jnon_inf();
  auto t3 = [&](std::size_t i) {
    return theorem3_bound(dtheta0, cfg.a, nd, tr.persistency.N_max, tr.persistency.alpha_min, jinf,
                          static_cast<long long>(i));
  };

  tr.audit = {};
  double omega = 0.0;
  for (std::size_t k = 0; k < E; ++k) {
    IpiEpisode& ep = tr.episodes[k];
    ep.flags |= global_flags;
    omega = std::max(omega, disturbance[k] * (1.0 - c));
    ep.theorem6 = cpow[k] * tr.episodes.front().P_err + omega / (1.0 - c);
    ep.eq33 = composed_error_bound(tr, k);
    double cmin = kInf;
    for (std::size_t kr = 2; kr <= k; ++kr) cmin = std::min(cmin, cpow[k - kr] * tr.episodes[kr].P_err + disturbance[kr]);
    ep.corollary3_min = cmin;
    ep.theorem3 = t3(k + 1);

    ++tr.audit.checked;
    if (dominated(ep.P_err, ep.theorem6)) ++tr.audit.theorem6_ok;
    if (dominated(ep.P_err, ep.corollary3_min)) ++tr.audit.corollary3_ok;
    if (dominated(ep.P_err, ep.eq33)) ++tr.audit.eq33_ok;
    if (dominated(ep.dtheta_upper, ep.theorem3) && dominated(ep.theta_err, ep.theorem3)) ++tr.audit.theorem3_ok;
    if (dominated(ep.theta_err, ep.dtheta_upper)) ++tr.audit.upper_ok;
  }
  return tr;
}

double theorem6_bound(const IpiTrace& trace, std::size_t k) {
  if (k >= trace.episodes.size()) throw DomainError("theorem6_bound: episode index beyond trace");
  return theorem6_bound(trace.rho, trace.c_hat, trace.episodes.front().P_err, trace.dtheta_upper, k);
}

double corollary3_restart_bound(const IpiTrace& trace, std::size_t k_re, std::size_t k) {
  if (k_re < 2 || k < k_re || k >= trace.episodes.size()) throw DomainError("corollary3_restart_bound: need 1 < k_re <= k");
  return corollary3_bound(trace.rho, trace.c_hat, trace.episodes[k_re].P_err, trace.dtheta_upper, k_re, k);
}

double composed_error_bound(const IpiTrace& trace, std::size_t k) {
  if (k >= trace.episodes.size()) throw DomainError("composed_error_bound: episode index beyond trace");
  if (trace.persistency.jnon.size() != trace.episodes.size()) throw DomainError("composed_error_bound: missing persistency report");
  const int nd = static_cast<int>(trace.theta_true.cols());
  const double f_g = theorem3_bound(trace.theta_err.front(), trace.a, nd, trace.persistency.N_max,
                                    trace.persistency.alpha_min, trace.persistency.jnon_inf(),
                                    static_cast<long long>(k));
  return composed_bound(trace.sigma0, trace.c_hat, trace.episodes.front().P_err, f_g, k);
}

ReplayResult replay_dynamical_form(const IpiTrace& trace, const CostSpec& cost, const IpiConfig& cfg) {
  ReplayResult r;
  if (trace.episodes.empty()) return r;
  const Eigen::Index nx = trace.theta_true.rows();
  EstimatorState est = EstimatorState::init(cfg.theta_hat0, cfg.a);
  MatrixXd P = policy_evaluate(LinearSystem::from_theta(est.theta_hat, nx), cfg.K1, cost);
  for (std::size_t k = 0; k < trace.episodes.size(); ++k) {
    const IpiEpisode& ep = trace.episodes[k];
    if (ep.flags & (kIpiNotStabilizable | kIpiReinitialized | kIpiEvalSkipped)) break;
    r.max_P_diff = std::max(r.max_P_diff, (P - ep.P_hat).norm());
    est = episode_update(std::move(est), ep.sums);
    r.max_theta_diff = std::max(r.max_theta_diff, (est.theta_hat - ep.theta_hat).norm());
    if (k + 1 < trace.episodes.size()) P = vectorized_pi_step(LinearSystem::from_theta(est.theta_hat, nx), cost, P);
  }
  return r;
}

void write_trace_csv(const IpiTrace& trace, std::ostream& os) {
  CsvWriter w(os);
  w.header({"episode", "t_end", "P_err", "K_err", "K_next_err", "theta_err", "dtheta_upper", "theorem6",
            "corollary3", "eq33", "theorem3", "flags"});
  for (const auto& ep : trace.episodes) {
    w.field(static_cast<long long>(ep.episode));
    w.field(static_cast<long long>(ep.t_end));
    w.field(ep.P_err);
    w.field(ep.K_err);
    w.field(ep.K_next_err);
    w.field(ep.theta_err);
    w.field(ep.dtheta_upper);
    w.field(ep.theorem6);
    w.field(ep.corollary3_min);
    w.field(ep.eq33);
    w.field(ep.theorem3);
    w.field(static_cast<std::uint64_t>(ep.flags));
    w.end_row();
  }
}

}  // namespace ddpi
