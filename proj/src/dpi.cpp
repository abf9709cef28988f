#include "ddpi/dpi.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include "ddpi/csv.hpp"
#include "ddpi/errors.hpp"
#include "ddpi/persistency.hpp"
#include "ddpi/tensor_ops.hpp"

namespace ddpi {

namespace {

struct LsqResult {
  VectorXd solution;
  RegressionInfo info;
};

// Least squares over stacked rows; the Gram condition is the squared row-matrix condition.
LsqResult regress(const MatrixXd& rows, const VectorXd& y, double max_cond, const char* what) {
  LsqResult r;
  r.info.rows = rows.rows();
  r.info.unknowns = rows.cols();
  if (rows.rows() < rows.cols()) {
    r.info.gram_cond = INFINITY;
    throw Underdetermined(std::string(what) + ": " + std::to_string(rows.rows()) + " rows for " +
                          std::to_string(rows.cols()) + " unknowns");
  }
  Eigen::JacobiSVD<MatrixXd> svd(rows);
  const auto& sv = svd.singularValues();
  const double smin = sv(sv.size() - 1);
  r.info.gram_cond = smin > 0.0 ? (sv(0) / smin) * (sv(0) / smin) : INFINITY;
  if (!(r.info.gram_cond <= max_cond)) {
    throw Underdetermined(std::string(what) + ": Gram condition number " + std::to_string(r.info.gram_cond));
  }
  r.solution = rows.colPivHouseholderQr().solve(y);
  return r;
}

bool window_full_rank(const PsdStream& stream, std::size_t N) {
  if (stream.empty()) return false;
  const PersistencyWindow w = min_persistency_window(stream, 0);
  return w.N_PW > 0 && static_cast<std::size_t>(w.N_PW) <= N;
}

}  // namespace

void DpiConfig::validate(Eigen::Index nx, Eigen::Index nu) const {
  if (tau < 2 || tau % 2 != 0) throw DomainError("DPI episode length must be even and at least 2");
  if (K1.rows() != nu || K1.cols() != nx) throw DomainError("K1 must be nu x nx");
  if (W.rows() != nu || W.cols() != nu) throw DomainError("dither covariance must be nu x nu");
  if (W.isZero(0.0)) throw DomainError("DPI needs a nonzero dither covariance");
  if (x0.size() != nx) throw DomainError("x0 must have nx entries");
  if (!(max_gram_cond > 1.0)) throw DomainError("max_gram_cond must exceed 1");
  if (!(divergence_norm > 0.0)) throw DomainError("divergence_norm must be positive");
}

long long min_episode_length(long long nx, long long nu) {
  if (nx < 1 || nu < 1) throw DomainError("min_episode_length: dimensions must be positive");
  const long long raw = std::max(nx * (nx + 1), nu * (nu + 1) / 2 + nu * nx);
  return raw % 2 == 0 ? raw : raw + 1;
}

DpiEpisodeData DpiEpisodeData::from(const Trajectory& traj) {
  const std::size_t T = traj.length();
  if (T == 0 || T % 2 != 0) throw DomainError("DPI episode must contain an even, nonzero number of samples");
  DpiEpisodeData d;
  d.pi.reserve(T);
  for (std::size_t t = 0; t < T; ++t) d.pi.push_back({traj.states[t], traj.inputs[t], traj.states[t + 1]});
  d.pe.reserve(T / 2);
  for (std::size_t t = 0; t < T; t += 2) {
    d.pe.push_back({traj.states[t] + traj.states[t + 1], traj.inputs[t] + traj.inputs[t + 1],
                    traj.states[t + 1] + traj.states[t + 2]});
  }
  return d;
}

VectorXd phi_regressor(const Sample& pair) { return vecv(pair.x) - vecv(pair.x_next); }

VectorXd gamma_regressor(const Sample& s, const MatrixXd& K) {
  const VectorXd Kx = K * s.x;
  const VectorXd eta = s.u - Kx;
  const Eigen::Index nx = s.x.size();
  const Eigen::Index nu = s.u.size();
  VectorXd g(nx * nu + tri_size(nu));
  for (Eigen::Index i = 0; i < nx; ++i) g.segment(i * nu, nu) = 2.0 * s.x(i) * eta;
  g.tail(tri_size(nu)) = vecv(s.u) - vecv(Kx);
  return g;
}

MatrixXd dpi_evaluate(const DpiEpisodeData& data, const MatrixXd& K, const CostSpec& cost, double max_cond,
                      RegressionInfo* info) {
  if (data.pe.empty()) throw Underdetermined("policy evaluation: no data pairs");
  const Eigen::Index nx = data.pe.front().x.size();
  const MatrixXd W = cost.Q + K.transpose() * cost.R * K;
  MatrixXd rows(static_cast<Eigen::Index>(data.pe.size()), tri_size(nx));
  VectorXd y(rows.rows());
  for (std::size_t k = 0; k < data.pe.size(); ++k) {
    const Sample& p = data.pe[k];
    rows.row(static_cast<Eigen::Index>(k)) = phi_regressor(p).transpose();
    y(static_cast<Eigen::Index>(k)) = p.x.dot(W * p.x);
  }
  RegressionInfo local;
  RegressionInfo& out = info ? *info : local;
  out.rows = rows.rows();
  out.unknowns = rows.cols();
  out.gram_cond = INFINITY;
  const LsqResult r = regress(rows, y, max_cond, "policy evaluation");
  out = r.info;
  return mats(r.solution, nx);
}

DpiImprovement dpi_improve(const DpiEpisodeData& data, const MatrixXd& K, const MatrixXd& P, const CostSpec& cost,
                           double max_cond) {
  if (data.pi.empty()) throw Underdetermined("policy improvement: no samples");
  const Eigen::Index nx = data.pi.front().x.size();
  const Eigen::Index nu = data.pi.front().u.size();
  const MatrixXd stage = cost.Q + K.transpose() * cost.R * K - P;
  const Eigen::Index p = nx * nu + tri_size(nu);
  MatrixXd rows(static_cast<Eigen::Index>(data.pi.size()), p);
  VectorXd y(rows.rows());
  for (std::size_t t = 0; t < data.pi.size(); ++t) {
    const Sample& s = data.pi[t];
    rows.row(static_cast<Eigen::Index>(t)) = gamma_regressor(s, K).transpose();
    y(static_cast<Eigen::Index>(t)) = s.x.dot(stage * s.x) + s.x_next.dot(P * s.x_next);
  }
  if (rows.isZero(0.0)) throw Underdetermined("policy improvement: dither is identically zero");
  DpiImprovement out;
  out.info.rows = rows.rows();
  out.info.unknowns = p;
  out.info.gram_cond = INFINITY;
  const LsqResult r = regress(rows, y, max_cond, "policy improvement");
  out.info = r.info;
  out.BtPA = unvec(r.solution.head(nx * nu), nu, nx);
  out.BtPB = mats(r.solution.tail(tri_size(nu)), nu);
  out.K_next = -(cost.R + out.BtPB).ldlt().solve(out.BtPA);
  return out;
}

DpiTrace dpi_run(const LinearSystem& sys_true, const CostSpec& cost, const DpiConfig& cfg) {
  sys_true.validate();
  const Eigen::Index nx = sys_true.nx();
  const Eigen::Index nu = sys_true.nu();
  cost.validate(nx, nu);
  cfg.validate(nx, nu);

  DpiTrace tr;
  const DareSolution star = solve_dare(sys_true, cost);
  tr.P_star = star.P;
  tr.K_star = star.K;

  DitherGenerator gen(DitherPolicy{DitherKind::paired, cfg.W, cfg.seed}, nu);
  VectorXd x = cfg.x0;
  MatrixXd K = cfg.K1;
  for (std::size_t e = 1; e <= cfg.episodes; ++e) {
    DpiEpisode ep;
    ep.episode = e;
    ep.t_begin = (e - 1) * cfg.tau;
    ep.t_end = e * cfg.tau;
    const Trajectory traj = rollout(sys_true, K, gen, x, cfg.tau);
    x = traj.states.back();
    const DpiEpisodeData data = DpiEpisodeData::from(traj);

    const MatrixXd Acl = sys_true.A + sys_true.B * K;
    for (const Sample& p : data.pe) ep.pair_residual = std::max(ep.pair_residual, (p.x_next - Acl * p.x).norm());

    PsdStream phi_stream, gamma_stream;
    for (const Sample& p : data.pe) {
      const VectorXd f = phi_regressor(p);
      phi_stream.push_back(f * f.transpose());
    }
    for (const Sample& s : data.pi) {
      const VectorXd g = gamma_regressor(s, K);
      gamma_stream.push_back(g * g.transpose());
    }
    ep.phi_persistent = window_full_rank(phi_stream, cfg.tau / 2);
    ep.gamma_persistent = window_full_rank(gamma_stream, cfg.tau);

    try {
      RegressionInfo ev;
      ep.P_hat = dpi_evaluate(data, K, cost, cfg.max_gram_cond, &ev);
      ep.cond_phi = ev.gram_cond;
      const DpiImprovement im = dpi_improve(data, K, ep.P_hat, cost, cfg.max_gram_cond);
      ep.cond_gamma = im.info.gram_cond;
      ep.K_next = im.K_next;
    } catch (const Underdetermined& err) {
      throw Underdetermined(std::string(err.what()) + " in episode " + std::to_string(e), e);
    }
    ep.K_hat = K;
    ep.P_err = (ep.P_hat - tr.P_star).norm();
    ep.K_err = (K - tr.K_star).norm();
    ep.K_next_err = (ep.K_next - tr.K_star).norm();
    tr.episodes.push_back(ep);
    tr.total_steps = ep.t_end;
    K = ep.K_next;
    if (!(K.norm() <= cfg.divergence_norm)) {
      tr.diverged = true;
      break;
    }
  }
  return tr;
}

void write_trace_csv(const DpiTrace& trace, std::ostream& os) {
  CsvWriter w(os);
  w.header({"episode", "t_end", "P_err", "K_err", "K_next_err", "cond_phi", "cond_gamma", "phi_persistent",
            "gamma_persistent"});
  for (const auto& ep : trace.episodes) {
    w.field(static_cast<long long>(ep.episode));
    w.field(static_cast<long long>(ep.t_end));
    w.field(ep.P_err);
    w.field(ep.K_err);
    w.field(ep.K_next_err);
    w.field(ep.cond_phi);
    w.field(ep.cond_gamma);
    w.field(ep.phi_persistent ? 1 : 0);
    w.field(ep.gamma_persistent ? 1 : 0);
    w.end_row();
  }
}

}  // namespace ddpi
