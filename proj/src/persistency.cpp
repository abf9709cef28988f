#include "ddpi/persistency.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ddpi/csv.hpp"
#include "ddpi/errors.hpp"
#include "ddpi/tensor_ops.hpp"

namespace ddpi {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::VectorXd eigs(const MatrixXd& s) {
  return Eigen::SelfAdjointEigenSolver<MatrixXd>(symmetrize(s), Eigen::EigenvaluesOnly).eigenvalues();
}

bool full_rank(const MatrixXd& s, double* lambda_min) {
  const Eigen::VectorXd ev = eigs(s);
  const double lo = ev(0);
  const double hi = ev(ev.size() - 1);
  if (lambda_min) *lambda_min = lo;
  return lo > 0.0 && lo > kFullRankRelTol * hi;
}

MatrixXd window_sum(const PsdStream& s, std::size_t start, std::size_t len) {
  MatrixXd acc = s[start];
  for (std::size_t k = 1; k < len; ++k) acc += s[start + k];
  return acc;
}

bool window_ok(const PsdStream& s, std::size_t j, long long N, double alpha) {
  const Eigen::VectorXd ev = eigs(window_sum(s, j, static_cast<std::size_t>(N)));
  // Slack covers eigensolver rounding on the window's scale, never alpha itself.
  const double slack = 1e-12 * alpha + 64.0 * std::numeric_limits<double>::epsilon() * ev(ev.size() - 1);
  return ev(0) >= alpha - slack;
}

void check_nalpha(long long N, double alpha) {
  if (N < 1) throw DomainError("window length N must be at least 1");
  if (!(alpha > 0.0)) throw DomainError("alpha must be positive");
}

}  // namespace

void validate_stream(const PsdStream& stream) {
  if (stream.empty()) return;
  const Eigen::Index n = stream.front().rows();
  for (const auto& y : stream) {
    if (y.rows() != n || y.cols() != n || n == 0) throw DomainError("stream entries must share one square shape");
    if (!is_symmetric(y, 1e-10)) throw DomainError("stream entry is not symmetric");
    if (eigs(y)(0) < -1e-10) throw DomainError("stream entry is not positive semidefinite");
  }
}

bool is_globally_persistent(const PsdStream& stream, long long N, double alpha) {
  check_nalpha(N, alpha);
  if (stream.size() < static_cast<std::size_t>(N)) return false;
  for (std::size_t j = 0; j + N <= stream.size(); ++j)
    if (!window_ok(stream, j, N, alpha)) return false;
  return true;
}

bool is_locally_persistent(const PsdStream& stream, long long N, long long M, double alpha) {
  check_nalpha(N, alpha);
  if (M < 1) throw DomainError("persistency interval M must be at least 1");
  if (stream.size() < static_cast<std::size_t>(N)) return false;
  for (std::size_t j = 0; j + N <= stream.size(); j += M)
    if (!window_ok(stream, j, N, alpha)) return false;
  return true;
}

PersistencyWindow min_persistency_window(const PsdStream& stream, std::size_t i) {
  if (i >= stream.size()) throw DomainError("window start index out of range");
  MatrixXd acc = MatrixXd::Zero(stream[i].rows(), stream[i].cols());
  for (std::size_t e = i; e < stream.size(); ++e) {
    acc += stream[e];
    double lo = 0.0;
    if (full_rank(acc, &lo)) return {static_cast<long long>(e - i + 1), lo};
  }
  return {0, kInf};
}

std::vector<PersistencyWindow> all_persistency_windows(const PsdStream& stream) {
  const std::size_t L = stream.size();
  std::vector<PersistencyWindow> out(L, PersistencyWindow{0, kInf});
  std::size_t e = 0;  // candidate inclusive end
  for (std::size_t i = 0; i < L; ++i) {
    e = std::max(e, i);
    MatrixXd acc = window_sum(stream, i, e - i + 1);
    double lo = 0.0;
    bool found = false;
    while (true) {
      if (full_rank(acc, &lo)) {
        found = true;
        break;
      }
      if (++e >= L) break;
      acc += stream[e];
    }
    if (!found) break;  // every later start is undefined too
    out[i] = {static_cast<long long>(e - i + 1), lo};
  }
  return out;
}

AuxiliaryParams choose_auxiliary_params(const PsdStream& stream) {
  const auto windows = all_persistency_windows(stream);
  long long n_bar = 0;
  double a_under = kInf;
  for (const auto& w : windows) {
    n_bar = std::max(n_bar, w.N_PW);
    a_under = std::min(a_under, w.alpha_PW);
  }
  if (n_bar == 0) {
    const long long n = stream.empty() ? 1 : static_cast<long long>(stream.front().rows());
    return {n, 1.0, true};
  }
  return {std::max<long long>(n_bar, 1), a_under, false};
}

std::vector<int> jnon_sequence(const PsdStream& stream, long long N_max, double alpha_min) {
  if (N_max < 1) throw DomainError("N_max must be at least 1");
  if (!(alpha_min > 0.0) || !std::isfinite(alpha_min)) throw DomainError("alpha_min must be positive and finite");
  std::vector<int> out;
  out.reserve(stream.size());
  if (stream.empty()) return out;
  MatrixXd acc = MatrixXd::Zero(stream.front().rows(), stream.front().cols());
  for (std::size_t k = 0; k < stream.size(); ++k) {
    acc += stream[k];
    const long long i = static_cast<long long>(k) + 1;
    const double level = static_cast<double>(i / N_max) * alpha_min;
    const Eigen::VectorXd ev = eigs(acc);
    // Eigenvalues within roundoff of the level do not count; a PSD sum is never below a zero level.
    const double slack = 64.0 * std::numeric_limits<double>::epsilon() * std::max(ev.maxCoeff(), 0.0);
    int count = 0;
    for (Eigen::Index j = 0; j < ev.size(); ++j)
      if (level - ev(j) > slack) ++count;
    out.push_back(count);
  }
  return out;
}

int PersistencyReport::jnon_inf() const {
  return jnon.empty() ? 0 : *std::max_element(jnon.begin(), jnon.end());
}

PersistencyReport analyze_persistency(const PsdStream& stream) {
  validate_stream(stream);
  PersistencyReport r;
  const auto windows = all_persistency_windows(stream);
  r.alpha_underbar = kInf;
  for (const auto& w : windows) {
    r.NPW.push_back(w.N_PW);
    r.alphaPW.push_back(w.alpha_PW);
    r.N_bar = std::max(r.N_bar, w.N_PW);
    r.alpha_underbar = std::min(r.alpha_underbar, w.alpha_PW);
  }
  if (r.N_bar == 0) {
    r.N_max = stream.empty() ? 1 : static_cast<long long>(stream.front().rows());
    r.alpha_min = 1.0;
    r.fallback = true;
  } else {
    r.N_max = r.N_bar;
    r.alpha_min = r.alpha_underbar;
  }
  r.jnon = jnon_sequence(stream, r.N_max, r.alpha_min);
  return r;
}

void write_report_csv(const PersistencyReport& report, std::ostream& os) {
  CsvWriter w(os);
  w.header({"i", "N_PW", "alpha_PW", "jnon", "N_max", "alpha_min"});
  for (std::size_t k = 0; k < report.NPW.size(); ++k) {
    w.field(static_cast<long long>(k));
    w.field(report.NPW[k]);
    w.field(report.alphaPW[k]);
    w.field(report.jnon[k]);
    w.field(report.N_max);
    w.field(report.alpha_min);
    w.end_row();
  }
}

}  // namespace ddpi
