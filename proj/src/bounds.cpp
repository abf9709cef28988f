#include "ddpi/bounds.hpp"

#include <algorithm>
#include <cmath>

#include "ddpi/errors.hpp"

namespace ddpi {

namespace {

void check_c(double c) {
  if (!(c > 0.0 && c < 1.0)) throw DomainError("contraction estimate must lie in (0, 1)");
}

void check_nonneg(double v, const char* what) {
  if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError(std::string(what) + " must be finite and nonnegative");
}

}  // namespace

void BoundInputs::validate() const {
  for (double v : {normA, normB, normQ, normR, normRinv, normP0}) check_nonneg(v, "norm input");
  if (!(eps >= 0.0 && eps < 1.0)) throw DomainError("eps must lie in [0, 1)");
  if (!(eps_max >= 0.0 && eps_max < 1.0)) throw DomainError("eps_max must lie in [0, 1)");
  if (nx < 1) throw DomainError("nx must be at least 1");
}

DeltaTables delta_tables(const BoundInputs& in) {
  in.validate();
  const double a = in.normA, b = in.normB, r = in.normR, ri = in.normRinv, p = in.normP0;
  const double ri2p2 = ri * ri * p * p;
  DeltaTables t;

  auto& d3 = t.d3;
  d3[3] = ri2p2;
  d3[2] = 2.0 * ri2p2 * (a + b);
  d3[1] = ri * p + ri2p2 * ((a + b) * (a + b) + a * b);
  d3[0] = 2.0 * ri * p * b + ri2p2 * a * b * (a + b);

  auto& d4 = t.d4;
  d4[4] = d3[3];
  d4[3] = d3[2] + b * d3[3];
  d4[2] = d3[1] + b * d3[2];
  d4[1] = d3[0] + b * d3[1];
  d4[0] = b * d3[0] + ri * a * b * p + 1.0;

  // bound on ||A + B Kbar||_F
  const double kappa = a + ri * a * b * b * p;
  auto& d5 = t.d5;
  d5[9] = d4[4] * d4[4];
  d5[8] = 2.0 * d4[4] * d4[3];
  d5[7] = 2.0 * d4[4] * d4[2] + d4[3] * d4[3];
  d5[6] = 2.0 * d4[4] * d4[1] + 2.0 * d4[3] * d4[2];
  d5[5] = 2.0 * d4[4] * d4[0] + 2.0 * d4[3] * d4[1] + d4[2] * d4[2];
  d5[4] = 2.0 * d4[3] * d4[0] + 2.0 * d4[2] * d4[1] + 2.0 * kappa * d4[4];
  d5[3] = 2.0 * d4[2] * d4[0] + d4[1] * d4[1] + 2.0 * kappa * d4[3];
  d5[2] = 2.0 * d4[1] * d4[0] + 2.0 * kappa * d4[2];
  d5[1] = d4[0] * d4[0] + 2.0 * kappa * d4[1];
  d5[0] = 2.0 * kappa * d4[0];

  const double lambda = 2.0 * b * p * r * ri * a;
  auto& d6 = t.d6;
  d6[7] = r * d3[3] * d3[3];
  d6[6] = 2.0 * r * d3[3] * d3[2];
  d6[5] = 2.0 * r * d3[3] * d3[1] + r * d3[2] * d3[2];
  d6[4] = 2.0 * r * d3[3] * d3[0] + 2.0 * r * d3[2] * d3[1];
  d6[3] = r * d3[1] * d3[1] + lambda * d3[3];
  d6[2] = 2.0 * r * d3[1] * d3[0] + lambda * d3[2];
  d6[1] = r * d3[0] * d3[0] + lambda * d3[1];
  d6[0] = lambda * d3[0];
  return t;
}

RhoCoefficients rho_coefficients(const BoundInputs& in) {
  const DeltaTables t = delta_tables(in);
  const double a = in.normA, b = in.normB, r = in.normR, ri = in.normRinv, p = in.normP0;
  const double sq = std::sqrt(static_cast<double>(in.nx));
  const double g1 = sq / (1.0 - in.eps * in.eps);
  const double g2 = sq / (1.0 - in.eps_max * in.eps_max);
  const double w = in.normQ + a * a * b * b * r * ri * ri * p * p;
  RhoCoefficients rho{};
  for (int k = 0; k < 10; ++k) {
    const double d6 = k < 8 ? t.d6[k] : 0.0;
    rho[k] = g1 * d6 + g1 * g2 * w * t.d5[k];
  }
  return rho;
}

double sigma(const RhoCoefficients& rho, double x) {
  if (!(x >= 0.0)) throw DomainError("dtheta_upper must be nonnegative");
  double acc = 0.0;
  for (int k = 9; k >= 0; --k) acc = acc * x + rho[k];
  return acc;
}

double theorem6_bound(const RhoCoefficients& rho, double c_hat, double P0_err,
                      const std::vector<double>& dtheta_upper, std::size_t i) {
  check_c(c_hat);
  check_nonneg(P0_err, "P0 error");
  if (i >= dtheta_upper.size()) throw DomainError("theorem6_bound: episode index beyond trace");
  double omega = 0.0;
  for (std::size_t j = 0; j <= i; ++j) omega = std::max(omega, sigma(rho, dtheta_upper[j]) * dtheta_upper[j]);
  return std::pow(c_hat, static_cast<double>(i)) * P0_err + omega / (1.0 - c_hat);
}

double corollary3_bound(const RhoCoefficients& rho, double c_hat, double Pre_err,
                        const std::vector<double>& dtheta_upper, std::size_t i_re, std::size_t i) {
  check_c(c_hat);
  check_nonneg(Pre_err, "restart error");
  if (i < i_re || i_re >= dtheta_upper.size()) throw DomainError("corollary3_bound: index violation");
  const double x = dtheta_upper[i_re];
  return std::pow(c_hat, static_cast<double>(i - i_re)) * Pre_err + sigma(rho, x) * x / (1.0 - c_hat);
}

double composed_bound(double sigma0, double c_hat, double P0_err, double theorem3_value, std::size_t i) {
  check_c(c_hat);
  check_nonneg(P0_err, "P0 error");
  check_nonneg(sigma0, "sigma0");
  check_nonneg(theorem3_value, "theorem3 value");
  return std::pow(c_hat, static_cast<double>(i)) * P0_err + sigma0 / (1.0 - c_hat) * theorem3_value;
}

RateBounds rate_bounds(std::size_t i, double c_hat, double P0_err, double sigma0, double dtheta_upper_inf) {
  check_c(c_hat);
  check_nonneg(P0_err, "P0 error");
  check_nonneg(sigma0, "sigma0");
  check_nonneg(dtheta_upper_inf, "dtheta_upper");
  const double f_dpi = std::pow(c_hat, static_cast<double>(i)) * P0_err;
  return {f_dpi, f_dpi + sigma0 / (1.0 - c_hat) * dtheta_upper_inf};
}

BudgetRow equal_budget(long long T, long long tau_ipi, long long tau_dpi, double c_hat, double P0_err,
                       double sigma0, double dtheta_upper_inf) {
  if (T < 0 || tau_ipi < 1 || tau_dpi < 1) throw DomainError("equal_budget: invalid budget");
  BudgetRow row{T, tau_ipi, tau_dpi, T / tau_ipi, T / tau_dpi, {}};
  row.at_budget.f_dpi = rate_bounds(row.episodes_dpi, c_hat, P0_err, sigma0, dtheta_upper_inf).f_dpi;
  row.at_budget.f_ipi = rate_bounds(row.episodes_ipi, c_hat, P0_err, sigma0, dtheta_upper_inf).f_ipi;
  return row;
}

}  // namespace ddpi
