#pragma once

#include <array>
#include <vector>

namespace ddpi {

/// Norm inputs of the rho coefficients. All norms are Frobenius except eps and
/// eps_max, which are suprema of closed-loop spectral norms.
struct BoundInputs {
  double normA = 0.0;
  double normB = 0.0;
  double normQ = 0.0;
  double normR = 0.0;
  double normRinv = 0.0;
  double normP0 = 0.0;
  double eps = 0.0;      // sup ||A + B K_i||_2 over the true system
  double eps_max = 0.0;  // sup over estimates of the estimated closed-loop norm
  int nx = 1;

  /// Throws DomainError unless norms are finite and >= 0, eps and eps_max in [0, 1), nx >= 1.
  void validate() const;
};

/// Intermediate polynomial coefficients, index = power of dtheta_upper.
struct DeltaTables {
  std::array<double, 4> d3{};
  std::array<double, 5> d4{};
  std::array<double, 10> d5{};
  std::array<double, 8> d6{};
};

DeltaTables delta_tables(const BoundInputs& in);

using RhoCoefficients = std::array<double, 10>;

RhoCoefficients rho_coefficients(const BoundInputs& in);

/// sum_k rho_k x^k. Throws DomainError for x < 0.
double sigma(const RhoCoefficients& rho, double dtheta_upper);

/// c^i * P0_err + max_{j<=i} sigma_j dtheta_upper[j] / (1 - c).
/// dtheta_upper[j] is the RLS bound after j episodes.
double theorem6_bound(const RhoCoefficients& rho, double c_hat, double P0_err,
                      const std::vector<double>& dtheta_upper, std::size_t i);

/// c^(i - i_re) * Pre_err + sigma(dtheta_upper[i_re]) dtheta_upper[i_re] / (1 - c), i >= i_re.
double corollary3_bound(const RhoCoefficients& rho, double c_hat, double Pre_err,
                        const std::vector<double>& dtheta_upper, std::size_t i_re, std::size_t i);

/// c^i * P0_err + sigma_0 / (1 - c) * theorem3_value, where theorem3_value = f + g at episode i.
double composed_bound(double sigma0, double c_hat, double P0_err, double theorem3_value, std::size_t i);

struct RateBounds {
  double f_dpi;
  double f_ipi;
};

/// f_DPI = c^i P0_err; f_IPI = f_DPI + sigma0 / (1 - c) * dtheta_upper_inf.
RateBounds rate_bounds(std::size_t i, double c_hat, double P0_err, double sigma0, double dtheta_upper_inf);

struct BudgetRow {
  long long T;
  long long tau_ipi;
  long long tau_dpi;
  long long episodes_ipi;
  long long episodes_dpi;
  RateBounds at_budget;  // f_DPI at episodes_dpi, f_IPI at episodes_ipi
};

/// Equal time budget T: IPI runs floor(T / tau_ipi) episodes, DPI floor(T / tau_dpi).
BudgetRow equal_budget(long long T, long long tau_ipi, long long tau_dpi, double c_hat, double P0_err,
                       double sigma0, double dtheta_upper_inf);

}  // namespace ddpi
