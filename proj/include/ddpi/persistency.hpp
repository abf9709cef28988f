#pragma once

#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

namespace ddpi {

using Eigen::MatrixXd;

/// Ordered PSD matrices of one dimension, indexed from 0.
/// Every verdict below only looks at windows that fit inside the stream.
using PsdStream = std::vector<MatrixXd>;

/// Full rank means lambda_min > 1e-9 * lambda_max and lambda_min > 0.
inline constexpr double kFullRankRelTol = 1e-9;

/// Throws DomainError unless the entries are square, equally sized, symmetric and
/// PSD to -1e-10.
void validate_stream(const PsdStream& stream);

/// sum_{k<N} Y_{j+k} >= alpha I for every j with a full window. False when no window fits.
bool is_globally_persistent(const PsdStream& stream, long long N, double alpha);

/// The same window condition, checked only at anchors j = 0, M, 2M, ...
bool is_locally_persistent(const PsdStream& stream, long long N, long long M, double alpha);

struct PersistencyWindow {
  long long N_PW;   // 0 when no window from i reaches full rank
  double alpha_PW;  // +inf when N_PW == 0
};

/// Shortest window starting at i whose sum is full rank, with its smallest eigenvalue.
PersistencyWindow min_persistency_window(const PsdStream& stream, std::size_t i);

/// Windows for every start index in one pass. Window end indices are nondecreasing
/// in the start index and the undefined starts form a suffix, so the scan is linear
/// in the number of rank checks.
std::vector<PersistencyWindow> all_persistency_windows(const PsdStream& stream);

struct AuxiliaryParams {
  long long N_max;
  double alpha_min;
  bool fallback;  // no window reached full rank; (n, 1) used
};

/// N_max = max(N_bar, 1), alpha_min = alpha_underbar, or (n, 1) when every window is undefined.
AuxiliaryParams choose_auxiliary_params(const PsdStream& stream);

/// jnon[i-1] for i = 1..L: number of eigenvalues of sum_{k<i} Y_k strictly below
/// floor(i / N_max) * alpha_min. Throws DomainError unless N_max >= 1 and alpha_min > 0.
std::vector<int> jnon_sequence(const PsdStream& stream, long long N_max, double alpha_min);

struct PersistencyReport {
  std::vector<long long> NPW;
  std::vector<double> alphaPW;
  long long N_bar = 0;
  double alpha_underbar = 0.0;
  std::vector<int> jnon;
  long long N_max = 1;
  double alpha_min = 1.0;
  bool fallback = false;

  int jnon_inf() const;
};

PersistencyReport analyze_persistency(const PsdStream& stream);

/// Columns: i, N_PW, alpha_PW, jnon, N_max, alpha_min.
void write_report_csv(const PersistencyReport& report, std::ostream& os);

}  // namespace ddpi
