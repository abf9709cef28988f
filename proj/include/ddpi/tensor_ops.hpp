#pragma once

#include <Eigen/Dense>

namespace ddpi {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Column-stacking vectorization.
VectorXd vec(const MatrixXd& m);

/// Inverse of vec for a rows x cols target.
MatrixXd unvec(const VectorXd& v, Eigen::Index rows, Eigen::Index cols);

/// Quadratic monomials of v: [v1^2, 2 v1 v2, ..., 2 v1 vn, v2^2, ..., vn^2].
/// Paired with vecs so that vecv(x).dot(vecs(P)) == x' P x.
VectorXd vecv(const VectorXd& v);

/// Upper triangle of a symmetric matrix, row-major: [p11..p1n, p22..p2n, ..., pnn].
/// Throws DomainError if `p` is not square and symmetric to 1e-12 relative.
VectorXd vecs(const MatrixXd& p);

/// Inverse of vecs. Throws DomainError unless s.size() == n(n+1)/2.
MatrixXd mats(const VectorXd& s, Eigen::Index n);

MatrixXd kron(const MatrixXd& m, const MatrixXd& n);

/// max|M - M'| <= rel_tol * max(1, max|M|).
bool is_symmetric(const MatrixXd& m, double rel_tol = 1e-12);

inline MatrixXd symmetrize(const MatrixXd& m) { return 0.5 * (m + m.transpose()); }

inline Eigen::Index tri_size(Eigen::Index n) { return n * (n + 1) / 2; }

}  // namespace ddpi
