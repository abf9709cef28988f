#include "ddpi/tensor_ops.hpp"

#include <algorithm>
#include <string>

#include "ddpi/errors.hpp"

namespace ddpi {

VectorXd vec(const MatrixXd& m) {
  return Eigen::Map<const VectorXd>(m.data(), m.size());
}

MatrixXd unvec(const VectorXd& v, Eigen::Index rows, Eigen::Index cols) {
  if (v.size() != rows * cols) {
    throw DomainError("unvec: length " + std::to_string(v.size()) + " != " +
                      std::to_string(rows) + "x" + std::to_string(cols));
  }
  return Eigen::Map<const MatrixXd>(v.data(), rows, cols);
}

VectorXd vecv(const VectorXd& v) {
  const Eigen::Index n = v.size();
  VectorXd out(tri_size(n));
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    out(k++) = v(i) * v(i);
    for (Eigen::Index j = i + 1; j < n; ++j) out(k++) = 2.0 * v(i) * v(j);
  }
  return out;
}

bool is_symmetric(const MatrixXd& m, double rel_tol) {
  if (m.rows() != m.cols()) return false;
  if (m.size() == 0) return true;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

VectorXd vecs(const MatrixXd& p) {
  if (!is_symmetric(p)) throw DomainError("vecs: matrix is not symmetric");
  const Eigen::Index n = p.rows();
  VectorXd out(tri_size(n));
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) out(k++) = p(i, j);
  return out;
}

MatrixXd mats(const VectorXd& s, Eigen::Index n) {
  if (n < 0 || s.size() != tri_size(n)) {
    throw DomainError("mats: length " + std::to_string(s.size()) +
                      " does not match n=" + std::to_string(n));
  }
  MatrixXd m(n, n);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      m(i, j) = s(k);
      m(j, i) = s(k);
      ++k;
    }
  }
  return m;
}

MatrixXd kron(const MatrixXd& m, const MatrixXd& n) {
  MatrixXd out(m.rows() * n.rows(), m.cols() * n.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      out.block(i * n.rows(), j * n.cols(), n.rows(), n.cols()) = m(i, j) * n;
  return out;
}

}  // namespace ddpi
