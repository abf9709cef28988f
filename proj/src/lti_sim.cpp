#include "ddpi/lti_sim.hpp"

#include <complex>
#include <ostream>
#include <string>

#include "ddpi/csv.hpp"
#include "ddpi/errors.hpp"

namespace ddpi {

void LinearSystem::validate() const {
  if (A.rows() == 0 || A.rows() != A.cols()) throw DomainError("A must be square and nonempty");
  if (B.rows() != A.rows() || B.cols() == 0) {
    throw DomainError("B must have " + std::to_string(A.rows()) + " rows and at least one column");
  }
}

MatrixXd LinearSystem::theta() const {
  MatrixXd t(nx(), nx() + nu());
  t << A, B;
  return t;
}

LinearSystem LinearSystem::from_theta(const MatrixXd& theta, Eigen::Index nx) {
  if (theta.rows() != nx || theta.cols() <= nx) throw DomainError("theta has wrong shape");
  return {theta.leftCols(nx), theta.rightCols(theta.cols() - nx)};
}

double spectral_radius(const MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  return m.eigenvalues().cwiseAbs().maxCoeff();
}

bool is_schur_stable(const MatrixXd& m, double margin) { return spectral_radius(m) < 1.0 - margin; }

bool is_stabilizable(const LinearSystem& sys, double margin) {
  sys.validate();
  const Eigen::Index n = sys.nx();
  const Eigen::VectorXcd lambdas = sys.A.eigenvalues();
  const double scale = std::max({1.0, sys.A.norm(), sys.B.norm()});
  for (Eigen::Index k = 0; k < n; ++k) {
    const std::complex<double> lam = lambdas(k);
    if (std::abs(lam) < 1.0 - margin) continue;
    Eigen::MatrixXcd pbh(n, n + sys.nu());
    pbh.leftCols(n) = sys.A.cast<std::complex<double>>() -
                      lam * Eigen::MatrixXcd::Identity(n, n);
    pbh.rightCols(sys.nu()) = sys.B.cast<std::complex<double>>();
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(pbh);
    if (svd.singularValues()(n - 1) <= 1e-10 * scale) return false;
  }
  return true;
}

DitherGenerator::DitherGenerator(const DitherPolicy& policy, Eigen::Index nu)
    : kind_(policy.kind), nu_(nu), rng_(policy.seed), last_(VectorXd::Zero(nu)) {
  if (kind_ == DitherKind::zero) return;
  if (policy.W.rows() != nu || policy.W.cols() != nu) {
    throw DomainError("dither covariance must be " + std::to_string(nu) + "x" + std::to_string(nu));
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (policy.W + policy.W.transpose()));
  if (es.eigenvalues().minCoeff() < -1e-12 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff())) {
    throw DomainError("dither covariance is not positive semidefinite");
  }
  root_ = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
          es.eigenvectors().transpose();
}

VectorXd DitherGenerator::next() {
  VectorXd out = VectorXd::Zero(nu_);
  switch (kind_) {
    case DitherKind::zero:
      break;
    case DitherKind::gaussian: {
      VectorXd z(nu_);
      for (Eigen::Index i = 0; i < nu_; ++i) z(i) = normal_(rng_);
      out = root_ * z;
      break;
    }
    case DitherKind::paired: {
      if (count_ % 2 == 0) {
        VectorXd z(nu_);
        for (Eigen::Index i = 0; i < nu_; ++i) z(i) = normal_(rng_);
        out = root_ * z;
      } else {
        out = -last_;
      }
      break;
    }
  }
  last_ = out;
  ++count_;
  return out;
}

VectorXd Trajectory::regressor(std::size_t t) const {
  const VectorXd& x = states.at(t);
  const VectorXd& u = inputs.at(t);
  VectorXd d(x.size() + u.size());
  d << x, u;
  return d;
}

void Trajectory::write_csv(std::ostream& os) const {
  if (inputs.empty()) {
    os << "t\n";
    return;
  }
  const Eigen::Index nx = states.front().size();
  const Eigen::Index nu = inputs.front().size();
  CsvWriter w(os);
  std::vector<std::string> header{"t"};
  for (Eigen::Index i = 0; i < nx; ++i) header.push_back("x" + std::to_string(i));
  for (Eigen::Index i = 0; i < nu; ++i) header.push_back("u" + std::to_string(i));
  w.header(header);
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    w.field(static_cast<long long>(t));
    for (Eigen::Index i = 0; i < nx; ++i) w.field(states[t](i));
    for (Eigen::Index i = 0; i < nu; ++i) w.field(inputs[t](i));
    w.end_row();
  }
}

VectorXd step(const LinearSystem& sys, const VectorXd& x, const VectorXd& u) {
  if (x.size() != sys.A.cols() || u.size() != sys.B.cols() || sys.A.rows() != sys.B.rows()) {
    throw DomainError("step: dimension mismatch");
  }
  return sys.A * x + sys.B * u;
}

Trajectory rollout(const LinearSystem& sys, const MatrixXd& K, DitherGenerator& dither,
                   const VectorXd& x0, std::size_t T) {
  sys.validate();
  if (K.rows() != sys.nu() || K.cols() != sys.nx()) throw DomainError("rollout: K has wrong shape");
  if (x0.size() != sys.nx()) throw DomainError("rollout: x0 has wrong length");
  Trajectory traj;
  traj.states.reserve(T + 1);
  traj.inputs.reserve(T);
  traj.states.push_back(x0);
  for (std::size_t t = 0; t < T; ++t) {
    const VectorXd& x = traj.states.back();
    VectorXd u = K * x + dither.next();
    VectorXd xn = step(sys, x, u);
    traj.inputs.push_back(std::move(u));
    traj.states.push_back(std::move(xn));
  }
  return traj;
}

Trajectory rollout(const LinearSystem& sys, const MatrixXd& K, const DitherPolicy& dither,
                   const VectorXd& x0, std::size_t T) {
  DitherGenerator gen(dither, sys.nu());
  return rollout(sys, K, gen, x0, T);
}

}  // namespace ddpi
