#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ddpi {

class DdpiError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Closed loop A+BK is not Schur stable.
class NotStabilizing : public DdpiError {
 public:
  using DdpiError::DdpiError;
};

/// (A, B) fails the PBH stabilizability test.
class NotStabilizable : public DdpiError {
 public:
  using DdpiError::DdpiError;
};

class SingularOperator : public DdpiError {
 public:
  using DdpiError::DdpiError;
};

class InsufficientTrace : public DdpiError {
 public:
  using DdpiError::DdpiError;
};

/// A data regression has too few rows or an ill-conditioned Gram matrix.
/// `episode()` is 1-based; 0 means the caller had no episode context.
class Underdetermined : public DdpiError {
 public:
  Underdetermined(const std::string& what, std::size_t episode = 0)
      : DdpiError(what), episode_(episode) {}
  std::size_t episode() const { return episode_; }

 private:
  std::size_t episode_;
};

/// Invalid argument: wrong dimension, out-of-range parameter, asymmetric input.
class DomainError : public DdpiError {
 public:
  using DdpiError::DdpiError;
};

class ConfigError : public DdpiError {
 public:
  using DdpiError::DdpiError;
};

class NotConverged : public DdpiError {
 public:
  using DdpiError::DdpiError;
};

}  // namespace ddpi
