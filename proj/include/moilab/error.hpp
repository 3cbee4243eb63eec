#pragma once

#include <stdexcept>
#include <string>

namespace moilab {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Requested derivative / divided-difference order exceeds what a family provides.
class UnsupportedOrderError : public Error {
 public:
  using Error::Error;
};

/// A node or eigenvalue lies outside a function's domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A caller broke a documented precondition (non-Hermitian input, bad arity, ...).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public ContractViolation {
 public:
  using ContractViolation::ContractViolation;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Iterative method failed to converge; carries the final residual.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// The discretization window does not cover the spectra.
class WindowError : public Error {
 public:
  using Error::Error;
};

/// Two independent evaluation paths disagree beyond tolerance.
class ConsistencyError : public Error {
 public:
  ConsistencyError(const std::string& what, double lhs_norm, double rhs_norm, double residual)
      : Error(what), lhs_norm_(lhs_norm), rhs_norm_(rhs_norm), residual_(residual) {}
  double lhs_norm() const noexcept { return lhs_norm_; }
  double rhs_norm() const noexcept { return rhs_norm_; }
  double residual() const noexcept { return residual_; }

 private:
  double lhs_norm_;
  double rhs_norm_;
  double residual_;
};

/// Fourier inversion left an imaginary residue above threshold.
class InversionQualityError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// File or text parse failure; message includes line context.
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace moilab
