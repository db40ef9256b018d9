#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace iptwsurv {

/// Root of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated (non-finite time, bad shape, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Malformed configuration: unknown scenario, bad flag value, unreadable config.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input data violates the cohort schema.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Fitted propensities leave (eps, 1 - eps). Carries the offending subject ids.
class PositivityViolation : public DataError {
 public:
  PositivityViolation(std::string what, std::vector<std::int64_t> ids)
      : DataError(std::move(what)), ids_(std::move(ids)) {}
  const std::vector<std::int64_t>& ids() const noexcept { return ids_; }

 private:
  std::vector<std::int64_t> ids_;
};

/// An evaluation point or horizon lies outside the supported range.
class OutOfRange : public Error {
 public:
  using Error::Error;
};

/// A caller broke a documented contract between modules (e.g. uncentered weights).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Base for failures of a statistical fit.
class EstimationError : public Error {
 public:
  using Error::Error;
};

class NonConvergence : public EstimationError {
 public:
  using EstimationError::EstimationError;
};

class SingularDesign : public EstimationError {
 public:
  using EstimationError::EstimationError;
};

class CalibrationError : public EstimationError {
 public:
  using EstimationError::EstimationError;
};

/// Too many bootstrap replicates failed for the intervals to mean anything.
class BootstrapDegeneracy : public EstimationError {
 public:
  using EstimationError::EstimationError;
};

}  // namespace iptwsurv
