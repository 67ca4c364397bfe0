#pragma once

#include <stdexcept>
#include <string>

namespace switchdiff {

//! Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

//! A user callback returned a non-finite value.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

//! Argument outside the domain of the operation (x = 0, y > h, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

//! Truncated chain is reducible or otherwise structurally unusable.
class StructuralError : public Error {
 public:
  using Error::Error;
};

//! Linear solve or series failed to meet its tolerance.
class NumericError : public Error {
 public:
  using Error::Error;
};

//! Invariant-measure series diverges.
class ErgodicityError : public Error {
 public:
  using Error::Error;
};

//! Inconsistent or incomplete configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

//! Caller violated a documented precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

//! Switching step too coarse: q_i(x) * dt exceeded the thinning guard.
class GuardError : public Error {
 public:
  using Error::Error;
};

//! Monte Carlo estimate could not be formed (e.g. no surviving paths).
class EstimationError : public Error {
 public:
  using Error::Error;
};

}  // namespace switchdiff
