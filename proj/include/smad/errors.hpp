#pragma once

#include <stdexcept>
#include <string>

namespace smad {

/// Base of every error raised by the toolkit. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the operation's domain (non-positive scale, empty score list, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Geometric input too degenerate to fit or triangulate.
class DegenerateInputError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Shape or precondition violation by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Dataset, manifest or score-file inconsistency.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

/// Non-finite loss or value during optimization.
class NumericError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Model lacks a feature an operation needs (e.g. no spatial stage for Grad-CAM).
class CapabilityError : public Error {
 public:
  using Error::Error;
};

}  // namespace smad
