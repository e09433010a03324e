#pragma once

#include <stdexcept>
#include <string>

namespace certattack {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid distribution, bound or algorithm parameter.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Vector dimension mismatch.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Query outside the oracle's valid input box.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A caller broke an operation's precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// The wrapped model lacks a required capability (e.g. logits).
class CapabilityError : public Error {
 public:
  using Error::Error;
};

/// Direction undefined: mean coincides with the clean input and no probes exist.
class DegenerateGeometryError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file (model, dataset, config, report).
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace certattack
