#pragma once

#include <stdexcept>
#include <string>

namespace bdlab {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parameter outside the admissible range of a constructor (e.g. Φ_a with a ≤ 1).
class InvalidParameter : public Error {
 public:
  using Error::Error;
};

/// Hessian or normal equations evaluated at a singular point.
class SingularityError : public Error {
 public:
  using Error::Error;
};

/// Geometric precondition violated: ball leaves the domain, shift point outside its ball, ...
class DomainError : public Error {
 public:
  using Error::Error;
};

class NoConvergence : public Error {
 public:
  using Error::Error;
};

/// Line search exhausted its halvings without an acceptable step.
class StagnationError : public Error {
 public:
  using Error::Error;
};

class OverflowError : public Error {
 public:
  using Error::Error;
};

/// Mollification scale not resolvable on the grid (ε < h).
class GridTooCoarse : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// A checked inequality failed; carries the witness in the message.
class InequalityViolation : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace bdlab
