#pragma once

#include <stdexcept>
#include <string>

namespace subrad {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller-supplied argument violates an operation's precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// The requested Hilbert space exceeds the configured dimension cap.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A state or operation touches states clipped by the Fock truncation.
class TruncationError : public Error {
 public:
  using Error::Error;
};

/// Second-order perturbation theory hit an accidental degeneracy.
class DegeneracyError : public Error {
 public:
  using Error::Error;
};

/// A numerical kernel (eigensolver) failed.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// The run lies outside the perturbative validity window and was refused.
class ValidityError : public Error {
 public:
  using Error::Error;
};

}  // namespace subrad
