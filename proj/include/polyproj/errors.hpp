#pragma once

#include <stdexcept>
#include <string>

namespace polyproj {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Two fields that must share a grid do not.
class GridMismatch : public Error {
 public:
  using Error::Error;
};

/// An iterative solver stopped before reaching its tolerance.
class SolverError : public Error {
 public:
  using Error::Error;
};

/// An outer iteration exhausted its budget.
class MaxIterations : public SolverError {
 public:
  using SolverError::SolverError;
};

/// A map left the diffeomorphism regime (det DZ too small, inversion failed).
class MapDegenerate : public Error {
 public:
  using Error::Error;
};

/// A sampled position left the closed unit box by more than the clamp margin.
class DomainExit : public Error {
 public:
  using Error::Error;
};

}  // namespace polyproj
