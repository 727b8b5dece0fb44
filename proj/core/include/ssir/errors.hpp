#pragma once

#include <stdexcept>
#include <string>

namespace ssir {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// A matrix expected to be positive definite had a nonpositive pivot.
class NotPositiveDefinite : public Error {
 public:
  using Error::Error;
};

// Iterative eigensolver ran out of its iteration budget.
class ConvergenceFailure : public Error {
 public:
  using Error::Error;
};

// An index set was empty, unsorted, duplicated, or out of range.
class IndexOutOfRange : public Error {
 public:
  using Error::Error;
};

// Response vector cannot be sliced (all values identical).
class DegenerateResponse : public Error {
 public:
  using Error::Error;
};

// A slice had fewer observations than the estimator needs.
class SliceTooSmall : public Error {
 public:
  using Error::Error;
};

// Every projection group failed to produce a finite score.
class AllGroupsDegenerate : public Error {
 public:
  using Error::Error;
};

// Estimation step could not produce a usable result (singular subproblem).
class Degenerate : public Error {
 public:
  using Error::Error;
};

// Model selection was handed no candidate sizes, or none survived.
class EmptyGrid : public Error {
 public:
  using Error::Error;
};

// A Gram matrix inside a loss computation is numerically singular.
class SingularGram : public Error {
 public:
  using Error::Error;
};

// A matrix expected to have orthonormal columns does not.
class NotOrthonormal : public Error {
 public:
  using Error::Error;
};

// Caller broke a documented precondition (sizes, parameter ranges).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

}  // namespace ssir
