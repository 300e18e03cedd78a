#pragma once

#include <stdexcept>
#include <string>

namespace ilsim {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

class DegenerateGeometryError : public Error {
 public:
  using Error::Error;
};

/// The A* search exhausted every corridor before reaching the horizon.
class InfeasiblePlanError : public Error {
 public:
  using Error::Error;
};

/// No lateral offset schedule satisfies the heading bound.
class BlendInfeasibleError : public Error {
 public:
  using Error::Error;
};

class TrackingError : public Error {
 public:
  using Error::Error;
};

/// Raised by a policy that cannot produce a prediction (e.g. untrained).
class PolicyError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

}  // namespace ilsim
