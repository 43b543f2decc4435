#pragma once

#include <stdexcept>
#include <string>

namespace proxstep {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// A constraint was evaluated outside its evaluation neighborhood.
class EvaluationDomainError : public Error {
public:
  using Error::Error;
};

/// A constraint gradient row is (numerically) zero where a nonzero norm is
/// required.
class ZeroGradientError : public Error {
public:
  using Error::Error;
};

/// The halfspace intersection handed to the projection is empty, or the dual
/// iteration diverged. For the time-stepping loop this signals that the step
/// size is too large for the scenario.
class InfeasibleError : public Error {
public:
  using Error::Error;
};

/// A cone decomposition was requested on a halfspace system with nonzero
/// offsets.
class NotAConeError : public Error {
public:
  using Error::Error;
};

/// Restitution > 0 was requested with time-dependent constraints.
class UnsupportedTimeDependentError : public Error {
public:
  using Error::Error;
};

/// Two sphere centers coincide; the contact direction is undefined.
class CoincidentCentersError : public Error {
public:
  using Error::Error;
};

/// A scenario failed validation (infeasible initial state, size mismatch,
/// bad parameter range).
class InvalidScenarioError : public Error {
public:
  using Error::Error;
};

/// A scenario file could not be parsed or violates the strict schema.
class ConfigError : public Error {
public:
  using Error::Error;
};

} // namespace proxstep
