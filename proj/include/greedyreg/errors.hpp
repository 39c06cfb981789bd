#pragma once

#include <stdexcept>
#include <string>

namespace greedyreg {

// Thrown when caller-supplied arguments violate a documented precondition
// (bad intervals, non-finite parameters, malformed configs).
struct ContractError : std::invalid_argument {
  explicit ContractError(const std::string& what) : std::invalid_argument(what) {}
};

// Thrown when a numeric routine cannot reach its accuracy target
// (quadrature non-convergence, value iteration stall).  Carries the
// achieved error estimate so callers can report it.
struct NumericError : std::runtime_error {
  double achieved;
  explicit NumericError(const std::string& what, double achieved_err = -1.0)
      : std::runtime_error(what), achieved(achieved_err) {}
};

}  // namespace greedyreg
