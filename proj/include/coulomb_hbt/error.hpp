#pragma once

#include <stdexcept>
#include <string>

namespace coulomb_hbt {

/// Input outside the mathematical domain of an operation (u <= 0, E <= 0, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Attempt to mix quantities of different physical dimension.
class DimensionError : public std::invalid_argument {
 public:
  DimensionError(const std::string& from, const std::string& to)
      : std::invalid_argument("dimension mismatch: cannot convert '" + from +
                              "' to '" + to + "'"),
        from_(from),
        to_(to) {}

  const std::string& from_unit() const noexcept { return from_; }
  const std::string& to_unit() const noexcept { return to_; }

 private:
  std::string from_;
  std::string to_;
};

/// Text that does not parse as a unit-suffixed quantity.
class ParseError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Pair with zero initial separation: the Coulomb map is singular there.
class SingularInputError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Adaptive integrator could not make progress.
class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(const std::string& what, double time_reached)
      : std::runtime_error(what), time_reached_(time_reached) {}

  /// Dimensionless time (units of the free-fall scale) reached before failure.
  double time_reached() const noexcept { return time_reached_; }

 private:
  double time_reached_;
};

/// Grid too coarse for the requested resolution kernel.
class UnderResolutionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A result that violates a property the library guarantees.
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace coulomb_hbt
