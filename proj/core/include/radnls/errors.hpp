#pragma once

#include <stdexcept>
#include <string>

namespace radnls {

// Argument outside the mathematical domain of an operation (x <= 0 for Gamma,
// t <= 0 for the heat flow, ||f||_1 = 0, inadmissible parameters, ...).
class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

// The caller combined objects that do not belong together (field on another
// basis, spectral field where a physical one is required, unknown norm kind).
class UsageError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// Something that should not happen did (root bracketing failed, ...).
class InternalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ConvergenceError : public std::runtime_error {
public:
  ConvergenceError(const std::string& what, double change, double residual)
      : std::runtime_error(what), last_change(change), last_residual(residual) {}
  double last_change;
  double last_residual;
};

class StepSizeError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

} // namespace radnls
