#pragma once

#include <stdexcept>
#include <string>

namespace heavyflow {

/// A linear or fixed-point solve did not reach its tolerance.
class SolverError : public std::runtime_error {
public:
  SolverError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

private:
  double residual_;
};

/// Data violates a solvability condition (compatibility, admissibility, smallness).
class AdmissibilityError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

} // namespace heavyflow
