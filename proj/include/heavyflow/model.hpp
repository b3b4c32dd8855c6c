#pragma once

// Physical parameters and the pressure law p(rho) = rho^gamma.

#include "heavyflow/field.hpp"

#include <string>

namespace heavyflow {

struct ModelParams {
  double m = 1000.0;        // mean density, integral of rho = |Omega| m
  double gamma = 2.0;       // pressure exponent
  double f_friction = 1.0;  // wall friction coefficient
  double p_exp = 4.0;       // norm exponent, 3 < p < 6
  VectorField force;        // specific body force on faces

  /// Throws std::invalid_argument naming the violated requirement.
  void validate() const;
  /// Digest of every parameter including the force samples.
  std::uint64_t fingerprint() const;
};

/// p(m + r) - m^gamma, evaluated without cancellation for |r| << m.
double pressure_excess(double r, double m, double gamma);

/// R_m(r) = p(m + r) - gamma m^(gamma-1) r - m^gamma, evaluated exactly (no
/// truncation): closed form for gamma = 2, 3 and a convergent binomial series
/// for small |r|/m.
double taylor_remainder(double r, double m, double gamma);

struct TaylorRemainder {
  ScalarField value;    // R_m(r) at cells
  VectorField gradient; // chain rule (gamma rho^(gamma-1) - gamma m^(gamma-1)) grad r on faces
};

/// Pointwise remainder of the linearized pressure. Throws AdmissibilityError if
/// m + r is not positive somewhere.
TaylorRemainder taylor_remainder(const ScalarField& r, const ModelParams& params);

/// Cell field p(m + r) - m^gamma.
ScalarField pressure_excess(const ScalarField& r, const ModelParams& params);

} // namespace heavyflow
