#pragma once

#include "heavyflow/helmholtz.hpp"

namespace heavyflow {

/// Right inverse of the divergence on mean-zero fields: B[r] = grad(phi) with
/// Laplace(phi) = r and zero normal derivative, so div B[r] = r and B[r] . n = 0.
/// The tangential wall trace of B[r] is not zero (weaker than the classical
/// Bogovskii operator).
VectorField bogovskii(const ScalarField& r);

/// ||grad B[r]||_2 / ||r||_2 with the staggered velocity-gradient norm.
double bogovskii_bound_check(const ScalarField& r);

} // namespace heavyflow
