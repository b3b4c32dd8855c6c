#pragma once

// Analytic force presets used by the studies and the command line.

#include "heavyflow/field.hpp"

#include <string>
#include <vector>

namespace heavyflow {

/// "vortex": curl of sin^2(pi x/Lx) sin^2(pi y/Ly), scaled so ||f||_p = amplitude.
/// "shear":  amplitude * (sin(2 pi y/Ly), 0).
/// "gradient": amplitude * grad(cos(pi x/Lx) cos(pi y/Ly)), a pure gradient.
/// "zero": f = 0.
VectorField make_force(const std::string& preset, const GridSpec& grid, double amplitude, double p_exp = 4.0);

std::vector<std::string> force_presets();

} // namespace heavyflow
