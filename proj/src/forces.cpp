#include "heavyflow/forces.hpp"

#include "heavyflow/operators.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace heavyflow {

std::vector<std::string> force_presets() { return {"vortex", "shear", "gradient", "zero"}; }

VectorField make_force(const std::string& preset, const GridSpec& g, double amplitude, double p_exp) {
  if (!std::isfinite(amplitude))
    throw std::invalid_argument("force amplitude must be finite");
  const double pi = std::numbers::pi;
  const double kx = pi / g.lx(), ky = pi / g.ly();
  if (preset == "zero")
    return VectorField(g);
  if (preset == "vortex") {
    // psi = sin^2(kx x) sin^2(ky y), f = (d psi/dy, -d psi/dx)
    VectorField f = VectorField::sample(
        g,
        [&](double x, double y) {
          const double sx = std::sin(kx * x);
          return sx * sx * ky * std::sin(2.0 * ky * y);
        },
        [&](double x, double y) {
          const double sy = std::sin(ky * y);
          return -kx * std::sin(2.0 * kx * x) * sy * sy;
        });
    // sin(pi) is not exactly zero; the normal component must be
    f = f.wall_compatible();
    const double n = lp_norm(f, p_exp);
    return amplitude == 0.0 ? VectorField(g) : (amplitude / n) * f;
  }
  if (preset == "shear")
    return VectorField::sample(
        g, [&](double, double y) { return amplitude * std::sin(2.0 * ky * y); },
        [](double, double) { return 0.0; });
  if (preset == "gradient")
    return VectorField::sample(
        g, [&](double x, double y) { return -amplitude * kx * std::sin(kx * x) * std::cos(ky * y); },
        [&](double x, double y) { return -amplitude * ky * std::cos(kx * x) * std::sin(ky * y); });
  throw std::invalid_argument("unknown force preset '" + preset + "' (vortex, shear, gradient, zero)");
}

} // namespace heavyflow
