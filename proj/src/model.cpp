#include "heavyflow/model.hpp"

#include "heavyflow/errors.hpp"
#include "heavyflow/operators.hpp"

#include <cmath>
#include <sstream>

namespace heavyflow {

void ModelParams::validate() const {
  std::ostringstream msg;
  if (!(gamma > 1.0))
    msg << "gamma = " << gamma << " is not allowed: the pressure law requires gamma > 1";
  else if (!(p_exp > 3.0 && p_exp < 6.0))
    msg << "p = " << p_exp << " is not allowed: the norm exponent must lie in (3, 6)";
  else if (!(m > 0.0) || !std::isfinite(m))
    msg << "m = " << m << " is not allowed: the mean density must be positive";
  else if (!(f_friction >= 0.0))
    msg << "friction = " << f_friction << " is not allowed: friction must be non-negative";
  else if (!force.all_finite())
    msg << "force contains non-finite values";
  const std::string s = msg.str();
  if (!s.empty())
    throw std::invalid_argument(s);
}

std::uint64_t ModelParams::fingerprint() const {
  Fingerprint fp;
  fp.add(m).add(gamma).add(f_friction).add(p_exp);
  fp.add(static_cast<std::int64_t>(force.grid().hash()));
  fp.add_bytes(force.x().data(), sizeof(double) * force.x().size());
  fp.add_bytes(force.y().data(), sizeof(double) * force.y().size());
  return fp.value();
}

double pressure_excess(double r, double m, double gamma) {
  const double x = r / m;
  if (!(x > -1.0))
    throw AdmissibilityError("pressure_excess: density m + r must be positive");
  return std::pow(m, gamma) * std::expm1(gamma * std::log1p(x));
}

double taylor_remainder(double r, double m, double gamma) {
  if (!(m + r > 0.0))
    throw AdmissibilityError("taylor_remainder: density m + r must be positive");
  if (gamma == 2.0)
    return r * r;
  if (gamma == 3.0)
    return r * r * (3.0 * m + r);
  const double x = r / m;
  const double mg = std::pow(m, gamma);
  if (std::abs(x) > 0.1)
    return mg * (std::expm1(gamma * std::log1p(x)) - gamma * x);
  // sum_{k>=2} binom(gamma, k) x^k
  double coef = gamma * (gamma - 1.0) / 2.0;
  double xk = x * x;
  double sum = 0.0;
  for (int k = 2; k < 80; ++k) {
    const double term = coef * xk;
    sum += term;
    if (std::abs(term) <= 1e-18 * std::abs(sum))
      break;
    coef *= (gamma - k) / (k + 1.0);
    xk *= x;
  }
  return mg * sum;
}

TaylorRemainder taylor_remainder(const ScalarField& r, const ModelParams& params) {
  const GridSpec& g = r.grid();
  ScalarField value(g);
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i)
      value(i, j) = taylor_remainder(r(i, j), params.m, params.gamma);

  // gamma ((m + r)^(gamma-1) - m^(gamma-1)) at faces, times grad r.
  const double gm = params.gamma;
  auto slope = [&](double rf) {
    return gm * std::pow(params.m, gm - 1.0) * std::expm1((gm - 1.0) * std::log1p(rf / params.m));
  };
  VectorField grad = gradient(r);
  const int nx = g.nx(), ny = g.ny();
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i <= nx; ++i) {
      const int il = g.periodic_x() ? (i - 1 + nx) % nx : std::max(i - 1, 0);
      const int ir = g.periodic_x() ? i % nx : std::min(i, nx - 1);
      grad.x()(i, j) *= slope(0.5 * (r(il, j) + r(ir, j)));
    }
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const int jl = std::max(j - 1, 0), jr = std::min(j, ny - 1);
      grad.y()(i, j) *= slope(0.5 * (r(i, jl) + r(i, jr)));
    }
  return {std::move(value), std::move(grad)};
}

ScalarField pressure_excess(const ScalarField& r, const ModelParams& params) {
  ScalarField p(r.grid());
  for (int j = 0; j < r.grid().ny(); ++j)
    for (int i = 0; i < r.grid().nx(); ++i)
      p(i, j) = pressure_excess(r(i, j), params.m, params.gamma);
  return p;
}

} // namespace heavyflow
