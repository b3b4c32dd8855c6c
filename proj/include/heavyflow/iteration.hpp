#pragma once

// Nested fixed-point loops for the steady nonlinear problem
//
//   div(rho u) = 0,  div(rho u (x) u) - div(2 rho D(u)) + grad rho^gamma = rho f,
//   u . n = 0,  n . 2 rho D(u) . tau + f u . tau = 0,  mean(rho) = m.
//
// inner_banach   : viscosity linearization u_tilde -> u at frozen (ubar, r_tilde)
// density_loop   : r_n -> r_{n+1} at frozen ubar, each step an inner_banach solve
// outer_loop     : Picard on ubar -> u, each step a density_loop solve

#include "heavyflow/linsolve.hpp"

#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace heavyflow {

struct AdmissibleBounds {
  double C_f = std::numeric_limits<double>::infinity();
  double E = std::numeric_limits<double>::infinity();
  double alpha = 0.1;
  // Constants of the smallness gate that have no constructive value; 1 unless configured.
  double C1 = 1.0, C2 = 1.0, geometric = 1.0;

  bool bounded() const { return std::isfinite(C_f) && std::isfinite(E); }
};

/// Measured norms that decide membership in the admissible sets.
struct Certificates {
  double density = 0.0;    // m^(gamma-2) (||r||_inf + ||grad r||_p)
  double energy = 0.0;     // ||grad u||_2
  double velocity = 0.0;   // ||grad u||_inf + ||u||_inf + ||grad^2 u||_p
  double divergence = 0.0; // m^(gamma-1) ||div u||_p
  double mass = 0.0;       // integral of r
};

Certificates measure_certificates(const ScalarField& r, const VectorField& u, const ModelParams& params);

struct IterationState {
  ScalarField r;
  VectorField u;
  Certificates certificates;

  static IterationState make(ScalarField r, VectorField u, const ModelParams& params);
};

struct Constraint {
  std::string name;
  double value = 0.0;
  double bound = 0.0;
  bool pass = true;
};

struct AdmissibilityReport {
  std::vector<Constraint> constraints;
  bool all_pass() const;
  std::string failures() const;
};

AdmissibilityReport check_admissible(const IterationState& state, const AdmissibleBounds& bounds,
                                     const ModelParams& params);

/// min(m, m^((gamma-1)/4)) / (1/alpha + 15) against
/// max(C_f, C_f^2, C_f E^2, C_f^2 E^2, C1, C2) * geometric.
struct GateReport {
  double lhs = 0.0;
  double rhs = 0.0;
  bool pass = false;
};
GateReport smallness_gate(const AdmissibleBounds& bounds, const ModelParams& params);

struct LoopReport {
  int iterates = 0;
  std::vector<double> errors_per_iterate;
  std::vector<double> contraction_ratios;
  bool converged = false;
  double final_residual = 0.0;
  int nested_iterates = 0; // total iterates of the next inner level
  int linear_solves = 0;
  std::vector<std::string> warnings;

  /// Geometric mean of the ratios whose numerator is still above
  /// floor * (first error); NaN when no ratio qualifies.
  double mean_ratio(double floor = 1e-9) const;
  /// e_2 / e_1, or NaN when e_2 is already at the rounding floor of e_1.
  double leading_ratio(double floor = 1e-12) const;
};

struct LoopOptions {
  double tol_inner = 1e-10;
  double tol_density = 1e-9;
  double tol_outer = 1e-8;
  int max_inner = 60;
  int max_density = 60;
  int max_outer = 100;
  double damping = 1.0;
  bool strict = false;
  /// Called after every outer iterate (checkpoint hook).
  std::function<void(int, const IterationState&, const LoopReport&)> on_outer_iterate;
};

struct LoopResult {
  IterationState state;
  LoopReport report;
};

/// Fixed point of u_tilde -> u: the linear problem with transport velocity
/// u_tilde, convective velocity ubar, density offset r_tilde and data
///   G = div(2 r_tilde D(u_tilde)) - grad R_m(r_tilde) + (m + r_tilde) f,
///   h = -n . 2 r_tilde D(u_tilde) . tau.
/// Convergence: ||grad(u_{k+1} - u_k)||_2 <= tol_inner ||grad u_{k+1}||_2.
LoopResult inner_banach(const VectorField& ubar, const ScalarField& r_tilde, const ModelParams& params,
                        const AdmissibleBounds& bounds, const LoopOptions& opts,
                        LinearWorkspace* workspace = nullptr, const VectorField* u_start = nullptr);

/// Fixed point r_n -> r_{n+1} at frozen ubar.
/// Convergence: ||r_{n+1} - r_n||_2 <= tol_density * max(||r||_2, m^(2-gamma) ||u||_{1,2} / gamma).
LoopResult density_loop(const VectorField& ubar, const ModelParams& params,
                        const AdmissibleBounds& bounds, const LoopOptions& opts,
                        LinearWorkspace* workspace = nullptr, const ScalarField* r_start = nullptr,
                        const VectorField* u_start = nullptr);

/// Damped Picard iteration ubar -> T(ubar). The smallness gate and admissibility
/// are checked and reported; they raise AdmissibilityError only in strict mode.
LoopResult outer_loop(const ModelParams& params, const AdmissibleBounds& bounds,
                      const LoopOptions& opts, const VectorField* ubar_start = nullptr);

/// Discrete residuals of the original nonlinear system.
struct NonlinearResidual {
  double mass = 0.0;           // ||div(avg(rho) u)||_2
  double momentum = 0.0;       // ||momentum defect||_2
  double bc = 0.0;             // max |u . n| on the walls
  double mean = 0.0;           // |integral rho - |Omega| m| / (|Omega| m)
  double mass_scale = 0.0;     // m ||grad u||_2
  double momentum_scale = 0.0; // ||avg(rho) f||_2

  double relative_mass() const;
  double relative_momentum() const;
};
NonlinearResidual nonlinear_residual(const IterationState& state, const ModelParams& params);

} // namespace heavyflow
