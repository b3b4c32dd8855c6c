#pragma once

// Linearized steady problem with frozen coefficients:
//
//   m div u + div(r uf)                                = 0
//   -div(2 m D(u)) + rho_bar ubar . grad u + gamma m^(gamma-1) grad r = G
//   u . n = 0,  n . 2 m D(u) . tau + f u . tau = h     on the walls
//   integral of r = 0
//
// with rho_bar = m + r_tilde. Two solvers: a monolithic sparse LU solve, and a
// sweep through vorticity, effective flux, transport and potential subproblems.

#include "heavyflow/errors.hpp"
#include "heavyflow/helmholtz.hpp"
#include "heavyflow/model.hpp"

#include <Eigen/SparseLU>

#include <memory>
#include <optional>
#include <vector>

namespace heavyflow {

struct LinearizedProblem {
  ModelParams params;
  VectorField transport_velocity;  // uf
  VectorField convective_velocity; // ubar
  ScalarField density_offset;      // r_tilde
  VectorField rhs_G;
  WallData rhs_h;

  /// All coefficients and data zero on the grid of params.force.
  static LinearizedProblem zero(const ModelParams& params);
};

struct LinearResiduals {
  double continuity = 0.0; // ||m div u + div(r uf)||_2 / (m ||grad u||_2)
  double momentum = 0.0;   // ||momentum defect||_2 / (||G||_2 + ||wall load||_2)
  double wall = 0.0;       // max |u . n|
  double mean = 0.0;       // |integral r| / ||r||_1
};

struct DecompositionTrace {
  ScalarField omega;     // vorticity averaged to cells
  ScalarField P_flux;    // effective viscous flux
  ScalarField potential; // potential part of u
  double consistency = 0.0; // ||P - (gamma m^(gamma-2) r - 2 div u)||_2 / ||P||_2
  std::vector<double> sweep_changes;
};

struct LinearSolution {
  ScalarField r;
  VectorField u;
  LinearResiduals residuals;
  std::optional<DecompositionTrace> flux_trace;
  int sweeps = 0;
};

struct DecomposedOptions {
  double alpha = 0.1;     // transport smallness bound
  int max_sweeps = 200;
  double tol = 1e-13;     // relative sweep-to-sweep change of u
};

/// Reusable LU factorization. A new matrix is first tried with the previous
/// factorization as a preconditioner for iterative refinement; the matrix is
/// refactored only when refinement stalls.
class LinearWorkspace {
public:
  LinearWorkspace();
  ~LinearWorkspace();
  LinearWorkspace(LinearWorkspace&&) noexcept;
  LinearWorkspace& operator=(LinearWorkspace&&) noexcept;

  Vec solve(const SpMat& a, const Vec& b);

  int factorizations() const { return factorizations_; }
  int solves() const { return solves_; }
  int refinement_steps() const { return refinement_steps_; }

private:
  struct Factor;
  std::unique_ptr<Factor> factor_;
  int factorizations_ = 0;
  int solves_ = 0;
  int refinement_steps_ = 0;
  bool refine(const SpMat& a, const Vec& b, Vec& x, bool fresh);
  void factorize(const SpMat& a);
};

/// Throws AdmissibilityError when wall compatibility or m > 2 ||r_tilde||_inf
/// fail, or (if requested) when the transport smallness bound is violated.
void check_problem(const LinearizedProblem& prob, bool enforce_transport, double alpha = 0.1);

/// ||uf||_{2,p} / (gamma m^(gamma-1)).
double transport_smallness(const LinearizedProblem& prob);

LinearSolution solve_monolithic(const LinearizedProblem& prob, LinearWorkspace* workspace = nullptr);
LinearSolution solve_decomposed(const LinearizedProblem& prob, const DecomposedOptions& opts = {});

/// Vorticity at nodes: -m Laplace(w) = curl(G - rho_bar ubar . grad u) inside,
/// w = s (h - f u . tau) / m on the walls (s = +1 bottom/right, -1 top/left).
NodeField vorticity_solve_nodes(const LinearizedProblem& prob, const VectorField& u_current);
ScalarField vorticity_solve(const LinearizedProblem& prob, const VectorField& u_current);

/// Mean-zero P with grad P = (G - rho_bar ubar . grad u)/m - curl(omega).
/// Throws SolverError when the right side is not a discrete gradient.
ScalarField effective_flux(const LinearizedProblem& prob, const NodeField& omega,
                           const VectorField& u_current);

/// r + div(2 r uf / (gamma m^(gamma-1))) = P / (gamma m^(gamma-2)), mean-zero r,
/// by Neumann series. Throws AdmissibilityError if the smallness bound alpha is
/// exceeded and SolverError if the series does not converge.
ScalarField transport_solve(const ScalarField& P, const VectorField& uf, const ModelParams& params,
                            double alpha = 0.1);

/// -2 Laplace(phi) = P - gamma m^(gamma-2) r with zero normal derivative.
ScalarField potential_solve(const ScalarField& P, const ScalarField& r, const ModelParams& params);

/// Terms of the energy identity obtained by testing momentum with u and
/// continuity with gamma m^(gamma-2) r.
struct EnergyBalance {
  double dissipation = 0.0; // 2 m ||D(u)||_2^2
  double friction = 0.0;    // f * sum over walls of (u . tau)^2 ds
  double work = 0.0;        // <G, u> + sum h u . tau ds
  double transport = 0.0;   // -gamma m^(gamma-2) <r, div(r uf)>
  double defect() const { return dissipation + friction - work - transport; }
  double scale() const;
};
EnergyBalance energy_balance(const LinearizedProblem& prob, const LinearSolution& sol);

LinearResiduals linear_residuals(const LinearizedProblem& prob, const ScalarField& r,
                                 const VectorField& u);

// ---------------------------------------------------------------------------
// Discrete building blocks shared with the nonlinear iteration.
// ---------------------------------------------------------------------------
namespace assembly {

/// Viscous stress operator -div(2 mu D(u)) on face DOFs for cell viscosity mu
/// (node viscosity = average of the four cells), plus wall friction f u . tau.
SpMat viscous_matrix(const StaggeredOps& ops, const Vec& mu_cells, double friction);

/// Wall-node data w turned into face loads w / h_n on the wall-adjacent
/// tangential faces. The tangential wall stress law contributes
/// (f u . tau - h) / h_n, so -wall_load(h) is the h part.
Vec wall_load(const StaggeredOps& ops, const WallData& w);

/// Additional wall stress s_w * S / h_n, where S is a wall-node shear stress
/// n . S . tau expressed as sigma_xy and s_w = +1 bottom/left, -1 top/right.
Vec wall_stress_load(const StaggeredOps& ops, const WallData& sxy);

/// Skew-symmetric convection rho_bar ubar . grad u + (1/2) div(rho_bar ubar) u.
SpMat convection_matrix(const StaggeredOps& ops, const Vec& rho_cells, const VectorField& ubar);

/// div(avg(r) uf) as a cells x cells matrix.
SpMat transport_matrix(const StaggeredOps& ops, const VectorField& uf);

/// Tangential velocity next to each wall node (the adjacent face value).
WallData wall_tangential(const VectorField& u);

/// One-sided wall shear sigma_xy = mu d(u . tau)/dn at wall nodes.
WallData wall_shear(const VectorField& u, const ScalarField& mu);

/// Orientation factor: n . sigma . tau = kappa * sigma_xy with kappa = -1 on
/// bottom/left walls and +1 on top/right walls.
WallData wall_orientation(const GridSpec& g);

/// Mass-weighted face force avg(rho) f.
Vec density_weighted_force(const StaggeredOps& ops, const Vec& rho_cells, const VectorField& f);

} // namespace assembly

} // namespace heavyflow
