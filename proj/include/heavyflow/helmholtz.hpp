#pragma once

#include "heavyflow/errors.hpp"
#include "heavyflow/staggered.hpp"

namespace heavyflow {

/// Outward normal flux through the wall faces. bottom/top are indexed by cell
/// column i (size nx), left/right by cell row j (size ny). Empty arrays mean zero.
struct NormalFlux {
  Eigen::ArrayXd bottom, top, left, right;

  static NormalFlux zero(const GridSpec& g);
  /// Outward normal component of v on the walls.
  static NormalFlux of(const VectorField& v);
  /// Boundary integral of the flux.
  double integral(const GridSpec& g) const;
  double l1(const GridSpec& g) const;
};

/// Solve Laplace(phi) = rhs with d(phi)/dn = flux on the walls, mean-zero phi.
/// Throws AdmissibilityError when the data are incompatible and SolverError
/// when the residual certificate fails.
ScalarField neumann_poisson_solve(const ScalarField& rhs, const NormalFlux& flux);
ScalarField neumann_poisson_solve(const ScalarField& rhs);

/// Vector form used by the solvers: L phi = rhs on cell vectors, mean-zero phi.
/// rhs must already integrate to zero up to rounding.
Vec neumann_solve(const StaggeredOps& ops, const Vec& rhs);

/// Solve -Laplace(psi) = rhs at interior nodes with psi = wall_values on the
/// wall nodes. wall_values is indexed by StaggeredOps node numbers (interior
/// entries are ignored). Returns psi on all nodes.
Vec node_dirichlet_solve(const StaggeredOps& ops, const Vec& rhs_interior, const Vec& wall_values);

struct HelmholtzSplit {
  VectorField solenoidal;     // divergence-free, zero normal component
  ScalarField potential;      // mean-zero
  VectorField potential_grad; // gradient of potential, wall-normal faces carry g . n
};

/// g = solenoidal + grad(potential), with div(solenoidal) = 0 and
/// solenoidal . n = 0 on the walls.
HelmholtzSplit project(const VectorField& g);

} // namespace heavyflow
