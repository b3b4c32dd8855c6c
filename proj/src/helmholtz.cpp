#include "heavyflow/helmholtz.hpp"

#include "heavyflow/operators.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <map>
#include <mutex>

namespace heavyflow {

namespace {

struct NeumannFactor {
  SpMat bordered;
  Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
};

struct NodeFactor {
  Eigen::SimplicialLDLT<SpMat> ldlt;
};

template <typename Factor, typename Build>
std::shared_ptr<const Factor> cached(const GridSpec& g, Build&& build) {
  static std::mutex mutex;
  static std::map<std::uint64_t, std::shared_ptr<const Factor>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto& slot = cache[g.hash()];
  if (!slot)
    slot = build();
  return slot;
}

std::shared_ptr<const NeumannFactor> neumann_factor(const StaggeredOps& ops) {
  return cached<NeumannFactor>(ops.grid(), [&] {
    auto f = std::make_shared<NeumannFactor>();
    const SpMat& L = ops.neumann_laplacian();
    const int n = ops.cells();
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(L.nonZeros() + 2 * n);
    for (int k = 0; k < L.outerSize(); ++k)
      for (SpMat::InnerIterator it(L, k); it; ++it)
        t.emplace_back(it.row(), it.col(), it.value());
    // Border scaled like the operator so the pivots stay balanced.
    const double s = 1.0 / (ops.grid().hx() * ops.grid().hy());
    for (int c = 0; c < n; ++c) {
      t.emplace_back(c, n, s);
      t.emplace_back(n, c, s);
    }
    f->bordered.resize(n + 1, n + 1);
    f->bordered.setFromTriplets(t.begin(), t.end());
    f->bordered.makeCompressed();
    f->lu.analyzePattern(f->bordered);
    f->lu.factorize(f->bordered);
    if (f->lu.info() != Eigen::Success)
      throw SolverError("neumann_poisson_solve: factorization failed", 0.0);
    return std::shared_ptr<const NeumannFactor>(f);
  });
}

std::shared_ptr<const NodeFactor> node_factor(const StaggeredOps& ops) {
  return cached<NodeFactor>(ops.grid(), [&] {
    auto f = std::make_shared<NodeFactor>();
    f->ldlt.compute(ops.node_laplacian());
    if (f->ldlt.info() != Eigen::Success)
      throw SolverError("node_dirichlet_solve: factorization failed", 0.0);
    return std::shared_ptr<const NodeFactor>(f);
  });
}

/// Per-cell contribution flux / h of the wall data, as a cell vector.
Vec wall_source(const StaggeredOps& ops, const NormalFlux& flux) {
  const GridSpec& g = ops.grid();
  Vec s = Vec::Zero(ops.cells());
  auto add = [&](const Eigen::ArrayXd& a, auto cell_of, double h) {
    for (Eigen::Index k = 0; k < a.size(); ++k)
      s[cell_of(static_cast<int>(k))] += a[k] / h;
  };
  add(flux.bottom, [&](int i) { return ops.cell(i, 0); }, g.hy());
  add(flux.top, [&](int i) { return ops.cell(i, g.ny() - 1); }, g.hy());
  if (!g.periodic_x()) {
    add(flux.left, [&](int j) { return ops.cell(0, j); }, g.hx());
    add(flux.right, [&](int j) { return ops.cell(g.nx() - 1, j); }, g.hx());
  }
  return s;
}

} // namespace

NormalFlux NormalFlux::zero(const GridSpec& g) {
  NormalFlux f;
  f.bottom = f.top = Eigen::ArrayXd::Zero(g.nx());
  f.left = f.right = Eigen::ArrayXd::Zero(g.periodic_x() ? 0 : g.ny());
  return f;
}

NormalFlux NormalFlux::of(const VectorField& v) {
  const GridSpec& g = v.grid();
  NormalFlux f = zero(g);
  f.bottom = -v.y().col(0);
  f.top = v.y().col(g.ny());
  if (!g.periodic_x()) {
    f.left = -v.x().row(0).transpose();
    f.right = v.x().row(g.nx()).transpose();
  }
  return f;
}

double NormalFlux::integral(const GridSpec& g) const {
  return (bottom.sum() + top.sum()) * g.hx() + (left.sum() + right.sum()) * g.hy();
}

double NormalFlux::l1(const GridSpec& g) const {
  return (bottom.abs().sum() + top.abs().sum()) * g.hx() +
         (left.abs().sum() + right.abs().sum()) * g.hy();
}

Vec neumann_solve(const StaggeredOps& ops, const Vec& rhs) {
  const auto f = neumann_factor(ops);
  const int n = ops.cells();
  Vec b(n + 1);
  b.head(n) = rhs;
  b[n] = 0.0;
  Vec x = f->lu.solve(b);
  for (int pass = 0; pass < 2; ++pass)
    x += f->lu.solve(Vec(b - f->bordered * x));
  return x.head(n);
}

ScalarField neumann_poisson_solve(const ScalarField& rhs) {
  return neumann_poisson_solve(rhs, NormalFlux::zero(rhs.grid()));
}

namespace {

// data_scale: size of the data the right side was computed from. A right side
// that is pure rounding noise has no useful scale of its own.
ScalarField poisson_with_scale(const ScalarField& rhs, const NormalFlux& flux, double data_scale) {
  if (!rhs.all_finite())
    throw std::domain_error("neumann_poisson_solve: non-finite right-hand side");
  const GridSpec& g = rhs.grid();
  const auto ops = StaggeredOps::get(g);
  const double mismatch = integral(rhs) - flux.integral(g);
  const double scale = lp_norm(rhs, 1.0) + flux.l1(g) + data_scale;
  if (std::abs(mismatch) > 1e-10 * scale)
    throw AdmissibilityError("neumann_poisson_solve: incompatible data, integral of rhs minus "
                             "boundary flux = " +
                             std::to_string(mismatch));
  Vec b = ops->pack(rhs) - wall_source(*ops, flux);
  b.array() -= detail::compensated_sum(b) / b.size();
  const Vec x = neumann_solve(*ops, b);
  const double res = (ops->neumann_laplacian() * x - b).norm();
  if (res > 1e-10 * std::max(b.norm(), std::numeric_limits<double>::min()) && b.norm() > 0)
    throw SolverError("neumann_poisson_solve: residual " + std::to_string(res) +
                          " above tolerance",
                      res);
  return mean_zero_project(ops->unpack_cells(x));
}

} // namespace

ScalarField neumann_poisson_solve(const ScalarField& rhs, const NormalFlux& flux) {
  return poisson_with_scale(rhs, flux, 0.0);
}

Vec node_dirichlet_solve(const StaggeredOps& ops, const Vec& rhs_interior, const Vec& wall_values) {
  const auto f = node_factor(ops);
  const Vec b = rhs_interior - ops.node_laplacian_wall() * wall_values;
  Vec x = f->ldlt.solve(b);
  x += f->ldlt.solve(Vec(b - ops.node_laplacian() * x));
  Vec all = wall_values;
  const auto& nodes = ops.interior_node_list();
  for (int k = 0; k < ops.interior_nodes(); ++k)
    all[nodes[k]] = x[k];
  return all;
}

HelmholtzSplit project(const VectorField& g) {
  if (!g.all_finite())
    throw std::domain_error("project: non-finite input");
  const GridSpec& grid = g.grid();
  const auto ops = StaggeredOps::get(grid);
  const NormalFlux flux = NormalFlux::of(g);
  // div g is O(||g|| / h) per cell
  const double scale = lp_norm(g, 1.0) * (1.0 / grid.hx() + 1.0 / grid.hy());
  ScalarField phi = poisson_with_scale(divergence(g), flux, scale);

  VectorField pg = gradient(phi);
  // Wall-normal faces of the gradient carry the prescribed flux.
  pg.y().col(0) = g.y().col(0);
  pg.y().col(grid.ny()) = g.y().col(grid.ny());
  if (!grid.periodic_x()) {
    pg.x().row(0) = g.x().row(0);
    pg.x().row(grid.nx()) = g.x().row(grid.nx());
  }
  VectorField sol = (g - pg).wall_compatible();
  return {std::move(sol), std::move(phi), std::move(pg)};
}

} // namespace heavyflow
