#include "heavyflow/linsolve.hpp"

#include "heavyflow/operators.hpp"

#include <cmath>
#include <sstream>

namespace heavyflow {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

int wrap(int i, int n) { return (i % n + n) % n; }

double l2(const Vec& v, const StaggeredOps& ops) { return v.norm() * std::sqrt(ops.weight()); }

double safe_ratio(double num, double den) {
  if (num == 0.0)
    return 0.0;
  return num / std::max(den, std::numeric_limits<double>::min());
}

/// Interior-node average of the four surrounding cells.
SpMat node_average(const StaggeredOps& ops) {
  const GridSpec& g = ops.grid();
  const int nxn = g.periodic_x() ? g.nx() : g.nx() + 1;
  Triplets t;
  const auto& nodes = ops.interior_node_list();
  for (int k = 0; k < ops.interior_nodes(); ++k) {
    const int i = nodes[k] % nxn, j = nodes[k] / nxn;
    for (int di = -1; di <= 0; ++di)
      for (int dj = -1; dj <= 0; ++dj)
        t.emplace_back(k, ops.cell(wrap(i + di, g.nx()), j + dj), 0.25);
  }
  SpMat a(ops.interior_nodes(), ops.cells());
  a.setFromTriplets(t.begin(), t.end());
  return a;
}

/// Wall-node vector (indexed by node number) from WallData; corners excluded.
Vec wall_node_vector(const StaggeredOps& ops, const WallData& w) {
  const GridSpec& g = ops.grid();
  Vec v = Vec::Zero(ops.nodes());
  const int i0 = g.periodic_x() ? 0 : 1;
  for (int i = i0; i < g.nx(); ++i) {
    v[ops.node(i, 0)] = w.bottom[i];
    v[ops.node(i, g.ny())] = w.top[i];
  }
  if (!g.periodic_x()) {
    for (int j = 1; j < g.ny(); ++j) {
      v[ops.node(0, j)] = w.left[j];
      v[ops.node(g.nx(), j)] = w.right[j];
    }
  }
  return v;
}

/// Sum over walls of a * b * ds (corners excluded).
double wall_dot(const GridSpec& g, const WallData& a, const WallData& b) {
  const int i0 = g.periodic_x() ? 0 : 1;
  double s = 0.0;
  for (int i = i0; i < g.nx(); ++i)
    s += (a.bottom[i] * b.bottom[i] + a.top[i] * b.top[i]) * g.hx();
  if (!g.periodic_x())
    for (int j = 1; j < g.ny(); ++j)
      s += (a.left[j] * b.left[j] + a.right[j] * b.right[j]) * g.hy();
  return s;
}

struct Scaling {
  double m, gamma, q_of_r, transport;
  explicit Scaling(const ModelParams& p)
      : m(p.m), gamma(p.gamma), q_of_r(p.gamma * std::pow(p.m, p.gamma - 2.0)),
        transport(1.0 / (p.gamma * std::pow(p.m, p.gamma - 1.0))) {}
};

Vec rho_bar(const StaggeredOps& ops, const LinearizedProblem& prob) {
  return (ops.pack(prob.density_offset).array() + prob.params.m).matrix();
}

/// Coupled matrix on [u; q] with q = gamma m^(gamma-2) r. The continuity rows
/// sum to zero, so one of them is redundant; the mean of q is fixed separately.
SpMat assemble_monolithic(const StaggeredOps& ops, const LinearizedProblem& prob) {
  const Scaling s(prob.params);
  const int nf = ops.face_dofs(), nc = ops.cells(), n = nf + nc;
  const SpMat k = (assembly::viscous_matrix(ops, Vec::Constant(nc, s.m), prob.params.f_friction) +
                   assembly::convection_matrix(ops, rho_bar(ops, prob), prob.convective_velocity)) /
                  s.m;
  const SpMat t = assembly::transport_matrix(ops, prob.transport_velocity) * s.transport;
  Triplets trip;
  trip.reserve(k.nonZeros() + 2 * ops.grad().nonZeros() + t.nonZeros());
  auto add = [&](const SpMat& a, int r0, int c0) {
    for (int c = 0; c < a.outerSize(); ++c)
      for (SpMat::InnerIterator it(a, c); it; ++it)
        trip.emplace_back(r0 + it.row(), c0 + it.col(), it.value());
  };
  add(k, 0, 0);
  add(ops.grad(), 0, nf);
  add(ops.div(), nf, 0);
  add(t, nf, nf);
  SpMat a(n, n);
  a.setFromTriplets(trip.begin(), trip.end());
  a.makeCompressed();
  return a;
}

} // namespace

// ---------------------------------------------------------------------------
// Assembly
// ---------------------------------------------------------------------------
namespace assembly {

SpMat viscous_matrix(const StaggeredOps& ops, const Vec& mu_cells, double friction) {
  const GridSpec& g = ops.grid();
  const Vec mu_nodes = node_average(ops) * mu_cells;
  SpMat v = SpMat(ops.dxx().transpose()) * (2.0 * mu_cells).asDiagonal() * ops.dxx();
  v += SpMat(ops.dyy().transpose()) * (2.0 * mu_cells).asDiagonal() * ops.dyy();
  v += SpMat(ops.shear().transpose()) * mu_nodes.asDiagonal() * ops.shear();
  if (friction != 0.0) {
    WallData ones(g);
    ones.bottom.setOnes();
    ones.top.setOnes();
    ones.left.setOnes();
    ones.right.setOnes();
    const Vec d = wall_load(ops, ones) * friction;
    v += SpMat(d.asDiagonal());
  }
  v.makeCompressed();
  return v;
}

namespace {
Vec wall_load_signed(const StaggeredOps& ops, const WallData& w, double top_right_sign) {
  const GridSpec& g = ops.grid();
  Vec load = Vec::Zero(ops.face_dofs());
  const int i0 = g.periodic_x() ? 0 : 1;
  for (int i = i0; i < g.nx(); ++i) {
    load[ops.xdof(i, 0)] += w.bottom[i] / g.hy();
    load[ops.xdof(i, g.ny() - 1)] += top_right_sign * w.top[i] / g.hy();
  }
  if (!g.periodic_x()) {
    for (int j = 1; j < g.ny(); ++j) {
      load[ops.ydof(0, j)] += w.left[j] / g.hx();
      load[ops.ydof(g.nx() - 1, j)] += top_right_sign * w.right[j] / g.hx();
    }
  }
  return load;
}
} // namespace

Vec wall_load(const StaggeredOps& ops, const WallData& w) { return wall_load_signed(ops, w, 1.0); }

Vec wall_stress_load(const StaggeredOps& ops, const WallData& sxy) {
  return wall_load_signed(ops, sxy, -1.0);
}

SpMat convection_matrix(const StaggeredOps& ops, const Vec& rho_cells, const VectorField& ubar) {
  const GridSpec& g = ops.grid();
  const int nx = g.nx(), ny = g.ny();
  const bool per = g.periodic_x();
  auto rho = [&](int i, int j) { return rho_cells[ops.cell(wrap(i, nx), j)]; };
  // Mass fluxes on every face (wall-normal faces carry zero velocity).
  Eigen::ArrayXXd fx(nx + 1, ny), fy(nx, ny + 1);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i <= nx; ++i) {
      const double rf = per ? 0.5 * (rho(i - 1, j) + rho(i, j))
                            : 0.5 * (rho(std::max(i - 1, 0), j) + rho(std::min(i, nx - 1), j));
      fx(i, j) = rf * ubar.x()(i, j);
    }
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i < nx; ++i)
      fy(i, j) = 0.5 * (rho(i, std::max(j - 1, 0)) + rho(i, std::min(j, ny - 1))) * ubar.y()(i, j);
  auto FX = [&](int i, int j) { return fx(per ? wrap(i, nx) : i, j); };
  auto FY = [&](int i, int j) { return fy(per ? wrap(i, nx) : i, j); };

  const double hx = g.hx(), hy = g.hy(), inv2v = 1.0 / (2.0 * hx * hy);
  Triplets t;
  t.reserve(4 * ops.face_dofs());
  auto put = [&](int row, int col, double beta, double area) {
    if (col >= 0 && beta != 0.0)
      t.emplace_back(row, col, beta * area * inv2v);
  };
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i <= nx; ++i) {
      const int p = ops.xdof(i, j);
      if (p < 0 || (per && i == nx))
        continue;
      put(p, ops.xdof(i + 1, j), 0.5 * (FX(i, j) + FX(i + 1, j)), hy);
      put(p, ops.xdof(i - 1, j), -0.5 * (FX(i - 1, j) + FX(i, j)), hy);
      put(p, ops.xdof(i, j + 1), 0.5 * (FY(i - 1, j + 1) + FY(i, j + 1)), hx);
      put(p, ops.xdof(i, j - 1), -0.5 * (FY(i - 1, j) + FY(i, j)), hx);
    }
  for (int j = 1; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const int p = ops.ydof(i, j);
      put(p, ops.ydof(i, j + 1), 0.5 * (FY(i, j) + FY(i, j + 1)), hx);
      put(p, ops.ydof(i, j - 1), -0.5 * (FY(i, j - 1) + FY(i, j)), hx);
      if (per || i + 1 < nx)
        put(p, ops.ydof(i + 1, j), 0.5 * (FX(i + 1, j - 1) + FX(i + 1, j)), hy);
      if (per || i > 0)
        put(p, ops.ydof(i - 1, j), -0.5 * (FX(i, j - 1) + FX(i, j)), hy);
    }
  SpMat c(ops.face_dofs(), ops.face_dofs());
  c.setFromTriplets(t.begin(), t.end());
  c.makeCompressed();
  return c;
}

SpMat transport_matrix(const StaggeredOps& ops, const VectorField& uf) {
  const Vec w = ops.pack(uf);
  SpMat t = ops.div() * w.asDiagonal() * ops.cell_to_face();
  t.makeCompressed();
  return t;
}

WallData wall_tangential(const VectorField& u) {
  const GridSpec& g = u.grid();
  WallData w(g);
  for (int i = 0; i <= g.nx(); ++i) {
    const int ii = g.periodic_x() ? wrap(i, g.nx()) : i;
    w.bottom[i] = u.x()(ii, 0);
    w.top[i] = u.x()(ii, g.ny() - 1);
  }
  if (!g.periodic_x()) {
    for (int j = 0; j <= g.ny(); ++j) {
      const int jj = std::clamp(j, 0, g.ny());
      w.left[j] = u.y()(0, jj);
      w.right[j] = u.y()(g.nx() - 1, jj);
    }
  }
  return w;
}

WallData wall_shear(const VectorField& u, const ScalarField& mu) {
  const GridSpec& g = u.grid();
  const int nx = g.nx(), ny = g.ny();
  WallData w(g);
  auto one_sided = [](double f1, double f2, double f3, double h) {
    return (-2.0 * f1 + 3.0 * f2 - f3) / h;
  };
  const int i0 = g.periodic_x() ? 0 : 1;
  for (int i = i0; i < nx; ++i) {
    const int il = wrap(i - 1, nx), ir = wrap(i, nx);
    const double mub = 0.5 * (mu(il, 0) + mu(ir, 0));
    const double mut = 0.5 * (mu(il, ny - 1) + mu(ir, ny - 1));
    w.bottom[i] = mub * one_sided(u.x()(i, 0), u.x()(i, 1), u.x()(i, 2), g.hy());
    w.top[i] = -mut * one_sided(u.x()(i, ny - 1), u.x()(i, ny - 2), u.x()(i, ny - 3), g.hy());
  }
  if (g.periodic_x()) {
    w.bottom[nx] = w.bottom[0];
    w.top[nx] = w.top[0];
  } else {
    for (int j = 1; j < ny; ++j) {
      const double mul = 0.5 * (mu(0, j - 1) + mu(0, j));
      const double mur = 0.5 * (mu(nx - 1, j - 1) + mu(nx - 1, j));
      w.left[j] = mul * one_sided(u.y()(0, j), u.y()(1, j), u.y()(2, j), g.hx());
      w.right[j] = -mur * one_sided(u.y()(nx - 1, j), u.y()(nx - 2, j), u.y()(nx - 3, j), g.hx());
    }
  }
  return w;
}

WallData wall_orientation(const GridSpec& g) {
  WallData w(g);
  w.bottom.setConstant(-1.0);
  w.left.setConstant(-1.0);
  w.top.setConstant(1.0);
  w.right.setConstant(1.0);
  return w;
}

Vec density_weighted_force(const StaggeredOps& ops, const Vec& rho_cells, const VectorField& f) {
  return ((ops.cell_to_face() * rho_cells).array() * ops.pack(f).array()).matrix();
}

} // namespace assembly

// ---------------------------------------------------------------------------
// Linear algebra with factorization reuse
// ---------------------------------------------------------------------------
struct LinearWorkspace::Factor {
  Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
  bool valid = false;
};

LinearWorkspace::LinearWorkspace() : factor_(std::make_unique<Factor>()) {}
LinearWorkspace::~LinearWorkspace() = default;
LinearWorkspace::LinearWorkspace(LinearWorkspace&&) noexcept = default;
LinearWorkspace& LinearWorkspace::operator=(LinearWorkspace&&) noexcept = default;

void LinearWorkspace::factorize(const SpMat& a) {
  factor_->lu.analyzePattern(a);
  factor_->lu.factorize(a);
  ++factorizations_;
  factor_->valid = factor_->lu.info() == Eigen::Success;
  if (!factor_->valid)
    throw SolverError("linear solve: sparse LU failed (" + factor_->lu.lastErrorMessage() +
                          "), matrix singular or ill-conditioned",
                      std::numeric_limits<double>::infinity());
}

bool LinearWorkspace::refine(const SpMat& a, const Vec& b, Vec& x, bool fresh) {
  const SpMat abs_a = a.cwiseAbs();
  double prev = std::numeric_limits<double>::infinity();
  const int max_steps = fresh ? 12 : 40;
  for (int step = 0; step <= max_steps; ++step) {
    const Vec r = b - a * x;
    const Vec scale = abs_a * x.cwiseAbs() + b.cwiseAbs();
    double err = 0.0;
    for (Eigen::Index i = 0; i < r.size(); ++i)
      if (scale[i] > 0.0)
        err = std::max(err, std::abs(r[i]) / scale[i]);
      else if (r[i] != 0.0)
        err = std::numeric_limits<double>::infinity();
    if (err <= 1e-14)
      return true;
    if (step > 0 && err > 0.6 * prev)
      return fresh && err <= 1e-11;
    if (step == max_steps)
      return fresh && err <= 1e-11;
    prev = err;
    x += factor_->lu.solve(r);
    ++refinement_steps_;
  }
  return false;
}

Vec LinearWorkspace::solve(const SpMat& a, const Vec& b) {
  ++solves_;
  if (b.isZero(0.0))
    return Vec::Zero(a.cols());
  if (factor_->valid) {
    Vec x = factor_->lu.solve(b);
    if (x.allFinite() && refine(a, b, x, false))
      return x;
  }
  factorize(a);
  Vec x = factor_->lu.solve(b);
  if (refine(a, b, x, true))
    return x;
  // Crude condition estimate: ||A||_1 * ||A^{-1} e|| / ||e|| for e = ones.
  double norm1 = 0.0;
  for (int c = 0; c < a.outerSize(); ++c) {
    double s = 0.0;
    for (SpMat::InnerIterator it(a, c); it; ++it)
      s += std::abs(it.value());
    norm1 = std::max(norm1, s);
  }
  const Vec e = Vec::Ones(a.rows());
  const double cond = norm1 * factor_->lu.solve(e).lpNorm<1>() / e.lpNorm<1>();
  std::ostringstream msg;
  msg << "linear solve: iterative refinement did not converge (condition estimate " << cond << ")";
  throw SolverError(msg.str(), (b - a * x).norm());
}

// ---------------------------------------------------------------------------
// Problem checks and residuals
// ---------------------------------------------------------------------------
LinearizedProblem LinearizedProblem::zero(const ModelParams& params) {
  const GridSpec& g = params.force.grid();
  return {params, VectorField(g), VectorField(g), ScalarField(g), VectorField(g), WallData(g)};
}

double transport_smallness(const LinearizedProblem& prob) {
  const auto& p = prob.params;
  return sobolev_norm(prob.transport_velocity, 2, p.p_exp) /
         (p.gamma * std::pow(p.m, p.gamma - 1.0));
}

void check_problem(const LinearizedProblem& prob, bool enforce_transport, double alpha) {
  prob.params.validate();
  const GridSpec& g = prob.params.force.grid();
  require_same_grid(g, prob.rhs_G.grid(), "linear problem");
  require_same_grid(g, prob.transport_velocity.grid(), "linear problem");
  require_same_grid(g, prob.convective_velocity.grid(), "linear problem");
  require_same_grid(g, prob.density_offset.grid(), "linear problem");
  if (!prob.transport_velocity.is_wall_compatible() || !prob.convective_velocity.is_wall_compatible())
    throw AdmissibilityError("linear problem: coefficient velocities must satisfy u . n = 0");
  const double rmax = lp_norm(prob.density_offset, INFINITY);
  if (!(prob.params.m > 2.0 * rmax))
    throw AdmissibilityError("linear problem: m = " + std::to_string(prob.params.m) +
                             " does not exceed 2 ||r_tilde||_inf = " + std::to_string(2 * rmax));
  if (enforce_transport) {
    const double s = transport_smallness(prob);
    if (s > alpha)
      throw AdmissibilityError("linear problem: transport smallness " + std::to_string(s) +
                               " exceeds alpha = " + std::to_string(alpha));
  }
}

LinearResiduals linear_residuals(const LinearizedProblem& prob, const ScalarField& r,
                                 const VectorField& u) {
  const auto ops = StaggeredOps::get(r.grid());
  const Scaling s(prob.params);
  const Vec uv = ops->pack(u), rv = ops->pack(r);
  const Vec cont = s.m * (ops->div() * uv) + assembly::transport_matrix(*ops, prob.transport_velocity) * rv;
  const Vec hload = assembly::wall_load(*ops, prob.rhs_h);
  const Vec g = ops->pack(prob.rhs_G);
  const Vec mom = assembly::viscous_matrix(*ops, Vec::Constant(ops->cells(), s.m),
                                           prob.params.f_friction) * uv +
                  assembly::convection_matrix(*ops, rho_bar(*ops, prob), prob.convective_velocity) * uv +
                  s.gamma * std::pow(s.m, s.gamma - 1.0) * (ops->grad() * rv) - g - hload;
  LinearResiduals res;
  res.continuity = safe_ratio(l2(cont, *ops), s.m * staggered_gradient_l2(u));
  res.momentum = safe_ratio(l2(mom, *ops), l2(g, *ops) + l2(hload, *ops));
  const auto n = NormalFlux::of(u);
  res.wall = std::max({n.bottom.abs().maxCoeff(), n.top.abs().maxCoeff(),
                       n.left.size() ? n.left.abs().maxCoeff() : 0.0,
                       n.right.size() ? n.right.abs().maxCoeff() : 0.0});
  res.mean = safe_ratio(std::abs(integral(r)), lp_norm(r, 1.0));
  return res;
}

// ---------------------------------------------------------------------------
// Monolithic solve
// ---------------------------------------------------------------------------
LinearSolution solve_monolithic(const LinearizedProblem& prob, LinearWorkspace* workspace) {
  check_problem(prob, false);
  const GridSpec& g = prob.params.force.grid();
  const auto ops = StaggeredOps::get(g);
  const Scaling s(prob.params);
  const int nf = ops->face_dofs(), nc = ops->cells();

  // Pin q in the last cell and drop the last (redundant) continuity row. The
  // pinned system gives one member of the solution line x_p + t z; z is the
  // null direction of the full matrix and t restores integral q = 0. Pinning
  // instead of a dense mean-value border keeps the LU fill small.
  const int n = nf + nc;
  Vec b = Vec::Zero(n - 1);
  b.head(nf) = (ops->pack(prob.rhs_G) + assembly::wall_load(*ops, prob.rhs_h)) / s.m;

  LinearWorkspace local;
  LinearWorkspace& ws = workspace ? *workspace : local;
  Vec x = Vec::Zero(n);
  if (!b.isZero(0.0)) {
    const SpMat full = assemble_monolithic(*ops, prob);
    const SpMat pinned = full.topLeftCorner(n - 1, n - 1);
    const Vec last_col = Vec(full.col(n - 1)).head(n - 1);
    x.head(n - 1) = ws.solve(pinned, b);
    Vec z = Vec::Zero(n);
    z.head(n - 1) = ws.solve(pinned, -last_col);
    z[n - 1] = 1.0;
    const double t = -detail::compensated_sum(x.tail(nc)) / detail::compensated_sum(z.tail(nc));
    x += t * z;
  }

  LinearSolution sol;
  sol.u = ops->unpack(x.head(nf));
  sol.r = mean_zero_project(ops->unpack_cells(x.segment(nf, nc) / s.q_of_r));
  sol.residuals = linear_residuals(prob, sol.r, sol.u);
  return sol;
}

// ---------------------------------------------------------------------------
// Decomposition path
// ---------------------------------------------------------------------------
namespace {

/// Wall vorticity s * (h - f u . tau) / m as a node vector.
Vec wall_vorticity(const StaggeredOps& ops, const LinearizedProblem& prob, const VectorField& u) {
  WallData w = assembly::wall_tangential(u);
  w *= -prob.params.f_friction;
  w.bottom += prob.rhs_h.bottom;
  w.top = -(w.top + prob.rhs_h.top);
  w.left = -(w.left + prob.rhs_h.left);
  w.right += prob.rhs_h.right;
  w *= 1.0 / prob.params.m;
  return wall_node_vector(ops, w);
}

Vec momentum_source(const StaggeredOps& ops, const LinearizedProblem& prob, const Vec& u,
                    const SpMat& conv) {
  return ops.pack(prob.rhs_G) - conv * u;
}

Vec vorticity_nodes(const StaggeredOps& ops, const LinearizedProblem& prob, const Vec& src,
                    const VectorField& u) {
  return node_dirichlet_solve(ops, ops.curl_v() * src / prob.params.m, wall_vorticity(ops, prob, u));
}

Vec flux_from(const StaggeredOps& ops, const LinearizedProblem& prob, const Vec& src,
              const Vec& omega) {
  const Vec gface = src / prob.params.m - ops.curl_s() * omega;
  Vec rhs = ops.div() * gface;
  rhs.array() -= detail::compensated_sum(rhs) / rhs.size();
  const Vec p = neumann_solve(ops, rhs);
  const double res = (ops.grad() * p - gface).norm();
  if (res > 1e-8 * gface.norm() && gface.norm() > 0.0)
    throw SolverError("effective_flux: momentum source is not a discrete gradient (relative "
                      "residual " +
                          std::to_string(res / gface.norm()) + ")",
                      res);
  return p;
}

Vec transport_series(const Vec& p, const SpMat& t, double c, Vec q) {
  if (q.size() != p.size())
    q = p;
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 500; ++k) {
    Vec next = p - c * (t * q);
    next.array() -= detail::compensated_sum(next) / next.size();
    const double change = (next - q).norm();
    q = std::move(next);
    if (change <= 1e-15 * q.norm() || change == 0.0)
      return q;
    if (k > 3 && change > prev)
      throw SolverError("transport_solve: Neumann series diverges (transport coefficient too "
                        "large for this m)",
                        change);
    prev = change;
  }
  throw SolverError("transport_solve: Neumann series did not converge in 500 terms", prev);
}

} // namespace

NodeField vorticity_solve_nodes(const LinearizedProblem& prob, const VectorField& u_current) {
  if (!u_current.is_wall_compatible())
    throw AdmissibilityError("vorticity_solve: current velocity must satisfy u . n = 0");
  const auto ops = StaggeredOps::get(u_current.grid());
  const SpMat conv = assembly::convection_matrix(*ops, rho_bar(*ops, prob), prob.convective_velocity);
  const Vec src = momentum_source(*ops, prob, ops->pack(u_current), conv);
  return ops->unpack_nodes(vorticity_nodes(*ops, prob, src, u_current));
}

ScalarField vorticity_solve(const LinearizedProblem& prob, const VectorField& u_current) {
  const NodeField w = vorticity_solve_nodes(prob, u_current);
  const GridSpec& g = w.grid();
  return ScalarField(g, detail::nodes_to_cells(w.values(), g.nx(), g.ny()));
}

ScalarField effective_flux(const LinearizedProblem& prob, const NodeField& omega,
                           const VectorField& u_current) {
  const auto ops = StaggeredOps::get(u_current.grid());
  const SpMat conv = assembly::convection_matrix(*ops, rho_bar(*ops, prob), prob.convective_velocity);
  const Vec src = momentum_source(*ops, prob, ops->pack(u_current), conv);
  return mean_zero_project(ops->unpack_cells(flux_from(*ops, prob, src, ops->pack(omega))));
}

ScalarField transport_solve(const ScalarField& P, const VectorField& uf, const ModelParams& params,
                            double alpha) {
  const auto ops = StaggeredOps::get(P.grid());
  const Scaling s(params);
  if (!uf.is_wall_compatible())
    throw AdmissibilityError("transport_solve: transport velocity must satisfy u . n = 0");
  const double small = sobolev_norm(uf, 2, params.p_exp) * s.transport;
  if (small > alpha)
    throw AdmissibilityError("transport_solve: smallness " + std::to_string(small) +
                             " exceeds alpha = " + std::to_string(alpha));
  const Vec q = transport_series(ops->pack(mean_zero_project(P)),
                                 assembly::transport_matrix(*ops, uf), 2.0 * s.transport, Vec());
  return mean_zero_project(ops->unpack_cells(q / s.q_of_r));
}

ScalarField potential_solve(const ScalarField& P, const ScalarField& r, const ModelParams& params) {
  const Scaling s(params);
  ScalarField rhs = r * s.q_of_r - P;
  rhs *= 0.5;
  return neumann_poisson_solve(rhs);
}

LinearSolution solve_decomposed(const LinearizedProblem& prob, const DecomposedOptions& opts) {
  check_problem(prob, true, opts.alpha);
  const GridSpec& g = prob.params.force.grid();
  if (g.periodic_x())
    throw std::invalid_argument("solve_decomposed: the vorticity/flux split needs a simply "
                                "connected box; use solve_monolithic in periodic-x mode");
  const auto ops = StaggeredOps::get(g);
  const Scaling s(prob.params);
  const SpMat conv = assembly::convection_matrix(*ops, rho_bar(*ops, prob), prob.convective_velocity);
  const SpMat tmat = assembly::transport_matrix(*ops, prob.transport_velocity);

  Vec u = Vec::Zero(ops->face_dofs());
  Vec q, p, omega, phi;
  DecompositionTrace trace;
  bool converged = false;
  int sweep = 0;
  while (sweep < opts.max_sweeps && !converged) {
    ++sweep;
    const VectorField uf = ops->unpack(u);
    const Vec src = momentum_source(*ops, prob, u, conv);
    omega = vorticity_nodes(*ops, prob, src, uf);
    p = flux_from(*ops, prob, src, omega);
    q = transport_series(p, tmat, 2.0 * s.transport, std::move(q));
    Vec rhs = 0.5 * (q - p);
    rhs.array() -= detail::compensated_sum(rhs) / rhs.size();
    phi = neumann_solve(*ops, rhs);
    Vec omega_int(ops->interior_nodes());
    for (int k = 0; k < ops->interior_nodes(); ++k)
      omega_int[k] = omega[ops->interior_node_list()[k]];
    const Vec psi = node_dirichlet_solve(*ops, omega_int, Vec::Zero(ops->nodes()));
    Vec unew = ops->grad() * phi + ops->curl_s() * psi;
    const double change = safe_ratio((unew - u).norm(), unew.norm());
    trace.sweep_changes.push_back(change);
    u = std::move(unew);
    converged = change <= opts.tol;
  }
  if (!converged)
    throw SolverError("solve_decomposed: no convergence after " + std::to_string(opts.max_sweeps) +
                          " sweeps (m too small for the linearization regime?)",
                      trace.sweep_changes.empty() ? 0.0 : trace.sweep_changes.back());

  LinearSolution sol;
  sol.u = ops->unpack(u);
  sol.r = mean_zero_project(ops->unpack_cells(q / s.q_of_r));
  sol.sweeps = sweep;
  sol.residuals = linear_residuals(prob, sol.r, sol.u);

  const NodeField wn = ops->unpack_nodes(omega);
  trace.omega = ScalarField(g, detail::nodes_to_cells(wn.values(), g.nx(), g.ny()));
  trace.P_flux = mean_zero_project(ops->unpack_cells(p));
  trace.potential = mean_zero_project(ops->unpack_cells(phi));
  const ScalarField defect = trace.P_flux - (sol.r * s.q_of_r - 2.0 * divergence(sol.u));
  trace.consistency = safe_ratio(lp_norm(defect, 2.0), lp_norm(trace.P_flux, 2.0));
  sol.flux_trace = std::move(trace);
  return sol;
}

// ---------------------------------------------------------------------------
// Energy identity
// ---------------------------------------------------------------------------
double EnergyBalance::scale() const {
  return std::abs(dissipation) + std::abs(friction) + std::abs(work) + std::abs(transport);
}

EnergyBalance energy_balance(const LinearizedProblem& prob, const LinearSolution& sol) {
  const GridSpec& g = sol.u.grid();
  const auto ops = StaggeredOps::get(g);
  const Scaling s(prob.params);
  const Vec u = ops->pack(sol.u), r = ops->pack(sol.r);
  const double a = ops->weight();
  EnergyBalance e;
  e.dissipation = s.m * a *
                  (2.0 * (ops->dxx() * u).squaredNorm() + 2.0 * (ops->dyy() * u).squaredNorm() +
                   (ops->shear() * u).squaredNorm());
  const WallData ut = assembly::wall_tangential(sol.u);
  e.friction = prob.params.f_friction * wall_dot(g, ut, ut);
  e.work = a * ops->pack(prob.rhs_G).dot(u) + wall_dot(g, prob.rhs_h, ut);
  e.transport = -s.q_of_r * a * r.dot(assembly::transport_matrix(*ops, prob.transport_velocity) * r);
  return e;
}

} // namespace heavyflow
