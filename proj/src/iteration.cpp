#include "heavyflow/iteration.hpp"

#include "heavyflow/operators.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace heavyflow {

namespace {

constexpr double kTiny = 1e-300;

double l2(const Vec& v, const StaggeredOps& ops) { return v.norm() * std::sqrt(ops.weight()); }

bool below(double err, double tol, double scale) {
  return err == 0.0 || err <= tol * std::max(scale, kTiny);
}

void push_error(LoopReport& rep, double err) {
  if (!rep.errors_per_iterate.empty()) {
    const double prev = rep.errors_per_iterate.back();
    rep.contraction_ratios.push_back(prev > 0.0 ? err / prev : 0.0);
  }
  rep.errors_per_iterate.push_back(err);
}

void handle_admissibility(const IterationState& state, const AdmissibleBounds& bounds,
                          const ModelParams& params, const LoopOptions& opts, LoopReport& rep,
                          const char* where) {
  const auto adm = check_admissible(state, bounds, params);
  if (adm.all_pass())
    return;
  const std::string msg = std::string(where) + ": iterate left the admissible set (" + adm.failures() + ")";
  if (opts.strict)
    throw AdmissibilityError(msg);
  if (std::find(rep.warnings.begin(), rep.warnings.end(), msg) == rep.warnings.end())
    rep.warnings.push_back(msg);
}

void merge_warnings(LoopReport& into, const LoopReport& from) {
  for (const auto& w : from.warnings)
    if (std::find(into.warnings.begin(), into.warnings.end(), w) == into.warnings.end())
      into.warnings.push_back(w);
}

} // namespace

Certificates measure_certificates(const ScalarField& r, const VectorField& u, const ModelParams& params) {
  const double p = params.p_exp;
  Certificates c;
  c.density = std::pow(params.m, params.gamma - 2.0) * (lp_norm(r, INFINITY) + derivative_norm(r, 1, p));
  c.energy = staggered_gradient_l2(u);
  c.velocity = derivative_norm(u, 1, INFINITY) + lp_norm(u, INFINITY) + derivative_norm(u, 2, p);
  c.divergence = std::pow(params.m, params.gamma - 1.0) * lp_norm(divergence(u), p);
  c.mass = integral(r);
  return c;
}

IterationState IterationState::make(ScalarField r, VectorField u, const ModelParams& params) {
  IterationState s{std::move(r), std::move(u), {}};
  s.certificates = measure_certificates(s.r, s.u, params);
  return s;
}

bool AdmissibilityReport::all_pass() const {
  return std::all_of(constraints.begin(), constraints.end(), [](const Constraint& c) { return c.pass; });
}

std::string AdmissibilityReport::failures() const {
  std::ostringstream os;
  bool first = true;
  for (const auto& c : constraints) {
    if (c.pass)
      continue;
    os << (first ? "" : ", ") << c.name << " = " << c.value << " > " << c.bound;
    first = false;
  }
  return os.str();
}

AdmissibilityReport check_admissible(const IterationState& state, const AdmissibleBounds& bounds,
                                     const ModelParams& params) {
  const auto& c = state.certificates;
  AdmissibilityReport rep;
  auto add = [&](const char* name, double value, double bound) {
    rep.constraints.push_back({name, value, bound, value <= bound});
  };
  add("density", c.density, bounds.C_f);
  add("energy", c.energy, bounds.E);
  add("velocity", c.velocity, bounds.C_f);
  add("divergence", c.divergence, 2.0 * bounds.C_f * bounds.C_f);
  add("mass", std::abs(c.mass), 1e-10 * std::max(lp_norm(state.r, 1.0), kTiny));
  add("positivity", 2.0 * lp_norm(state.r, INFINITY), params.m);
  return rep;
}

GateReport smallness_gate(const AdmissibleBounds& b, const ModelParams& params) {
  GateReport g;
  g.lhs = std::min(params.m, std::pow(params.m, (params.gamma - 1.0) / 4.0)) / (1.0 / b.alpha + 15.0);
  const double cf = b.C_f, e2 = b.E * b.E;
  g.rhs = std::max({cf, cf * cf, cf * e2, cf * cf * e2, b.C1, b.C2}) * b.geometric;
  g.pass = g.lhs > g.rhs;
  return g;
}

double LoopReport::mean_ratio(double floor) const {
  if (errors_per_iterate.empty())
    return NAN;
  const double first = errors_per_iterate.front();
  double logsum = 0.0;
  int n = 0;
  for (std::size_t k = 0; k < contraction_ratios.size(); ++k) {
    const double num = errors_per_iterate[k + 1];
    if (!(num >= floor * first) || !(contraction_ratios[k] > 0.0))
      continue;
    logsum += std::log(contraction_ratios[k]);
    ++n;
  }
  return n ? std::exp(logsum / n) : NAN;
}

double LoopReport::leading_ratio(double floor) const {
  if (errors_per_iterate.size() < 2 || !(errors_per_iterate[1] > floor * errors_per_iterate[0]))
    return NAN;
  return contraction_ratios[0];
}

// ---------------------------------------------------------------------------
// Inner loop
// ---------------------------------------------------------------------------
LoopResult inner_banach(const VectorField& ubar, const ScalarField& r_tilde, const ModelParams& params,
                        const AdmissibleBounds& bounds, const LoopOptions& opts,
                        LinearWorkspace* workspace, const VectorField* u_start) {
  const GridSpec& g = params.force.grid();
  require_same_grid(g, ubar.grid(), "inner_banach");
  require_same_grid(g, r_tilde.grid(), "inner_banach");
  const auto ops = StaggeredOps::get(g);

  LinearizedProblem prob = LinearizedProblem::zero(params);
  prob.convective_velocity = ubar;
  prob.density_offset = r_tilde;

  // Parts of the data that do not depend on u_tilde.
  const Vec rt = ops->pack(r_tilde);
  const Vec rho = (rt.array() + params.m).matrix();
  const Vec fixed = assembly::density_weighted_force(*ops, rho, params.force) -
                    ops->grad() * ops->pack(taylor_remainder(r_tilde, params).value);
  const SpMat v_r = assembly::viscous_matrix(*ops, rt, 0.0);
  const WallData kappa = assembly::wall_orientation(g);

  LinearWorkspace local;
  LinearWorkspace& ws = workspace ? *workspace : local;
  const int solves0 = ws.solves();

  VectorField ut = u_start ? *u_start : VectorField(g);
  ScalarField r(g);
  LoopResult res{IterationState::make(r, ut, params), {}};
  LoopReport& rep = res.report;
  for (int k = 0; k < opts.max_inner; ++k) {
    const WallData s = assembly::wall_shear(ut, r_tilde);
    WallData h = s;
    h.bottom *= -kappa.bottom;
    h.top *= -kappa.top;
    h.left *= -kappa.left;
    h.right *= -kappa.right;
    const Vec uv = ops->pack(ut);
    prob.transport_velocity = ut;
    prob.rhs_G = ops->unpack(fixed - v_r * uv - assembly::wall_stress_load(*ops, s));
    prob.rhs_h = h;

    LinearSolution sol = solve_monolithic(prob, &ws);
    const double err = staggered_gradient_l2(sol.u - ut);
    push_error(rep, err);
    rep.iterates = k + 1;
    ut = std::move(sol.u);
    r = std::move(sol.r);
    res.state = IterationState::make(r, ut, params);
    handle_admissibility(res.state, bounds, params, opts, rep, "inner loop");
    if (!ut.all_finite())
      throw SolverError("inner loop produced non-finite values", INFINITY);
    if (below(err, opts.tol_inner, res.state.certificates.energy)) {
      rep.converged = true;
      break;
    }
  }
  rep.final_residual = rep.errors_per_iterate.empty() ? 0.0 : rep.errors_per_iterate.back();
  rep.linear_solves = ws.solves() - solves0;
  return res;
}

// ---------------------------------------------------------------------------
// Density loop
// ---------------------------------------------------------------------------
LoopResult density_loop(const VectorField& ubar, const ModelParams& params, const AdmissibleBounds& bounds,
                        const LoopOptions& opts, LinearWorkspace* workspace, const ScalarField* r_start,
                        const VectorField* u_start) {
  const GridSpec& g = params.force.grid();
  LinearWorkspace local;
  LinearWorkspace& ws = workspace ? *workspace : local;

  ScalarField r = r_start ? *r_start : ScalarField(g);
  VectorField u = u_start ? *u_start : VectorField(g);
  LoopResult res{IterationState::make(r, u, params), {}};
  LoopReport& rep = res.report;
  for (int n = 0; n < opts.max_density; ++n) {
    LoopResult inner = inner_banach(ubar, r, params, bounds, opts, &ws, &u);
    rep.nested_iterates += inner.report.iterates;
    rep.linear_solves += inner.report.linear_solves;
    merge_warnings(rep, inner.report);
    if (!inner.report.converged)
      rep.warnings.push_back("density loop: inner loop hit max_inner = " + std::to_string(opts.max_inner));

    const double err = lp_norm(inner.state.r - r, 2.0);
    push_error(rep, err);
    rep.iterates = n + 1;
    r = inner.state.r;
    u = inner.state.u;
    res.state = std::move(inner.state);
    const double scale = std::max(lp_norm(r, 2.0), std::pow(params.m, 2.0 - params.gamma) *
                                                       sobolev_norm(u, 1, 2.0) / params.gamma);
    if (below(err, opts.tol_density, scale)) {
      rep.converged = true;
      break;
    }
  }
  rep.final_residual = rep.errors_per_iterate.empty() ? 0.0 : rep.errors_per_iterate.back();
  return res;
}

// ---------------------------------------------------------------------------
// Outer loop
// ---------------------------------------------------------------------------
LoopResult outer_loop(const ModelParams& params, const AdmissibleBounds& bounds, const LoopOptions& opts,
                      const VectorField* ubar_start) {
  params.validate();
  const GridSpec& g = params.force.grid();
  if (!(opts.damping > 0.0 && opts.damping <= 1.0))
    throw std::invalid_argument("outer_loop: damping must lie in (0, 1]");

  LoopReport rep;
  // Without configured bounds there is nothing to gate on.
  const GateReport gate = smallness_gate(bounds, params);
  if (bounds.bounded() && !gate.pass) {
    std::ostringstream os;
    os << "smallness gate fails: " << gate.lhs << " <= " << gate.rhs;
    if (opts.strict)
      throw AdmissibilityError(os.str());
    rep.warnings.push_back(os.str());
  }

  LinearWorkspace ws;
  VectorField ubar = ubar_start ? *ubar_start : VectorField(g);
  if (!ubar.is_wall_compatible())
    throw AdmissibilityError("outer_loop: starting velocity must satisfy u . n = 0");
  ScalarField r(g);
  VectorField u = ubar;
  double theta = opts.damping;
  LoopResult res{IterationState::make(r, u, params), {}};
  for (int k = 0; k < opts.max_outer; ++k) {
    LoopResult dens = density_loop(ubar, params, bounds, opts, &ws, &r, &u);
    rep.nested_iterates += dens.report.iterates;
    rep.linear_solves += dens.report.linear_solves;
    merge_warnings(rep, dens.report);
    if (!dens.report.converged)
      rep.warnings.push_back("outer loop: density loop hit max_density = " + std::to_string(opts.max_density));

    const VectorField step = dens.state.u - ubar;
    const double err = sobolev_norm(step, 1, 2.0);
    push_error(rep, err);
    rep.iterates = k + 1;
    r = dens.state.r;
    u = dens.state.u;
    res.state = std::move(dens.state);
    handle_admissibility(res.state, bounds, params, opts, rep, "outer loop");
    if (opts.on_outer_iterate)
      opts.on_outer_iterate(k + 1, res.state, rep);
    if (below(err, opts.tol_outer, sobolev_norm(u, 1, 2.0))) {
      rep.converged = true;
      break;
    }
    if (!rep.contraction_ratios.empty() && rep.contraction_ratios.back() > 0.95 && theta > 1.0 / 64.0) {
      theta *= 0.5;
      rep.warnings.push_back("outer loop: contraction ratio above 0.95, damping reduced to " +
                             std::to_string(theta));
    }
    ubar += theta * step;
  }
  rep.final_residual = nonlinear_residual(res.state, params).relative_momentum();
  res.report = std::move(rep);
  return res;
}

// ---------------------------------------------------------------------------
// Residual of the nonlinear system
// ---------------------------------------------------------------------------
double NonlinearResidual::relative_mass() const { return mass_scale > 0.0 ? mass / mass_scale : mass; }
double NonlinearResidual::relative_momentum() const {
  return momentum_scale > 0.0 ? momentum / momentum_scale : momentum;
}

NonlinearResidual nonlinear_residual(const IterationState& state, const ModelParams& params) {
  const GridSpec& g = params.force.grid();
  require_same_grid(g, state.r.grid(), "nonlinear_residual");
  require_same_grid(g, state.u.grid(), "nonlinear_residual");
  const auto ops = StaggeredOps::get(g);
  const Vec uv = ops->pack(state.u);
  const Vec rho = (ops->pack(state.r).array() + params.m).matrix();

  NonlinearResidual res;
  const Vec rho_f = ops->cell_to_face() * rho;
  res.mass = l2(ops->div() * Vec(rho_f.cwiseProduct(uv)), *ops);
  const Vec force = assembly::density_weighted_force(*ops, rho, params.force);
  const Vec mom = assembly::viscous_matrix(*ops, rho, params.f_friction) * uv +
                  assembly::convection_matrix(*ops, rho, state.u) * uv +
                  ops->grad() * ops->pack(pressure_excess(state.r, params)) - force;
  res.momentum = l2(mom, *ops);
  const auto n = NormalFlux::of(state.u);
  res.bc = std::max({n.bottom.abs().maxCoeff(), n.top.abs().maxCoeff(),
                     n.left.size() ? n.left.abs().maxCoeff() : 0.0,
                     n.right.size() ? n.right.abs().maxCoeff() : 0.0});
  res.mean = std::abs(integral(state.r)) / (params.m * g.area());
  res.mass_scale = params.m * staggered_gradient_l2(state.u);
  res.momentum_scale = l2(force, *ops);
  return res;
}

} // namespace heavyflow
