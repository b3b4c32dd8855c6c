#include "heavyflow/selftest.hpp"

#include "heavyflow/inverse_div.hpp"
#include "heavyflow/iteration.hpp"
#include "heavyflow/operators.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <sstream>

namespace heavyflow {

namespace {

constexpr double pi = std::numbers::pi;

std::string sci(double v) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << v;
  return os.str();
}

/// Sine-series stream function on all nodes; zero on the walls.
Vec random_stream(const StaggeredOps& ops, std::mt19937_64& rng, int modes) {
  const GridSpec& g = ops.grid();
  std::normal_distribution<double> n01;
  std::vector<double> a(modes * modes);
  for (auto& c : a)
    c = n01(rng);
  const NodeField psi = NodeField::sample(g, [&](double x, double y) {
    double s = 0.0;
    for (int k = 1; k <= modes; ++k)
      for (int l = 1; l <= modes; ++l)
        s += a[(k - 1) * modes + l - 1] / (k * k + l * l) * std::sin(k * pi * x / g.lx()) *
             std::sin(l * pi * y / g.ly());
    return s;
  });
  return ops.pack(psi);
}

ScalarField cosine_series(const GridSpec& g, std::mt19937_64& rng, int modes) {
  std::normal_distribution<double> n01;
  std::vector<double> b((modes + 1) * (modes + 1));
  for (auto& c : b)
    c = n01(rng);
  return mean_zero_project(ScalarField::sample(g, [&](double x, double y) {
    double s = 0.0;
    for (int k = 0; k <= modes; ++k)
      for (int l = 0; l <= modes; ++l)
        if (k + l > 0)
          s += b[k * (modes + 1) + l] / (k * k + l * l) * std::cos(k * pi * x / g.lx()) *
               std::cos(l * pi * y / g.ly());
    return s;
  }));
}

double h1(const VectorField& v) { return sobolev_norm(v, 1, 2.0); }

} // namespace

Fault fault_from_string(const std::string& name) {
  if (name.empty() || name == "none")
    return Fault::None;
  if (name == "gradient-sign")
    return Fault::GradientSign;
  throw std::invalid_argument("unknown fault '" + name + "' (none, gradient-sign)");
}

VectorField random_smooth_velocity(const GridSpec& g, std::mt19937_64& rng, int modes, double scale) {
  const auto ops = StaggeredOps::get(g);
  const Vec psi = random_stream(*ops, rng, modes);
  const Vec phi = ops->pack(cosine_series(g, rng, modes));
  return scale * ops->unpack(ops->curl_s() * psi + ops->grad() * phi);
}

ScalarField random_cell_field(const GridSpec& g, std::mt19937_64& rng, bool smooth) {
  if (smooth)
    return cosine_series(g, rng, 4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  return mean_zero_project(ScalarField::sample(g, [&](double, double) { return u(rng); }));
}

// ---------------------------------------------------------------------------
// Operator identities
// ---------------------------------------------------------------------------
PropertyResult check_summation_by_parts(const GridSpec& g, int pairs, std::uint64_t seed, Fault fault) {
  const auto ops = StaggeredOps::get(g);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  for (int k = 0; k < pairs; ++k) {
    Vec vv(ops->face_dofs());
    for (auto& x : vv)
      x = u(rng);
    const VectorField v = ops->unpack(vv);
    const ScalarField s = ScalarField::sample(g, [&](double, double) { return u(rng); });
    VectorField gs = gradient(s);
    if (fault == Fault::GradientSign)
      gs *= -1.0;
    const ScalarField dv = divergence(v);
    const double lhs = dot(dv, s) + dot(v, gs);
    const double scale = lp_norm(dv, 2.0) * lp_norm(s, 2.0) + lp_norm(v, 2.0) * lp_norm(gs, 2.0);
    worst = std::max(worst, std::abs(lhs) / scale);
  }
  PropertyResult r{"summation by parts <div v, s> + <v, grad s> = 0", worst, 1e-12, worst <= 1e-12, ""};
  r.detail = std::to_string(pairs) + " random wall-compatible pairs";
  return r;
}

namespace {

PropertyResult order_check(const std::string& name, const std::vector<int>& sizes, double min_order,
                           const std::function<std::pair<double, double>(const GridSpec&)>& defect) {
  std::vector<double> err;
  bool rounding = true;
  for (int n : sizes) {
    const auto [e, scale] = defect(GridSpec(n, n));
    err.push_back(e / scale);
    rounding = rounding && e <= 1e-12 * scale;
  }
  double worst_order = INFINITY;
  for (std::size_t k = 1; k < err.size(); ++k)
    if (err[k - 1] > 0.0 && err[k] > 0.0)
      worst_order = std::min(worst_order, std::log2(err[k - 1] / err[k]) /
                                              std::log2(double(sizes[k]) / sizes[k - 1]));
  PropertyResult r;
  r.name = name;
  r.value = err.back();
  r.threshold = min_order;
  r.pass = rounding || worst_order >= min_order;
  std::ostringstream os;
  os << "relative defects";
  for (double e : err)
    os << " " << sci(e);
  if (rounding)
    os << " (exact to rounding)";
  else
    os << ", observed order " << worst_order;
  r.detail = os.str();
  return r;
}

} // namespace

PropertyResult check_curl_grad(const std::vector<int>& sizes, double min_order) {
  return order_check("curl(grad s) = 0", sizes, min_order, [](const GridSpec& g) {
    const ScalarField s = ScalarField::sample(
        g, [](double x, double y) { return std::cos(pi * x) * std::sin(2.0 * pi * y) + x * x * y; });
    const VectorField gs = gradient(s);
    return std::pair{lp_norm(node_curl(gs), 2.0), lp_norm(gs, 2.0)};
  });
}

PropertyResult check_trace_div(const std::vector<int>& sizes, double min_order) {
  return order_check("trace(D(v)) = div v", sizes, min_order, [](const GridSpec& g) {
    const VectorField v = VectorField::sample(
        g, [](double x, double y) { return std::sin(pi * x) * std::cos(pi * y) * (1.0 + y); },
        [](double x, double y) { return std::sin(pi * y) * std::exp(x); });
    const auto d = sym_grad(v);
    return std::pair{lp_norm(d.xx + d.yy - divergence(v), 2.0), lp_norm(divergence(v), 2.0)};
  });
}

// ---------------------------------------------------------------------------
// Projection and inverse divergence
// ---------------------------------------------------------------------------
std::vector<PropertyResult> check_helmholtz(const GridSpec& g, int fields, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double recon = 0.0, divfree = 0.0, orth = 0.0;
  for (int k = 0; k < fields; ++k) {
    const VectorField gv = VectorField::sample(
        g, [&](double, double) { return u(rng); }, [&](double, double) { return u(rng); });
    const HelmholtzSplit h = project(gv);
    recon = std::max(recon, lp_norm(gv - h.solenoidal - h.potential_grad, 2.0) / lp_norm(gv, 2.0));
    divfree = std::max(divfree, lp_norm(divergence(h.solenoidal), 2.0) / lp_norm(divergence(gv), 2.0));
    const double d = std::abs(dot(h.solenoidal, h.potential_grad)) /
                     (std::sqrt(dot(h.solenoidal, h.solenoidal) * dot(h.potential_grad, h.potential_grad)));
    orth = std::max(orth, d);
  }
  const std::string detail = std::to_string(fields) + " random fields";
  return {{"projection reconstruction g = w + grad phi", recon, 1e-10, recon <= 1e-10, detail},
          {"projection divergence-free part", divfree, 1e-10, divfree <= 1e-10, detail},
          {"projection orthogonality", orth, 1e-10, orth <= 1e-10, detail}};
}

PropertyResult check_bogovskii(const GridSpec& g, int fields, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (int k = 0; k < fields; ++k) {
    const ScalarField r = random_cell_field(g, rng, k % 2 == 0);
    const VectorField b = bogovskii(r);
    worst = std::max(worst, lp_norm(divergence(b) - r, 2.0) / lp_norm(r, 2.0));
  }
  return {"inverse divergence div B[r] = r", worst, 1e-10, worst <= 1e-10,
          std::to_string(fields) + " random mean-zero fields"};
}

// ---------------------------------------------------------------------------
// Linear solver
// ---------------------------------------------------------------------------
LinearizedProblem random_linear_problem(const GridSpec& g, double m, double gamma, std::mt19937_64& rng) {
  ModelParams p;
  p.m = m;
  p.gamma = gamma;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  p.f_friction = 2.0 * unit(rng);
  p.force = VectorField(g);
  LinearizedProblem prob = LinearizedProblem::zero(p);

  VectorField uf = random_smooth_velocity(g, rng);
  prob.transport_velocity = uf;
  uf *= 0.05 / transport_smallness(prob);
  prob.transport_velocity = uf;
  // ubar inside the admissible velocity class: velocity certificate 1
  VectorField ubar = random_smooth_velocity(g, rng);
  ubar *= 1.0 / measure_certificates(ScalarField(g), ubar, p).velocity;
  prob.convective_velocity = ubar;
  ScalarField rt = random_cell_field(g, rng, true);
  rt *= 0.1 * m / lp_norm(rt, INFINITY);
  prob.density_offset = rt;
  prob.rhs_G = random_smooth_velocity(g, rng) + VectorField::sample(
      g, [](double x, double y) { return std::sin(pi * y) * x; }, [](double x, double) { return x; });
  std::normal_distribution<double> n01;
  const double a = n01(rng), b = n01(rng);
  for (int i = 0; i <= g.nx(); ++i) {
    prob.rhs_h.bottom[i] = a * std::sin(pi * g.xn(i));
    prob.rhs_h.top[i] = b * std::cos(pi * g.xn(i));
  }
  for (int j = 0; j <= g.ny(); ++j) {
    prob.rhs_h.left[j] = b * g.yn(j);
    prob.rhs_h.right[j] = a * g.yn(j) * g.yn(j);
  }
  return prob;
}

std::vector<PropertyResult> check_manufactured_linear(const GridSpec& g, double m, double gamma, int problems,
                                                      std::uint64_t seed) {
  const auto ops = StaggeredOps::get(g);
  std::mt19937_64 rng(seed);
  double eu = 0.0, er = 0.0;
  for (int k = 0; k < problems; ++k) {
    LinearizedProblem prob = random_linear_problem(g, m, gamma, rng);
    // r* arbitrary mean-zero; u* = curl psi + grad phi with the potential part
    // fixed by continuity: m div u* = -div(r* uf).
    const ScalarField rs = random_cell_field(g, rng, true);
    const Vec rv = ops->pack(rs);
    const Vec trs = assembly::transport_matrix(*ops, prob.transport_velocity) * rv;
    const Vec phi = neumann_solve(*ops, Vec(-trs / m));
    const Vec uv = ops->curl_s() * random_stream(*ops, rng, 4) + ops->grad() * phi;
    const VectorField us = ops->unpack(uv);

    const Vec rho = (ops->pack(prob.density_offset).array() + m).matrix();
    const Vec g_data = assembly::viscous_matrix(*ops, Vec::Constant(ops->cells(), m), prob.params.f_friction) * uv +
                       assembly::convection_matrix(*ops, rho, prob.convective_velocity) * uv +
                       gamma * std::pow(m, gamma - 1.0) * (ops->grad() * rv) -
                       assembly::wall_load(*ops, prob.rhs_h);
    prob.rhs_G = ops->unpack(g_data);

    const LinearSolution sol = solve_monolithic(prob);
    eu = std::max(eu, h1(sol.u - us) / h1(us));
    er = std::max(er, lp_norm(sol.r - rs, 2.0) / lp_norm(rs, 2.0));
  }
  const std::string detail = std::to_string(problems) + " manufactured problems, m = " + sci(m);
  return {{"manufactured solution: velocity in W^{1,2}", eu, 1e-8, eu <= 1e-8, detail},
          {"manufactured solution: density in L^2", er, 1e-8, er <= 1e-8, detail}};
}

std::vector<PropertyResult> check_solver_agreement(const GridSpec& g, double m, double gamma, int problems,
                                                   std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double agree = 0.0, flux = 0.0;
  LinearWorkspace ws;
  for (int k = 0; k < problems; ++k) {
    const LinearizedProblem prob = random_linear_problem(g, m, gamma, rng);
    const LinearSolution a = solve_monolithic(prob, &ws);
    const LinearSolution b = solve_decomposed(prob);
    agree = std::max({agree, h1(a.u - b.u) / h1(a.u), lp_norm(a.r - b.r, 2.0) / lp_norm(a.r, 2.0)});
    flux = std::max(flux, b.flux_trace ? b.flux_trace->consistency : INFINITY);
  }
  const std::string detail = std::to_string(problems) + " random problems, m = " + sci(m);
  return {{"monolithic vs decomposed solution", agree, 1e-6, agree <= 1e-6, detail},
          {"effective flux P = gamma m^(gamma-2) r - 2 div u", flux, 1e-6, flux <= 1e-6, detail}};
}

std::vector<PropertyResult> verify_suite(std::uint64_t seed, Fault fault) {
  const GridSpec g(32, 32);
  std::vector<PropertyResult> out;
  out.push_back(check_summation_by_parts(g, 100, seed, fault));
  out.push_back(check_curl_grad({16, 32, 64}));
  out.push_back(check_trace_div({16, 32, 64}));
  for (auto& r : check_helmholtz(g, 20, seed + 1))
    out.push_back(std::move(r));
  out.push_back(check_bogovskii(g, 20, seed + 2));
  for (auto& r : check_manufactured_linear(g, 1e3, 2.0, 3, seed + 3))
    out.push_back(std::move(r));
  for (auto& r : check_solver_agreement(g, 1e3, 2.0, 3, seed + 4))
    out.push_back(std::move(r));
  return out;
}

} // namespace heavyflow
