#include "heavyflow/diagnostics.hpp"

#include "heavyflow/forces.hpp"
#include "heavyflow/operators.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

namespace heavyflow {

double xi(const IterationState& s, const ModelParams& params) {
  return std::pow(params.m, params.gamma - 2.0) * sobolev_norm(s.r, 1, params.p_exp) +
         sobolev_norm(s.u, 2, params.p_exp);
}

ContractionProbe probe_contraction(const IterationState& state, const ModelParams& params) {
  // Tight tolerances so the recorded differences reach well below the first one.
  LoopOptions po;
  po.tol_inner = 1e-13;
  po.tol_density = 1e-12;
  po.max_inner = 40;
  po.max_density = 40;
  ContractionProbe probe;
  LinearWorkspace ws;
  probe.inner = inner_banach(state.u, state.r, params, {}, po, &ws).report;
  probe.density = density_loop(state.u, params, {}, po, &ws).report;
  // Later ratios reach the rounding floor sooner at large m, so a mean over
  // them would mix different numbers of terms across a sweep.
  probe.inner_ratio = probe.inner.leading_ratio();
  probe.density_ratio = probe.density.leading_ratio();
  return probe;
}

// ---------------------------------------------------------------------------
// Fits
// ---------------------------------------------------------------------------
std::string Fit::verdict() const {
  if (points < 3 || !std::isfinite(slope))
    return "void";
  if (inconclusive())
    return "inconclusive";
  if (!std::isfinite(expected))
    return "measured";
  return within() ? "pass" : "fail";
}

Fit loglog_fit(const std::vector<double>& x, const std::vector<double>& y, const std::string& quantity,
               double expected, double tolerance) {
  Fit f;
  f.quantity = quantity;
  f.expected = expected;
  f.tolerance = tolerance;
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < std::min(x.size(), y.size()); ++i)
    if (x[i] > 0.0 && y[i] > 0.0 && std::isfinite(x[i]) && std::isfinite(y[i])) {
      lx.push_back(std::log10(x[i]));
      ly.push_back(std::log10(y[i]));
    }
  const int n = static_cast<int>(lx.size());
  f.points = n;
  if (n < 2)
    return f;
  double mx = 0.0, my = 0.0;
  for (int i = 0; i < n; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (int i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  if (sxx == 0.0)
    return f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  const double sse = std::max(syy - f.slope * sxy, 0.0);
  f.r2 = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  if (n > 2) {
    const boost::math::students_t t(n - 2);
    const double q = boost::math::quantile(boost::math::complement(t, 0.025));
    f.half_width = q * std::sqrt(sse / (n - 2) / sxx);
  }
  return f;
}

// ---------------------------------------------------------------------------
// Study runner
// ---------------------------------------------------------------------------
int worker_count(int requested) {
  if (requested > 0)
    return requested;
  if (const char* env = std::getenv("HEAVYFLOW_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0)
      return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

bool StudyReport::all_converged() const {
  return !rows.empty() &&
         std::all_of(rows.begin(), rows.end(), [](const StudyRow& r) { return r.converged; });
}

const Fit* StudyReport::fit(const std::string& quantity) const {
  for (const auto& f : fits)
    if (f.quantity == quantity)
      return &f;
  return nullptr;
}

VectorField study_force(const StudyOptions& opts) {
  if (opts.force) {
    require_same_grid(opts.grid, opts.force->grid(), "study force");
    return *opts.force;
  }
  return make_force(opts.force_preset, opts.grid, opts.amplitude, opts.p_exp);
}

AdmissibleBounds calibrate_bounds(const IterationState& s, const ModelParams& params, double alpha) {
  const auto& c = s.certificates;
  AdmissibleBounds b;
  b.alpha = alpha;
  b.C_f = 2.0 * std::max({c.density, c.velocity, xi(s, params), std::sqrt(c.divergence / 2.0)});
  b.E = 2.0 * c.energy;
  return b;
}

namespace {

ModelParams row_params(const StudyOptions& opts, const VectorField& force, double m) {
  ModelParams p;
  p.m = m;
  p.gamma = opts.gamma;
  p.f_friction = opts.friction;
  p.p_exp = opts.p_exp;
  p.force = force;
  return p;
}

StudyRow run_row(const StudyOptions& opts, const ModelParams& p) {
  StudyRow row;
  row.m = p.m;
  row.gamma = p.gamma;
  row.fingerprint = p.fingerprint();
  row.grid_hash = p.force.grid().hash();
  LoopOptions lo = opts.loop;
  lo.strict = false;
  lo.on_outer_iterate = nullptr;
  LoopResult res = outer_loop(p, opts.calibrate ? AdmissibleBounds{} : opts.bounds, lo);
  row.converged = res.report.converged;
  row.outer_iterates = res.report.iterates;
  row.warnings = res.report.warnings;
  const IterationState& s = res.state;
  row.xi = xi(s, p);
  row.grad_u_l2 = s.certificates.energy;
  row.divu_p = lp_norm(divergence(s.u), p.p_exp);
  row.scaled_divu = s.certificates.divergence;
  const auto nr = nonlinear_residual(s, p);
  row.residual_momentum = nr.relative_momentum();
  row.residual_mass = nr.relative_mass();
  row.mass_integral = s.certificates.mass;
  row.r_l1 = lp_norm(s.r, 1.0);
  row.u_h1 = sobolev_norm(s.u, 1, 2.0);
  row.force_65 = lp_norm(p.force, 1.2);
  row.density_cert = s.certificates.density;
  row.velocity_cert = s.certificates.velocity;
  if (opts.probes && row.converged) {
    const ContractionProbe probe = probe_contraction(s, p);
    row.inner_ratio = probe.inner_ratio;
    row.density_ratio = probe.density_ratio;
    row.density_ratio_sq = probe.density_ratio * probe.density_ratio;
  }
  row.state = res.state;
  return row;
}

} // namespace

StudyReport run_study(const StudyOptions& opts) {
  if (opts.masses.empty())
    throw std::invalid_argument("study: empty mass list");
  const VectorField force = study_force(opts);
  std::vector<ModelParams> params;
  for (double m : opts.masses) {
    params.push_back(row_params(opts, force, m));
    params.back().validate();
  }

  const int n = static_cast<int>(params.size());
  std::vector<StudyRow> rows(n);
  std::atomic<int> next{0};
  auto work = [&] {
    for (int i; (i = next++) < n;) {
      try {
        rows[i] = run_row(opts, params[i]);
      } catch (const std::exception& e) {
        rows[i] = StudyRow{};
        rows[i].m = params[i].m;
        rows[i].gamma = params[i].gamma;
        rows[i].fingerprint = params[i].fingerprint();
        rows[i].grid_hash = opts.grid.hash();
        rows[i].warnings.push_back(std::string("run failed: ") + e.what());
      }
    }
  };
  const int workers = std::min(worker_count(opts.threads), n);
  std::vector<std::thread> pool;
  for (int t = 1; t < workers; ++t)
    pool.emplace_back(work);
  work();
  for (auto& t : pool)
    t.join();

  StudyReport rep;
  rep.rows = std::move(rows);

  // Calibration on the smallest mass, then re-check every row.
  const auto smallest = std::min_element(rep.rows.begin(), rep.rows.end(),
                                         [](const StudyRow& a, const StudyRow& b) { return a.m < b.m; });
  if (opts.calibrate) {
    if (smallest->converged) {
      rep.bounds = calibrate_bounds(smallest->state, params[smallest - rep.rows.begin()], opts.bounds.alpha);
      rep.notes.push_back("bounds calibrated on m = " + std::to_string(smallest->m));
    } else {
      rep.bounds = opts.bounds;
      rep.notes.push_back("calibration skipped: smallest-m run did not converge");
    }
  } else {
    rep.bounds = opts.bounds;
  }
  if (smallest->converged && smallest->force_65 > 0.0)
    rep.energy_constant = smallest->u_h1 / smallest->force_65;
  for (int i = 0; i < n; ++i) {
    StudyRow& row = rep.rows[i];
    if (!row.converged)
      continue;
    const auto adm = check_admissible(row.state, rep.bounds, params[i]);
    if (!adm.all_pass())
      row.warnings.push_back("outside calibrated admissible set: " + adm.failures());
    const GateReport gate = smallness_gate(rep.bounds, params[i]);
    if (!gate.pass && opts.loop.strict)
      throw AdmissibilityError("study: smallness gate fails at m = " + std::to_string(row.m));
  }
  if (opts.reference) {
    // The limit keeps viscosity and drops friction: f / m -> 0.
    const VectorField uinc = incompressible_reference_solve(force, 0.0, opts.grid);
    for (auto& row : rep.rows)
      if (row.converged)
        row.distance_incompressible = sobolev_norm(row.state.u - uinc, 1, 2.0);
  }
  if (!rep.all_converged())
    rep.notes.push_back("not every run converged: fits are void");
  return rep;
}

namespace {

std::vector<double> column(const StudyReport& rep, double StudyRow::*field) {
  std::vector<double> v;
  for (const auto& r : rep.rows)
    v.push_back(r.*field);
  return v;
}

void add_fit(StudyReport& rep, double StudyRow::*field, const std::string& name, double expected,
             double tol) {
  Fit f = loglog_fit(column(rep, &StudyRow::m), column(rep, field), name, expected, tol);
  if (!rep.all_converged()) {
    f.slope = NAN;
    f.half_width = NAN;
  }
  rep.fits.push_back(f);
}

} // namespace

void add_standard_fits(StudyReport& rep, const StudyOptions& opts) {
  add_fit(rep, &StudyRow::divu_p, "divu_p", -(opts.gamma - 1.0), opts.gamma == 2.0 ? 0.15 : 0.2);
  if (opts.probes) {
    add_fit(rep, &StudyRow::inner_ratio, "inner_ratio", -1.0, 0.15);
    add_fit(rep, &StudyRow::density_ratio_sq, "density_ratio_sq", -1.0, 0.2);
  }
  if (opts.reference) {
    add_fit(rep, &StudyRow::distance_incompressible, "distance_incompressible", NAN, NAN);
    if (opts.gamma != 2.0)
      rep.notes.push_back("gamma != 2: limit structure differs, no decrease asserted");
  }
}

StudyReport divu_scaling_study(StudyOptions opts) {
  opts.probes = false;
  opts.reference = false;
  StudyReport rep = run_study(opts);
  add_standard_fits(rep, opts);
  return rep;
}

StudyReport contraction_scaling_study(StudyOptions opts) {
  opts.probes = true;
  opts.reference = false;
  StudyReport rep = run_study(opts);
  add_standard_fits(rep, opts);
  return rep;
}

StudyReport low_mach_consistency(StudyOptions opts) {
  opts.reference = true;
  opts.probes = false;
  StudyReport rep = run_study(opts);
  add_standard_fits(rep, opts);
  return rep;
}

std::vector<int> energy_bound_violations(const StudyReport& rep) {
  std::vector<int> bad;
  for (int i = 0; i < static_cast<int>(rep.rows.size()); ++i) {
    const auto& r = rep.rows[i];
    if (!r.converged || !(r.u_h1 <= 1.1 * rep.energy_constant * r.force_65))
      bad.push_back(i);
  }
  return bad;
}

std::vector<int> certificate_violations(const StudyReport& rep) {
  std::vector<int> bad;
  const double cdiv = 2.0 * rep.bounds.C_f * rep.bounds.C_f;
  for (int i = 0; i < static_cast<int>(rep.rows.size()); ++i) {
    const auto& r = rep.rows[i];
    if (!r.converged || !(std::abs(r.mass_integral) <= 1e-12 * std::max(r.r_l1, 1e-300)) ||
        !(r.scaled_divu <= cdiv))
      bad.push_back(i);
  }
  return bad;
}

bool low_mach_pass(const StudyReport& rep) {
  std::vector<const StudyRow*> rows;
  for (const auto& r : rep.rows)
    rows.push_back(&r);
  std::sort(rows.begin(), rows.end(), [](auto* a, auto* b) { return a->m < b->m; });
  if (rows.size() < 2)
    return false;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i]->converged || !std::isfinite(rows[i]->distance_incompressible))
      return false;
    if (i > 0 && !(rows[i]->distance_incompressible < rows[i - 1]->distance_incompressible))
      return false;
  }
  return rows.back()->distance_incompressible <= 0.1 * rows.front()->distance_incompressible;
}

// ---------------------------------------------------------------------------
// Incompressible reference
// ---------------------------------------------------------------------------
VectorField incompressible_reference_solve(const VectorField& force, double friction, const GridSpec& grid,
                                           const ReferenceOptions& opts) {
  require_same_grid(grid, force.grid(), "incompressible_reference_solve");
  ModelParams p;
  p.m = 1.0;
  p.gamma = 2.0;
  p.f_friction = friction;
  p.force = force;
  p.validate();
  LinearizedProblem prob = LinearizedProblem::zero(p);
  prob.rhs_G = force;
  LinearWorkspace ws;
  VectorField u(grid);
  double err = INFINITY;
  for (int k = 0; k < opts.max_iterates; ++k) {
    prob.convective_velocity = u;
    VectorField next = solve_monolithic(prob, &ws).u;
    err = sobolev_norm(next - u, 1, 2.0);
    u = std::move(next);
    if (err == 0.0 || err <= opts.tol * std::max(sobolev_norm(u, 1, 2.0), 1e-300))
      return project(u).solenoidal;
  }
  throw SolverError("incompressible_reference_solve: Picard iteration did not converge", err);
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------
std::vector<std::string> study_columns() {
  return {"m",           "gamma",        "converged",        "outer_iterates", "xi",
          "grad_u_l2",   "divu_p",       "scaled_divu",      "inner_ratio",    "density_ratio",
          "density_ratio_sq", "residual_momentum", "residual_mass", "mass_integral", "u_h1",
          "force_65",    "density_cert", "velocity_cert",    "distance_incompressible"};
}

double study_value(const StudyRow& r, const std::string& c) {
  static const std::map<std::string, double StudyRow::*> fields = {
      {"m", &StudyRow::m},
      {"gamma", &StudyRow::gamma},
      {"xi", &StudyRow::xi},
      {"grad_u_l2", &StudyRow::grad_u_l2},
      {"divu_p", &StudyRow::divu_p},
      {"scaled_divu", &StudyRow::scaled_divu},
      {"inner_ratio", &StudyRow::inner_ratio},
      {"density_ratio", &StudyRow::density_ratio},
      {"density_ratio_sq", &StudyRow::density_ratio_sq},
      {"residual_momentum", &StudyRow::residual_momentum},
      {"residual_mass", &StudyRow::residual_mass},
      {"mass_integral", &StudyRow::mass_integral},
      {"u_h1", &StudyRow::u_h1},
      {"force_65", &StudyRow::force_65},
      {"density_cert", &StudyRow::density_cert},
      {"velocity_cert", &StudyRow::velocity_cert},
      {"distance_incompressible", &StudyRow::distance_incompressible}};
  if (c == "converged")
    return r.converged ? 1.0 : 0.0;
  if (c == "outer_iterates")
    return r.outer_iterates;
  const auto it = fields.find(c);
  if (it == fields.end())
    throw std::invalid_argument("unknown study column '" + c + "'");
  return r.*(it->second);
}

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot open '" + path + "' for writing");
  return out;
}

} // namespace

void write_study_csv(const StudyReport& rep, const std::string& path, const std::string& fingerprint) {
  std::ofstream out = open_out(path);
  out << "# heavyflow study, config " << fingerprint << "\n";
  const auto cols = study_columns();
  for (const auto& c : cols)
    out << c << ",";
  out << "params_fingerprint,grid_hash\n";
  for (const auto& r : rep.rows) {
    for (const auto& c : cols)
      out << fmt17(study_value(r, c)) << ",";
    out << hex64(r.fingerprint) << "," << hex64(r.grid_hash) << "\n";
  }
  if (!out)
    throw std::runtime_error("write failed: " + path);
}

std::string fit_summary(const StudyReport& rep) {
  std::ostringstream os;
  for (const auto& f : rep.fits) {
    os << f.quantity << ": slope " << fmt17(f.slope) << " +- " << fmt17(f.half_width) << " (R^2 "
       << fmt17(f.r2) << ", n " << f.points << ")";
    if (std::isfinite(f.expected))
      os << " expected " << f.expected << " +- " << f.tolerance;
    os << " -> " << f.verdict() << "\n";
  }
  if (std::isfinite(rep.energy_constant))
    os << "energy constant C = " << fmt17(rep.energy_constant) << "\n";
  os << "bounds: C_f = " << fmt17(rep.bounds.C_f) << ", E = " << fmt17(rep.bounds.E)
     << ", alpha = " << rep.bounds.alpha << "\n";
  for (const auto& n : rep.notes)
    os << "note: " << n << "\n";
  return os.str();
}

void write_study_svg(const StudyReport& rep, const std::string& col, const std::string& path,
                     const std::string& fingerprint) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& r : rep.rows) {
    const double y = study_value(r, col);
    if (r.m > 0.0 && y > 0.0 && std::isfinite(y))
      pts.emplace_back(std::log10(r.m), std::log10(y));
  }
  const double W = 480, H = 360, L = 70, R = 20, T = 30, B = 50;
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (!pts.empty()) {
    x0 = x1 = pts[0].first;
    y0 = y1 = pts[0].second;
    for (auto [x, y] : pts) {
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
    if (x1 - x0 < 1e-12) { x0 -= 0.5; x1 += 0.5; }
    if (y1 - y0 < 1e-12) { y0 -= 0.5; y1 += 0.5; }
  }
  auto sx = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto sy = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

  std::ofstream out = open_out(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  out << "<!-- heavyflow study, config " << fingerprint << " -->\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">log10 " << col
      << " vs log10 m</text>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n";
  char buf[64];
  for (int k = 0; k <= 4; ++k) {
    const double x = x0 + (x1 - x0) * k / 4, y = y0 + (y1 - y0) * k / 4;
    std::snprintf(buf, sizeof buf, "%.2f", x);
    out << "<text x=\"" << sx(x) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\" font-size=\"11\">"
        << buf << "</text>\n";
    std::snprintf(buf, sizeof buf, "%.2f", y);
    out << "<text x=\"" << L - 6 << "\" y=\"" << sy(y) + 4 << "\" text-anchor=\"end\" font-size=\"11\">"
        << buf << "</text>\n";
  }
  if (const Fit* f = rep.fit(col); f && std::isfinite(f->slope)) {
    out << "<line x1=\"" << sx(x0) << "\" y1=\"" << sy(f->intercept + f->slope * x0) << "\" x2=\"" << sx(x1)
        << "\" y2=\"" << sy(f->intercept + f->slope * x1) << "\" stroke=\"#c33\" stroke-dasharray=\"4 3\"/>\n";
    std::snprintf(buf, sizeof buf, "slope %.3f", f->slope);
    out << "<text x=\"" << W - R << "\" y=\"" << T + 12 << "\" text-anchor=\"end\" font-size=\"12\" fill=\"#c33\">"
        << buf << "</text>\n";
  }
  for (auto [x, y] : pts)
    out << "<circle cx=\"" << sx(x) << "\" cy=\"" << sy(y) << "\" r=\"4\" fill=\"#235\"/>\n";
  out << "</svg>\n";
}

} // namespace heavyflow
