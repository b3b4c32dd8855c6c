// Acceptance harness: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "heavyflow/cli.hpp"
#include "heavyflow/diagnostics.hpp"
#include "heavyflow/forces.hpp"
#include "heavyflow/operators.hpp"
#include "heavyflow/selftest.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

using namespace heavyflow;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const std::string& title, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (secs > budget_s) {
    o.pass = false;
    o.detail += "; over time budget";
  }
  if (!o.pass)
    ++failures;
  std::printf("criterion %2d: %s  %s (%s; %.1f s)\n", id, o.pass ? "PASS" : "FAIL", title.c_str(), o.detail.c_str(),
              secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string describe(const PropertyResult& r) { return r.name + " " + fmt("%.2e", r.value); }

Outcome all_of(const std::vector<PropertyResult>& rs) {
  Outcome o{true, ""};
  for (const auto& r : rs) {
    o.pass = o.pass && r.pass;
    o.detail += (o.detail.empty() ? "" : "; ") + describe(r);
  }
  return o;
}

std::string fit_text(const Fit* f) {
  if (!f)
    return "no fit";
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s slope %.3f +/- %.3f (expected %.2f +/- %.2f, R2 %.4f, %s)", f->quantity.c_str(),
                f->slope, f->half_width, f->expected, f->tolerance, f->r2, f->verdict().c_str());
  return buf;
}

StudyOptions sweep(double gamma) {
  StudyOptions o;
  o.grid = GridSpec(64, 64);
  o.gamma = gamma;
  o.force_preset = "vortex";
  o.amplitude = 1.0;
  return o;
}

std::string csv_payload(const std::string& path) {
  std::ifstream in(path);
  std::string line, out;
  while (std::getline(in, line))
    if (line.rfind('#', 0) != 0)
      out += line + "\n";
  return out;
}

} // namespace

int main() {
  const std::uint64_t seed = 20240611;
  const GridSpec g64(64, 64);

  criterion(1, "operator identities", 30, [&] {
    return all_of({check_summation_by_parts(g64, 100, seed), check_curl_grad({32, 64, 128}),
                   check_trace_div({32, 64, 128})});
  });
  criterion(2, "Helmholtz projection round trip", 30, [&] { return all_of(check_helmholtz(g64, 100, seed + 1)); });
  criterion(3, "inverse divergence", 30, [&] { return all_of({check_bogovskii(g64, 100, seed + 2)}); });

  std::vector<PropertyResult> agreement;
  criterion(4, "linear solver: manufactured solution and solver agreement", 120, [&] {
    auto rs = check_manufactured_linear(g64, 1e3, 2.0, 5, seed + 3);
    agreement = check_solver_agreement(g64, 1e3, 2.0, 20, seed + 4);
    rs.push_back(agreement.at(0));
    return all_of(rs);
  });
  criterion(5, "effective flux identity on decomposed solves", 1, [&] {
    if (agreement.size() < 2)
      return Outcome{false, "criterion 4 did not run"};
    return all_of({agreement[1]});
  });

  criterion(6, "zero force gives the constant state in one iterate per level", 5, [&] {
    ModelParams p;
    p.m = 1e3;
    p.force = make_force("zero", g64, 0.0);
    const auto res = outer_loop(p, {}, {});
    const auto nr = nonlinear_residual(res.state, p);
    const double worst = std::max({nr.mass, nr.momentum, nr.bc, nr.mean});
    const bool exact = lp_norm(res.state.u, INFINITY) == 0.0 && lp_norm(res.state.r, INFINITY) == 0.0;
    // the first outer step runs exactly this density loop
    const auto dens = density_loop(VectorField(g64), p, {}, {});
    const bool one = res.report.converged && res.report.iterates == 1 && res.report.nested_iterates == 1 &&
                     dens.report.nested_iterates == 1;
    return Outcome{exact && one && worst <= 1e-12,
                   "u = 0 and rho = m " + std::string(exact ? "exactly" : "NOT exactly") + ", iterates outer/density/inner " +
                       std::to_string(res.report.iterates) + "/" + std::to_string(res.report.nested_iterates) + "/" +
                       std::to_string(dens.report.nested_iterates) + ", worst residual " + fmt("%.1e", worst)};
  });

  // gamma = 2 sweep with probes and the incompressible reference; reused below.
  StudyOptions o2 = sweep(2.0);
  o2.probes = true;
  o2.reference = true;
  StudyReport r2;
  std::vector<StudyReport> others;
  criterion(7, "contraction scaling (inner and density loops)", 600, [&] {
    r2 = run_study(o2);
    add_standard_fits(r2, o2);
    const Fit* in = r2.fit("inner_ratio");
    const Fit* de = r2.fit("density_ratio_sq");
    return Outcome{r2.all_converged() && in && de && in->pass() && de->pass(), fit_text(in) + "; " + fit_text(de)};
  });

  criterion(8, "divergence scaling for gamma = 2, 1.5, 3", 1200, [&] {
    Outcome o{r2.all_converged(), ""};
    const Fit* f2 = r2.fit("divu_p");
    o.pass = o.pass && f2 && f2->pass();
    o.detail = "gamma 2: " + fit_text(f2);
    for (double gamma : {1.5, 3.0}) {
      StudyOptions og = sweep(gamma);
      og.probes = false;
      StudyReport r = run_study(og);
      add_standard_fits(r, og);
      const Fit* f = r.fit("divu_p");
      o.pass = o.pass && r.all_converged() && f && f->pass();
      o.detail += "; gamma " + fmt("%.1f", gamma) + ": " + fit_text(f);
      others.push_back(std::move(r));
    }
    return o;
  });

  auto all_reports = [&] {
    std::vector<const StudyReport*> v{&r2};
    for (const auto& r : others)
      v.push_back(&r);
    return v;
  };

  criterion(9, "energy bound with C from the smallest mass", 1, [&] {
    Outcome o{true, ""};
    int rows = 0, bad = 0;
    for (const auto* r : all_reports()) {
      rows += static_cast<int>(r->rows.size());
      bad += static_cast<int>(energy_bound_violations(*r).size());
      o.detail += (o.detail.empty() ? "C = " : ", ") + fmt("%.4f", r->energy_constant);
    }
    o.pass = rows == 15 && bad == 0;
    o.detail += " per sweep; " + std::to_string(bad) + " of " + std::to_string(rows) + " states above 1.1 C";
    return o;
  });

  criterion(10, "low Mach consistency", 300, [&] {
    std::string d;
    for (const auto& row : r2.rows)
      d += (d.empty() ? "||u_m - u_inc||_{1,2} = " : ", ") + fmt("%.3e", row.distance_incompressible);
    const Fit* f = r2.fit("distance_incompressible");
    return Outcome{r2.all_converged() && low_mach_pass(r2), d + (f ? fmt("; slope %.3f", f->slope) : "")};
  });

  criterion(11, "admissible-set certificates", 1, [&] {
    int rows = 0, bad = 0;
    double worst_mass = 0.0, worst_div = 0.0;
    for (const auto* r : all_reports()) {
      rows += static_cast<int>(r->rows.size());
      bad += static_cast<int>(certificate_violations(*r).size());
      for (const auto& row : r->rows) {
        worst_mass = std::max(worst_mass, std::abs(row.mass_integral) / std::max(row.r_l1, 1e-300));
        worst_div = std::max(worst_div, row.scaled_divu / (2 * r->bounds.C_f * r->bounds.C_f));
      }
    }
    return Outcome{rows == 15 && bad == 0, std::to_string(bad) + " of " + std::to_string(rows) +
                                               " states violate; worst |int r|/||r||_1 " + fmt("%.1e", worst_mass) +
                                               ", worst m^(g-1)||div u||_p / 2C_f^2 " + fmt("%.2e", worst_div)};
  });

  criterion(12, "determinism of repeated studies", 60, [&] {
    const fs::path base = fs::temp_directory_path() / "heavyflow_acceptance";
    fs::remove_all(base);
    std::string payload[2];
    for (int k = 0; k < 2; ++k) {
      ConfigTable t = ConfigTable::with_defaults();
      t.set("run.seed", std::to_string(seed));
      t.set("output.dir", (base / std::to_string(k)).string());
      t.set("run.threads", k == 0 ? "1" : "2");
      std::ostringstream out, err;
      if (cmd_study(RunConfig::from(t), out, err) != 0)
        return Outcome{false, "study failed: " + err.str()};
      payload[k] = csv_payload((base / std::to_string(k) / "study.csv").string());
    }
    fs::remove_all(base);
    const bool same = !payload[0].empty() && payload[0] == payload[1];
    return Outcome{same, std::string(same ? "identical" : "different") + " CSV payload (" +
                             std::to_string(payload[0].size()) + " bytes) with 1 and 2 worker threads"};
  });

  std::printf("%d of 12 criteria failed\n", failures);
  return failures ? 1 : 0;
}
