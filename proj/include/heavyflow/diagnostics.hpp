#pragma once

// Studies over the mass parameter: divergence scaling, contraction scaling,
// energy bound and low Mach consistency, with log-log fits and CSV/SVG output.

#include "heavyflow/iteration.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace heavyflow {

/// Xi = m^(gamma-2) ||r||_{1,p} + ||u||_{2,p}.
double xi(const IterationState& state, const ModelParams& params);

struct ContractionProbe {
  double inner_ratio = NAN;   // e_2 / e_1 of the inner loop started from zero
  double density_ratio = NAN; // same for the density loop (not squared)
  LoopReport inner;
  LoopReport density;
};

/// Re-runs the inner and density loops from zero, with the coefficients frozen
/// at a converged state, and records the contraction ratios.
ContractionProbe probe_contraction(const IterationState& state, const ModelParams& params);

struct StudyRow {
  double m = 0.0, gamma = 0.0;
  std::uint64_t fingerprint = 0, grid_hash = 0;
  bool converged = false;
  int outer_iterates = 0;
  double xi = 0.0;
  double grad_u_l2 = 0.0;
  double divu_p = 0.0;
  double scaled_divu = 0.0; // m^(gamma-1) ||div u||_p
  double inner_ratio = NAN;
  double density_ratio = NAN;
  double density_ratio_sq = NAN;
  double residual_momentum = 0.0; // relative
  double residual_mass = 0.0;     // relative
  double mass_integral = 0.0;     // integral of r
  double r_l1 = 0.0;
  double u_h1 = 0.0;        // ||u||_{1,2}
  double force_65 = 0.0;    // ||f||_{6/5}
  double density_cert = 0.0;
  double velocity_cert = 0.0;
  double distance_incompressible = NAN; // ||u - u_inc||_{1,2}
  std::vector<std::string> warnings;
  IterationState state;
};

struct Fit {
  std::string quantity;
  double slope = NAN, intercept = NAN, half_width = NAN, r2 = NAN;
  int points = 0;
  double expected = NAN, tolerance = NAN;

  bool inconclusive() const { return !(r2 >= 0.95); }
  bool within() const { return std::abs(slope - expected) <= tolerance; }
  /// Slope within tolerance and not inconclusive.
  bool pass() const { return !inconclusive() && within(); }
  std::string verdict() const;
};

/// Least-squares fit of log y against log x with a 95% confidence half-width
/// on the slope. Non-positive or non-finite points are skipped.
Fit loglog_fit(const std::vector<double>& x, const std::vector<double>& y, const std::string& quantity,
               double expected = NAN, double tolerance = NAN);

struct StudyOptions {
  GridSpec grid{64, 64};
  std::vector<double> masses{1e2, std::pow(10.0, 2.5), 1e3, std::pow(10.0, 3.5), 1e4};
  double gamma = 2.0;
  double friction = 1.0;
  double p_exp = 4.0;
  std::string force_preset = "vortex";
  double amplitude = 1.0;
  std::optional<VectorField> force; // overrides the preset
  LoopOptions loop;
  bool calibrate = true;     // bounds from the smallest-m run
  AdmissibleBounds bounds;   // used when calibrate is false
  bool probes = true;
  bool reference = false;    // distance to the incompressible reference
  int threads = 0;           // 0: HEAVYFLOW_THREADS or hardware concurrency
};

struct StudyReport {
  std::vector<StudyRow> rows;
  std::vector<Fit> fits;
  AdmissibleBounds bounds;
  double energy_constant = NAN; // ||u||_{1,2} / ||f||_{6/5} on the smallest-m run
  std::vector<std::string> notes;

  bool all_converged() const;
  const Fit* fit(const std::string& quantity) const;
};

VectorField study_force(const StudyOptions& opts);

/// Runs one outer solve per mass value on a worker pool; rows come back in the
/// order of opts.masses. Calibrates the bounds and re-checks admissibility.
StudyReport run_study(const StudyOptions& opts);

/// Fits for the columns the options produced: divu_p (expected -(gamma - 1),
/// tolerance 0.15 at gamma = 2 and 0.2 otherwise), inner_ratio and
/// density_ratio_sq (expected -1) with probes, distance_incompressible with
/// the reference. Fits are void unless every row converged.
void add_standard_fits(StudyReport& report, const StudyOptions& opts);

/// Slope of log ||div u||_p against log m.
StudyReport divu_scaling_study(StudyOptions opts);
/// Slopes of the inner ratio and the squared density ratio against m.
StudyReport contraction_scaling_study(StudyOptions opts);
/// ||u_m - u_inc||_{1,2} across the sweep.
StudyReport low_mach_consistency(StudyOptions opts);

/// Calibrated bounds from a converged state: C_f = 2 max(certificates, Xi,
/// sqrt(c_div / 2)) and E = 2 ||grad u||_2.
AdmissibleBounds calibrate_bounds(const IterationState& state, const ModelParams& params, double alpha = 0.1);

/// Energy bound check: rows whose ||u||_{1,2} / ||f||_{6/5} exceeds 1.1 C.
std::vector<int> energy_bound_violations(const StudyReport& report);

/// Certificate check: rows with |integral r| > 1e-12 ||r||_1 or
/// m^(gamma-1) ||div u||_p > 2 C_f^2.
std::vector<int> certificate_violations(const StudyReport& report);

/// Low Mach acceptance: strictly decreasing distances and last <= 0.1 first.
bool low_mach_pass(const StudyReport& report);

struct ReferenceOptions {
  double tol = 1e-11;
  int max_iterates = 100;
};

/// Steady incompressible flow with slip walls and friction coefficient
/// `friction` (per unit density), viscosity 1: Picard on the convection
/// velocity with the linear solver at m = 1 and zero transport, followed by
/// a Helmholtz projection. Throws SolverError if Picard does not converge.
VectorField incompressible_reference_solve(const VectorField& force, double friction, const GridSpec& grid,
                                           const ReferenceOptions& opts = {});

/// Worker count from HEAVYFLOW_THREADS, else hardware concurrency (at least 1).
int worker_count(int requested = 0);

/// CSV with a header naming every column; numbers printed with %.17g.
/// The first line is a comment carrying the study fingerprint.
void write_study_csv(const StudyReport& report, const std::string& path, const std::string& fingerprint);
/// Log-log SVG plot of one column against m, with the fitted line if present.
void write_study_svg(const StudyReport& report, const std::string& column, const std::string& path,
                     const std::string& fingerprint);
/// Plain-text summary of the fits.
std::string fit_summary(const StudyReport& report);

/// Column names shared by the CSV writer and the plots.
std::vector<std::string> study_columns();
double study_value(const StudyRow& row, const std::string& column);

} // namespace heavyflow
