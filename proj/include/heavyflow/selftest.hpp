#pragma once

// Property checks shared by `heavyflow verify` and the acceptance harness.
// Every check is deterministic for a given seed.

#include "heavyflow/linsolve.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace heavyflow {

/// Test hook: deliberately corrupt an operator inside the checks.
enum class Fault { None, GradientSign };
Fault fault_from_string(const std::string& name);

struct PropertyResult {
  std::string name;
  double value = 0.0;     // worst measured quantity
  double threshold = 0.0; // pass iff value <= threshold (or the order test below)
  bool pass = false;
  std::string detail;
};

/// Smooth random wall-compatible field: curl of a sine series plus the
/// gradient of a cosine series (box walls).
VectorField random_smooth_velocity(const GridSpec& g, std::mt19937_64& rng, int modes = 4, double scale = 1.0);
/// Mean-zero random cell field, smooth (cosine series) or white noise.
ScalarField random_cell_field(const GridSpec& g, std::mt19937_64& rng, bool smooth);

/// <div v, s> + <v, grad s> over random wall-compatible pairs, relative to
/// ||div v|| ||s|| + ||v|| ||grad s||.
PropertyResult check_summation_by_parts(const GridSpec& g, int pairs, std::uint64_t seed,
                                        Fault fault = Fault::None);

/// curl(grad s) and trace(D(v)) - div v for smooth data on a refinement
/// sequence. Passes when the observed order is at least min_order, or when
/// the defect is already at rounding level on every grid.
PropertyResult check_curl_grad(const std::vector<int>& sizes, double min_order = 1.8);
PropertyResult check_trace_div(const std::vector<int>& sizes, double min_order = 1.8);

/// Reconstruction, divergence-freeness and orthogonality of the projection
/// on random fields (three results).
std::vector<PropertyResult> check_helmholtz(const GridSpec& g, int fields, std::uint64_t seed);

/// ||div B[r] - r||_2 / ||r||_2 on random mean-zero fields.
PropertyResult check_bogovskii(const GridSpec& g, int fields, std::uint64_t seed);

/// Random admissible linear problem at mass m (box walls, transport smallness
/// below alpha / 2, convective velocity with velocity certificate 1).
LinearizedProblem random_linear_problem(const GridSpec& g, double m, double gamma, std::mt19937_64& rng);

/// Recovery of a manufactured discrete solution (u in W^{1,2}, r in L^2).
std::vector<PropertyResult> check_manufactured_linear(const GridSpec& g, double m, double gamma, int problems,
                                                      std::uint64_t seed);

/// Monolithic against decomposed solutions, and the effective-flux identity
/// on each decomposed solve (two results).
std::vector<PropertyResult> check_solver_agreement(const GridSpec& g, double m, double gamma, int problems,
                                                   std::uint64_t seed);

/// The suite run by `heavyflow verify`.
std::vector<PropertyResult> verify_suite(std::uint64_t seed, Fault fault = Fault::None);

} // namespace heavyflow
