#include "heavyflow/errors.hpp"
#include "heavyflow/linsolve.hpp"
#include "heavyflow/operators.hpp"
#include "heavyflow/selftest.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace heavyflow;
using std::numbers::pi;

namespace {

double h1(const VectorField& v) { return sobolev_norm(v, 1, 2.0); }

// psi = S(x) S(y) with S = sin^2(pi t): u = (d_y psi, -d_x psi) vanishes on the
// walls together with its normal component.
double S(double t) { return std::pow(std::sin(pi * t), 2); }
double S1(double t) { return pi * std::sin(2 * pi * t); }
double S2(double t) { return 2 * pi * pi * std::cos(2 * pi * t); }
double S3(double t) { return -4 * pi * pi * pi * std::sin(2 * pi * t); }

struct StokesCase {
  LinearizedProblem prob;
  VectorField u;
  ScalarField r;
};

// -m Laplace u + gamma m^(gamma-1) grad r = G, div u = 0, exact wall stress h.
StokesCase analytic_stokes(int n, double m, double gamma) {
  GridSpec g(n, n);
  ModelParams p;
  p.m = m;
  p.gamma = gamma;
  p.f_friction = 0.7;
  p.force = VectorField(g);
  StokesCase c{LinearizedProblem::zero(p), {}, {}};
  const double c_p = gamma * std::pow(m, gamma - 1.0);
  c.u = VectorField::sample(g, [](double x, double y) { return S(x) * S1(y); },
                            [](double x, double y) { return -S1(x) * S(y); });
  c.r = ScalarField::sample(g, [](double x, double y) { return std::cos(pi * x) * std::cos(pi * y); });
  c.prob.rhs_G = VectorField::sample(
      g,
      [&](double x, double y) {
        return -m * (S2(x) * S1(y) + S(x) * S3(y)) - c_p * pi * std::sin(pi * x) * std::cos(pi * y);
      },
      [&](double x, double y) {
        return m * (S3(x) * S(y) + S1(x) * S2(y)) - c_p * pi * std::cos(pi * x) * std::sin(pi * y);
      });
  // n . 2 m D(u) . tau with tau = (1, 0) on horizontal and (0, 1) on vertical walls
  for (int i = 0; i <= n; ++i) {
    c.prob.rhs_h.bottom[i] = -m * S(g.xn(i)) * S2(0.0);
    c.prob.rhs_h.top[i] = m * S(g.xn(i)) * S2(1.0);
  }
  for (int j = 0; j <= n; ++j) {
    c.prob.rhs_h.left[j] = m * S2(0.0) * S(g.yn(j));
    c.prob.rhs_h.right[j] = -m * S2(1.0) * S(g.yn(j));
  }
  return c;
}

} // namespace

TEST(Monolithic, ZeroData) {
  ModelParams p;
  p.force = VectorField(GridSpec(16, 16));
  auto sol = solve_monolithic(LinearizedProblem::zero(p));
  EXPECT_EQ(lp_norm(sol.u, INFINITY), 0.0);
  EXPECT_EQ(lp_norm(sol.r, INFINITY), 0.0);
}

TEST(Monolithic, AnalyticStokesConverges) {
  double eu[2], er[2];
  int k = 0;
  for (int n : {32, 64}) {
    auto c = analytic_stokes(n, 10.0, 2.0);
    auto sol = solve_monolithic(c.prob);
    eu[k] = lp_norm(sol.u - c.u, 2.0) / lp_norm(c.u, 2.0);
    er[k] = lp_norm(sol.r - mean_zero_project(c.r), 2.0) / lp_norm(c.r, 2.0);
    ++k;
  }
  EXPECT_LT(eu[1], 1e-2);
  EXPECT_LT(er[1], 5e-2);
  EXPECT_GT(std::log2(eu[0] / eu[1]), 1.5) << eu[0] << " " << eu[1];
  EXPECT_GT(std::log2(er[0] / er[1]), 0.9) << er[0] << " " << er[1];
}

TEST(Monolithic, ManufacturedDiscreteSolution) {
  for (const auto& r : check_manufactured_linear(GridSpec(24, 24), 1e3, 2.0, 2, 9))
    EXPECT_TRUE(r.pass) << r.name << " " << r.value;
}

TEST(Monolithic, ResidualsAndEnergyIdentity) {
  std::mt19937_64 rng(21);
  auto prob = random_linear_problem(GridSpec(24, 24), 1e3, 2.0, rng);
  auto sol = solve_monolithic(prob);
  EXPECT_LT(sol.residuals.continuity, 1e-9);
  EXPECT_LT(sol.residuals.momentum, 1e-9);
  EXPECT_EQ(sol.residuals.wall, 0.0);
  EXPECT_LT(std::abs(integral(sol.r)), 1e-12 * lp_norm(sol.r, 1.0));
  auto eb = energy_balance(prob, sol);
  EXPECT_LT(std::abs(eb.defect()), 1e-10 * eb.scale());
}

TEST(Monolithic, LargerMassGivesSmallerVelocity) {
  std::mt19937_64 rng(4);
  auto prob = random_linear_problem(GridSpec(24, 24), 1e3, 2.0, rng);
  prob.transport_velocity = VectorField(prob.params.force.grid());
  prob.convective_velocity = prob.transport_velocity;
  prob.density_offset = ScalarField(prob.params.force.grid());
  const double a = h1(solve_monolithic(prob).u);
  prob.params.m *= 2;
  const double b = h1(solve_monolithic(prob).u);
  EXPECT_LT(b, a);
}

TEST(Monolithic, PeriodicChannel) {
  GridSpec g(24, 16, 2.0, 1.0, WallMode::PeriodicXSlipWallsY);
  ModelParams p;
  p.m = 100;
  p.force = VectorField(g);
  auto prob = LinearizedProblem::zero(p);
  prob.rhs_G = VectorField::sample(g, [](double, double y) { return std::sin(pi * y); },
                                   [](double x, double) { return std::cos(pi * x); });
  auto sol = solve_monolithic(prob);
  EXPECT_LT(sol.residuals.momentum, 1e-9);
  EXPECT_LT(sol.residuals.continuity, 1e-9);
  EXPECT_TRUE(sol.u.is_wall_compatible());
  EXPECT_THROW(solve_decomposed(prob), std::invalid_argument);
}

TEST(Monolithic, WorkspaceReusesFactorization) {
  std::mt19937_64 rng(8);
  GridSpec g(24, 24);
  LinearWorkspace ws;
  auto prob = random_linear_problem(g, 1e3, 2.0, rng);
  auto a = solve_monolithic(prob, &ws);
  prob.density_offset *= 1.001;
  auto b = solve_monolithic(prob, &ws);
  auto fresh = solve_monolithic(prob);
  EXPECT_EQ(ws.factorizations(), 1);
  EXPECT_LT(lp_norm(b.u - fresh.u, 2.0), 1e-10 * lp_norm(fresh.u, 2.0));
}

TEST(Monolithic, RejectsDensityBelowPositivity) {
  std::mt19937_64 rng(2);
  auto prob = random_linear_problem(GridSpec(16, 16), 10.0, 2.0, rng);
  prob.density_offset(2, 2) = 6.0;
  EXPECT_THROW(solve_monolithic(prob), AdmissibilityError);
}

TEST(Decomposed, ZeroData) {
  ModelParams p;
  p.force = VectorField(GridSpec(16, 16));
  auto sol = solve_decomposed(LinearizedProblem::zero(p));
  EXPECT_EQ(lp_norm(sol.u, INFINITY), 0.0);
  ASSERT_TRUE(sol.flux_trace.has_value());
  EXPECT_EQ(lp_norm(sol.flux_trace->P_flux, INFINITY), 0.0);
  EXPECT_EQ(lp_norm(sol.flux_trace->omega, INFINITY), 0.0);
}

TEST(Decomposed, AgreesWithMonolithic) {
  for (const auto& r : check_solver_agreement(GridSpec(24, 24), 1e3, 2.0, 2, 13))
    EXPECT_TRUE(r.pass) << r.name << " " << r.value;
}

TEST(Decomposed, SweepsNonIncreasingInMass) {
  std::mt19937_64 rng(30);
  auto prob = random_linear_problem(GridSpec(24, 24), 1e2, 2.0, rng);
  int prev = 1 << 30;
  for (double m : {1e2, 1e3, 1e4}) {
    auto q = prob;
    q.params.m = m;
    q.density_offset *= m / prob.params.m;
    // keep the transport velocity at fixed absolute size
    auto sol = solve_decomposed(q);
    EXPECT_LE(sol.sweeps, prev) << "m = " << m;
    prev = sol.sweeps;
  }
}

TEST(Decomposed, TransportSmallnessEnforced) {
  std::mt19937_64 rng(1);
  auto prob = random_linear_problem(GridSpec(16, 16), 1e2, 2.0, rng);
  prob.transport_velocity *= 100.0;
  EXPECT_THROW(solve_decomposed(prob), AdmissibilityError);
}

TEST(Subproblems, TransportWithoutVelocity) {
  GridSpec g(16, 16);
  ModelParams p;
  p.m = 50;
  p.gamma = 1.5;
  p.force = VectorField(g);
  std::mt19937_64 rng(6);
  auto P = random_cell_field(g, rng, true);
  auto r = transport_solve(P, VectorField(g), p);
  const double c = p.gamma * std::pow(p.m, p.gamma - 2);
  EXPECT_LT(lp_norm(r - (1.0 / c) * P, INFINITY), 1e-14 * lp_norm(P, INFINITY) / c);
}

TEST(Subproblems, TransportSolvesItsEquation) {
  GridSpec g(16, 16);
  std::mt19937_64 rng(6);
  auto P = random_cell_field(g, rng, true);
  auto uf = random_smooth_velocity(g, rng);
  ModelParams p;
  p.force = VectorField(g);
  p.gamma = 2.0;
  for (double m : {1e4, 2e4}) {
    p.m = m;
    auto r = transport_solve(P, uf, p);
    // r + div(2 r uf / (gamma m^(gamma-1))) = P / (gamma m^(gamma-2))
    auto ops = StaggeredOps::get(g);
    Vec lhs = ops->pack(r) + assembly::transport_matrix(*ops, uf) * ops->pack(r) * (2.0 / (2.0 * m));
    Vec rhs = ops->pack(P) / 2.0;
    EXPECT_LT((lhs - rhs).norm(), 1e-9 * rhs.norm());
  }
}

TEST(Subproblems, PotentialOfBalancedFlux) {
  GridSpec g(16, 16);
  ModelParams p;
  p.m = 20;
  p.force = VectorField(g);
  std::mt19937_64 rng(2);
  auto r = random_cell_field(g, rng, true);
  const double c = p.gamma * std::pow(p.m, p.gamma - 2);
  auto phi = potential_solve(c * r, r, p);
  EXPECT_LT(lp_norm(phi, INFINITY), 1e-13);

  auto P = ScalarField::sample(g, [](double x, double) { return std::cos(pi * x); });
  auto q = potential_solve(P, ScalarField(g), p);
  // -2 Laplace(phi) = cos(pi x): phi = cos(pi x) / (2 pi^2) up to O(h^2)
  EXPECT_LT(lp_norm(q - (1.0 / (2 * pi * pi)) * P, INFINITY), 1e-3);
  EXPECT_LT(std::abs(integral(q)), 1e-14);
}

TEST(Subproblems, VorticityWallDataIsLinear) {
  std::mt19937_64 rng(12);
  GridSpec g(16, 16);
  auto prob = random_linear_problem(g, 1e3, 2.0, rng);
  prob.rhs_G = VectorField(g);
  prob.rhs_h = WallData(g);
  prob.convective_velocity = VectorField(g);
  auto u = random_smooth_velocity(g, rng);
  auto w1 = vorticity_solve_nodes(prob, u);
  auto w3 = vorticity_solve_nodes(prob, 3.0 * u);
  EXPECT_LT((w3.values() - 3.0 * w1.values()).abs().maxCoeff(), 1e-10 * w1.values().abs().maxCoeff());
  auto w0 = vorticity_solve(prob, VectorField(g));
  EXPECT_EQ(lp_norm(w0, INFINITY), 0.0);
}
