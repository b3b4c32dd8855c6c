#include "heavyflow/operators.hpp"
#include "heavyflow/selftest.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace heavyflow;
using std::numbers::pi;

namespace {

GridSpec unit(int n = 16) { return GridSpec(n, n); }

double max_abs(const Eigen::ArrayXXd& a) { return a.abs().maxCoeff(); }

} // namespace

TEST(Grid, RejectsSmallOrDegenerate) {
  EXPECT_THROW(GridSpec(4, 16), std::invalid_argument);
  EXPECT_THROW(GridSpec(16, 16, 0.0, 1.0), std::invalid_argument);
  EXPECT_THROW(GridSpec(16, 16, 1.0, -1.0), std::invalid_argument);
  GridSpec g(16, 32, 2.0, 1.0);
  EXPECT_DOUBLE_EQ(g.hx(), 0.125);
  EXPECT_DOUBLE_EQ(g.hy(), 1.0 / 32);
}

TEST(Grid, HashSeparatesGrids) {
  EXPECT_EQ(GridSpec(16, 16).hash(), GridSpec(16, 16).hash());
  EXPECT_NE(GridSpec(16, 16).hash(), GridSpec(16, 17).hash());
  EXPECT_NE(GridSpec(16, 16).hash(),
            GridSpec(16, 16, 1, 1, WallMode::PeriodicXSlipWallsY).hash());
}

TEST(Grid, WallModeNames) {
  EXPECT_EQ(wall_mode_from_string(to_string(WallMode::AllSlipWalls)), WallMode::AllSlipWalls);
  EXPECT_EQ(wall_mode_from_string("channel"), WallMode::PeriodicXSlipWallsY);
  EXPECT_THROW(wall_mode_from_string("torus"), std::invalid_argument);
}

TEST(Field, GridMismatchThrows) {
  ScalarField a(unit(16)), b(unit(32));
  EXPECT_THROW(a += b, std::invalid_argument);
}

TEST(Field, WallCompatibleZeroesNormalFaces) {
  auto v = VectorField::sample(unit(), [](double x, double y) { return 1 + x + y; },
                               [](double x, double y) { return 2 + x * y; });
  EXPECT_FALSE(v.is_wall_compatible());
  auto w = v.wall_compatible();
  EXPECT_TRUE(w.is_wall_compatible());
  EXPECT_EQ(w.x()(3, 3), v.x()(3, 3));
}

TEST(Divergence, ConstantIsZero) {
  auto v = VectorField::sample(unit(), [](double, double) { return 3.0; }, [](double, double) { return -1.0; });
  EXPECT_LT(max_abs(divergence(v).values()), 1e-12);
}

TEST(Divergence, LinearIsExact) {
  auto v = VectorField::sample(unit(), [](double x, double) { return x; }, [](double, double) { return 0.0; });
  EXPECT_LT(max_abs(divergence(v).values() - 1.0), 1e-12);
}

TEST(Divergence, RejectsNonFinite) {
  VectorField v(unit());
  v.x()(2, 2) = NAN;
  EXPECT_THROW(divergence(v), std::domain_error);
}

TEST(Gradient, ConstantAndLinear) {
  auto c = ScalarField::constant(unit(), 4.0);
  auto gc = gradient(c);
  EXPECT_EQ(max_abs(gc.x()), 0.0);
  EXPECT_EQ(max_abs(gc.y()), 0.0);

  GridSpec g = unit();
  auto s = ScalarField::sample(g, [](double x, double) { return x; });
  auto gs = gradient(s);
  // interior x-faces carry exactly 1; wall-normal faces are zeroed
  EXPECT_LT(max_abs(gs.x().middleRows(1, g.nx() - 1) - 1.0), 1e-12);
  EXPECT_EQ(max_abs(gs.y()), 0.0);
}

TEST(Gradient, SummationByParts) {
  auto r = check_summation_by_parts(unit(24), 20, 7);
  EXPECT_TRUE(r.pass) << r.value;
  EXPECT_LT(r.value, 1e-12);
}

TEST(Gradient, SignFaultIsCaught) {
  auto r = check_summation_by_parts(unit(24), 5, 7, Fault::GradientSign);
  EXPECT_FALSE(r.pass);
}

TEST(Curl, RigidRotation) {
  auto v = VectorField::sample(unit(), [](double, double y) { return -y; }, [](double x, double) { return x; });
  EXPECT_LT(max_abs(curl2d(v).values() - 2.0), 1e-12);
}

TEST(Curl, OfGradientVanishes) {
  GridSpec g = unit(32);
  auto s = ScalarField::sample(g, [](double x, double y) { return std::cos(pi * x) * std::cos(2 * pi * y); });
  EXPECT_LT(max_abs(curl2d(gradient(s)).values()), 1e-9);
}

TEST(Curl, ShearOnChannel) {
  GridSpec g(64, 64, 1.0, 1.0, WallMode::PeriodicXSlipWallsY);
  auto v = VectorField::sample(g, [](double, double y) { return std::sin(y); }, [](double, double) { return 0.0; });
  auto w = curl2d(v);
  // away from the walls, where nodes are averaged with an extrapolated layer
  double err = 0;
  for (int j = 2; j < g.ny() - 2; ++j)
    for (int i = 0; i < g.nx(); ++i)
      err = std::max(err, std::abs(w(i, j) + std::cos(g.yc(j))));
  EXPECT_LT(err, 1e-3);
}

TEST(SymGrad, Strain) {
  auto v = VectorField::sample(unit(), [](double x, double) { return x; }, [](double, double y) { return -y; });
  auto d = sym_grad(v);
  EXPECT_LT(max_abs(d.xx.values() - 1.0), 1e-12);
  EXPECT_LT(max_abs(d.yy.values() + 1.0), 1e-12);
  EXPECT_LT(max_abs(d.trace().values()), 1e-12);
}

TEST(SymGrad, RotationAndShear) {
  auto rot = VectorField::sample(unit(), [](double, double y) { return -y; }, [](double x, double) { return x; });
  EXPECT_LT(max_abs(sym_grad(rot).xy.values()), 1e-12);
  auto sh = VectorField::sample(unit(), [](double, double y) { return y; }, [](double, double) { return 0.0; });
  EXPECT_LT(max_abs(sym_grad(sh).xy.values() - 0.5), 1e-12);
}

TEST(Norms, ConstantAndIndicator) {
  GridSpec g = unit(20);
  auto c = ScalarField::constant(g, -3.0);
  for (double p : {1.0, 2.0, 4.5, double(INFINITY)})
    EXPECT_NEAR(lp_norm(c, p), 3.0, 1e-12);
  auto half = ScalarField::sample(g, [](double x, double) { return x < 0.5 ? 5.0 : 0.0; });
  EXPECT_NEAR(lp_norm(half, 2.0), 5.0 * std::sqrt(0.5), 1e-12);
  EXPECT_THROW(lp_norm(c, 0.5), std::invalid_argument);
}

TEST(Norms, MaxNorm) {
  ScalarField s(unit());
  s(3, 5) = -7.5;
  s(1, 1) = 2.0;
  EXPECT_EQ(lp_norm(s, INFINITY), 7.5);
}

TEST(Norms, SobolevOfConstant) {
  auto c = ScalarField::constant(unit(), 2.0);
  EXPECT_NEAR(sobolev_norm(c, 1, 2.0), lp_norm(c, 2.0), 1e-12);
  EXPECT_THROW(sobolev_norm(c, 3, 2.0), std::invalid_argument);
}

TEST(Norms, SobolevOfSine) {
  GridSpec g = unit(128);
  auto s = ScalarField::sample(g, [](double x, double) { return std::sin(2 * pi * x); });
  // ||s||_2^2 = 1/2 and ||d_x s||_2^2 = (2 pi)^2 / 2 on the unit square
  double expected = std::sqrt(0.5 + 2 * pi * pi);
  EXPECT_NEAR(sobolev_norm(s, 1, 2.0), expected, 2e-3 * expected);
  EXPECT_NEAR(sobolev_norm(-3.0 * s, 1, 2.0), 3.0 * sobolev_norm(s, 1, 2.0), 1e-10);
}

TEST(MeanZero, Projection) {
  GridSpec g = unit();
  std::mt19937_64 rng(3);
  auto s = random_cell_field(g, rng, false);
  s.values() += 2.0;
  auto p = mean_zero_project(s);
  EXPECT_LT(std::abs(integral(p)), 1e-13 * lp_norm(s, 1.0));
  EXPECT_LT(max_abs(mean_zero_project(p).values() - p.values()), 1e-14);
  EXPECT_LT(max_abs(mean_zero_project(ScalarField::constant(g, 4.0)).values()), 1e-14);
}
