#include "heavyflow/errors.hpp"
#include "heavyflow/model.hpp"
#include "heavyflow/operators.hpp"

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <gtest/gtest.h>

#include <cmath>

using namespace heavyflow;
using Big = boost::multiprecision::cpp_bin_float_50;

namespace {

// R_m(r) = (m + r)^gamma - gamma m^(gamma-1) r - m^gamma in 50-digit arithmetic.
double remainder_oracle(double r, double m, double gamma) {
  Big bm(m), br(r), bg(gamma);
  Big val = pow(bm + br, bg) - bg * pow(bm, bg - 1) * br - pow(bm, bg);
  return static_cast<double>(val);
}

ModelParams params_on(const GridSpec& g, double m, double gamma) {
  ModelParams p;
  p.m = m;
  p.gamma = gamma;
  p.force = VectorField(g);
  return p;
}

} // namespace

TEST(TaylorRemainder, ZeroOffset) {
  EXPECT_EQ(taylor_remainder(0.0, 100.0, 1.5), 0.0);
  EXPECT_EQ(taylor_remainder(0.0, 100.0, 2.0), 0.0);
}

TEST(TaylorRemainder, BinomialAtGammaTwo) {
  for (double r : {-3.0, 0.25, 7.0})
    EXPECT_EQ(taylor_remainder(r, 50.0, 2.0), r * r);
}

TEST(TaylorRemainder, RegressionValue) {
  // 101^1.5 - 1.5 * 10 - 1000, evaluated directly
  const double direct = std::pow(101.0, 1.5) - 15.0 - 1000.0;
  const double v = taylor_remainder(1.0, 100.0, 1.5);
  EXPECT_NEAR(v, direct, 1e-10);
  EXPECT_NEAR(v, remainder_oracle(1.0, 100.0, 1.5), 1e-14);
}

TEST(TaylorRemainder, MatchesHighPrecision) {
  for (double gamma : {1.2, 1.5, 2.0, 2.7, 3.0, 4.0})
    for (double m : {1.0, 1e2, 1e4})
      for (double x : {-0.5, -1e-3, 1e-6, 1e-2, 0.3}) {
        const double r = x * m;
        const double want = remainder_oracle(r, m, gamma);
        EXPECT_NEAR(taylor_remainder(r, m, gamma), want, 1e-12 * std::abs(want) + 1e-300)
            << "gamma " << gamma << " m " << m << " x " << x;
      }
}

TEST(TaylorRemainder, RejectsNonPositiveDensity) {
  EXPECT_THROW(taylor_remainder(-2.0, 1.0, 1.5), AdmissibilityError);
  GridSpec g(16, 16);
  auto r = ScalarField::constant(g, 0.0);
  r(3, 3) = -20.0;
  EXPECT_THROW(taylor_remainder(r, params_on(g, 10.0, 2.0)), AdmissibilityError);
}

TEST(TaylorRemainder, FieldGradientChainRule) {
  GridSpec g(32, 32);
  auto p = params_on(g, 10.0, 1.5);
  auto r = ScalarField::sample(g, [](double x, double y) { return std::cos(3 * x) * y; });
  auto tr = taylor_remainder(r, p);
  EXPECT_NEAR(tr.value(4, 7), remainder_oracle(r(4, 7), 10.0, 1.5), 1e-13);
  // interior x-face between cells (i-1, j) and (i, j): chain rule with face-averaged rho
  const int i = 9, j = 12;
  const double rf = 0.5 * (r(i - 1, j) + r(i, j));
  const double slope = 1.5 * (std::pow(10.0 + rf, 0.5) - std::pow(10.0, 0.5));
  const double dr = (r(i, j) - r(i - 1, j)) / g.hx();
  EXPECT_NEAR(tr.gradient.x()(i, j), slope * dr, 1e-11 * std::abs(slope * dr) + 1e-14);
}

TEST(PressureExcess, SmallOffsetNoCancellation) {
  const double m = 1e6, r = 1e-3;
  Big want = pow(Big(m) + Big(r), Big(2.5)) - pow(Big(m), Big(2.5));
  EXPECT_NEAR(pressure_excess(r, m, 2.5), static_cast<double>(want), 1e-10 * static_cast<double>(want));
}

TEST(ModelParams, Validate) {
  GridSpec g(16, 16);
  auto p = params_on(g, 100.0, 2.0);
  EXPECT_NO_THROW(p.validate());
  p.gamma = 0.5;
  try {
    p.validate();
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("gamma"), std::string::npos);
  }
  p.gamma = 2.0;
  p.p_exp = 6.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p.p_exp = 4.0;
  p.m = 0.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(ModelParams, FingerprintSeesForce) {
  GridSpec g(16, 16);
  auto a = params_on(g, 100.0, 2.0), b = a;
  EXPECT_EQ(a.fingerprint(), b.fingerprint());
  b.force.x()(3, 3) = 1e-9;
  EXPECT_NE(a.fingerprint(), b.fingerprint());
}
