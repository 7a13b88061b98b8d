#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "dmfp/profile.hpp"

using namespace dmfp;

namespace {

// Reference values computed independently with 30-digit quadrature and root
// finding on the unit-mass condition.
constexpr double kR1 = 1.8898815748423097;
constexpr double kR2 = 1.3418765339308278;
constexpr double kR3 = 1.1183361174233361;
constexpr double kPhi0Theta2 = 0.47442499832879435;
constexpr double kPhi0Theta1 = 0.39685026299204987;

// Fourth-order centered difference.
template <class F>
double d5(F&& f, double x, double h) {
  return (f(x - 2 * h) - 8 * f(x - h) + 8 * f(x + h) - f(x + 2 * h)) / (12 * h);
}

}  // namespace

TEST(Profile, ExponentsFromTheta) {
  const auto p2 = make_profile(2.0);
  EXPECT_DOUBLE_EQ(p2.alpha(), 0.5);
  EXPECT_DOUBLE_EQ(p2.kappa(), 0.0);
  const auto p3 = make_profile(3.0);
  EXPECT_DOUBLE_EQ(p3.alpha(), 0.4);
  EXPECT_NEAR(p3.kappa(), 0.2, 1e-15);
}

TEST(Profile, RadiusMatchesReference) {
  EXPECT_NEAR(make_profile(1.0).r_alpha(), kR1, 1e-13);
  EXPECT_NEAR(make_profile(1.0).r_alpha(), std::cbrt(27.0 / 4.0), 1e-13);
  EXPECT_NEAR(make_profile(2.0).r_alpha(), kR2, 1e-13);
  EXPECT_NEAR(make_profile(3.0).r_alpha(), kR3, 1e-13);
}

TEST(Profile, ClosedFormAgreesWithBisection) {
  for (double th : {0.5, 1.0, 1.5, 2.0, 3.0, 5.0, 8.0})
    EXPECT_NEAR(r_alpha_closed_form(th), r_alpha_by_bisection(th), 1e-11) << "theta " << th;
}

TEST(Profile, PhiValues) {
  const auto p2 = make_profile(2.0);
  EXPECT_EQ(p2.phi(p2.r_alpha()), 0.0);
  EXPECT_EQ(p2.phi(-p2.r_alpha()), 0.0);
  EXPECT_EQ(p2.phi(5.0), 0.0);
  EXPECT_NEAR(p2.phi(0.0), kPhi0Theta2, 1e-13);
  EXPECT_NEAR(p2.phi(0.0), p2.r_alpha() / (2.0 * std::sqrt(2.0)), 1e-14);
  EXPECT_NEAR(make_profile(1.0).phi(0.0), kPhi0Theta1, 1e-13);
  EXPECT_NEAR(make_profile(1.0).phi(0.0), std::pow(4.0, -2.0 / 3.0), 1e-14);
}

TEST(Profile, UnitMassAndMoments) {
  for (double th : {0.5, 1.0, 2.0, 3.0}) {
    const auto p = make_profile(th);
    EXPECT_NEAR(p.phi_power_integral(1.0, -10.0, 10.0), 1.0, 1e-12);
    EXPECT_NEAR(p.phi_power_mass(), p.phi_power_integral(th + 1.0, -p.r_alpha(), p.r_alpha()), 1e-12);
  }
  EXPECT_NEAR(make_profile(1.0).phi_power_mass(), 0.31748021039363989, 1e-13);
  EXPECT_NEAR(make_profile(3.0).phi_power_mass(), 0.10914987678837834, 1e-13);
  EXPECT_NEAR(make_profile(1.0).second_moment(), 0.71433047338568976, 1e-13);
  EXPECT_NEAR(make_profile(3.0).second_moment(), 0.34109336496368233, 1e-13);
}

TEST(Profile, CdfAndQuantile) {
  for (double th : {1.0, 2.0, 3.0}) {
    const auto p = make_profile(th);
    EXPECT_NEAR(p.cdf(0.0), 0.5, 1e-14);
    EXPECT_NEAR(p.quantile(0.5), 0.0, 1e-12);
    EXPECT_EQ(p.quantile(0.0), -p.r_alpha());
    EXPECT_EQ(p.quantile(1.0), p.r_alpha());
  }
  EXPECT_NEAR(make_profile(1.0).cdf(0.5), 0.6937955018663953, 1e-13);
  const auto p2 = make_profile(2.0);
  const double v = p2.cdf(0.5 * p2.r_alpha());
  EXPECT_NEAR(v, 0.80449889052211468, 1e-13);
  EXPECT_NEAR(p2.quantile(v), 0.5 * p2.r_alpha(), 1e-9);
  EXPECT_THROW(p2.quantile(1.5), InvalidParameter);
  EXPECT_THROW(p2.quantile(-0.1), InvalidParameter);
}

TEST(Profile, QuantileInvertsCdfAtRandomLevels) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double th : {0.5, 1.0, 3.0}) {
    const auto p = make_profile(th);
    double prev = -1.0;
    for (int k = 0; k < 200; ++k) {
      const double q = u(rng);
      EXPECT_NEAR(p.cdf(p.quantile(q)), q, 1e-11);
    }
    for (int k = 0; k <= 100; ++k) {
      const double c = p.cdf(-p.r_alpha() + 2.0 * p.r_alpha() * k / 100.0);
      EXPECT_GE(c, prev);
      prev = c;
    }
  }
}

TEST(Profile, RejectsBadTheta) {
  EXPECT_THROW(make_profile(0.0), InvalidParameter);
  EXPECT_THROW(make_profile(-1.0), InvalidParameter);
  EXPECT_THROW(make_profile(std::nan("")), InvalidParameter);
  EXPECT_THROW(make_profile(INFINITY), InvalidParameter);
}

TEST(SelfSimilar, DensityAtUnitTimeIsPhi) {
  const auto p = make_profile(1.0);
  for (double x : {-2.0, -1.0, 0.0, 0.3, 1.8})
    EXPECT_DOUBLE_EQ(self_similar_density(p, 1.0, x), p.phi(x));
  EXPECT_NEAR(self_similar_density(make_profile(2.0), 0.25, 0.0), 2.0 * kPhi0Theta2, 1e-13);
  EXPECT_THROW(self_similar_density(p, 0.0, 0.0), InvalidParameter);
}

TEST(SelfSimilar, DensityHasUnitMass) {
  for (double th : {1.0, 2.0, 3.0}) {
    const auto p = make_profile(th);
    for (double t : {0.01, 0.1, 1.0}) {
      const double half = p.r_alpha() * std::pow(t, p.alpha());
      const double m = num::integrate_singular([&](double x, double, double) { return self_similar_density(p, t, x); },
                                               -half, half);
      EXPECT_NEAR(m, 1.0, 1e-10) << "theta " << th << " t " << t;
    }
  }
}

TEST(SelfSimilar, ValueConstantAndScaling) {
  const auto p = make_profile(1.0);
  EXPECT_NEAR(self_similar_value_constant(p), 1.1905507889761496, 1e-13);
  EXPECT_NEAR(self_similar_value(p, 1.0, 0.0), -1.1905507889761496, 1e-13);
  for (double t : {0.001, 0.1, 0.7})
    EXPECT_NEAR(self_similar_value(p, t, 0.0), -1.1905507889761496 * std::cbrt(t), 1e-13);
  EXPECT_THROW(self_similar_value_constant(make_profile(2.0)), UnsupportedParameter);
  EXPECT_THROW(self_similar_value_critical(p, 1.0, 0.0), UnsupportedParameter);
}

TEST(SelfSimilar, ValueSolvesHamiltonJacobiOnSupport) {
  for (double th : {1.0, 3.0, 0.5}) {
    const auto p = make_profile(th);
    const double t = 0.5, x = 0.3 * std::pow(t, p.alpha());
    const double ut = d5([&](double s) { return self_similar_value(p, s, x); }, t, 1e-3);
    const double ux = d5([&](double z) { return self_similar_value(p, t, z); }, x, 1e-3);
    const double m = self_similar_density(p, t, x);
    EXPECT_NEAR(-ut + 0.5 * ux * ux - std::pow(m, th), 0.0, 1e-10) << "theta " << th;
  }
  const auto p2 = make_profile(2.0);
  for (double t : {0.05, 0.5}) {
    const double x = -0.4 * std::sqrt(t);
    const double ut = d5([&](double s) { return self_similar_value_critical(p2, s, x); }, t, 1e-4 * t);
    const double ux = d5([&](double z) { return self_similar_value_critical(p2, t, z); }, x, 1e-3);
    const double m = self_similar_density(p2, t, x);
    EXPECT_NEAR(-ut + 0.5 * ux * ux - m * m, 0.0, 1e-8);
  }
}
