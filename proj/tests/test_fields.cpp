#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "dmfp/fields.hpp"
#include "dmfp/solver.hpp"

using namespace dmfp;

namespace {

constexpr double kEps = 1e-3;

struct Solved {
  Profile p;
  FlowField f;
  ValueField v;
  BoundaryHistory b;
};

Solved solved(double th, const TerminalDensity& m, int n, double eps = kEps) {
  const auto p = make_profile(th);
  auto f = solve(p, m, make_grid(p, eps, 1.0, n, n)).flow;
  auto v = value_on_support(f, p, m);
  auto b = free_boundaries(f, p.alpha());
  return {p, std::move(f), std::move(v), std::move(b)};
}

// Shared across tests: these take a second or two each.
const Solved& bump128() {
  static const Solved s = solved(1.0, power_bump(-1.0, 1.0, 1.0), 128);
  return s;
}

const Solved& self_similar128() {
  static const Solved s = [] {
    const auto p = make_profile(1.0);
    return solved(1.0, self_similar_terminal(p, 1.0, kEps), 128);
  }();
  return s;
}

}  // namespace

TEST(Density, SelfSimilarFlowReproducesScaledProfile) {
  const auto p = make_profile(1.0);
  const auto f = self_similar_flow(p, make_grid(p, kEps, 1.0, 32, 64));
  for (int i : {0, 7, 32}) {
    const double s = f.grid.t[static_cast<std::size_t>(i)] + kEps;
    auto [x, m] = density(f, p, i);
    for (std::size_t j = 1; j + 1 < x.size(); ++j)
      EXPECT_NEAR(m[j], std::pow(s, -p.alpha()) * p.phi(std::pow(s, -p.alpha()) * x[j]), 1e-11);
  }
}

TEST(Density, SupNormEnvelopeIsBounded) {
  const auto& s = bump128();
  double lo = INFINITY, hi = 0.0;
  for (int i = 0; i <= s.f.grid.nt(); ++i) {
    auto [x, m] = density(s.f, s.p, i);
    const double e = *std::max_element(m.begin(), m.end()) * std::pow(s.f.grid.t[static_cast<std::size_t>(i)] + kEps, s.p.alpha());
    lo = std::min(lo, e), hi = std::max(hi, e);
  }
  EXPECT_GT(lo, 0.0);
  EXPECT_LT(hi / lo, 3.0);
}

TEST(Density, MassIsConservedOnEverySlice) {
  const auto& s = bump128();
  for (int i = 0; i <= s.f.grid.nt(); ++i) {
    auto [err, total] = mass_check(s.f, s.p, i);
    EXPECT_LE(err, 1e-6) << "slice " << i;
    EXPECT_NEAR(total, 1.0, 1e-6);
  }
}

TEST(Velocity, SelfSimilarVelocityIsLinear) {
  const auto& s = self_similar128();
  const double a = s.p.alpha();
  for (int i = 0; i <= s.f.grid.nt(); ++i) {
    const double t = s.f.grid.t[static_cast<std::size_t>(i)] + kEps;
    const auto ux = velocity(s.f, i);
    const double scale = a * s.p.r_alpha() * std::pow(t, a - 1.0);
    for (int j = 0; j <= s.f.grid.ny(); ++j)
      EXPECT_NEAR(ux[static_cast<std::size_t>(j)], -a * s.f.at(i, j) / t, 1e-4 * scale);
  }
}

TEST(Velocity, EnvelopeAndSymmetry) {
  const auto& s = bump128();
  const int ny = s.f.grid.ny();
  std::vector<double> env;
  for (int i = 0; i <= s.f.grid.nt(); ++i) {
    const auto ux = velocity(s.f, i);
    double sup = 0.0;
    for (double v : ux) sup = std::max(sup, std::abs(v));
    env.push_back(sup * std::pow(s.f.grid.t[static_cast<std::size_t>(i)] + kEps, 1.0 - s.p.alpha()));
    EXPECT_NEAR(ux[static_cast<std::size_t>(ny / 2)], 0.0, 1e-8 * sup);
  }
  // Upper bound only: the terminal bump slows the flow near T.
  EXPECT_LE(*std::max_element(env.begin(), env.end()), 1.05 * s.p.alpha() * s.p.r_alpha());
  EXPECT_NEAR(env[10] / env[0], 1.0, 0.05);
}

TEST(Value, SelfSimilarCenterMatchesClosedForm) {
  const auto& s = self_similar128();
  const double C = self_similar_value_constant(s.p);
  const int n = s.f.grid.nt(), mid = s.f.grid.ny() / 2;
  for (int i = 0; i <= n; ++i) {
    const double du = s.v.at(s.f, i, mid) - s.v.at(s.f, n, mid);
    const double exact = -C * (std::cbrt(s.f.grid.t[static_cast<std::size_t>(i)] + kEps) - std::cbrt(1.0 + kEps));
    EXPECT_NEAR(du, exact, 1e-4);
  }
}

TEST(Value, TerminalNormalization) {
  EXPECT_NEAR(bump128().v.terminal_pairing, 0.0, 1e-10);
  EXPECT_NEAR(self_similar128().v.terminal_pairing, 0.0, 1e-10);
}

TEST(Value, InteriorHamiltonJacobiResidual) {
  const auto r = hj_residual(bump128().f, bump128().p, bump128().v);
  EXPECT_LE(num::max_abs(r), 5e-3);
}

TEST(Continuity, TwentyTestFunctionsBelowTolerance) {
  const auto r = continuity_residual(bump128().f, bump128().p);
  ASSERT_EQ(r.size(), 20u);
  for (double v : r) EXPECT_LE(std::abs(v), 5e-3);
}

TEST(Boundaries, SelfSimilarBoundaryIsScaledRadius) {
  const auto p = make_profile(1.0);
  const auto f = self_similar_flow(p, make_grid(p, kEps, 1.0, 64, 32));
  const auto b = free_boundaries(f, p.alpha());
  for (std::size_t i = 0; i < b.t.size(); ++i) {
    EXPECT_NEAR(b.gR[i], p.r_alpha() * std::pow(b.t[i] + kEps, p.alpha()), 1e-12);
    EXPECT_LT(b.ddgR[i], 0.0);
    EXPECT_GT(b.ddgL[i], 0.0);
  }
}

TEST(Boundaries, SolvedRunHasConvexityPatternAndHitsTarget) {
  for (auto [a, bb] : {std::pair{-1.0, 1.0}, {0.5, 2.5}}) {
    const auto s = solved(1.0, power_bump(a, bb, 1.0), 64);
    const auto& b = s.b;
    EXPECT_EQ(b.gL.back(), a);
    EXPECT_EQ(b.gR.back(), bb);
    for (std::size_t i = 1; i + 1 < b.t.size(); ++i) {
      EXPECT_GT(b.ddgL[i], 0.0) << "i " << i;
      EXPECT_LT(b.ddgR[i], 0.0) << "i " << i;
    }
  }
}

TEST(Extension, ExteriorResidualAndSpeedBound) {
  const auto& s = bump128();
  const auto e = ValueExtension::build(s.f, s.v, s.b);
  double uxmax = 0.0;
  EXPECT_LE(exterior_hj_residual(s.f, e, &uxmax), 5e-3);
  double speed = 0.0;
  for (std::size_t i = 0; i < s.b.t.size(); ++i) speed = std::max({speed, std::abs(s.b.dgL[i]), std::abs(s.b.dgR[i])});
  EXPECT_LE(uxmax, speed * (1.0 + 1e-9));
  EXPECT_LE(e.glue_mismatch(s.f, s.v), 1e-5);
}

TEST(Extension, ConstantBeyondTurningPoint) {
  // The left end starts near the origin, moves left, then turns toward 0.5.
  const auto s = solved(1.0, power_bump(0.5, 2.5, 1.0), 64);
  const auto e = ValueExtension::build(s.f, s.v, s.b);
  ASSERT_TRUE(e.left().t_star.has_value());
  EXPECT_FALSE(e.right().t_star.has_value());
  const double ts = *e.left().t_star;
  const double xs = e.left().Gv(ts);
  const double u0 = e.left().U(ts);
  for (double t : {0.01, 0.3, 0.9})
    for (double dx : {0.01, 0.5, 2.0}) {
      auto [u, ux] = e(t, std::min(xs, e.left().Gv(t)) - dx);
      EXPECT_EQ(u, u0);
      EXPECT_EQ(ux, 0.0);
    }
}

TEST(Extension, NonConvexBoundaryIsRejected) {
  const auto& s = bump128();
  auto b = s.b;
  b.dgL[40] += 50.0;
  EXPECT_THROW(ValueExtension::build(s.f, s.v, b), CrossingCharacteristics);
}

TEST(Snapshot, LayoutAndExteriorZeroDensity) {
  const auto& s = bump128();
  const auto e = ValueExtension::build(s.f, s.v, s.b);
  const auto snap = snapshot(s.f, s.p, s.v, &e, 40, 16);
  ASSERT_EQ(snap.x.size(), static_cast<std::size_t>(s.f.grid.ny() + 1 + 32));
  EXPECT_EQ(snap.first, 16u);
  for (std::size_t k = 1; k < snap.x.size(); ++k) EXPECT_GT(snap.x[k], snap.x[k - 1]);
  for (std::size_t k = 0; k < snap.x.size(); ++k) {
    if (snap.exterior[k]) {
      EXPECT_EQ(snap.m[k], 0.0);
    }
  }
  EXPECT_EQ(snap.x[snap.first], snap.gamma_L);
}

TEST(Interpolation, GridTimesAndRange) {
  const auto& s = bump128();
  const auto row = interpolate_slice(s.f, s.f.grid.t[17]);
  for (std::size_t j = 0; j < row.size(); ++j) EXPECT_NEAR(row[j], s.f.at(17, static_cast<int>(j)), 1e-13);
  EXPECT_THROW(interpolate_slice(s.f, -0.1), InvalidParameter);
  EXPECT_THROW(interpolate_slice(s.f, 1.5), InvalidParameter);
}
