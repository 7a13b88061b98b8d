#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "dmfp/rescale.hpp"

using namespace dmfp;

namespace {

// The fixed point itself: mu = phi on eta = y, w = 0.
RescaledState identity_state(const Profile& p, int ny) {
  RescaledState s;
  s.t = 1.0;
  const double R = p.r_alpha();
  for (int j = 0; j <= ny; ++j) s.y.push_back(-R + 2.0 * R * j / ny);
  s.eta = s.gamma_hat = s.y;
  for (double y : s.y) s.mu.push_back(p.phi(y));
  s.v.assign(s.y.size(), 0.0);
  s.w = s.w_eta = s.v;
  s.exterior.assign(s.y.size(), false);
  return s;
}

struct SolvedRun {
  Profile p;
  FlowField f;
  RescaledDiagnostics d;
};

SolvedRun solve_bump(double th, double eps, int n) {
  const auto p = make_profile(th);
  const auto m = power_bump(-1.0, 1.0, th);
  auto f = solve(p, m, make_grid(p, eps, 1.0, n, n)).flow;
  const auto v = value_on_support(f, p, m);
  const auto e = ValueExtension::build(f, v, free_boundaries(f, p.alpha()));
  auto d = rescaled_series(f, p, v, &e);
  return {p, std::move(f), std::move(d)};
}

const SolvedRun& run1() {
  static const SolvedRun r = solve_bump(1.0, 1e-3, 64);
  return r;
}

const SolvedRun& run3() {
  static const SolvedRun r = solve_bump(3.0, 1e-3, 64);
  return r;
}

}  // namespace

TEST(Rescale, IdentityHasZeroLyapunovAndPairing) {
  for (double th : {1.0, 2.0, 3.0}) {
    const auto p = make_profile(th);
    const auto s = identity_state(p, 64);
    EXPECT_NEAR(lyapunov(s, p), 0.0, 1e-12) << "theta " << th;
    EXPECT_NEAR(duality_pairing(s, p), 0.0, 1e-12);
  }
}

TEST(Rescale, PairingVanishesForAnyPotentialAtProfile) {
  const auto p = make_profile(3.0);
  auto s = identity_state(p, 128);
  for (std::size_t k = 0; k < s.w.size(); ++k) s.w[k] = 0.3 * s.eta[k] * s.eta[k] + s.eta[k] - 0.2;
  // Both halves integrate the same piecewise-linear w against phi.
  EXPECT_NEAR(duality_pairing(s, p), 0.0, 1e-5);
}

TEST(Rescale, SelfSimilarFieldWithShift) {
  const auto p = make_profile(1.0);
  const double eps = 1e-3;
  const auto m = self_similar_terminal(p, 1.0, eps);
  const auto f = self_similar_flow(p, make_grid(p, eps, 1.0, 32, 64));
  const auto v = value_on_support(f, p, m);
  for (int i : {1, 10, 32}) {
    const auto s = rescale_snapshot(snapshot(f, p, v, nullptr, i), p);
    const double k = std::pow(1.0 + eps / s.t, -p.alpha());
    for (std::size_t j = 1; j + 1 < s.eta.size(); ++j) EXPECT_NEAR(s.mu[j], k * p.phi(k * s.eta[j]), 1e-11);
    for (std::size_t j = 0; j < s.y.size(); ++j) EXPECT_NEAR(s.gamma_hat[j], s.y[j] / k, 1e-12);
    EXPECT_DOUBLE_EQ(s.tau, std::log(s.t));
  }
  EXPECT_THROW(rescale_snapshot(snapshot(f, p, v, nullptr, 0), p), InvalidParameter);
}

TEST(Rescale, PushforwardMassOfMu) {
  const auto& r = run1();
  for (int i : {1, 20, 64}) {
    auto [err, total] = mass_check(r.f, r.p, i);  // invariant under x = t^alpha eta
    EXPECT_LE(err, 1e-6);
    EXPECT_NEAR(total, 1.0, 1e-6);
  }
}

TEST(StationaryResidual, IdentityAndWrongScale) {
  for (double th : {1.0, 3.0}) {
    const auto p = make_profile(th);
    const auto s = identity_state(p, 64);
    EXPECT_LE(num::max_abs(stationary_residual(s.y, s.y, p)), 1e-12);
    std::vector<double> xi(s.y);
    for (double& x : xi) x *= std::sqrt(0.8);
    EXPECT_GT(num::max_abs(stationary_residual(xi, s.y, p)), 1e-2);
    std::vector<double> bad(s.y);
    std::swap(bad[3], bad[4]);
    EXPECT_THROW(stationary_residual(bad, s.y, p), DegenerateState);
  }
}

TEST(StationaryResidual, ShrinksWithEpsAtFixedTau) {
  const auto p = make_profile(3.0);
  const double t = 0.01;
  std::vector<double> res;
  for (double eps : {1e-2, 1e-3, 1e-4}) {
    const auto g = make_grid(p, eps, 1.0, 64, 64);
    const auto f = solve(p, power_bump(-1.0, 1.0, 3.0), g).flow;
    auto row = interpolate_slice(f, t);
    for (double& x : row) x *= std::pow(t, -p.alpha());
    res.push_back(num::max_abs(stationary_residual(row, g.y, p)));
  }
  EXPECT_LT(res[1], res[0]);
  EXPECT_LT(res[2], res[1]);
  EXPECT_LT(res[2], 1e-2);
}

TEST(HatGamma, IdentityIsSteady) {
  for (double th : {1.0, 2.0, 3.0}) {
    const auto p = make_profile(th);
    const auto s = identity_state(p, 32);
    const std::vector<double> tau{-4.0, -3.0, -2.5, -1.0, 0.0};
    std::vector<double> g;
    for (std::size_t i = 0; i < tau.size(); ++i) g.insert(g.end(), s.y.begin(), s.y.end());
    EXPECT_LE(hat_gamma_residual(tau, s.y, g, p).sup(), 1e-12);
  }
}

TEST(HatGamma, SecondOrderOnShiftedField) {
  const auto p = make_profile(1.0);
  double prev = INFINITY;
  for (int n : {32, 64, 128}) {
    const auto r = hat_gamma_residual(self_similar_flow(p, make_grid(p, 1e-3, 1.0, n, n)), p);
    double late = 0.0;
    for (std::size_t i = 1; i + 1 < r.tau.size(); ++i)
      if (r.tau[i] > std::log(0.1))
        for (std::size_t j = 0; j < r.y.size(); ++j) late = std::max(late, std::abs(r.at(i, j)));
    EXPECT_LT(late, prev / 3.0) << "n " << n;
    prev = late;
  }
  EXPECT_LT(prev, 1e-5);
}

TEST(Series, LyapunovIdentityAgreement) {
  for (const SolvedRun* r : {&run1(), &run3()}) {
    const auto& rows = r->d.rows;
    int ok = 0, total = 0;
    for (std::size_t k = 1; k + 1 < rows.size(); ++k) {
      if (rows[k].t < r->d.t_min) continue;
      ++total;
      if (std::abs(rows[k].dH_fd - rows[k].dH_identity) <= 0.05 * std::abs(rows[k].dH_identity)) ++ok;
    }
    ASSERT_GT(total, 20);
    EXPECT_GE(ok, 0.9 * total) << "theta " << r->p.theta();
  }
}

TEST(Series, LyapunovIsMonotone) {
  for (const SolvedRun* r : {&run1(), &run3()}) {
    const double dir = 1.0 - 2.0 * r->p.alpha();
    const auto rows = r->d.window(r->d.t_min, 1.0);
    for (std::size_t k = 1; k < rows.size(); ++k) EXPECT_GE((rows[k].H - rows[k - 1].H) * dir, -1e-8);
  }
}

TEST(Series, FlowDeviationShrinksTowardInitialTime) {
  for (const SolvedRun* r : {&run1(), &run3()}) {
    const auto rows = r->d.window(100.0 * r->f.grid.eps, 1.0);
    ASSERT_GT(rows.size(), 5u);
    for (std::size_t k = 1; k < rows.size(); ++k) EXPECT_GT(rows[k].flow_deviation, rows[k - 1].flow_deviation);
  }
}

TEST(Series, ReciprocalIntegralStaysBounded) {
  for (const SolvedRun* r : {&run1(), &run3()}) {
    double lo = INFINITY, hi = 0.0;
    for (const auto& row : r->d.window(r->d.t_min, 1.0)) lo = std::min(lo, row.recip_integral), hi = std::max(hi, row.recip_integral);
    EXPECT_LE(hi / lo, 2.0);
  }
}

TEST(Series, PairingNonpositiveAwayFromInitialLayer) {
  const auto& r = run3();
  for (const auto& row : r.d.window(0.1, 1.0)) EXPECT_LE(row.duality_pairing, 1e-8);
}
