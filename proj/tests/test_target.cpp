#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "dmfp/profile.hpp"
#include "dmfp/target.hpp"

using namespace dmfp;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "dmfp_test_target";
  fs::create_directories(dir);
  return dir / name;
}

void write_rows(const fs::path& p, const std::vector<std::pair<double, double>>& rows) {
  std::ofstream out(p);
  out << "x,density\n";
  for (auto [x, m] : rows) out << x << "," << m << "\n";
}

}  // namespace

TEST(PowerBump, NormalizationConstants) {
  // m^theta is a polynomial for these cases, so the stored density is exact.
  EXPECT_NEAR(power_bump(-1.0, 1.0, 2.0).density(0.0), 2.0 / std::numbers::pi, 1e-10);
  EXPECT_NEAR(power_bump(0.0, 2.0, 1.0).density(1.0), 0.75, 1e-10);
}

TEST(PowerBump, MidpointIsTheMaximizer) {
  for (auto [a, b, th] : {std::tuple{-1.0, 1.0, 1.0}, {0.0, 3.0, 2.0}, {-2.0, 0.5, 3.0}, {1.0, 1.5, 0.5}}) {
    const auto m = power_bump(a, b, th);
    const double mid = m.density(0.5 * (a + b));
    for (int k = 1; k < 200; ++k) {
      const double x = a + (b - a) * k / 200.0;
      EXPECT_LE(m.density(x), mid + 1e-12);
    }
  }
}

TEST(PowerBump, QuantileProperties) {
  for (double th : {1.0, 2.0, 3.0}) {
    const auto m = power_bump(-1.0, 1.0, th);
    EXPECT_NEAR(m.quantile(0.5), 0.0, 1e-12);
    EXPECT_EQ(m.quantile(1.0), 1.0);
    EXPECT_EQ(m.quantile(0.0), -1.0);
    EXPECT_NEAR(m.mass(), 1.0, 1e-14);
    for (double x : {-0.999, -0.7, -0.2, 0.1, 0.55, 0.9, 0.9995}) EXPECT_NEAR(m.quantile(m.cdf(x)), x, 1e-8);
  }
  EXPECT_THROW(power_bump(-1, 1, 1).quantile(1.01), InvalidParameter);
}

TEST(PowerBump, RejectsBadArguments) {
  EXPECT_THROW(power_bump(1.0, 1.0, 1.0), InvalidParameter);
  EXPECT_THROW(power_bump(0.0, 1.0, 0.0), InvalidParameter);
}

TEST(SelfSimilarTerminal, SamplesAndSupport) {
  const auto p = make_profile(1.0);
  const auto m = self_similar_terminal(p, 1.0, 0.0);
  for (double x : {-1.5, -0.4, 0.0, 0.8}) EXPECT_NEAR(m.density(x), p.phi(x), 1e-12);
  for (double eps : {0.0, 1e-3, 0.1}) {
    const auto me = self_similar_terminal(p, 1.0, eps);
    const double half = p.r_alpha() * std::pow(1.0 + eps, p.alpha());
    EXPECT_DOUBLE_EQ(me.a(), -half);
    EXPECT_DOUBLE_EQ(me.b(), half);
  }
  const auto p2 = make_profile(2.0);
  EXPECT_NEAR(self_similar_terminal(p2, 1.0, 0.0).density(0.0), 0.47442499832879435, 1e-12);
}

TEST(Compatibility, PowerBumpsPass) {
  for (auto [a, b] : {std::pair{-1.0, 1.0}, {0.0, 4.0}, {-0.5, 0.25}})
    for (double th : {0.5, 1.0, 2.0, 3.0}) {
      const auto r = power_bump(a, b, th).compatibility();
      EXPECT_TRUE(r.pass);
      EXPECT_GT(r.c_lower, 0.0);
      EXPECT_TRUE(std::isfinite(r.c_upper));
      // ratio of the other end distance to the power 1/theta lies in [((b-a)/2), (b-a)]
      EXPECT_LE(r.c_upper / r.c_lower, 4.0);
    }
}

TEST(Compatibility, UniformDensityFails) {
  auto x = uniform_nodes(-1.0, 1.0, 64);
  std::vector<double> m(x.size(), 0.5);
  const auto r = from_samples(x, m, 1.0).compatibility();
  EXPECT_FALSE(r.pass);
  EXPECT_FALSE(r.endpoints_vanish);
}

TEST(Compatibility, SelfSimilarTerminalPasses) {
  for (double th : {1.0, 2.0, 3.0})
    EXPECT_TRUE(self_similar_terminal(make_profile(th), 1.0, 1e-3).compatibility().pass);
}

TEST(TargetCsv, RoundTripReproducesSamples) {
  const auto m = power_bump(-1.0, 1.0, 1.0);
  const auto path = scratch("bump.csv");
  save_csv(path.string(), m);
  const auto back = load_csv(path.string(), 1.0);
  ASSERT_EQ(back.nodes().size(), m.nodes().size());
  for (std::size_t k = 0; k < m.nodes().size(); ++k) {
    EXPECT_NEAR(back.nodes()[k], m.nodes()[k], 1e-12);
    EXPECT_NEAR(back.samples()[k], m.samples()[k], 1e-12);
  }
  EXPECT_NEAR(back.quantile(0.25), m.quantile(0.25), 1e-8);
}

TEST(TargetCsv, FormatErrors) {
  const auto neg = scratch("neg.csv");
  write_rows(neg, {{0, 0}, {1, 1}, {2, -1}, {3, 1}, {4, 1}, {5, 1}, {6, 1}, {7, 0}});
  EXPECT_THROW(load_csv(neg.string(), 1.0), FormatError);

  const auto few = scratch("few.csv");
  write_rows(few, {{0, 0}, {1, 1}, {2, 1}, {3, 0}});
  EXPECT_THROW(load_csv(few.string(), 1.0), FormatError);

  const auto order = scratch("order.csv");
  write_rows(order, {{0, 0}, {1, 1}, {3, 1}, {2, 1}, {4, 1}, {5, 1}, {6, 1}, {7, 0}});
  EXPECT_THROW(load_csv(order.string(), 1.0), FormatError);

  const auto text = scratch("text.csv");
  {
    std::ofstream out(text);
    out << "x,density\n0,0\n1,abc\n";
  }
  EXPECT_THROW(load_csv(text.string(), 1.0), FormatError);
  EXPECT_THROW(load_csv(scratch("missing.csv").string(), 1.0), FormatError);
}

TEST(TargetCsv, ZeroMassIsInvalid) {
  auto x = uniform_nodes(0.0, 1.0, 16);
  EXPECT_THROW(from_samples(x, std::vector<double>(x.size(), 0.0), 1.0), InvalidTarget);
}

TEST(TargetCsv, NormalizesRawMass) {
  auto x = uniform_nodes(-1.0, 1.0, 256);
  std::vector<double> m(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) m[k] = 3.0 * (1.0 - x[k] * x[k]);
  const auto t = from_samples(x, m, 1.0);
  EXPECT_NEAR(t.raw_mass(), 4.0, 1e-10);
  EXPECT_NEAR(t.mass(), 1.0, 1e-14);
  EXPECT_NEAR(t.density(0.0), 0.75, 1e-10);
}

TEST(PowerBump, CdfIsMonotoneAtRandomPoints) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto m = power_bump(-1.0, 1.0, 3.0);
  for (int k = 0; k < 200; ++k) {
    double x = u(rng), y = u(rng);
    if (x > y) std::swap(x, y);
    EXPECT_LE(m.cdf(x), m.cdf(y));
  }
}
