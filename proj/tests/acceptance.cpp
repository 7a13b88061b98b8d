// Acceptance suite: one PASS/FAIL line per criterion. Two criteria are known
// to fail (see README.md, "Known failing criteria"); the exit status is 0 when
// every outcome matches its recorded expectation, so an unexpected pass is
// reported as loudly as an unexpected failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <future>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dmfp/run.hpp"

using namespace dmfp;

namespace {

struct Outcome {
  int id;
  bool pass;
  bool expected;
  std::string detail;
};

std::string fmt4(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%.4g", v);
  return b;
}

bool within(double value, double target, double rel) { return std::abs(value - target) <= rel * std::abs(target); }

RunConfig config(double theta, double eps, int n, const std::string& kind = "power_bump") {
  RunConfig c;
  c.theta = theta;
  c.eps = eps;
  c.nt = c.ny = n;
  c.target.kind = kind;
  return c;
}

double sup_error_to_self_similar(const FlowField& f, const Profile& p) {
  const auto exact = self_similar_flow(p, f.grid);
  double e = 0.0;
  for (std::size_t k = 0; k < f.gamma.size(); ++k) e = std::max(e, std::abs(f.gamma[k] - exact.gamma[k]));
  return e;
}

struct OracleRun {
  double error = 0.0, seconds = 0.0;
};

OracleRun oracle(double theta, int n) {
  const auto p = make_profile(theta);
  const auto m = self_similar_terminal(p, 1.0, 1e-3);
  const auto start = std::chrono::steady_clock::now();
  const auto r = solve(p, m, make_grid(p, 1e-3, 1.0, n, n));
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {sup_error_to_self_similar(r.flow, p), s};
}

std::optional<double> exponent(const RunResult& r, const std::string& law) {
  const auto* e = r.rates.find(law);
  if (e && e->fit) return e->fit->exponent;
  return std::nullopt;
}

std::string show(std::optional<double> v) { return v ? fmt4(*v) : "none"; }

// Fraction of interior tau nodes with t >= 10 eps where the two dH/dtau routes agree to 5%.
double identity_fraction(const RunResult& r, int* total) {
  const auto& rows = r.rescaled.rows;
  int ok = 0;
  *total = 0;
  for (std::size_t k = 1; k + 1 < rows.size(); ++k) {
    if (rows[k].t < r.rescaled.t_min) continue;
    ++*total;
    if (std::abs(rows[k].dH_fd - rows[k].dH_identity) <= 0.05 * std::abs(rows[k].dH_identity)) ++ok;
  }
  return *total ? static_cast<double>(ok) / *total : 0.0;
}

}  // namespace

int main() {
  auto launch = [](RunConfig c) { return std::async(std::launch::async, [c] { return run_pipeline(c); }); };
  auto o64 = std::async(std::launch::async, [] { return oracle(1.0, 64); });
  auto o128 = std::async(std::launch::async, [] { return oracle(1.0, 128); });
  auto o2 = std::async(std::launch::async, [] { return oracle(2.0, 64); });
  auto f_e2 = launch(config(1.0, 1e-2, 128));
  auto f_e3 = launch(config(1.0, 1e-3, 128));
  auto f_e4 = launch(config(1.0, 1e-4, 128));
  auto f_s3 = launch(config(3.0, 1e-4, 128));
  auto f_s3b = launch(config(3.0, 1e-3, 128));
  auto f_c2 = launch(config(2.0, 1e-3, 64));

  std::vector<Outcome> out;

  {
    const auto a = o64.get(), b = o128.get();
    const double bound = 1e-4 * std::pow(1.0 + 1e-3, 2.0 / 3.0);
    const bool pass = a.error <= bound && a.error / b.error >= 3.0 && a.seconds <= 30.0;
    out.push_back({1, pass, true,
                   "sup error 64x64 " + fmt4(a.error) + " (bound " + fmt4(bound) + "), refinement ratio " +
                       fmt4(a.error / b.error) + ", solve " + fmt4(a.seconds) + " s"});
  }

  const auto e2 = f_e2.get(), e3 = f_e3.get(), e4 = f_e4.get();
  {
    const auto s = exponent(e4, "support_radius"), m = exponent(e4, "m_inf"), o = exponent(e4, "osc_u");
    const bool pass = s && within(*s, 2.0 / 3.0, 0.10) && m && within(*m, -2.0 / 3.0, 0.10) && o &&
                      within(*o, 1.0 / 3.0, 0.15);
    out.push_back({2, pass, false,
                   "theta 1, eps 1e-4, window [" + fmt4(e4.config.t_lo()) + ", " + fmt4(e4.config.t_hi()) +
                       "]: support " + show(s) + ", m_inf " + show(m) + ", osc_u " + show(o)});
  }

  const auto s3 = f_s3.get(), s3b = f_s3b.get();
  {
    const auto d2 = exponent(s3, "d2"), H = exponent(s3, "H"), pr = exponent(s3, "duality_pairing");
    double worst = -INFINITY;
    for (const auto& row : s3.rescaled.window(s3.config.t_lo(), s3.config.t_hi()))
      worst = std::max(worst, row.duality_pairing);
    const bool pass = d2 && within(*d2, 0.2, 0.10) && H && within(*H, 0.4, 0.15) && pr && within(*pr, 0.4, 0.20) &&
                      worst <= 1e-6;
    out.push_back({3, pass, false,
                   "theta 3, eps 1e-4: d2 " + show(d2) + ", H " + show(H) + ", |pairing| " + show(pr) +
                       ", max pairing " + fmt4(worst)});
  }

  {
    int n1 = 0, n3 = 0;
    const double q1 = identity_fraction(e3, &n1), q3 = identity_fraction(s3b, &n3);
    out.push_back({4, q1 >= 0.9 && q3 >= 0.9 && n1 > 0 && n3 > 0, true,
                   "agreement theta 1: " + fmt4(100 * q1) + "% of " + std::to_string(n1) + ", theta 3: " +
                       fmt4(100 * q3) + "% of " + std::to_string(n3)});
  }

  {
    const auto& c = e3.certificates;
    const bool pass = c.mass_error <= 1e-6 && c.mass_total_error <= 1e-6 && c.continuity <= 5e-3 &&
                      c.hj_interior <= 5e-3 && c.extension_built && c.hj_exterior <= 5e-3;
    out.push_back({5, pass, true,
                   "mass " + fmt4(std::max(c.mass_error, c.mass_total_error)) + ", continuity " + fmt4(c.continuity) +
                       ", hj interior " + fmt4(c.hj_interior) + ", hj exterior " + fmt4(c.hj_exterior)});
  }

  {
    bool pass = true;
    std::ostringstream d;
    for (double t : {0.05, 0.1, 0.5}) {
      const double a = cauchy_distance(e2, e3, t), b = cauchy_distance(e3, e4, t);
      pass = pass && b < a;
      d << "t " << t << ": " << fmt4(a) << " > " << fmt4(b) << "; ";
    }
    out.push_back({6, pass, true, d.str()});
  }

  {
    const auto& c = e3.certificates;
    const auto p = make_profile(1.0);
    std::vector<double> tau{-5.0, -4.0, -3.0, -2.0, -1.0}, g;
    const auto y = e3.flow().grid.y;
    for (std::size_t i = 0; i < tau.size(); ++i) g.insert(g.end(), y.begin(), y.end());
    const double id = hat_gamma_residual(tau, y, g, p).sup();
    double lo = INFINITY, hi = 0.0;
    for (const auto& row : e3.rescaled.window(e3.config.t_lo(), e3.config.t_hi()))
      lo = std::min(lo, row.recip_integral), hi = std::max(hi, row.recip_integral);
    const bool pass = c.sign_violations_left + c.sign_violations_right == 0 && id <= 1e-12 && hi / lo <= 2.0;
    out.push_back({7, pass, true,
                   "sign violations " + std::to_string(c.sign_violations_left + c.sign_violations_right) +
                       ", identity residual " + fmt4(id) + ", reciprocal integral ratio " + fmt4(hi / lo)});
  }

  {
    const auto c2 = f_c2.get();
    const auto o = o2.get();
    bool skipped = c2.rates.critical && c2.rates.kappa == 0.0;
    for (const char* law : {"H", "d2", "duality_pairing", "osc_u"}) {
      const auto* e = c2.rates.find(law);
      skipped = skipped && e && !e->fit && !e->theoretical_exponent;
    }
    const double bound = 1e-4 * std::pow(1.0 + 1e-3, 0.5);
    out.push_back({8, skipped && o.error <= bound, true,
                   "kappa " + fmt4(c2.rates.kappa) + ", exponential fits skipped " + (skipped ? "yes" : "no") +
                       ", self-similar sup error " + fmt4(o.error) + " (bound " + fmt4(bound) + ")"});
  }

  int mismatches = 0;
  for (const auto& o : out) {
    const bool match = o.pass == o.expected;
    if (!match) ++mismatches;
    std::printf("criterion %d: %s  %s%s\n", o.id, o.pass ? "PASS" : "FAIL", o.detail.c_str(),
                o.expected ? (match ? "" : "  [UNEXPECTED]")
                           : (match ? "  [known failure]" : "  [UNEXPECTED PASS of a known failure]"));
  }
  std::printf("%d of %zu criteria pass; %d outcome(s) differ from the recorded expectation\n",
              static_cast<int>(std::count_if(out.begin(), out.end(), [](const Outcome& o) { return o.pass; })),
              out.size(), mismatches);
  return mismatches == 0 ? 0 : 1;
}
