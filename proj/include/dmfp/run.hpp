#pragma once

// End-to-end pipeline: target -> solver -> fields -> rescaled diagnostics ->
// rate report, with the certificates a run is judged by.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "dmfp/errors.hpp"
#include "dmfp/fields.hpp"
#include "dmfp/metrics.hpp"
#include "dmfp/profile.hpp"
#include "dmfp/rescale.hpp"
#include "dmfp/solver.hpp"
#include "dmfp/target.hpp"

namespace dmfp {

struct TargetSpec {
  std::string kind = "power_bump";  // power_bump | self_similar | file
  double a = -1.0, b = 1.0;
  std::string path;
};

struct RunConfig {
  double theta = 1.0;
  double eps = 1e-3;
  double T = 1.0;
  int nt = 128;
  int ny = 128;
  TargetSpec target;
  SolverConfig solver;
  std::optional<double> fit_t_min, fit_t_max;  // default [10 eps, T / 4]
  std::string output = "run";
  bool strict = false;
  std::uint64_t seed = 0;
  int snapshot_stride = 8;  // write every k-th slice (first and last always)

  double t_lo() const { return fit_t_min.value_or(10.0 * eps); }
  double t_hi() const { return fit_t_max.value_or(0.25 * T); }

  void validate() const {
    if (!(theta > 0.0) || !std::isfinite(theta)) throw InvalidParameter("theta must be positive");
    if (!(eps > 0.0) || !std::isfinite(eps)) throw InvalidParameter("eps must be positive");
    if (!(T > 0.0) || !std::isfinite(T)) throw InvalidParameter("T must be positive");
    if (nt < 16 || ny < 16) throw InvalidParameter("nt and ny must be at least 16");
    if (ny % 2 != 0) throw InvalidParameter("ny must be even");
    if (target.kind != "power_bump" && target.kind != "self_similar" && target.kind != "file")
      throw InvalidParameter("target.kind must be power_bump, self_similar or file");
    if (target.kind == "power_bump" && !(target.a < target.b)) throw InvalidParameter("target needs a < b");
    if (target.kind == "file" && target.path.empty()) throw InvalidParameter("target.path is required for file targets");
    if (snapshot_stride < 1) throw InvalidParameter("snapshot_stride must be at least 1");
    if (!(t_lo() > 0.0 && t_lo() < t_hi() && t_hi() <= T)) throw InvalidParameter("fit window must satisfy 0 < t_min < t_max <= T");
    solver.validate();
  }
};

/// Acceptance thresholds applied under --strict.
struct CertificateThresholds {
  double mass = 1e-6;
  double continuity = 5e-3;
  double hj_interior = 5e-3;
  double hj_exterior = 5e-3;
};

struct Certificates {
  double mass_error = 0.0;       // max over slices of the pushforward CDF error
  double mass_total_error = 0.0; // max over slices of |total mass - 1|
  double continuity = 0.0;       // max weak residual over the test functions
  double hj_interior = 0.0;
  double hj_exterior = std::numeric_limits<double>::quiet_NaN();
  double exterior_ux_max = std::numeric_limits<double>::quiet_NaN();
  double boundary_speed_max = 0.0;
  double glue_mismatch = std::numeric_limits<double>::quiet_NaN();
  double terminal_pairing = 0.0;
  int sign_violations_left = 0, sign_violations_right = 0;
  bool compatibility = false;
  bool extension_built = false;
  std::string extension_error;
  double stationary_residual = 0.0;  // at the earliest trusted slice

  std::vector<std::string> failures(const CertificateThresholds& th = {}) const {
    std::vector<std::string> f;
    if (!(mass_error <= th.mass && mass_total_error <= th.mass)) f.push_back("mass");
    if (!(continuity <= th.continuity)) f.push_back("continuity");
    if (!(hj_interior <= th.hj_interior)) f.push_back("hj_interior");
    if (!extension_built) f.push_back("extension");
    else if (!(hj_exterior <= th.hj_exterior)) f.push_back("hj_exterior");
    if (sign_violations_left + sign_violations_right > 0) f.push_back("boundary_convexity");
    if (!compatibility) f.push_back("compatibility");
    return f;
  }
};

struct RunResult {
  RunConfig config;
  Profile profile;
  TerminalDensity target;
  SolveResult solved;
  ValueField value;
  BoundaryHistory boundary;
  std::optional<ValueExtension> extension;
  RescaledDiagnostics rescaled;
  std::vector<ScalingRow> scaling;
  RateReport rates;
  Certificates certificates;
  double seconds = 0.0;

  const FlowField& flow() const { return solved.flow; }
};

inline TerminalDensity make_target(const RunConfig& c, const Profile& p) {
  if (c.target.kind == "power_bump") return power_bump(c.target.a, c.target.b, c.theta);
  if (c.target.kind == "self_similar") return self_similar_terminal(p, c.T, c.eps);
  return load_csv(c.target.path, c.theta);
}

inline RunResult run_pipeline(const RunConfig& config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  RunResult r;
  r.config = config;
  r.profile = make_profile(config.theta);
  const auto& p = r.profile;
  r.target = make_target(config, p);
  const auto grid = make_grid(p, config.eps, config.T, config.nt, config.ny);
  r.solved = solve(p, r.target, grid, config.solver);
  const auto& f = r.solved.flow;

  r.value = value_on_support(f, p, r.target);
  r.boundary = free_boundaries(f, p.alpha());
  auto& c = r.certificates;
  try {
    r.extension = ValueExtension::build(f, r.value, r.boundary);
    c.extension_built = true;
  } catch (const CrossingCharacteristics& e) {
    c.extension_error = e.what();
  }

  for (int i = 0; i <= grid.nt(); ++i) {
    const auto [err, total] = mass_check(f, p, i);
    c.mass_error = std::max(c.mass_error, err);
    c.mass_total_error = std::max(c.mass_total_error, std::abs(total - 1.0));
  }
  c.continuity = num::max_abs(continuity_residual(f, p));
  c.hj_interior = num::max_abs(hj_residual(f, p, r.value));
  if (r.extension) {
    double uxm = 0.0;
    c.hj_exterior = exterior_hj_residual(f, *r.extension, &uxm);
    c.exterior_ux_max = uxm;
    c.glue_mismatch = r.extension->glue_mismatch(f, r.value);
  }
  for (std::size_t i = 0; i < r.boundary.t.size(); ++i)
    c.boundary_speed_max =
        std::max({c.boundary_speed_max, std::abs(r.boundary.dgL[i]), std::abs(r.boundary.dgR[i])});
  for (int i = 1; i < grid.nt(); ++i) {
    const auto ii = static_cast<std::size_t>(i);
    if (!(r.boundary.ddgL[ii] > 0.0)) ++c.sign_violations_left;
    if (!(r.boundary.ddgR[ii] < 0.0)) ++c.sign_violations_right;
  }
  c.terminal_pairing = r.value.terminal_pairing;
  c.compatibility = r.target.compatibility().pass;

  r.rescaled = rescaled_series(f, p, r.value, r.extension ? &*r.extension : nullptr);
  for (int i = 0; i <= grid.nt(); ++i) {
    const double t = grid.t[static_cast<std::size_t>(i)];
    if (t < r.rescaled.t_min) continue;
    std::vector<double> xi(grid.y.size());
    const double s = std::pow(t, -p.alpha());
    for (int j = 0; j <= grid.ny(); ++j) xi[static_cast<std::size_t>(j)] = s * f.at(i, j);
    c.stationary_residual = num::max_abs(stationary_residual(xi, grid.y, p));
    break;
  }

  r.scaling = scaling_series(f, p, r.value);
  r.rates = rate_report(r.scaling, r.rescaled, p, config.eps, config.t_lo(), config.t_hi());
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

/// d_1 between the densities of two runs on the same label grid at time t.
inline double cauchy_distance(const RunResult& a, const RunResult& b, double t) {
  if (a.flow().grid.ny() != b.flow().grid.ny() || a.config.theta != b.config.theta)
    throw InvalidParameter("runs must share theta and the label grid");
  const auto c = cell_moments(a.profile, a.flow().grid.y);
  return wasserstein_pushforward(a.profile, c, interpolate_slice(a.flow(), t), interpolate_slice(b.flow(), t), 1);
}

}  // namespace dmfp
