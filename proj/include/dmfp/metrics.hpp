#pragma once

// Wasserstein distances in one dimension and power-law / exponential rate
// fits for the scaling laws.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/statistics/linear_regression.hpp>

#include "dmfp/errors.hpp"
#include "dmfp/fields.hpp"
#include "dmfp/lagrangian.hpp"
#include "dmfp/numerics.hpp"
#include "dmfp/profile.hpp"
#include "dmfp/rescale.hpp"
#include "dmfp/solver.hpp"
#include "dmfp/target.hpp"

namespace dmfp {

/// A probability measure on the line through its quantile function. `breaks`
/// are increasing levels from 0 to 1 between which Q is smooth; quadrature
/// panels are aligned with them.
struct QuantileTable {
  std::vector<double> breaks;
  std::function<double(double)> Q;
};

inline QuantileTable quantile_table(const TerminalDensity& m) {
  return {m.cdf_nodes(), [&m](double q) { return m.quantile(q); }};
}

inline QuantileTable quantile_table(const Profile& p, int panels = 64) {
  std::vector<double> b(static_cast<std::size_t>(panels) + 1);
  for (int k = 0; k <= panels; ++k)
    b[static_cast<std::size_t>(k)] = p.cdf(-p.r_alpha() + 2.0 * p.r_alpha() * k / panels);
  b.front() = 0.0;
  b.back() = 1.0;
  return {std::move(b), [&p](double q) { return p.quantile(q); }};
}

/// Pushforward of phi by the piecewise-affine label map through (y_j, g_j).
inline QuantileTable quantile_table(const Profile& p, const std::vector<double>& y, const std::vector<double>& g) {
  std::vector<double> b(y.size());
  for (std::size_t j = 0; j < y.size(); ++j) b[j] = p.cdf(y[j]);
  b.front() = 0.0;
  b.back() = 1.0;
  return {std::move(b), [&p, &y, &g](double q) {
            const double yy = p.quantile(q);
            const std::size_t k = num::locate(y, yy);
            const double z = (yy - y[k]) / (y[k + 1] - y[k]);
            return (1.0 - z) * g[k] + z * g[k + 1];
          }};
}

/// d_p = (int_0^1 |Q_u - Q_v|^p dq)^(1/p), p in {1, 2}, with one quadrature
/// panel per pair of consecutive breaks of either measure.
inline double wasserstein(const QuantileTable& u, const QuantileTable& v, int order, double tol = 1e-12) {
  if (order != 1 && order != 2) throw InvalidParameter("Wasserstein order must be 1 or 2");
  for (const auto* t : {&u, &v})
    if (t->breaks.size() < 2 || std::abs(t->breaks.front()) > 1e-9 || std::abs(t->breaks.back() - 1.0) > 1e-9)
      throw InvalidParameter("quantile table is not normalized");
  std::vector<double> cuts(u.breaks);
  cuts.insert(cuts.end(), v.breaks.begin(), v.breaks.end());
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  double s = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double lo = std::max(cuts[k], 0.0), hi = std::min(cuts[k + 1], 1.0);
    if (!(hi > lo)) continue;
    s += num::integrate_singular(
        [&](double q, double, double) {
          const double d = std::abs(u.Q(q) - v.Q(q));
          return order == 1 ? d : d * d;
        },
        lo, hi, tol);
  }
  return order == 1 ? s : std::sqrt(s);
}

/// Same distance for two pushforwards of phi by piecewise-affine label maps
/// on the grid of `c`: (int |g - h|^p phi dy)^(1/p).
inline double wasserstein_pushforward(const Profile& p, const CellMoments& c, const std::vector<double>& g,
                                      const std::vector<double>& h, int order) {
  if (order != 1 && order != 2) throw InvalidParameter("Wasserstein order must be 1 or 2");
  if (g.size() != c.y.size() || h.size() != c.y.size()) throw InvalidParameter("label maps do not match the grid");
  std::vector<double> d(g.size());
  for (std::size_t j = 0; j < d.size(); ++j) d[j] = g[j] - h[j];
  return order == 1 ? phi_weighted_abs(p, c, d) : std::sqrt(phi_weighted_square(c, d));
}

// ---------------------------------------------------------------------------
// Rate fits

enum class FitKind { power, exponential };

struct RateFit {
  double exponent = 0.0;
  double log_prefactor = 0.0;
  double r_squared = 0.0;
  double window_lo = 0.0, window_hi = 0.0;
  int n_points = 0;
};

/// Least squares of log(value) on log(abscissa) (power) or on the abscissa
/// itself (exponential), over points with abscissa in [lo, hi].
inline RateFit fit_rate(const std::vector<double>& x, const std::vector<double>& value, FitKind kind, double lo,
                        double hi) {
  if (x.size() != value.size()) throw InvalidParameter("fit series lengths differ");
  std::vector<double> X, Y;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!(x[k] >= lo && x[k] <= hi)) continue;
    if (!(value[k] > 0.0)) throw InvalidParameter("fit needs strictly positive values in the window");
    if (kind == FitKind::power && !(x[k] > 0.0)) throw InvalidParameter("power fit needs positive abscissae");
    X.push_back(kind == FitKind::power ? std::log(x[k]) : x[k]);
    Y.push_back(std::log(value[k]));
  }
  if (X.size() < 4) throw InvalidParameter("fit window holds fewer than 4 points");
  auto [c0, c1, r2] = boost::math::statistics::simple_ordinary_least_squares_with_R_squared(X, Y);
  RateFit f;
  f.exponent = c1;
  f.log_prefactor = c0;
  f.r_squared = std::clamp(r2, 0.0, 1.0);
  if (!std::isfinite(r2)) f.r_squared = 1.0;  // constant log-values: the fit is exact
  f.window_lo = lo;
  f.window_hi = hi;
  f.n_points = static_cast<int>(X.size());
  return f;
}

// ---------------------------------------------------------------------------
// Scaling series in t and the rate report

struct ScalingRow {
  double t = 0.0;
  double support_radius = 0.0;  // (gamma_R - gamma_L) / 2
  double m_inf = 0.0;
  double m_power = 0.0;         // int m^(theta+1)
  double osc_u = 0.0;           // over the support
  double ux_inf = 0.0;          // over the support
};

inline std::vector<ScalingRow> scaling_series(const FlowField& f, const Profile& p, const ValueField& v) {
  const auto c = cell_moments(p, f.grid.y);
  const auto gt = flow_velocity(f);
  const int nt = f.grid.nt(), ny = f.grid.ny();
  const auto w = static_cast<std::size_t>(ny) + 1;
  std::vector<ScalingRow> out;
  for (int i = 0; i <= nt; ++i) {
    ScalingRow r;
    r.t = f.grid.t[static_cast<std::size_t>(i)];
    r.support_radius = 0.5 * (f.at(i, ny) - f.at(i, 0));
    const auto [x, m] = density(f, p, i);
    r.m_inf = *std::max_element(m.begin(), m.end());
    r.m_power = pushforward_power_integral(c, f.row(i), p.theta());
    double umin = v.at(f, i, 0), umax = umin, ux = 0.0;
    for (int j = 0; j <= ny; ++j) {
      umin = std::min(umin, v.at(f, i, j));
      umax = std::max(umax, v.at(f, i, j));
      ux = std::max(ux, std::abs(gt[static_cast<std::size_t>(i) * w + static_cast<std::size_t>(j)]));
    }
    r.osc_u = umax - umin;
    r.ux_inf = ux;
    out.push_back(r);
  }
  return out;
}

struct RateEntry {
  std::string law;
  std::optional<double> theoretical_exponent;
  std::optional<RateFit> fit;
  bool pass = false;
  std::string note;  // why a law was skipped or failed to fit
};

struct RateReport {
  double theta = 0.0, kappa = 0.0;
  bool critical = false;
  std::vector<RateEntry> entries;
  double tolerance = 0.1;

  const RateEntry* find(const std::string& law) const {
    for (const auto& e : entries)
      if (e.law == law) return &e;
    return nullptr;
  }
  bool all_pass() const {
    return std::all_of(entries.begin(), entries.end(),
                       [](const RateEntry& e) { return e.pass || !e.theoretical_exponent; });
  }
};

/// Fits every scaling law over t in [t_lo, t_hi]. Laws in t are fitted
/// against t + eps; laws in tau against tau = log t. Pass means the fitted
/// exponent is within `tolerance` (relative) of the theoretical one.
inline RateReport rate_report(const std::vector<ScalingRow>& scaling, const RescaledDiagnostics& rescaled,
                              const Profile& p, double eps, double t_lo, double t_hi, double tolerance = 0.1) {
  RateReport rep;
  rep.theta = p.theta();
  rep.kappa = p.kappa();
  rep.critical = p.theta() == 2.0;
  rep.tolerance = tolerance;
  const double a = p.alpha(), kappa = p.kappa();

  auto judge = [&](RateEntry& e) {
    if (e.fit && e.theoretical_exponent)
      e.pass = std::abs(e.fit->exponent - *e.theoretical_exponent) <= tolerance * std::abs(*e.theoretical_exponent);
  };
  auto fit_entry = [&](const std::string& law, double expo, const std::vector<double>& x, const std::vector<double>& val,
                       FitKind kind, double lo, double hi) {
    RateEntry e;
    e.law = law;
    e.theoretical_exponent = expo;
    try {
      e.fit = fit_rate(x, val, kind, lo, hi);
    } catch (const InvalidParameter& err) {
      e.note = err.what();
    }
    judge(e);
    rep.entries.push_back(std::move(e));
  };

  std::vector<double> ts, radius, minf, mpow, osc, ux;
  for (const auto& r : scaling) {
    ts.push_back(r.t + eps);
    radius.push_back(r.support_radius);
    minf.push_back(r.m_inf);
    mpow.push_back(r.m_power);
    osc.push_back(r.osc_u);
    ux.push_back(r.ux_inf);
  }
  const double lo = t_lo + eps, hi = t_hi + eps;
  fit_entry("support_radius", a, ts, radius, FitKind::power, lo, hi);
  fit_entry("m_inf", -a, ts, minf, FitKind::power, lo, hi);
  fit_entry("m_power", -a * p.theta(), ts, mpow, FitKind::power, lo, hi);
  if (rep.critical) {
    rep.entries.push_back({"osc_u", std::nullopt, std::nullopt, false,
                           "critical: theta = 2, oscillation grows like |log t|; not fitted"});
  } else {
    fit_entry("osc_u", 2.0 * a - 1.0, ts, osc, FitKind::power, lo, hi);
  }
  fit_entry("ux_inf", a - 1.0, ts, ux, FitKind::power, lo, hi);

  std::vector<double> tau, H, d2, pair;
  for (const auto& r : rescaled.rows) {
    tau.push_back(r.tau);
    H.push_back(r.H);
    d2.push_back(r.d2);
    pair.push_back(std::abs(r.duality_pairing));
  }
  const double tau_lo = std::log(t_lo), tau_hi = std::log(t_hi);
  for (auto [law, expo, series] : {std::tuple{"H", 2.0 * kappa, &H}, std::tuple{"d2", kappa, &d2},
                                   std::tuple{"duality_pairing", 2.0 * kappa, &pair}}) {
    if (rep.critical) {
      rep.entries.push_back({law, std::nullopt, std::nullopt, false, "critical: kappa = 0, no exponential fit"});
    } else if (kappa < 0.0) {
      rep.entries.push_back({law, std::nullopt, std::nullopt, false, "subcritical: exponential rate applies to theta > 2 only"});
    } else {
      fit_entry(law, expo, tau, *series, FitKind::exponential, tau_lo, tau_hi);
    }
  }
  return rep;
}

}  // namespace dmfp
