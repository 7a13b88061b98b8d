#pragma once

// Continuous rescaling t = e^tau, x = t^alpha eta:
//
//   mu(tau, eta) = t^alpha m(t, x),   v = t^(1 - 2 alpha) u,   w = v + alpha eta^2 / 2,
//   gamma_hat(tau, y) = t^-alpha gamma(t, y).
//
// The self-similar solution is the fixed point mu = phi, gamma_hat = y,
// w_eta = 0. Diagnostics here measure the distance to it.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "dmfp/errors.hpp"
#include "dmfp/fields.hpp"
#include "dmfp/lagrangian.hpp"
#include "dmfp/numerics.hpp"
#include "dmfp/profile.hpp"
#include "dmfp/solver.hpp"

namespace dmfp {

struct RescaledState {
  double tau = 0.0;
  double t = 0.0;
  // All snapshot nodes, exterior included, in increasing eta.
  std::vector<double> eta, mu, v, w, w_eta;
  std::vector<bool> exterior;
  // Support nodes are eta[first .. first + y.size()).
  std::size_t first = 0;
  std::vector<double> y, gamma_hat;

  double support_left() const { return gamma_hat.front(); }
  double support_right() const { return gamma_hat.back(); }
  /// w_eta restricted to the support nodes.
  std::vector<double> w_eta_support() const {
    return {w_eta.begin() + static_cast<std::ptrdiff_t>(first),
            w_eta.begin() + static_cast<std::ptrdiff_t>(first + y.size())};
  }
  std::vector<double> w_support() const {
    return {w.begin() + static_cast<std::ptrdiff_t>(first), w.begin() + static_cast<std::ptrdiff_t>(first + y.size())};
  }
};

inline RescaledState rescale_snapshot(const EulerianSnapshot& s, const Profile& p) {
  if (!(s.t > 0.0)) throw InvalidParameter("rescaling needs t > 0");
  const double a = p.alpha();
  const double ta = std::pow(s.t, a);
  const double tv = std::pow(s.t, 1.0 - 2.0 * a);
  const double tw = std::pow(s.t, 1.0 - a);
  RescaledState r;
  r.t = s.t;
  r.tau = std::log(s.t);
  r.first = s.first;
  r.y = s.y;
  r.exterior = s.exterior;
  const std::size_t n = s.x.size();
  r.eta.resize(n), r.mu.resize(n), r.v.resize(n), r.w.resize(n), r.w_eta.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    r.eta[k] = s.x[k] / ta;
    r.mu[k] = ta * s.m[k];
    r.v[k] = tv * s.u[k];
    r.w[k] = r.v[k] + 0.5 * a * r.eta[k] * r.eta[k];
    // w_eta = t^(1 - alpha) u_x + alpha eta. Differencing w in eta instead
    // loses the small difference of two O(1) terms to the O(h^2) error of u.
    r.w_eta[k] = tw * s.ux[k] + a * r.eta[k];
  }
  const std::size_t last = s.first + s.y.size();
  r.gamma_hat.assign(r.eta.begin() + static_cast<std::ptrdiff_t>(s.first),
                     r.eta.begin() + static_cast<std::ptrdiff_t>(last));
  return r;
}

/// int mu |w_eta|^2 in label form, sum_j K_j w_eta(gamma_hat_j)^2.
inline double kinetic_integral(const RescaledState& s, const CellMoments& c) {
  auto q = s.w_eta_support();
  for (double& x : q) x *= x;
  return lumped(c, q);
}

/// Lyapunov functional. Integrals against mu are taken in label form with
/// the solver's quadrature: kinetic and moment terms with the nodal weights
/// K_j, the power term as sum_k int_cell phi^(theta+1) / slope_k^theta. The
/// identity map gives H = 0 up to rounding, and the first variation vanishes
/// there, so H is not polluted by first-order quadrature error near the
/// fixed point.
inline double lyapunov(const RescaledState& s, const Profile& p, const CellMoments& c) {
  const double th = p.theta();
  const double kin = 0.5 * kinetic_integral(s, c);
  const double pot = pushforward_power_integral(c, s.gamma_hat, th) / (th + 1.0);
  std::vector<double> g2(s.gamma_hat);
  for (double& x : g2) x *= x;
  const double mom = p.c() * lumped(c, g2);
  const double r2 = p.r_alpha() * p.r_alpha();
  return kin - pot - mom - th / (th + 1.0) * p.phi_power_mass() + p.c() * r2;
}

inline double lyapunov(const RescaledState& s, const Profile& p) {
  return lyapunov(s, p, cell_moments(p, s.y));
}

/// Right-hand side of the Lyapunov derivative identity, -(2 alpha - 1) int mu |w_eta|^2.
inline double lyapunov_derivative_identity(const RescaledState& s, const Profile& p, const CellMoments& c) {
  return -(2.0 * p.alpha() - 1.0) * kinetic_integral(s, c);
}

/// Piecewise-linear interpolation of w over all snapshot nodes; outside the
/// node range the end value is held.
inline double interpolate_w(const RescaledState& s, double eta) {
  if (eta <= s.eta.front()) return s.w.front();
  if (eta >= s.eta.back()) return s.w.back();
  const std::size_t k = num::locate(s.eta, eta);
  const double z = (eta - s.eta[k]) / (s.eta[k + 1] - s.eta[k]);
  return (1.0 - z) * s.w[k] + z * s.w[k + 1];
}

/// int w (mu - phi) d eta. The mu part is taken in label form; the phi part
/// integrates the interpolated w against phi on each node interval clipped
/// to [-R, R].
inline double duality_pairing(const RescaledState& s, const Profile& p, const CellMoments& c) {
  const double first = phi_weighted_mean(c, s.w_support());
  const double R = p.r_alpha();
  std::vector<double> cuts{-R};
  for (double e : s.eta)
    if (e > -R && e < R) cuts.push_back(e);
  cuts.push_back(R);
  double second = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double lo = cuts[k], hi = cuts[k + 1];
    second += num::integrate_singular(
        [&](double e, double da, double db) {
          const double ph = std::pow(p.c() * (R + lo + da) * (R - hi + db), 1.0 / p.theta());
          return interpolate_w(s, e) * ph;
        },
        lo, hi);
  }
  return first - second;
}

inline double duality_pairing(const RescaledState& s, const Profile& p) {
  return duality_pairing(s, p, cell_moments(p, s.y));
}

/// Residual of the rescaled flow equation
///   alpha (alpha - 1) g + (2 alpha - 1) g_tau + g_tau_tau
///     + theta phi^theta g_yy / g_y^(2 + theta) - (phi^theta)_y / g_y^(theta + 1)
/// on rows tau[1 .. n-2] and labels 1 .. ny-1 (other entries are 0). Rows of
/// `g` are slices gamma_hat(tau_i, .) on the uniform labels y.
struct HatGammaResidual {
  std::vector<double> tau, y;
  std::vector<double> r;  // row-major, tau.size() x y.size()
  double at(std::size_t i, std::size_t j) const { return r[i * y.size() + j]; }
  double sup() const { return num::max_abs(r); }
};

inline HatGammaResidual hat_gamma_residual(const std::vector<double>& tau, const std::vector<double>& y,
                                           const std::vector<double>& g, const Profile& p) {
  const std::size_t nt = tau.size(), ny = y.size();
  if (g.size() != nt * ny) throw InvalidParameter("rescaled flow has the wrong shape");
  if (nt < 3 || ny < 3) throw InvalidParameter("rescaled flow needs at least three rows and labels");
  const double a = p.alpha(), th = p.theta();
  const double h = (y.back() - y.front()) / static_cast<double>(ny - 1);
  HatGammaResidual out{tau, y, std::vector<double>(nt * ny, 0.0)};
  for (std::size_t i = 1; i + 1 < nt; ++i) {
    const std::array<double, 3> tt{tau[i - 1], tau[i], tau[i + 1]};
    for (std::size_t j = 1; j + 1 < ny; ++j) {
      const double gm = g[(i - 1) * ny + j], g0 = g[i * ny + j], gp = g[(i + 1) * ny + j];
      const double g_tau = num::d1_three_point(tt, {gm, g0, gp}, 1);
      const double g_tt = num::d2_three_point(tt, {gm, g0, gp});
      const double gl = g[i * ny + j - 1], gr = g[i * ny + j + 1];
      const double gy = (gr - gl) / (2.0 * h);
      const double gyy = (gr - 2.0 * g0 + gl) / (h * h);
      if (!(gy > 0.0)) throw DegenerateState("rescaled flow is not increasing in y");
      const double pt = p.phi_theta(y[j]), pty = p.phi_theta_y(y[j]);
      out.r[i * ny + j] = a * (a - 1.0) * g0 + (2.0 * a - 1.0) * g_tau + g_tt +
                          th * pt * gyy / std::pow(gy, 2.0 + th) - pty / std::pow(gy, th + 1.0);
    }
  }
  return out;
}

/// Same residual for a solved flow: gamma_hat = t^-alpha gamma on the slices
/// with t > 0, tau = log t.
inline HatGammaResidual hat_gamma_residual(const FlowField& f, const Profile& p) {
  const auto& gr = f.grid;
  std::vector<double> tau, g;
  for (int i = 0; i <= gr.nt(); ++i) {
    const double t = gr.t[static_cast<std::size_t>(i)];
    if (!(t > 0.0)) continue;
    tau.push_back(std::log(t));
    const double s = std::pow(t, -p.alpha());
    for (int j = 0; j <= gr.ny(); ++j) g.push_back(s * f.at(i, j));
  }
  return hat_gamma_residual(tau, gr.y, g, p);
}

/// Flux-form residual of the stationary equation
///   (alpha (alpha - 1) / 2 (xi^2) - phi^theta / xi_y^theta)_y = 0
/// at interior labels. Cell fluxes use the midpoint of xi and the cell slope,
/// so xi(y) = y cancels exactly.
inline std::vector<double> stationary_residual(const std::vector<double>& xi, const std::vector<double>& y,
                                               const Profile& p) {
  const std::size_t n = y.size();
  if (xi.size() != n || n < 3) throw InvalidParameter("stationary residual needs matching samples");
  const double a = p.alpha(), th = p.theta();
  const double h = (y.back() - y.front()) / static_cast<double>(n - 1);
  std::vector<double> flux(n - 1);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double s = (xi[k + 1] - xi[k]) / h;
    if (!(s > 0.0)) throw DegenerateState("stationary residual needs an increasing map");
    const double mid = 0.5 * (xi[k] + xi[k + 1]);
    const double ym = 0.5 * (y[k] + y[k + 1]);
    flux[k] = 0.5 * a * (a - 1.0) * mid * mid - p.phi_theta(ym) / std::pow(s, th);
  }
  std::vector<double> r(n, 0.0);
  for (std::size_t j = 1; j + 1 < n; ++j) r[j] = (flux[j] - flux[j - 1]) / h;
  return r;
}

/// One row of the rescaled diagnostics.
struct SeriesRow {
  double tau = 0.0, t = 0.0;
  double H = 0.0, dH_fd = 0.0, dH_identity = 0.0;
  double d1 = 0.0, d2 = 0.0;
  double mu_max = 0.0, osc_w = 0.0;
  double supp_left = 0.0, supp_right = 0.0;
  double recip_integral = 0.0, duality_pairing = 0.0;
  // Uniqueness-class certificates, each expected to stay bounded as t -> 0.
  double osc_v_profile = 0.0;     // t^(1 - 2 alpha) osc of u over |x| <= R t^alpha
  double pairing_envelope = 0.0;  // |int w (mu - phi)| e^(-2 kappa tau)
  double support_envelope = 0.0;  // (|a(t)| + |b(t)|) t^-alpha
  // Sup over labels of |gamma_hat - y|.
  double flow_deviation = 0.0;
};

struct RescaledDiagnostics {
  std::vector<SeriesRow> rows;  // every slice with t > 0
  double t_min = 0.0;           // start of the trusted window (10 eps)

  std::vector<SeriesRow> window(double t_lo, double t_hi) const {
    std::vector<SeriesRow> out;
    for (const auto& r : rows)
      if (r.t >= t_lo && r.t <= t_hi) out.push_back(r);
    return out;
  }
};

inline SeriesRow series_row(const RescaledState& s, const Profile& p, const CellMoments& c) {
  SeriesRow r;
  r.tau = s.tau;
  r.t = s.t;
  r.H = lyapunov(s, p, c);
  r.dH_identity = lyapunov_derivative_identity(s, p, c);
  std::vector<double> diff(s.y.size());
  for (std::size_t j = 0; j < diff.size(); ++j) diff[j] = s.gamma_hat[j] - s.y[j];
  r.d1 = phi_weighted_abs(p, c, diff);
  r.d2 = std::sqrt(phi_weighted_square(c, diff));
  r.flow_deviation = num::max_abs(diff);
  const auto ws = s.w_support();
  r.mu_max = *std::max_element(s.mu.begin(), s.mu.end());
  r.osc_w = *std::max_element(ws.begin(), ws.end()) - *std::min_element(ws.begin(), ws.end());
  r.supp_left = s.support_left();
  r.supp_right = s.support_right();
  r.recip_integral = pushforward_reciprocal_integral(c, s.gamma_hat, p.theta());
  r.duality_pairing = duality_pairing(s, p, c);
  double vmin = std::numeric_limits<double>::infinity(), vmax = -vmin;
  for (std::size_t k = 0; k < s.eta.size(); ++k)
    if (std::abs(s.eta[k]) <= p.r_alpha()) {
      vmin = std::min(vmin, s.v[k]);
      vmax = std::max(vmax, s.v[k]);
    }
  r.osc_v_profile = vmax >= vmin ? vmax - vmin : 0.0;
  r.pairing_envelope = std::abs(r.duality_pairing) * std::exp(-2.0 * p.kappa() * s.tau);
  r.support_envelope = std::abs(r.supp_left) + std::abs(r.supp_right);
  return r;
}

/// Rescaled series over all slices with t > 0. dH_fd differentiates H in
/// tau with nonuniform three-point stencils.
inline RescaledDiagnostics rescaled_series(const FlowField& f, const Profile& p, const ValueField& v,
                                           const ValueExtension* ext) {
  const auto c = cell_moments(p, f.grid.y);
  RescaledDiagnostics d;
  d.t_min = 10.0 * f.grid.eps;
  std::vector<double> tau, H;
  for (int i = 0; i <= f.grid.nt(); ++i) {
    if (!(f.grid.t[static_cast<std::size_t>(i)] > 0.0)) continue;
    const auto snap = snapshot(f, p, v, ext, i);
    d.rows.push_back(series_row(rescale_snapshot(snap, p), p, c));
    tau.push_back(d.rows.back().tau);
    H.push_back(d.rows.back().H);
  }
  const auto dH = num::derivative(tau, H, 3);
  for (std::size_t k = 0; k < d.rows.size(); ++k) d.rows[k].dH_fd = dH[k];
  return d;
}

}  // namespace dmfp
