#pragma once

// Integrals against phi in label space. A slice of the flow is a monotone
// map of the labels, taken piecewise affine between nodes; its pushforward of
// phi is the reconstructed density. Integrals of polynomials in the map
// against phi reduce to per-cell moments of phi, computed once per grid.

#include <cmath>
#include <cstddef>
#include <vector>

#include "dmfp/errors.hpp"
#include "dmfp/numerics.hpp"
#include "dmfp/profile.hpp"
#include "dmfp/solver.hpp"

namespace dmfp {

struct CellMoments {
  std::vector<double> y;
  double h = 0.0;
  // Per cell [y_k, y_k+1], with s = y - y_k:
  std::vector<double> m0;     // int phi
  std::vector<double> m1;     // int s phi
  std::vector<double> m2;     // int s^2 phi
  std::vector<double> pw;     // int phi^(theta+1), symmetrized as in the solver
  std::vector<double> recip;  // int phi^(1-theta)
  // Nodal weights of the solver's kinetic term. sum_j K_j y_j^2 equals
  // int y^2 phi exactly, and the first variation of
  // sum_j K_j g_j^2 c + sum_k pw_k / slope_k^theta / (theta + 1) vanishes at
  // g = y, so energies built from K and pw are exact at the fixed point.
  std::vector<double> K;

  std::size_t cells() const { return m0.size(); }
};

namespace detail {

// int_{y_k}^{y_k+1} phi^power * s^q, s = y - y_k, with exact distances to +-R.
inline double phi_cell_integral(const Profile& p, double a, double b, double power, int q) {
  const double R = p.r_alpha();
  const double ra = R + a, rb = R - b;
  return num::integrate_singular(
      [&](double, double da, double db) {
        const double s = (ra + da) * (rb + db);
        if (!(s > 0.0)) return 0.0;
        const double f = std::pow(p.c() * s, power / p.theta());
        return q == 0 ? f : (q == 1 ? f * da : f * da * da);
      },
      a, b);
}

}  // namespace detail

/// Moments of phi on the cells of a uniform label grid spanning [-R, R].
inline CellMoments cell_moments(const Profile& p, const std::vector<double>& y) {
  if (y.size() < 3) throw InvalidParameter("label grid needs at least two cells");
  CellMoments c;
  c.y = y;
  c.h = (y.back() - y.front()) / static_cast<double>(y.size() - 1);
  const std::size_t n = y.size() - 1;
  c.m0.resize(n), c.m1.resize(n), c.m2.resize(n), c.recip.resize(n);
  auto w = make_weights(p, y);
  c.pw = std::move(w.P);
  c.K = std::move(w.K);
  for (std::size_t k = 0; k < n; ++k) {
    const double a = y[k], b = y[k + 1];
    c.m0[k] = detail::phi_cell_integral(p, a, b, 1.0, 0);
    c.m1[k] = detail::phi_cell_integral(p, a, b, 1.0, 1);
    c.m2[k] = detail::phi_cell_integral(p, a, b, 1.0, 2);
    c.recip[k] = detail::phi_cell_integral(p, a, b, 1.0 - p.theta(), 0);
  }
  return c;
}

/// sum_j K_j q_j: nodal quadrature of int q phi dy with the solver weights.
inline double lumped(const CellMoments& c, const std::vector<double>& q) {
  double s = 0.0;
  for (std::size_t j = 0; j < c.K.size(); ++j) s += c.K[j] * q[j];
  return s;
}

/// int q(y)^2 phi dy for q piecewise linear through the nodal values.
inline double phi_weighted_square(const CellMoments& c, const std::vector<double>& q) {
  double s = 0.0;
  for (std::size_t k = 0; k < c.cells(); ++k) {
    const double a = q[k], b = (q[k + 1] - q[k]) / c.h;
    s += a * a * c.m0[k] + 2.0 * a * b * c.m1[k] + b * b * c.m2[k];
  }
  return s;
}

/// int q(y) phi dy for q piecewise linear through the nodal values.
inline double phi_weighted_mean(const CellMoments& c, const std::vector<double>& q) {
  double s = 0.0;
  for (std::size_t k = 0; k < c.cells(); ++k) s += q[k] * c.m0[k] + (q[k + 1] - q[k]) / c.h * c.m1[k];
  return s;
}

/// int |q(y)| phi dy for q piecewise linear; cells where q changes sign are
/// split at the root.
inline double phi_weighted_abs(const Profile& p, const CellMoments& c, const std::vector<double>& q) {
  double s = 0.0;
  for (std::size_t k = 0; k < c.cells(); ++k) {
    const double a = q[k], b = q[k + 1];
    if ((a >= 0.0 && b >= 0.0) || (a <= 0.0 && b <= 0.0)) {
      s += std::abs(a * c.m0[k] + (b - a) / c.h * c.m1[k]);
      continue;
    }
    const double y0 = c.y[k], slope = (b - a) / c.h;
    const double root = y0 + (-a / slope);
    auto piece = [&](double lo, double hi) {
      const double R = p.r_alpha();
      return num::integrate_singular(
          [&](double yy, double da, double db) {
            const double ph = p.phi_theta(yy) > 0.0 ? std::pow(p.c() * (R + lo + da) * (R - hi + db), 1.0 / p.theta()) : 0.0;
            return std::abs(a + slope * (yy - y0)) * ph;
          },
          lo, hi);
    };
    s += piece(y0, root) + piece(root, c.y[k + 1]);
  }
  return s;
}

/// Slopes (g_k+1 - g_k) / h of a label map; throws if it is not increasing.
inline std::vector<double> cell_slopes(const CellMoments& c, const std::vector<double>& g) {
  std::vector<double> s(c.cells());
  for (std::size_t k = 0; k < s.size(); ++k) {
    s[k] = (g[k + 1] - g[k]) / c.h;
    if (!(s[k] > 0.0)) throw DegenerateState("label map is not increasing");
  }
  return s;
}

/// int (pushforward density)^(theta+1) = sum_k P_k / slope_k^theta.
inline double pushforward_power_integral(const CellMoments& c, const std::vector<double>& g, double theta) {
  const auto s = cell_slopes(c, g);
  double r = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) r += c.pw[k] / std::pow(s[k], theta);
  return r;
}

/// int (pushforward density)^(1-theta) over its support = sum_k slope_k^theta int phi^(1-theta).
inline double pushforward_reciprocal_integral(const CellMoments& c, const std::vector<double>& g, double theta) {
  const auto s = cell_slopes(c, g);
  double r = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) r += std::pow(s[k], theta) * c.recip[k];
  return r;
}

}  // namespace dmfp
