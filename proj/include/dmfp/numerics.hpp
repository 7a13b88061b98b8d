#pragma once

// Small numerical building blocks shared by every module: quadrature
// wrappers, nonuniform finite-difference stencils and bracketed inversion.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

namespace dmfp::num {

/// Tanh-sinh quadrature over [a, b] for integrands with algebraic endpoint
/// singularities. `f(y, da, db)` receives the node together with its exact
/// distances da = y - a and db = b - y, so the integrand can be evaluated
/// accurately arbitrarily close to either end.
template <class F>
double integrate_singular(F&& f, double a, double b, double tol = 1e-14) {
  if (!(b > a)) return 0.0;
  // The two-argument overload is not const-qualified in older Boost releases.
  thread_local boost::math::quadrature::tanh_sinh<double> integrator(12);
  const double width = b - a;
  auto g = [&](double y, double d) {
    // d < 0 encodes -(y - a); d >= 0 encodes b - y.
    const double da = d < 0.0 ? -d : width - d;
    const double db = d < 0.0 ? width + d : d;
    return f(y, da, db);
  };
  return integrator.integrate(g, a, b, tol);
}

/// Fixed 20-point Gauss-Legendre rule; exact for polynomials of degree 39.
template <class F>
double integrate_smooth(F&& f, double a, double b) {
  if (b == a) return 0.0;
  return boost::math::quadrature::gauss<double, 20>::integrate(f, a, b);
}

/// First derivative at `x[at]` of the quadratic through three points
/// (x[0], x[1], x[2]); `at` in {0, 1, 2}.
inline double d1_three_point(const std::array<double, 3>& x,
                             const std::array<double, 3>& f, int at) {
  const double xa = x[static_cast<std::size_t>(at)];
  double r = 0.0;
  for (std::size_t k = 0; k < 3; ++k) {
    // derivative of the k-th Lagrange basis polynomial at xa
    double denom = 1.0;
    for (std::size_t m = 0; m < 3; ++m)
      if (m != k) denom *= (x[k] - x[m]);
    double num = 0.0;
    for (std::size_t m = 0; m < 3; ++m) {
      if (m == k) continue;
      double prod = 1.0;
      for (std::size_t n = 0; n < 3; ++n)
        if (n != k && n != m) prod *= (xa - x[n]);
      num += prod;
    }
    r += f[k] * num / denom;
  }
  return r;
}

/// Second derivative of the quadratic through three points (constant).
inline double d2_three_point(const std::array<double, 3>& x,
                             const std::array<double, 3>& f) {
  const double h0 = x[1] - x[0];
  const double h1 = x[2] - x[1];
  return 2.0 * (f[0] / (h0 * (h0 + h1)) - f[1] / (h0 * h1) + f[2] / (h1 * (h0 + h1)));
}

/// First derivative at x[at] of the interpolating polynomial through the
/// points (x[k], f[k]), k < x.size(). Nonuniform spacing is allowed.
inline double d1_stencil(std::span<const double> x, std::span<const double> f, std::size_t at) {
  const std::size_t n = x.size();
  const double xa = x[at];
  double r = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    double denom = 1.0;
    for (std::size_t m = 0; m < n; ++m)
      if (m != k) denom *= (x[k] - x[m]);
    double num = 0.0;
    for (std::size_t m = 0; m < n; ++m) {
      if (m == k) continue;
      double prod = 1.0;
      for (std::size_t q = 0; q < n; ++q)
        if (q != k && q != m) prod *= (xa - x[q]);
      num += prod;
    }
    r += f[k] * num / denom;
  }
  return r;
}

/// First derivative at every node from `points`-point interpolating stencils
/// (3 or 5): centered in the interior, shifted one-sided near the ends so the
/// order is kept up to the boundary.
inline std::vector<double> derivative(std::span<const double> x, std::span<const double> f,
                                      std::size_t points = 3) {
  const std::size_t n = x.size();
  std::vector<double> d(n, 0.0);
  if (n < 2) return d;
  const std::size_t p = std::min(points, n);
  const std::size_t half = p / 2;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t s = std::min(i >= half ? i - half : 0, n - p);
    d[i] = d1_stencil(x.subspan(s, p), f.subspan(s, p), i - s);
  }
  return d;
}

/// Derivative at node i only, same stencil choice as `derivative`.
inline double derivative_at(std::span<const double> x, std::span<const double> f, std::size_t i,
                            std::size_t points = 3) {
  const std::size_t n = x.size();
  const std::size_t p = std::min(points, n);
  const std::size_t half = p / 2;
  const std::size_t s = std::min(i >= half ? i - half : 0, n - p);
  return d1_stencil(x.subspan(s, p), f.subspan(s, p), i - s);
}

/// Integral over [x[i], x[i+1]] of the cubic through the four nodes around
/// the interval (shifted at the ends). Fourth-order accurate.
inline double cubic_interval_integral(std::span<const double> x, std::span<const double> f, std::size_t i) {
  const std::size_t n = x.size();
  if (n < 4) return 0.5 * (x[i + 1] - x[i]) * (f[i] + f[i + 1]);
  const std::size_t s = std::min(i >= 1 ? i - 1 : 0, n - 4);
  auto poly = [&](double xx) {
    double r = 0.0;
    for (std::size_t k = s; k < s + 4; ++k) {
      double l = 1.0;
      for (std::size_t m = s; m < s + 4; ++m)
        if (m != k) l *= (xx - x[m]) / (x[k] - x[m]);
      r += l * f[k];
    }
    return r;
  };
  // two-point Gauss-Legendre is exact for cubics
  const double c = 0.5 * (x[i] + x[i + 1]), hw = 0.5 * (x[i + 1] - x[i]);
  const double g = hw / std::sqrt(3.0);
  return hw * (poly(c - g) + poly(c + g));
}

/// Three-point second derivative at every node. End nodes reuse the
/// adjacent interior stencil (first order there).
inline std::vector<double> second_derivative(std::span<const double> x,
                                             std::span<const double> f) {
  const std::size_t n = x.size();
  std::vector<double> d(n, 0.0);
  if (n < 3) return d;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = std::clamp<std::size_t>(i, 1, n - 2);
    d[i] = d2_three_point({x[c - 1], x[c], x[c + 1]}, {f[c - 1], f[c], f[c + 1]});
  }
  return d;
}

/// Bisection for an increasing function on [lo, hi]; stops when the bracket
/// is narrower than `xtol`.
template <class F>
double invert_increasing(F&& f, double target, double lo, double hi, double xtol) {
  for (int it = 0; it < 200 && hi - lo > xtol; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) < target)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

/// Index k with x[k] <= v < x[k+1], clamped to [0, n-2].
inline std::size_t locate(std::span<const double> x, double v) {
  auto it = std::upper_bound(x.begin(), x.end(), v);
  std::size_t k = (it == x.begin()) ? 0 : static_cast<std::size_t>(it - x.begin()) - 1;
  return std::min(k, x.size() - 2);
}

inline double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double a : v) m = std::max(m, std::abs(a));
  return m;
}

}  // namespace dmfp::num
