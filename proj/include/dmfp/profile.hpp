#pragma once

// Self-similar profile of the planning problem with congestion m^theta:
//
//   phi(r) = ( alpha (1 - alpha) / 2 * (R^2 - r^2) )_+^(1/theta),
//   alpha  = 2 / (2 + theta),
//
// with R chosen so that phi has unit mass. t^-alpha phi(t^-alpha x) is the
// density of an exact solution emanating from a Dirac mass.

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <boost/math/special_functions/beta.hpp>

#include "dmfp/errors.hpp"
#include "dmfp/numerics.hpp"

namespace dmfp {

class Profile {
public:
  static constexpr int kPanels = 64;

  double theta() const { return theta_; }
  double alpha() const { return alpha_; }
  double r_alpha() const { return r_alpha_; }
  /// kappa = 1 - 2 alpha; positive only in the supercritical range theta > 2.
  double kappa() const { return 1.0 - 2.0 * alpha_; }
  /// Coefficient of the polynomial identity phi^theta = c (R^2 - y^2).
  double c() const { return 0.5 * alpha_ * (1.0 - alpha_); }

  /// phi^theta, evaluated from its polynomial form.
  double phi_theta(double y) const {
    const double s = (r_alpha_ - y) * (r_alpha_ + y);
    return s > 0.0 ? c() * s : 0.0;
  }
  /// (phi^theta)_y on the support.
  double phi_theta_y(double y) const {
    return std::abs(y) < r_alpha_ ? -2.0 * c() * y : 0.0;
  }
  double phi(double y) const {
    const double p = phi_theta(y);
    return p > 0.0 ? std::pow(p, 1.0 / theta_) : 0.0;
  }
  /// phi^power; for negative powers only meaningful strictly inside the support.
  double phi_pow(double y, double power) const {
    const double p = phi_theta(y);
    if (p <= 0.0) return 0.0;
    return std::pow(p, power / theta_);
  }

  /// Integral of phi^power over [a, b] clipped to the support. Negative
  /// powers are integrable up to the free boundary as long as power > -theta.
  double phi_power_integral(double power, double a, double b) const {
    a = std::max(a, -r_alpha_);
    b = std::min(b, r_alpha_);
    const double ra = r_alpha_ + a;  // distance of a to -R
    const double rb = r_alpha_ - b;  // distance of b to +R
    return num::integrate_singular(
        [&](double, double da, double db) {
          const double s = (ra + da) * (rb + db);
          return s > 0.0 ? std::pow(c() * s, power / theta_) : 0.0;
        },
        a, b);
  }

  /// Integral of phi^(theta+1) over the real line, in closed form.
  double phi_power_mass() const {
    return c() * r_alpha_ * r_alpha_ * 2.0 * (theta_ + 1.0) / (3.0 * theta_ + 2.0);
  }
  /// Second moment of phi.
  double second_moment() const {
    return (c() * r_alpha_ * r_alpha_ - phi_power_mass()) / c();
  }

  /// Antiderivative of phi vanishing at -R, from cached panel integrals.
  double cdf(double r) const {
    if (r <= -r_alpha_) return 0.0;
    if (r >= r_alpha_) return 1.0;
    const double h = 2.0 * r_alpha_ / kPanels;
    int k = static_cast<int>((r + r_alpha_) / h);
    k = std::clamp(k, 0, kPanels - 1);
    const double lo = -r_alpha_ + k * h;
    const double v = panel_prefix_[static_cast<std::size_t>(k)] + phi_power_integral(1.0, lo, r);
    return std::clamp(v, 0.0, 1.0);
  }

  /// Monotone inverse of cdf by bisection.
  double quantile(double q) const {
    if (!(q >= 0.0 && q <= 1.0))
      throw InvalidParameter("profile quantile level outside [0,1]");
    if (q == 0.0) return -r_alpha_;
    if (q == 1.0) return r_alpha_;
    const double h = 2.0 * r_alpha_ / kPanels;
    auto it = std::upper_bound(panel_prefix_.begin(), panel_prefix_.end(), q);
    int k = static_cast<int>(it - panel_prefix_.begin()) - 1;
    k = std::clamp(k, 0, kPanels - 1);
    const double lo = -r_alpha_ + k * h;
    return num::invert_increasing([this](double r) { return cdf(r); }, q, lo, lo + h, 1e-13);
  }

  friend Profile make_profile(double theta);

private:
  double theta_ = 1.0;
  double alpha_ = 2.0 / 3.0;
  double r_alpha_ = 1.0;
  std::vector<double> panel_prefix_;
};

/// Unit-mass radius from the Beta-integral closed form:
/// R^(1+2/theta) c^(1/theta) B(1/2, 1/theta + 1) = 1.
inline double r_alpha_closed_form(double theta) {
  const double alpha = 2.0 / (2.0 + theta);
  const double c = 0.5 * alpha * (1.0 - alpha);
  const double beta = boost::math::beta(0.5, 1.0 / theta + 1.0);
  return std::pow(1.0 / (std::pow(c, 1.0 / theta) * beta), 1.0 / (1.0 + 2.0 / theta));
}

/// Unit-mass radius by quadrature of the profile and bisection on R.
inline double r_alpha_by_bisection(double theta) {
  const double alpha = 2.0 / (2.0 + theta);
  const double c = 0.5 * alpha * (1.0 - alpha);
  auto mass = [&](double r) {
    return num::integrate_singular(
        [&](double, double da, double db) { return std::pow(c * da * db, 1.0 / theta); }, -r, r);
  };
  double lo = 1e-3, hi = 1.0;
  while (mass(hi) < 1.0) hi *= 2.0;
  return num::invert_increasing(mass, 1.0, lo, hi, 1e-15 * hi);
}

inline Profile make_profile(double theta) {
  if (!(theta > 0.0) || !std::isfinite(theta))
    throw InvalidParameter("theta must be a positive finite number");
  Profile p;
  p.theta_ = theta;
  p.alpha_ = 2.0 / (2.0 + theta);
  p.r_alpha_ = r_alpha_closed_form(theta);
  const double r_quad = r_alpha_by_bisection(theta);
  if (std::abs(r_quad - p.r_alpha_) > 1e-10 * p.r_alpha_) {
    std::ostringstream os;
    os << "profile radius self-check failed: closed form " << p.r_alpha_
       << " vs quadrature " << r_quad;
    throw std::logic_error(os.str());
  }
  const double h = 2.0 * p.r_alpha_ / Profile::kPanels;
  p.panel_prefix_.assign(Profile::kPanels + 1, 0.0);
  for (int k = 0; k < Profile::kPanels; ++k) {
    const double lo = -p.r_alpha_ + k * h;
    p.panel_prefix_[static_cast<std::size_t>(k + 1)] =
        p.panel_prefix_[static_cast<std::size_t>(k)] +
        p.phi_power_integral(1.0, lo, lo + h);
  }
  return p;
}

/// t^-alpha phi(t^-alpha x).
inline double self_similar_density(const Profile& p, double t, double x) {
  if (!(t > 0.0)) throw InvalidParameter("self-similar density needs t > 0");
  const double s = std::pow(t, -p.alpha());
  return s * p.phi(s * x);
}

/// Constant C of the self-similar value -alpha x^2/(2t) - C t^(2 alpha - 1).
inline double self_similar_value_constant(const Profile& p) {
  if (p.theta() == 2.0)
    throw UnsupportedParameter("theta = 2: the self-similar value carries a logarithm");
  const double a = p.alpha();
  return a * (1.0 - a) * p.r_alpha() * p.r_alpha() / (2.0 * (2.0 * a - 1.0));
}

/// Self-similar value function on the support, theta != 2.
inline double self_similar_value(const Profile& p, double t, double x) {
  if (!(t > 0.0)) throw InvalidParameter("self-similar value needs t > 0");
  const double cst = self_similar_value_constant(p);
  const double a = p.alpha();
  return -a * x * x / (2.0 * t) - cst * std::pow(t, 2.0 * a - 1.0);
}

/// Critical case theta = 2: -x^2/(4t) - (R^2/8) log t. The additive term has
/// to be logarithmic for the Hamilton-Jacobi equation to close.
inline double self_similar_value_critical(const Profile& p, double t, double x) {
  if (p.theta() != 2.0)
    throw UnsupportedParameter("logarithmic self-similar value only applies to theta = 2");
  if (!(t > 0.0)) throw InvalidParameter("self-similar value needs t > 0");
  const double r2 = p.r_alpha() * p.r_alpha();
  return -x * x / (4.0 * t) - p.c() * r2 * std::log(t);
}

}  // namespace dmfp
