#pragma once

// Terminal density m_T supported on [a, b].
//
// The density is stored as nodal samples. Between nodes, m^theta is
// reconstructed by a local four-point cubic and the density is its positive
// part raised to 1/theta. For the canonical data (power bumps and rescaled
// profiles) m^theta is a quadratic, so the reconstruction is exact and the CDF
// and quantile are limited only by quadrature and root-finding tolerances.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <iomanip>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

// pchip.hpp in older Boost releases relies on boost::math::isnan being declared first.
#include <boost/math/special_functions/fpclassify.hpp>
#include <boost/math/interpolators/pchip.hpp>

#include "dmfp/errors.hpp"
#include "dmfp/numerics.hpp"
#include "dmfp/profile.hpp"

namespace dmfp {

struct CompatibilityReport {
  double c_lower = 0.0;  // inf over interior nodes of m / dist^(1/theta)
  double c_upper = 0.0;  // sup of the same ratio
  bool endpoints_vanish = true;
  bool pass = false;
};

class TerminalDensity {
public:
  static constexpr int kDefaultNodes = 2048;

  double a() const { return x_.front(); }
  double b() const { return x_.back(); }
  double theta() const { return theta_; }
  /// Mass of the samples before normalization.
  double raw_mass() const { return raw_mass_; }
  /// Total mass of the stored (normalized) density.
  double mass() const { return cdf_.back(); }
  const std::vector<double>& nodes() const { return x_; }
  const std::vector<double>& samples() const { return m_; }
  const std::vector<double>& cdf_nodes() const { return cdf_; }
  const CompatibilityReport& compatibility() const { return report_; }

  double density(double x) const {
    if (x <= a() || x >= b()) return 0.0;
    return density_in_cell(num::locate(x_, x), x);
  }

  double cdf(double x) const {
    if (x <= a()) return 0.0;
    if (x >= b()) return 1.0;
    const std::size_t k = num::locate(x_, x);
    return std::clamp(cdf_in_cell(k, x), 0.0, 1.0);
  }

  /// Inverse CDF. A shape-preserving cubic through the CDF table supplies the
  /// first guess; safeguarded Newton on the exact cell CDF finishes it.
  double quantile(double q) const {
    if (!(q >= 0.0 && q <= 1.0))
      throw InvalidParameter("quantile level outside [0,1]");
    if (q == 0.0) return a();
    if (q == 1.0) return b();
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), q);
    std::size_t k = static_cast<std::size_t>(it - cdf_.begin());
    k = std::clamp<std::size_t>(k, 1, x_.size() - 1) - 1;
    double lo = x_[k], hi = x_[k + 1];
    if (q == cdf_[k]) return lo;
    double x = std::clamp((*inverse_)(q), lo, hi);
    const double xtol = 4.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(a()), std::abs(b()));
    for (int it_n = 0; it_n < 100 && hi - lo > xtol; ++it_n) {
      const double f = cdf_in_cell(k, x) - q;
      if (f == 0.0) return x;
      if (f < 0.0)
        lo = x;
      else
        hi = x;
      const double d = density_in_cell(k, x);
      double next = d > 0.0 ? x - f / d : 0.5 * (lo + hi);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (std::abs(next - x) <= xtol) return next;
      x = next;
    }
    return x;
  }

  friend TerminalDensity from_samples(std::vector<double> x, std::vector<double> m, double theta,
                                      double compat_bound);

private:
  // m^theta on cell k from the four nodal values around it.
  double power_in_cell(std::size_t k, double x) const {
    const std::size_t n = x_.size();
    const std::size_t s = std::min(k == 0 ? 0 : k - 1, n - 4);
    double r = 0.0;
    for (std::size_t i = s; i < s + 4; ++i) {
      double l = 1.0;
      for (std::size_t j = s; j < s + 4; ++j)
        if (j != i) l *= (x - x_[j]) / (x_[i] - x_[j]);
      r += l * pw_[i];
    }
    return r;
  }
  double density_in_cell(std::size_t k, double x) const {
    const double p = power_in_cell(k, x);
    return p > 0.0 ? std::pow(p, 1.0 / theta_) : 0.0;
  }
  double cell_integral(std::size_t k, double lo, double hi) const {
    return num::integrate_singular(
        [&](double y, double, double) { return density_in_cell(k, y); }, lo, hi);
  }
  double cdf_in_cell(std::size_t k, double x) const { return cdf_[k] + cell_integral(k, x_[k], x); }

  double theta_ = 1.0;
  double raw_mass_ = 1.0;
  std::vector<double> x_, m_, pw_, cdf_;
  std::shared_ptr<boost::math::interpolators::pchip<std::vector<double>>> inverse_;
  CompatibilityReport report_;
};

/// Empirical bounds of m / dist(x, {a, b})^(1/theta) over interior nodes.
/// Fails when the inf is zero, the sup/inf ratio exceeds `bound`, or the
/// density does not vanish at the end points.
inline CompatibilityReport validate_compatibility(const TerminalDensity& m, double bound = 1e3) {
  CompatibilityReport r;
  r.c_lower = std::numeric_limits<double>::infinity();
  r.c_upper = 0.0;
  const auto& x = m.nodes();
  const auto& v = m.samples();
  for (std::size_t k = 1; k + 1 < x.size(); ++k) {
    const double d = std::min(x[k] - m.a(), m.b() - x[k]);
    const double ratio = v[k] / std::pow(d, 1.0 / m.theta());
    r.c_lower = std::min(r.c_lower, ratio);
    r.c_upper = std::max(r.c_upper, ratio);
  }
  r.endpoints_vanish = v.front() == 0.0 && v.back() == 0.0;
  r.pass = r.endpoints_vanish && r.c_lower > 0.0 && std::isfinite(r.c_upper) &&
           r.c_upper <= bound * r.c_lower;
  return r;
}

/// Builds a normalized terminal density from nodal samples on [x.front(), x.back()].
inline TerminalDensity from_samples(std::vector<double> x, std::vector<double> m, double theta,
                                    double compat_bound = 1e3) {
  if (!(theta > 0.0)) throw InvalidParameter("theta must be positive");
  if (x.size() != m.size()) throw FormatError("node and sample counts differ");
  if (x.size() < 8) throw FormatError("terminal density needs at least 8 nodes");
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!std::isfinite(x[k]) || !std::isfinite(m[k])) throw FormatError("non-finite entry");
    if (m[k] < 0.0) throw FormatError("negative density value");
    if (k > 0 && !(x[k] > x[k - 1])) throw FormatError("x must be strictly increasing");
  }
  TerminalDensity td;
  td.theta_ = theta;
  td.x_ = std::move(x);
  td.m_ = std::move(m);
  const std::size_t n = td.x_.size();

  auto build = [&td, n]() {
    td.pw_.resize(n);
    for (std::size_t k = 0; k < n; ++k) td.pw_[k] = std::pow(td.m_[k], td.theta_);
    td.cdf_.assign(n, 0.0);
    for (std::size_t k = 0; k + 1 < n; ++k)
      td.cdf_[k + 1] = td.cdf_[k] + td.cell_integral(k, td.x_[k], td.x_[k + 1]);
  };
  build();
  td.raw_mass_ = td.cdf_.back();
  if (!(td.raw_mass_ > 0.0)) throw InvalidTarget("terminal density has zero mass");
  if (td.raw_mass_ != 1.0) {
    for (double& v : td.m_) v /= td.raw_mass_;
    build();
  }
  for (std::size_t k = 0; k + 1 < n; ++k)
    if (!(td.cdf_[k + 1] > td.cdf_[k]))
      throw InvalidTarget("terminal density vanishes on a cell inside its support");
  // cdf_[n-1] is 1 up to roundoff; pin it so the table ends exactly at 1.
  td.cdf_.back() = 1.0;
  td.inverse_ = std::make_shared<boost::math::interpolators::pchip<std::vector<double>>>(
      std::vector<double>(td.cdf_), std::vector<double>(td.x_));
  td.report_ = validate_compatibility(td, compat_bound);
  return td;
}

inline std::vector<double> uniform_nodes(double a, double b, int n) {
  std::vector<double> x(static_cast<std::size_t>(n) + 1);
  for (int k = 0; k <= n; ++k) x[static_cast<std::size_t>(k)] = a + (b - a) * k / n;
  x.front() = a;
  x.back() = b;
  return x;
}

/// Z^-1 ((x - a)(b - x))^(1/theta) on [a, b].
inline TerminalDensity power_bump(double a, double b, double theta,
                                  int nodes = TerminalDensity::kDefaultNodes) {
  if (!(a < b)) throw InvalidParameter("power_bump needs a < b");
  if (!(theta > 0.0)) throw InvalidParameter("theta must be positive");
  auto x = uniform_nodes(a, b, nodes);
  std::vector<double> m(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) m[k] = std::pow((x[k] - a) * (b - x[k]), 1.0 / theta);
  m.front() = m.back() = 0.0;
  return from_samples(std::move(x), std::move(m), theta);
}

/// (T + eps)^-alpha phi((T + eps)^-alpha x).
inline TerminalDensity self_similar_terminal(const Profile& p, double T, double eps,
                                             int nodes = TerminalDensity::kDefaultNodes) {
  if (!(T > 0.0)) throw InvalidParameter("T must be positive");
  if (!(eps >= 0.0)) throw InvalidParameter("eps must be nonnegative");
  const double s = std::pow(T + eps, p.alpha());
  const double half = p.r_alpha() * s;
  auto x = uniform_nodes(-half, half, nodes);
  std::vector<double> m(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) m[k] = p.phi(x[k] / s) / s;
  m.front() = m.back() = 0.0;
  return from_samples(std::move(x), std::move(m), p.theta());
}

/// Two-column CSV "x,density"; a non-numeric first line is treated as header.
inline TerminalDensity load_csv(const std::string& path, double theta) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  std::vector<double> x, m;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      if (lineno == 1) continue;
      throw FormatError(path + ":" + std::to_string(lineno) + ": expected two columns");
    }
    const std::string c0 = line.substr(0, comma), c1 = line.substr(comma + 1);
    char* e0 = nullptr;
    char* e1 = nullptr;
    const double v0 = std::strtod(c0.c_str(), &e0);
    const double v1 = std::strtod(c1.c_str(), &e1);
    const bool ok0 = e0 != c0.c_str() && c0.find_first_not_of(" \t", static_cast<std::size_t>(e0 - c0.c_str())) == std::string::npos;
    const bool ok1 = e1 != c1.c_str() && c1.find_first_not_of(" \t", static_cast<std::size_t>(e1 - c1.c_str())) == std::string::npos;
    if (!ok0 || !ok1) {
      if (lineno == 1) continue;
      throw FormatError(path + ":" + std::to_string(lineno) + ": non-numeric entry");
    }
    x.push_back(v0);
    m.push_back(v1);
  }
  return from_samples(std::move(x), std::move(m), theta);
}

inline void save_csv(const std::string& path, const TerminalDensity& td) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  out << "x,density\n" << std::setprecision(17);
  for (std::size_t k = 0; k < td.nodes().size(); ++k)
    out << td.nodes()[k] << ',' << td.samples()[k] << '\n';
}

}  // namespace dmfp
