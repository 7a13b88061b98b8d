#pragma once

// Eulerian reconstruction from a solved flow: density, velocity, value
// function, free boundaries, and the extension of the value function to the
// complement of the support by characteristics.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <boost/math/interpolators/cubic_hermite.hpp>

#include "dmfp/errors.hpp"
#include "dmfp/numerics.hpp"
#include "dmfp/profile.hpp"
#include "dmfp/solver.hpp"
#include "dmfp/target.hpp"

namespace dmfp {

/// Slope gamma_y at every label of slice i: centered inside, one-sided
/// second order at the end labels.
inline std::vector<double> slice_slopes(const FlowField& f, int i) {
  const int ny = f.grid.ny();
  const double h = f.grid.h();
  std::vector<double> s(static_cast<std::size_t>(ny) + 1);
  for (int j = 1; j < ny; ++j) s[static_cast<std::size_t>(j)] = (f.at(i, j + 1) - f.at(i, j - 1)) / (2.0 * h);
  s.front() = (-3.0 * f.at(i, 0) + 4.0 * f.at(i, 1) - f.at(i, 2)) / (2.0 * h);
  s.back() = (3.0 * f.at(i, ny) - 4.0 * f.at(i, ny - 1) + f.at(i, ny - 2)) / (2.0 * h);
  return s;
}

/// Density on the Lagrangian image nodes of slice i: m = phi / gamma_y.
inline std::pair<std::vector<double>, std::vector<double>> density(const FlowField& f, const Profile& p, int i) {
  const int ny = f.grid.ny();
  auto x = f.row(i);
  const auto s = slice_slopes(f, i);
  std::vector<double> m(x.size(), 0.0);
  for (int j = 1; j < ny; ++j) {
    const auto jj = static_cast<std::size_t>(j);
    if (!(s[jj] > 0.0)) throw DegenerateState("non-monotone slice in density reconstruction");
    m[jj] = p.phi(f.grid.y[jj]) / s[jj];
  }
  return {std::move(x), std::move(m)};
}

/// Points in the time stencils. The value function and its residual are
/// built from gamma_t, whose magnitude grows like t^(alpha - 1) near the
/// initial time; fourth order keeps the residual small on the graded grid.
inline constexpr std::size_t kTimeStencil = 5;

/// gamma_t over the whole grid by five-point stencils in t.
inline std::vector<double> flow_velocity(const FlowField& f) {
  const int nt = f.grid.nt(), ny = f.grid.ny();
  std::vector<double> v(f.gamma.size());
  for (int j = 0; j <= ny; ++j) {
    const auto d = num::derivative(f.grid.t, f.column(j), kTimeStencil);
    for (int i = 0; i <= nt; ++i)
      v[static_cast<std::size_t>(i) * (static_cast<std::size_t>(ny) + 1) + static_cast<std::size_t>(j)] =
          d[static_cast<std::size_t>(i)];
  }
  return v;
}

/// u_x on the image nodes of slice i: u_x(t, gamma(t, y)) = -gamma_t(t, y).
inline std::vector<double> velocity(const FlowField& f, int i) {
  const int ny = f.grid.ny();
  std::vector<double> ux(static_cast<std::size_t>(ny) + 1);
  for (int j = 0; j <= ny; ++j)
    ux[static_cast<std::size_t>(j)] =
        -num::derivative_at(f.grid.t, f.column(j), static_cast<std::size_t>(i), kTimeStencil);
  return ux;
}

struct BoundaryHistory {
  std::vector<double> t, gL, gR, dgL, dgR, ddgL, ddgR;
  /// |gamma_dot| (t + eps)^(1 - alpha) for both boundaries (max of the two).
  std::vector<double> speed_envelope;
  /// gamma_ddot (t + eps)^(2 - alpha), left and right.
  std::vector<double> accel_envelope_left, accel_envelope_right;
};

inline BoundaryHistory free_boundaries(const FlowField& f, double alpha) {
  BoundaryHistory b;
  const int ny = f.grid.ny();
  b.t = f.grid.t;
  b.gL = f.column(0);
  b.gR = f.column(ny);
  b.dgL = num::derivative(b.t, b.gL, kTimeStencil);
  b.dgR = num::derivative(b.t, b.gR, kTimeStencil);
  b.ddgL = num::second_derivative(b.t, b.gL);
  b.ddgR = num::second_derivative(b.t, b.gR);
  for (std::size_t i = 0; i < b.t.size(); ++i) {
    const double s = b.t[i] + f.grid.eps;
    b.speed_envelope.push_back(std::max(std::abs(b.dgL[i]), std::abs(b.dgR[i])) * std::pow(s, 1.0 - alpha));
    b.accel_envelope_left.push_back(b.ddgL[i] * std::pow(s, 2.0 - alpha));
    b.accel_envelope_right.push_back(b.ddgR[i] * std::pow(s, 2.0 - alpha));
  }
  return b;
}

/// Value function along Lagrangian labels, ubar(t_i, y_j) = u(t_i, gamma(t_i, y_j)).
struct ValueField {
  std::vector<double> ubar;  // row-major like FlowField::gamma
  /// Terminal pairing int u(T) m_T after normalization.
  double terminal_pairing = 0.0;
  /// Shift applied to reach the normalization.
  double shift = 0.0;

  double at(const FlowField& f, int i, int j) const {
    return ubar[static_cast<std::size_t>(i) * (static_cast<std::size_t>(f.grid.ny()) + 1) + static_cast<std::size_t>(j)];
  }
};

namespace detail {

// int u m_T over the terminal slice, u cubic Hermite in x on each cell.
inline double terminal_pairing(const std::vector<double>& x, const std::vector<double>& u,
                               const std::vector<double>& ux, const TerminalDensity& m) {
  double s = 0.0;
  for (std::size_t k = 0; k + 1 < x.size(); ++k) {
    const double x0 = x[k], x1 = x[k + 1], dx = x1 - x0;
    auto herm = [&](double xx) {
      const double z = (xx - x0) / dx;
      const double h00 = (1 + 2 * z) * (1 - z) * (1 - z), h10 = z * (1 - z) * (1 - z);
      const double h01 = z * z * (3 - 2 * z), h11 = z * z * (z - 1);
      return h00 * u[k] + h10 * dx * ux[k] + h01 * u[k + 1] + h11 * dx * ux[k + 1];
    };
    s += num::integrate_singular([&](double xx, double, double) { return herm(xx) * m.density(xx); }, x0, x1);
  }
  return s;
}

}  // namespace detail

/// Integrates ubar_t = -(m^theta + gamma_t^2 / 2) backward from the terminal
/// slice, where ubar(T) is the antiderivative of u_x = -gamma_t normalized so
/// that int u(T) m_T = 0.
inline ValueField value_on_support(const FlowField& f, const Profile& p, const TerminalDensity& m) {
  const auto& g = f.grid;
  const int nt = g.nt(), ny = g.ny();
  const auto w = static_cast<std::size_t>(ny) + 1;
  const auto gt = flow_velocity(f);
  ValueField v;
  v.ubar.assign(f.gamma.size(), 0.0);

  // Terminal slice.
  const auto xT = f.row(nt);
  std::vector<double> uxT(w), uT(w, 0.0);
  for (std::size_t j = 0; j < w; ++j) uxT[j] = -gt[static_cast<std::size_t>(nt) * w + j];
  for (std::size_t j = 1; j < w; ++j) uT[j] = uT[j - 1] + num::cubic_interval_integral(xT, uxT, j - 1);
  const double pair0 = detail::terminal_pairing(xT, uT, uxT, m);
  v.shift = -pair0 / m.mass();
  for (auto& u : uT) u += v.shift;
  v.terminal_pairing = detail::terminal_pairing(xT, uT, uxT, m);
  std::copy(uT.begin(), uT.end(), v.ubar.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(nt) * w));

  // Running cost m^theta + gamma_t^2 / 2 along labels.
  std::vector<double> cost(f.gamma.size());
  for (int i = 0; i <= nt; ++i) {
    const auto s = slice_slopes(f, i);
    for (int j = 0; j <= ny; ++j) {
      const auto jj = static_cast<std::size_t>(j);
      const auto k = static_cast<std::size_t>(i) * w + jj;
      const double mt = (j == 0 || j == ny) ? 0.0 : p.phi_theta(g.y[jj]) / std::pow(s[jj], p.theta());
      cost[k] = mt + 0.5 * gt[k] * gt[k];
    }
  }
  std::vector<double> col(static_cast<std::size_t>(nt) + 1);
  for (std::size_t j = 0; j < w; ++j) {
    for (std::size_t i = 0; i < col.size(); ++i) col[i] = cost[i * w + j];
    for (int i = nt - 1; i >= 0; --i) {
      const auto k = static_cast<std::size_t>(i) * w + j;
      v.ubar[k] = v.ubar[k + w] + num::cubic_interval_integral(g.t, col, static_cast<std::size_t>(i));
    }
  }
  return v;
}

/// Interior Hamilton-Jacobi residual -u_t + u_x^2 / 2 - m^theta at interior
/// labels of interior time nodes; u_t = ubar_t - u_x gamma_t, with u_x taken
/// from label differences of u itself, u_x = ubar_y / gamma_y. Rows 0, nt and
/// columns 0, ny are 0.
inline std::vector<double> hj_residual(const FlowField& f, const Profile& p, const ValueField& v) {
  const auto& g = f.grid;
  const int nt = g.nt(), ny = g.ny();
  const auto w = static_cast<std::size_t>(ny) + 1;
  const auto gt = flow_velocity(f);
  std::vector<double> r(f.gamma.size(), 0.0);
  std::vector<std::vector<double>> ut_bar(w);
  for (std::size_t j = 0; j < w; ++j) {
    std::vector<double> col(static_cast<std::size_t>(nt) + 1);
    for (std::size_t i = 0; i < col.size(); ++i) col[i] = v.ubar[i * w + j];
    ut_bar[j] = num::derivative(g.t, col, kTimeStencil);
  }
  for (int i = 1; i < nt; ++i) {
    const auto ii = static_cast<std::size_t>(i);
    const auto s = slice_slopes(f, i);
    const std::span<const double> urow(v.ubar.data() + ii * w, w), grow(f.gamma.data() + ii * w, w);
    const auto uy = num::derivative(g.y, urow, kTimeStencil);
    const auto gy = num::derivative(g.y, grow, kTimeStencil);
    for (int j = 1; j < ny; ++j) {
      const auto jj = static_cast<std::size_t>(j);
      const auto k = ii * w + jj;
      const double ux = uy[jj] / gy[jj];
      const double mt = p.phi_theta(g.y[jj]) / std::pow(s[jj], p.theta());
      const double ut = ut_bar[jj][ii] - ux * gt[k];
      r[k] = -ut + 0.5 * ux * ux - mt;
    }
  }
  return r;
}

/// Mass reconstruction check on slice i. On each cell the Eulerian density is
/// the pushforward of phi by the affine map between consecutive image nodes;
/// returns max_j |Phi(y_j) - int_{gamma_0}^{gamma_j} m dx| and the total mass.
inline std::pair<double, double> mass_check(const FlowField& f, const Profile& p, int i) {
  const auto& g = f.grid;
  const int ny = g.ny();
  const double h = g.h();
  double cum = 0.0, err = 0.0;
  for (int k = 0; k < ny; ++k) {
    const double x0 = f.at(i, k), x1 = f.at(i, k + 1);
    const double y0 = g.y[static_cast<std::size_t>(k)];
    const double jac = h / (x1 - x0);
    cum += num::integrate_singular(
        [&](double, double dx0, double dx1) {
          // label of the Eulerian point, measured from both cell ends for accuracy
          const double ya = y0 + dx0 * jac;
          const double yb = y0 + h - dx1 * jac;
          const double y = dx0 < dx1 ? ya : yb;
          return p.phi(y) * jac;
        },
        x0, x1);
    err = std::max(err, std::abs(cum - p.cdf(g.y[static_cast<std::size_t>(k) + 1])));
  }
  return {err, cum};
}

/// Smooth test function B(t) b(x) for the weak continuity residual.
struct TestFunction {
  double t0, t1;  // time support
  double L;       // spatial half-width
  int mode;

  double time_part(double t, double* dt) const {
    if (t <= t0 || t >= t1) {
      *dt = 0.0;
      return 0.0;
    }
    const double w = std::numbers::pi / (t1 - t0);
    const double s = std::sin(w * (t - t0)), c = std::cos(w * (t - t0));
    *dt = 4.0 * s * s * s * c * w;
    return s * s * s * s;
  }
  double space_part(double x, double* dx) const {
    if (std::abs(x) >= L) {
      *dx = 0.0;
      return 0.0;
    }
    const double k = std::numbers::pi / L;
    const double env = std::cos(0.5 * k * x), denv = -0.5 * k * std::sin(0.5 * k * x);
    const double e2 = env * env, de2 = 2.0 * env * denv;
    double q, dq;
    switch (mode) {
      case 0: q = 1.0; dq = 0.0; break;
      case 1: q = std::sin(k * x); dq = k * std::cos(k * x); break;
      case 2: q = std::cos(k * x); dq = -k * std::sin(k * x); break;
      case 3: q = x / L; dq = 1.0 / L; break;
      default: q = std::sin(2.0 * k * x); dq = 2.0 * k * std::cos(2.0 * k * x); break;
    }
    *dx = de2 * q + e2 * dq;
    return e2 * q;
  }
};

/// The 20 test functions: four time windows inside [0.02 T, 0.98 T] times
/// five spatial modes on [-L, L].
inline std::vector<TestFunction> continuity_test_functions(double T, double L) {
  const std::array<std::pair<double, double>, 4> win{{{0.02, 0.98}, {0.02, 0.5}, {0.1, 0.98}, {0.3, 0.9}}};
  std::vector<TestFunction> out;
  for (auto [a, b] : win)
    for (int q = 0; q < 5; ++q) out.push_back({a * T, b * T, L, q});
  return out;
}

/// Weak residual int int m (psi_t - u_x psi_x) dx dt for each test function,
/// evaluated in Lagrangian form sum_i omega_i sum_j K_j d/dt psi(t, gamma).
inline std::vector<double> continuity_residual(const FlowField& f, const Profile& p) {
  const auto& g = f.grid;
  const int nt = g.nt(), ny = g.ny();
  const auto w = make_weights(p, g);
  const auto gt = flow_velocity(f);
  double L = 0.0;
  for (double x : f.gamma) L = std::max(L, std::abs(x));
  L *= 1.25;
  const auto tests = continuity_test_functions(g.T, L);
  std::vector<double> res;
  for (const auto& tf : tests) {
    double s = 0.0;
    for (int i = 1; i < nt; ++i) {
      const double omega = 0.5 * (g.dt(i - 1) + g.dt(i));
      double bt;
      const double b = tf.time_part(g.t[static_cast<std::size_t>(i)], &bt);
      if (b == 0.0 && bt == 0.0) continue;
      double row = 0.0;
      for (int j = 0; j <= ny; ++j) {
        const auto k = static_cast<std::size_t>(i) * (static_cast<std::size_t>(ny) + 1) + static_cast<std::size_t>(j);
        double qx;
        const double q = tf.space_part(f.gamma[k], &qx);
        row += w.K[static_cast<std::size_t>(j)] * (bt * q + b * qx * gt[k]);
      }
      s += omega * row;
    }
    res.push_back(s);
  }
  return res;
}

/// Extension of u to the complement of the support by characteristics from
/// the free boundaries. Each side is handled in mirrored coordinates where
/// the boundary curve G is convex and lies to the right of the exterior.
class ValueExtension {
public:
  struct Side {
    std::shared_ptr<boost::math::interpolators::cubic_hermite<std::vector<double>>> G;
    std::vector<double> t, dG, cumU;  // cumU[i] = U(t_i)
    double UT = 0.0;
    std::optional<double> t_star;
    double T = 1.0;

    double U(double s) const {
      const std::size_t k = num::locate(t, s);
      const double tail = num::integrate_smooth([this](double r) { const double d = G->prime(r); return 0.5 * d * d; },
                                                s, t[k + 1]);
      return cumU[k + 1] + tail;
    }
    double Gdot(double s) const { return G->prime(std::clamp(s, t.front(), t.back())); }
    double Gv(double s) const { return (*G)(std::clamp(s, t.front(), t.back())); }

    /// (u, u_x) at time s, mirrored abscissa x <= G(s).
    std::pair<double, double> eval(double s, double x) const {
      auto line = [&](double tb) { return Gv(tb) + (s - tb) * Gdot(tb); };
      auto from = [&](double tb) {
        const double d = Gdot(tb);
        return std::pair{U(tb) + 0.5 * d * d * (tb - s), -d};
      };
      if (t_star) {
        const double ts = *t_star;
        const double xs = Gv(ts);
        if (x <= xs) return {U(ts), 0.0};
        double lo = std::min(s, ts), hi = std::max(s, ts);
        // line(.) runs monotonically between G(s) at tb = s and G(t*) at tb = t*.
        const bool decreasing = s <= ts;
        for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
          const double mid = 0.5 * (lo + hi);
          const bool go_right = decreasing ? line(mid) > x : line(mid) < x;
          (go_right ? lo : hi) = mid;
        }
        return from(0.5 * (lo + hi));
      }
      const double lT = line(T);
      if (x <= lT) {
        const double d = Gdot(T);
        return {(lT - x) * d + UT + 0.5 * d * d * (T - s), -d};
      }
      double lo = s, hi = T;
      for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        (line(mid) > x ? lo : hi) = mid;
      }
      return from(0.5 * (lo + hi));
    }
  };

  /// Builds both sides; throws crossing-characteristics if a boundary curve
  /// fails the convexity (left) / concavity (right) needed for the fan.
  static ValueExtension build(const FlowField& f, const ValueField& v, const BoundaryHistory& b) {
    ValueExtension e;
    const int ny = f.grid.ny();
    e.left_ = make_side(b.t, b.gL, b.dgL, v, f, 0, +1.0);
    e.right_ = make_side(b.t, b.gR, b.dgR, v, f, ny, -1.0);
    return e;
  }

  /// (u, u_x) at an exterior point left of gamma_L(t) or right of gamma_R(t).
  std::pair<double, double> operator()(double t, double x) const {
    if (x <= left_.Gv(t)) return left_.eval(t, x);
    auto [u, ux] = right_.eval(t, -x);
    return {u, -ux};
  }

  const Side& left() const { return left_; }
  const Side& right() const { return right_; }

  /// max over time nodes of |U(t_i) - ubar(t_i, end label)| on both sides.
  double glue_mismatch(const FlowField& f, const ValueField& v) const {
    double m = 0.0;
    for (int i = 0; i <= f.grid.nt(); ++i) {
      m = std::max(m, std::abs(left_.cumU[static_cast<std::size_t>(i)] - v.at(f, i, 0)));
      m = std::max(m, std::abs(right_.cumU[static_cast<std::size_t>(i)] - v.at(f, i, f.grid.ny())));
    }
    return m;
  }

private:
  static Side make_side(const std::vector<double>& t, const std::vector<double>& g, const std::vector<double>& dg,
                        const ValueField& v, const FlowField& f, int label, double sign) {
    Side s;
    s.t = t;
    s.T = t.back();
    std::vector<double> G(g.size()), dG(dg.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      G[i] = sign * g[i];
      dG[i] = sign * dg[i];
    }
    const double scale = num::max_abs(dG);
    for (std::size_t i = 0; i + 1 < dG.size(); ++i)
      if (dG[i + 1] < dG[i] - 1e-9 * scale)
        throw CrossingCharacteristics("free boundary is not convex: tangent characteristics cross");
    s.dG = dG;
    s.G = std::make_shared<boost::math::interpolators::cubic_hermite<std::vector<double>>>(
        std::vector<double>(t), std::move(G), std::move(dG));
    s.UT = v.at(f, f.grid.nt(), label);
    const std::size_t n = t.size();
    s.cumU.assign(n, 0.0);
    s.cumU[n - 1] = s.UT;
    for (std::size_t i = n - 1; i-- > 0;)
      s.cumU[i] = s.cumU[i + 1] + num::integrate_smooth(
                                      [&s](double r) { const double d = s.G->prime(r); return 0.5 * d * d; }, t[i], t[i + 1]);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      if (s.dG[i] <= 0.0 && s.dG[i + 1] > 0.0) {
        double lo = t[i], hi = t[i + 1];
        for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
          const double mid = 0.5 * (lo + hi);
          (s.G->prime(mid) <= 0.0 ? lo : hi) = mid;
        }
        s.t_star = 0.5 * (lo + hi);
        break;
      }
    }
    return s;
  }

  Side left_, right_;
};

namespace detail {

// Residual of one mirrored side on the characteristic lattice: the point
// (s, b) = (t_i, t_k) is x = G(b) + (s - b) G'(b) with
// u = U(b) + G'(b)^2 (b - s) / 2. Both are linear in s, and derivatives in b
// use the same five-point stencils as the boundary velocity, so
// u_x = u_b / x_b and u_t = u_s - u_x x_s come out of node data only.
inline void exterior_side_residual(const ValueExtension::Side& side, const std::vector<double>& G,
                                   double& worst, double& uxmax) {
  const auto& t = side.t;
  const std::size_t n = t.size();
  std::vector<double> xb(n), ub(n);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double s = t[i];
    for (std::size_t k = 0; k < n; ++k) {
      xb[k] = G[k] + (s - t[k]) * side.dG[k];
      ub[k] = side.cumU[k] + 0.5 * side.dG[k] * side.dG[k] * (t[k] - s);
    }
    for (std::size_t k = 0; k < n; ++k) {
      bool fan;
      if (side.t_star) {
        const double ts = *side.t_star;
        fan = (s < ts && k > i && t[k] <= ts) || (s > ts && k < i && t[k] >= ts);
      } else {
        fan = k > i;
      }
      if (!fan) continue;
      const double x_b = num::derivative_at(t, xb, k, kTimeStencil);
      const double u_b = num::derivative_at(t, ub, k, kTimeStencil);
      if (x_b == 0.0) continue;
      const double ux = u_b / x_b;
      const double ut = -0.5 * side.dG[k] * side.dG[k] - ux * side.dG[k];
      worst = std::max(worst, std::abs(-ut + 0.5 * ux * ux));
      uxmax = std::max(uxmax, std::abs(ux));
    }
  }
}

}  // namespace detail

/// Exterior Hamilton-Jacobi residual -u_t + u_x^2 / 2 of the extension, sup
/// norm. In the fans swept by tangent characteristics it is evaluated on the
/// (time, foot time) lattice, where the extension is smooth; the Eulerian map
/// of that lattice degenerates at the free boundary, across which u is only
/// C^1. Where the extension is affine (lines from the terminal tangent) or
/// constant, centered differences in (t, x) are used at nodes whose stencil
/// stays in that region.
inline double exterior_hj_residual(const FlowField& f, const ValueExtension& ext,
                                   double* max_abs_ux = nullptr) {
  const auto& g = f.grid;
  const int nt = g.nt(), ny = g.ny();
  double worst = 0.0, uxmax = 0.0;
  const auto gL = f.column(0), gR = f.column(ny);
  std::vector<double> GR(gR.size());
  for (std::size_t i = 0; i < gR.size(); ++i) GR[i] = -gR[i];
  detail::exterior_side_residual(ext.left(), gL, worst, uxmax);
  detail::exterior_side_residual(ext.right(), GR, worst, uxmax);

  // Affine / constant regions, mirrored coordinates per side.
  for (const auto* side : {&ext.left(), &ext.right()}) {
    const double sign = side == &ext.left() ? 1.0 : -1.0;
    const double width = f.at(nt, ny) - f.at(nt, 0);
    const double dx = width / ny;
    for (int i = 2; i + 2 <= nt; ++i) {
      const auto ii = static_cast<std::size_t>(i);
      const double s = g.t[ii];
      // Edge of the region at the five stencil times; nodes must clear all.
      double edge = std::numeric_limits<double>::infinity();
      for (int d = -2; d <= 2; ++d) {
        const double r = g.t[ii + static_cast<std::size_t>(d)];
        const double e = side->t_star ? side->Gv(*side->t_star)
                                      : side->Gv(side->T) + (r - side->T) * side->Gdot(side->T);
        edge = std::min(edge, e);
      }
      for (int m = 3; m <= 10; ++m) {
        const double xm = edge - m * dx;  // mirrored abscissa
        std::array<double, 5> ts{}, us{}, xs{}, urow{};
        for (int d = -2; d <= 2; ++d) {
          const auto q = static_cast<std::size_t>(d + 2);
          ts[q] = g.t[ii + static_cast<std::size_t>(d)];
          us[q] = ext(ts[q], sign * xm).first;
          xs[q] = xm + d * dx;
          urow[q] = ext(s, sign * xs[q]).first;
        }
        const double ut = num::d1_stencil(ts, us, 2);
        const double ux = num::d1_stencil(xs, urow, 2);
        worst = std::max(worst, std::abs(-ut + 0.5 * ux * ux));
        uxmax = std::max(uxmax, std::abs(ux));
      }
    }
  }
  if (max_abs_ux) *max_abs_ux = uxmax;
  return worst;
}

struct EulerianSnapshot {
  double t = 0.0;
  std::vector<double> x, m, u, ux;
  std::vector<bool> exterior;
  /// Labels of the support nodes, in order; support nodes start at `first`.
  std::vector<double> y;
  std::size_t first = 0;
  double gamma_L = 0.0, gamma_R = 0.0;
};

/// Snapshot at slice i: support image nodes plus `pad` uniformly spaced
/// exterior nodes per side. The exterior reaches a quarter of the terminal
/// support width, and at least 1.25 R t^alpha from the origin so that the
/// rescaled profile support is covered.
inline EulerianSnapshot snapshot(const FlowField& f, const Profile& p, const ValueField& v,
                                 const ValueExtension* ext, int i, int pad = 64) {
  const int ny = f.grid.ny();
  EulerianSnapshot s;
  s.t = f.grid.t[static_cast<std::size_t>(i)];
  s.gamma_L = f.at(i, 0);
  s.gamma_R = f.at(i, ny);
  s.y = f.grid.y;
  auto [x, m] = density(f, p, i);
  const auto ux = velocity(f, i);
  const double quarter = 0.25 * (f.at(f.grid.nt(), ny) - f.at(f.grid.nt(), 0));
  const double reach = 1.25 * p.r_alpha() * std::pow(s.t, p.alpha());
  const double left = std::max(quarter, s.gamma_L + reach);
  const double right = std::max(quarter, reach - s.gamma_R);
  auto push_ext = [&](double xe) {
    auto [u, d] = (*ext)(s.t, xe);
    s.x.push_back(xe), s.m.push_back(0.0), s.u.push_back(u), s.ux.push_back(d), s.exterior.push_back(true);
  };
  if (ext)
    for (int k = pad; k >= 1; --k) push_ext(s.gamma_L - left * k / pad);
  s.first = s.x.size();
  for (int j = 0; j <= ny; ++j) {
    const auto jj = static_cast<std::size_t>(j);
    s.x.push_back(x[jj]), s.m.push_back(m[jj]), s.u.push_back(v.at(f, i, j)), s.ux.push_back(ux[jj]);
    s.exterior.push_back(false);
  }
  if (ext)
    for (int k = 1; k <= pad; ++k) push_ext(s.gamma_R + right * k / pad);
  return s;
}

/// Flow slice at an arbitrary time by four-point Lagrange interpolation in t
/// at each label.
inline std::vector<double> interpolate_slice(const FlowField& f, double t) {
  const auto& g = f.grid;
  if (!(t >= g.t.front() && t <= g.t.back())) throw InvalidParameter("time outside the grid");
  const std::size_t n = g.t.size();
  const std::size_t k = num::locate(g.t, t);
  const std::size_t s0 = std::min(k >= 1 ? k - 1 : 0, n - 4);
  std::array<double, 4> l{};
  for (std::size_t a = 0; a < 4; ++a) {
    l[a] = 1.0;
    for (std::size_t b = 0; b < 4; ++b)
      if (b != a) l[a] *= (t - g.t[s0 + b]) / (g.t[s0 + a] - g.t[s0 + b]);
  }
  std::vector<double> out(g.y.size(), 0.0);
  for (std::size_t j = 0; j < out.size(); ++j)
    for (std::size_t a = 0; a < 4; ++a) out[j] += l[a] * f.at(static_cast<int>(s0 + a), static_cast<int>(j));
  return out;
}

}  // namespace dmfp
