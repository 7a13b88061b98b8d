#pragma once

// Lagrangian flow solver.
//
// The flow gamma(t, y) minimizes the transport energy written in Lagrangian
// labels,
//
//   E[gamma] = int_0^T int_{-R}^{R} 1/2 phi gamma_t^2 + phi^(theta+1) gamma_y^-theta / (theta+1) dy dt,
//
// with gamma(0, y) = eps^alpha y and gamma(T, y) = Q_T(Phi(y)). Its
// Euler-Lagrange equation is the degenerate quasilinear elliptic equation
//
//   gamma_tt + theta phi^theta gamma_yy / gamma_y^(theta+2) = (phi^theta)_y / gamma_y^(theta+1).
//
// Discretization. Time nodes are graded so that t_i + eps is geometric; y
// nodes are uniform on [-R, R]. The potential term is evaluated per space-time
// cell at the slope averaged over the two time levels, with exact cell
// integrals P_k of phi^(theta+1). Kinetic node weights K_j are chosen so that
// linear-in-y maps are discrete critical points whenever their continuous
// counterparts are; this makes the self-similar flow separable on the grid.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "dmfp/errors.hpp"
#include "dmfp/numerics.hpp"
#include "dmfp/profile.hpp"
#include "dmfp/target.hpp"

namespace dmfp {

struct SpaceTimeGrid {
  double eps = 1e-3;
  double T = 1.0;
  double r_alpha = 1.0;
  std::vector<double> t;  // nt + 1 nodes, t[0] = 0, t[nt] = T
  std::vector<double> y;  // ny + 1 uniform nodes on [-R, R]

  int nt() const { return static_cast<int>(t.size()) - 1; }
  int ny() const { return static_cast<int>(y.size()) - 1; }
  double h() const { return 2.0 * r_alpha / ny(); }
  /// Common ratio of (t_{i+1} + eps) / (t_i + eps).
  double ratio() const { return std::pow((T + eps) / eps, 1.0 / nt()); }
  double dt(int i) const { return t[static_cast<std::size_t>(i) + 1] - t[static_cast<std::size_t>(i)]; }
};

inline SpaceTimeGrid make_grid(const Profile& p, double eps, double T, int nt, int ny) {
  if (!(eps > 0.0)) throw InvalidParameter("eps must be positive");
  if (!(T > 0.0)) throw InvalidParameter("T must be positive");
  if (nt < 4 || ny < 4) throw InvalidParameter("grid needs at least 4 intervals per direction");
  SpaceTimeGrid g;
  g.eps = eps;
  g.T = T;
  g.r_alpha = p.r_alpha();
  g.t.resize(static_cast<std::size_t>(nt) + 1);
  const double lr = std::log((T + eps) / eps) / nt;
  for (int i = 0; i <= nt; ++i) g.t[static_cast<std::size_t>(i)] = eps * std::expm1(lr * i);
  g.t.front() = 0.0;
  g.t.back() = T;
  g.y.resize(static_cast<std::size_t>(ny) + 1);
  const double R = p.r_alpha();
  for (int j = 0; j <= ny; ++j) g.y[static_cast<std::size_t>(j)] = -R + 2.0 * R * j / ny;
  // exact symmetry about 0
  for (int j = 0; j <= ny / 2; ++j) {
    const double v = 0.5 * (g.y[static_cast<std::size_t>(ny - j)] - g.y[static_cast<std::size_t>(j)]);
    g.y[static_cast<std::size_t>(j)] = -v;
    g.y[static_cast<std::size_t>(ny - j)] = v;
  }
  return g;
}

struct FlowField {
  SpaceTimeGrid grid;
  std::vector<double> gamma;  // row-major, (nt + 1) x (ny + 1)

  double& at(int i, int j) {
    return gamma[static_cast<std::size_t>(i) * (static_cast<std::size_t>(grid.ny()) + 1) + static_cast<std::size_t>(j)];
  }
  double at(int i, int j) const {
    return gamma[static_cast<std::size_t>(i) * (static_cast<std::size_t>(grid.ny()) + 1) + static_cast<std::size_t>(j)];
  }
  std::vector<double> row(int i) const {
    const auto w = static_cast<std::size_t>(grid.ny()) + 1;
    auto b = gamma.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(i) * w);
    return {b, b + static_cast<std::ptrdiff_t>(w)};
  }
  std::vector<double> column(int j) const {
    std::vector<double> c(static_cast<std::size_t>(grid.nt()) + 1);
    for (int i = 0; i <= grid.nt(); ++i) c[static_cast<std::size_t>(i)] = at(i, j);
    return c;
  }
  /// Smallest forward difference quotient in y over all slices.
  double min_slope() const {
    double m = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= grid.nt(); ++i)
      for (int j = 0; j < grid.ny(); ++j) m = std::min(m, (at(i, j + 1) - at(i, j)) / grid.h());
    return m;
  }
};

/// (t + eps)^alpha y on the grid: the exact flow for self-similar data.
inline FlowField self_similar_flow(const Profile& p, const SpaceTimeGrid& g) {
  FlowField f{g, std::vector<double>((static_cast<std::size_t>(g.nt()) + 1) * (static_cast<std::size_t>(g.ny()) + 1))};
  for (int i = 0; i <= g.nt(); ++i) {
    const double s = std::pow(g.t[static_cast<std::size_t>(i)] + g.eps, p.alpha());
    for (int j = 0; j <= g.ny(); ++j) f.at(i, j) = s * g.y[static_cast<std::size_t>(j)];
  }
  return f;
}

/// Quadrature weights of the Lagrangian energy.
struct LagrangianWeights {
  std::vector<double> K;  // kinetic node weights, ny + 1
  std::vector<double> P;  // cell integrals of phi^(theta+1), ny
};

inline LagrangianWeights make_weights(const Profile& p, const std::vector<double>& labels) {
  const std::size_t ny = labels.size() - 1;
  const double h = (labels.back() - labels.front()) / static_cast<double>(ny);
  LagrangianWeights w;
  w.P.resize(ny);
  for (std::size_t k = 0; k < ny; ++k) w.P[k] = p.phi_power_integral(p.theta() + 1.0, labels[k], labels[k + 1]);
  // Symmetrize so that odd modes decouple exactly.
  for (std::size_t k = 0; k < ny / 2; ++k) {
    const double v = 0.5 * (w.P[k] + w.P[ny - 1 - k]);
    w.P[k] = w.P[ny - 1 - k] = v;
  }
  const double scale = p.theta() / (2.0 * p.c() * (p.theta() + 1.0) * h);
  w.K.resize(ny + 1);
  for (std::size_t j = 0; j <= ny; ++j) {
    const double y = labels[j];
    if (std::abs(y) < 0.25 * h) {
      // Center node: the potential difference vanishes; use the hat-function mass.
      w.K[j] = num::integrate_singular([&](double s, double, double) { return p.phi(s) * (1.0 - std::abs(s - y) / h); },
                                       y - h, y + h);
      continue;
    }
    const double left = j > 0 ? w.P[j - 1] : 0.0;
    const double right = j < ny ? w.P[j] : 0.0;
    w.K[j] = scale * (left - right) / y;
  }
  return w;
}

inline LagrangianWeights make_weights(const Profile& p, const SpaceTimeGrid& g) { return make_weights(p, g.y); }

struct SolverConfig {
  enum class LinearSolver { banded_direct, conjugate_gradient };
  int newton_max_iter = 200;
  double residual_tol = 1e-10;
  double gamma_y_floor = 1e-8;
  double armijo_c = 1e-4;
  double armijo_shrink = 0.5;
  LinearSolver linear_solver = LinearSolver::banded_direct;

  void validate() const {
    if (newton_max_iter <= 0) throw InvalidParameter("newton_max_iter must be positive");
    if (!(residual_tol > 0.0)) throw InvalidParameter("residual_tol must be positive");
    if (!(gamma_y_floor > 0.0)) throw InvalidParameter("gamma_y_floor must be positive");
    if (!(armijo_c > 0.0 && armijo_c <= 0.5)) throw InvalidParameter("armijo_c must lie in (0, 0.5]");
    if (!(armijo_shrink > 0.0 && armijo_shrink < 1.0))
      throw InvalidParameter("armijo_shrink must lie in (0, 1)");
  }
};

inline std::string to_string(SolverConfig::LinearSolver s) {
  return s == SolverConfig::LinearSolver::banded_direct ? "banded-direct" : "conjugate-gradient";
}

inline SolverConfig::LinearSolver linear_solver_from_string(const std::string& s) {
  if (s == "banded-direct") return SolverConfig::LinearSolver::banded_direct;
  if (s == "conjugate-gradient") return SolverConfig::LinearSolver::conjugate_gradient;
  throw InvalidParameter("unknown linear solver '" + s + "'");
}

/// gamma(T, y_j) = Q_T(Phi(y_j)); the end labels map to a and b exactly.
inline std::vector<double> terminal_row(const Profile& p, const TerminalDensity& m, const SpaceTimeGrid& g) {
  std::vector<double> row(g.y.size());
  for (std::size_t j = 0; j < g.y.size(); ++j) row[j] = m.quantile(p.cdf(g.y[j]));
  row.front() = m.a();
  row.back() = m.b();
  return row;
}

namespace detail {

// Evaluates the discrete energy; returns +inf if any slope is below `floor`.
inline double energy_or_inf(const FlowField& f, const Profile& p, const LagrangianWeights& w, double floor) {
  const auto& g = f.grid;
  const int nt = g.nt(), ny = g.ny();
  const double h = g.h();
  const double th = p.theta();
  for (int i = 0; i <= nt; ++i)
    for (int k = 0; k < ny; ++k)
      if (!((f.at(i, k + 1) - f.at(i, k)) / h >= floor)) return std::numeric_limits<double>::infinity();
  double e = 0.0;
  for (int i = 0; i < nt; ++i) {
    const double dt = g.dt(i);
    double kin = 0.0;
    for (int j = 0; j <= ny; ++j) {
      const double d = f.at(i + 1, j) - f.at(i, j);
      kin += w.K[static_cast<std::size_t>(j)] * d * d;
    }
    double pot = 0.0;
    for (int k = 0; k < ny; ++k) {
      const double s = (f.at(i, k + 1) - f.at(i, k) + f.at(i + 1, k + 1) - f.at(i + 1, k)) / (2.0 * h);
      pot += w.P[static_cast<std::size_t>(k)] * std::pow(s, -th);
    }
    e += 0.5 * kin / dt + dt * pot / (th + 1.0);
  }
  return e;
}

}  // namespace detail

/// Discrete transport energy of a flow; requires every slope above `floor`.
inline double energy(const FlowField& f, const Profile& p, double floor = 1e-8) {
  const double e = detail::energy_or_inf(f, p, make_weights(p, f.grid), floor);
  if (!std::isfinite(e)) throw DegenerateState("flow slope below the admissible floor");
  return e;
}

/// Pointwise finite-difference residual of the flow equation. Rows 0 and nt
/// are left at zero. Columns 0 and ny carry the free-boundary equation.
inline std::vector<double> residual(const FlowField& f, const Profile& p, double floor = 1e-8) {
  const auto& g = f.grid;
  const int nt = g.nt(), ny = g.ny();
  const double h = g.h();
  const double th = p.theta();
  std::vector<double> r(f.gamma.size(), 0.0);
  for (int i = 1; i < nt; ++i) {
    const auto ii = static_cast<std::size_t>(i);
    const std::array<double, 3> tt{g.t[ii - 1], g.t[ii], g.t[ii + 1]};
    for (int j = 0; j <= ny; ++j) {
      const double gtt = num::d2_three_point(tt, {f.at(i - 1, j), f.at(i, j), f.at(i + 1, j)});
      double gy, gyy = 0.0;
      if (j == 0)
        gy = (-3.0 * f.at(i, 0) + 4.0 * f.at(i, 1) - f.at(i, 2)) / (2.0 * h);
      else if (j == ny)
        gy = (3.0 * f.at(i, ny) - 4.0 * f.at(i, ny - 1) + f.at(i, ny - 2)) / (2.0 * h);
      else {
        gy = (f.at(i, j + 1) - f.at(i, j - 1)) / (2.0 * h);
        gyy = (f.at(i, j + 1) - 2.0 * f.at(i, j) + f.at(i, j - 1)) / (h * h);
      }
      if (!(gy >= floor)) throw DegenerateState("flow slope below the admissible floor");
      const double y = g.y[static_cast<std::size_t>(j)];
      const double pt = (j == 0 || j == ny) ? 0.0 : p.phi_theta(y);
      const double pty = -2.0 * p.c() * y;
      r[static_cast<std::size_t>(i) * (static_cast<std::size_t>(ny) + 1) + static_cast<std::size_t>(j)] =
          gtt + th * pt * gyy / std::pow(gy, th + 2.0) - pty / std::pow(gy, th + 1.0);
    }
  }
  return r;
}

struct SolveReport {
  int iterations = 0;
  int backtracks = 0;
  double scaled_gradient = 0.0;
  double energy_initial = 0.0;
  double energy_final = 0.0;
  std::vector<double> energy_history;
  std::vector<double> gradient_history;
};

struct SolveResult {
  FlowField flow;
  SolveReport report;
};

/// Initial iterate: blend of eps^alpha y and the terminal row along (t + eps)^alpha.
inline FlowField initial_guess(const Profile& p, const SpaceTimeGrid& g, const std::vector<double>& term) {
  FlowField f{g, std::vector<double>((static_cast<std::size_t>(g.nt()) + 1) * (static_cast<std::size_t>(g.ny()) + 1))};
  const double a = p.alpha();
  const double e0 = std::pow(g.eps, a);
  const double e1 = std::pow(g.T + g.eps, a);
  for (int i = 0; i <= g.nt(); ++i) {
    const double s = (std::pow(g.t[static_cast<std::size_t>(i)] + g.eps, a) - e0) / (e1 - e0);
    for (int j = 0; j <= g.ny(); ++j) {
      const double y0 = e0 * g.y[static_cast<std::size_t>(j)];
      f.at(i, j) = y0 + s * (term[static_cast<std::size_t>(j)] - y0);
    }
  }
  for (int j = 0; j <= g.ny(); ++j) {
    f.at(0, j) = e0 * g.y[static_cast<std::size_t>(j)];
    f.at(g.nt(), j) = term[static_cast<std::size_t>(j)];
  }
  return f;
}

/// Damped Newton minimization of the discrete energy.
inline SolveResult solve(const Profile& p, const TerminalDensity& m, const SpaceTimeGrid& g,
                         const SolverConfig& cfg = {}) {
  cfg.validate();
  if (m.theta() != p.theta())
    throw InvalidTarget("terminal density was built for a different theta");
  const int nt = g.nt(), ny = g.ny();
  const double h = g.h();
  const double th = p.theta();
  const auto w = make_weights(p, g);
  const auto term = terminal_row(p, m, g);
  for (int j = 0; j < ny; ++j)
    if (!((term[static_cast<std::size_t>(j) + 1] - term[static_cast<std::size_t>(j)]) / h >= cfg.gamma_y_floor))
      throw InvalidTarget("terminal row violates the slope floor");

  SolveResult res{initial_guess(p, g, term), {}};
  FlowField& f = res.flow;
  const auto width = static_cast<std::size_t>(ny) + 1;
  const auto n = static_cast<Eigen::Index>((static_cast<std::size_t>(nt) - 1) * width);
  auto idx = [&](int i, int j) -> Eigen::Index {
    return static_cast<Eigen::Index>((static_cast<std::size_t>(i) - 1) * width + static_cast<std::size_t>(j));
  };

  // Normalization turning gradient entries into pointwise residuals of the
  // flow equation relative to the natural size of gamma_tt.
  Eigen::VectorXd gscale(n);
  for (int i = 1; i < nt; ++i) {
    const double omega = 0.5 * (g.dt(i - 1) + g.dt(i));
    const double tt = std::pow(g.t[static_cast<std::size_t>(i)] + g.eps, p.alpha() - 2.0);
    for (int j = 0; j <= ny; ++j) gscale[idx(i, j)] = w.K[static_cast<std::size_t>(j)] * omega * tt;
  }

  double e = detail::energy_or_inf(f, p, w, cfg.gamma_y_floor);
  if (!std::isfinite(e)) throw DegenerateState("initial iterate violates the slope floor");
  res.report.energy_initial = e;
  res.report.energy_history.push_back(e);

  Eigen::VectorXd grad(n);
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::SparseMatrix<double> H(n, n);
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::NaturalOrdering<int>> llt;
  bool analyzed = false;

  auto assemble = [&]() {
    grad.setZero();
    trip.clear();
    auto add = [&](int i, int j, int k, int l, double v) {
      if (i <= 0 || i >= nt || k <= 0 || k >= nt) return;
      trip.emplace_back(idx(i, j), idx(k, l), v);
    };
    for (int i = 0; i < nt; ++i) {
      const double dt = g.dt(i);
      for (int j = 0; j <= ny; ++j) {
        const double kw = w.K[static_cast<std::size_t>(j)] / dt;
        const double d = kw * (f.at(i + 1, j) - f.at(i, j));
        if (i + 1 < nt) grad[idx(i + 1, j)] += d;
        if (i > 0) grad[idx(i, j)] -= d;
        add(i, j, i, j, kw);
        add(i + 1, j, i + 1, j, kw);
        add(i, j, i + 1, j, -kw);
        add(i + 1, j, i, j, -kw);
      }
      for (int k = 0; k < ny; ++k) {
        const double s = (f.at(i, k + 1) - f.at(i, k) + f.at(i + 1, k + 1) - f.at(i + 1, k)) / (2.0 * h);
        const double pk = w.P[static_cast<std::size_t>(k)] * dt;
        const double d1 = -th / (th + 1.0) * pk * std::pow(s, -th - 1.0);
        const double d2 = th * pk * std::pow(s, -th - 2.0);
        const int ri[4] = {i, i, i + 1, i + 1};
        const int cj[4] = {k, k + 1, k, k + 1};
        const double co[4] = {-0.5 / h, 0.5 / h, -0.5 / h, 0.5 / h};
        for (int a = 0; a < 4; ++a) {
          if (ri[a] > 0 && ri[a] < nt) grad[idx(ri[a], cj[a])] += d1 * co[a];
          for (int b = 0; b < 4; ++b) add(ri[a], cj[a], ri[b], cj[b], d2 * co[a] * co[b]);
        }
      }
    }
    H.setFromTriplets(trip.begin(), trip.end());
  };

  auto scaled_norm = [&]() { return (grad.array().abs() / gscale.array()).maxCoeff(); };

  FlowField trial = f;
  for (int it = 0;; ++it) {
    assemble();
    const double sg = scaled_norm();
    res.report.scaled_gradient = sg;
    res.report.gradient_history.push_back(sg);
    if (sg <= cfg.residual_tol) break;
    if (it >= cfg.newton_max_iter)
      throw NewtonDivergence("Newton iteration cap reached; scaled gradient " + std::to_string(sg));

    Eigen::VectorXd step;
    if (cfg.linear_solver == SolverConfig::LinearSolver::banded_direct) {
      if (!analyzed) {
        llt.analyzePattern(H);
        analyzed = true;
      }
      llt.factorize(H);
      if (llt.info() != Eigen::Success) throw NewtonDivergence("Newton matrix is not positive definite");
      step = llt.solve(-grad);
    } else {
      Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                               Eigen::DiagonalPreconditioner<double>>
          cg;
      cg.setTolerance(1e-13);
      cg.setMaxIterations(static_cast<Eigen::Index>(20 * n));
      cg.compute(H);
      step = cg.solve(-grad);
    }
    const double slope = grad.dot(step);
    if (!(slope < 0.0)) {
      // No descent direction left: the iterate sits at roundoff level.
      break;
    }

    // Backtracking on the energy. Near the minimizer the predicted decrease
    // drops below the roundoff of E itself; full steps are then accepted.
    const bool roundoff = -slope <= 1e-13 * std::abs(e);
    double s = 1.0;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      for (int i = 1; i < nt; ++i)
        for (int j = 0; j <= ny; ++j) trial.at(i, j) = f.at(i, j) + s * step[idx(i, j)];
      const double et = detail::energy_or_inf(trial, p, w, cfg.gamma_y_floor);
      if (std::isfinite(et) && (et <= e + cfg.armijo_c * s * slope || (roundoff && s == 1.0))) {
        std::swap(f.gamma, trial.gamma);
        e = et;
        accepted = true;
        break;
      }
      s *= cfg.armijo_shrink;
      ++res.report.backtracks;
    }
    if (!accepted) {
      if (roundoff) break;
      throw DegenerateState("line search could not find an admissible descent step");
    }
    res.report.iterations = it + 1;
    res.report.energy_history.push_back(e);
  }
  res.report.energy_final = e;
  return res;
}

}  // namespace dmfp
