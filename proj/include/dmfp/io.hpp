#pragma once

// Run configuration as JSON, and the files a run directory is made of.
// Every floating-point value is written with 17 significant digits.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dmfp/errors.hpp"
#include "dmfp/run.hpp"

namespace dmfp::io {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// JSON has no NaN; missing measurements become null.
inline json num_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

// ---------------------------------------------------------------------------
// Configuration

namespace detail {

inline void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw FormatError(where.empty() ? "config must be an object" : "'" + where + "' must be an object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw FormatError("unknown config key '" + (where.empty() ? k : where + "." + k) + "'");
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw FormatError("config key '" + (where.empty() ? std::string(key) : where + "." + key) + "' has the wrong type");
  }
}

inline std::pair<int, int> line_col(const std::string& text, std::size_t byte) {
  int line = 1, col = 1;
  for (std::size_t k = 0; k + 1 < byte && k < text.size(); ++k) {
    if (text[k] == '\n') ++line, col = 1;
    else ++col;
  }
  return {line, col};
}

}  // namespace detail

/// Applies the keys present in `j` on top of `c`. Unknown keys are errors.
inline void apply_json(const json& j, RunConfig& c) {
  detail::check_keys(j, "", {"theta", "eps", "T", "nt", "ny", "target", "solver", "fit", "output", "strict", "seed",
                             "snapshot_stride"});
  detail::read(j, "theta", c.theta, "");
  detail::read(j, "eps", c.eps, "");
  detail::read(j, "T", c.T, "");
  detail::read(j, "nt", c.nt, "");
  detail::read(j, "ny", c.ny, "");
  detail::read(j, "output", c.output, "");
  detail::read(j, "strict", c.strict, "");
  detail::read(j, "seed", c.seed, "");
  detail::read(j, "snapshot_stride", c.snapshot_stride, "");
  if (j.contains("target")) {
    const auto& t = j["target"];
    detail::check_keys(t, "target", {"kind", "a", "b", "path"});
    detail::read(t, "kind", c.target.kind, "target");
    detail::read(t, "a", c.target.a, "target");
    detail::read(t, "b", c.target.b, "target");
    detail::read(t, "path", c.target.path, "target");
  }
  if (j.contains("solver")) {
    const auto& s = j["solver"];
    detail::check_keys(s, "solver",
                       {"newton_max_iter", "residual_tol", "gamma_y_floor", "armijo_c", "armijo_shrink", "linear_solver"});
    detail::read(s, "newton_max_iter", c.solver.newton_max_iter, "solver");
    detail::read(s, "residual_tol", c.solver.residual_tol, "solver");
    detail::read(s, "gamma_y_floor", c.solver.gamma_y_floor, "solver");
    detail::read(s, "armijo_c", c.solver.armijo_c, "solver");
    detail::read(s, "armijo_shrink", c.solver.armijo_shrink, "solver");
    if (s.contains("linear_solver")) {
      std::string name;
      detail::read(s, "linear_solver", name, "solver");
      c.solver.linear_solver = linear_solver_from_string(name);
    }
  }
  if (j.contains("fit")) {
    const auto& f = j["fit"];
    detail::check_keys(f, "fit", {"t_min", "t_max"});
    double v = 0.0;
    if (f.contains("t_min")) detail::read(f, "t_min", v, "fit"), c.fit_t_min = v;
    if (f.contains("t_max")) detail::read(f, "t_max", v, "fit"), c.fit_t_max = v;
  }
}

/// Parses config text; syntax errors carry the line and column.
inline RunConfig parse_config(const std::string& text, const std::string& name = "config") {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = detail::line_col(text, e.byte);
    std::string msg = e.what();
    if (const auto p = msg.find("syntax error"); p != std::string::npos) msg = msg.substr(p);
    throw FormatError(name + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + msg);
  }
  RunConfig c;
  apply_json(j, c);
  return c;
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline RunConfig load_config(const fs::path& path) { return parse_config(read_text(path), path.string()); }

/// Full configuration with the fit window resolved, so a run directory
/// reproduces its run without the defaults.
inline json to_json(const RunConfig& c) {
  json j;
  j["theta"] = c.theta;
  j["eps"] = c.eps;
  j["T"] = c.T;
  j["nt"] = c.nt;
  j["ny"] = c.ny;
  j["target"] = {{"kind", c.target.kind}, {"a", c.target.a}, {"b", c.target.b}, {"path", c.target.path}};
  j["solver"] = {{"newton_max_iter", c.solver.newton_max_iter},
                 {"residual_tol", c.solver.residual_tol},
                 {"gamma_y_floor", c.solver.gamma_y_floor},
                 {"armijo_c", c.solver.armijo_c},
                 {"armijo_shrink", c.solver.armijo_shrink},
                 {"linear_solver", to_string(c.solver.linear_solver)}};
  j["fit"] = {{"t_min", c.t_lo()}, {"t_max", c.t_hi()}};
  j["output"] = c.output;
  j["strict"] = c.strict;
  j["seed"] = c.seed;
  j["snapshot_stride"] = c.snapshot_stride;
  return j;
}

// ---------------------------------------------------------------------------
// Writers

class CsvWriter {
public:
  CsvWriter(const fs::path& path, const std::vector<std::string>& header) : out_(path) {
    if (!out_) throw FormatError("cannot write '" + path.string() + "'");
    for (std::size_t k = 0; k < header.size(); ++k) out_ << (k ? "," : "") << header[k];
    out_ << '\n';
  }
  void row(std::initializer_list<double> v) {
    bool first = true;
    for (double x : v) out_ << (first ? "" : ",") << fmt(x), first = false;
    out_ << '\n';
  }

private:
  std::ofstream out_;
};

inline void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

inline void write_flow(const fs::path& path, const FlowField& f) {
  CsvWriter w(path, {"t", "y", "gamma", "gamma_t"});
  const auto gt = flow_velocity(f);
  const auto ny = static_cast<std::size_t>(f.grid.ny()) + 1;
  for (int i = 0; i <= f.grid.nt(); ++i)
    for (int j = 0; j <= f.grid.ny(); ++j)
      w.row({f.grid.t[static_cast<std::size_t>(i)], f.grid.y[static_cast<std::size_t>(j)], f.at(i, j),
             gt[static_cast<std::size_t>(i) * ny + static_cast<std::size_t>(j)]});
}

inline void write_snapshot(const fs::path& path, const EulerianSnapshot& s) {
  CsvWriter w(path, {"t", "x", "m", "u", "ux"});
  for (std::size_t k = 0; k < s.x.size(); ++k) w.row({s.t, s.x[k], s.m[k], s.u[k], s.ux[k]});
}

inline void write_boundary(const fs::path& path, const BoundaryHistory& b) {
  CsvWriter w(path, {"t", "gammaL", "gammaR", "dgL", "dgR", "ddgL", "ddgR"});
  for (std::size_t i = 0; i < b.t.size(); ++i) w.row({b.t[i], b.gL[i], b.gR[i], b.dgL[i], b.dgR[i], b.ddgL[i], b.ddgR[i]});
}

inline const std::vector<std::string>& series_columns() {
  static const std::vector<std::string> c{"tau",     "H",         "dH_fd",      "dH_identity",
                                          "d1",      "d2",        "mu_max",     "osc_w",
                                          "supp_left", "supp_right", "recip_integral", "duality_pairing"};
  return c;
}

/// Rows with t >= t_min; earlier slices are dominated by the initial layer.
inline void write_series(const fs::path& path, const RescaledDiagnostics& d) {
  CsvWriter w(path, series_columns());
  for (const auto& r : d.rows)
    if (r.t >= d.t_min)
      w.row({r.tau, r.H, r.dH_fd, r.dH_identity, r.d1, r.d2, r.mu_max, r.osc_w, r.supp_left, r.supp_right,
             r.recip_integral, r.duality_pairing});
}

inline void write_envelopes(const fs::path& path, const RescaledDiagnostics& d) {
  CsvWriter w(path, {"tau", "t", "osc_v_profile", "pairing_envelope", "support_envelope", "flow_deviation"});
  for (const auto& r : d.rows)
    if (r.t >= d.t_min) w.row({r.tau, r.t, r.osc_v_profile, r.pairing_envelope, r.support_envelope, r.flow_deviation});
}

inline void write_scaling(const fs::path& path, const std::vector<ScalingRow>& s) {
  CsvWriter w(path, {"t", "support_radius", "m_inf", "m_power", "osc_u", "ux_inf"});
  for (const auto& r : s) w.row({r.t, r.support_radius, r.m_inf, r.m_power, r.osc_u, r.ux_inf});
}

inline json to_json(const RateReport& r) {
  json j;
  j["theta"] = r.theta;
  j["kappa"] = r.kappa;
  j["critical"] = r.critical;
  j["tolerance"] = r.tolerance;
  j["all_pass"] = r.all_pass();
  json laws = json::array();
  for (const auto& e : r.entries) {
    json l;
    l["law"] = e.law;
    l["theoretical_exponent"] = e.theoretical_exponent ? json(*e.theoretical_exponent) : json(nullptr);
    if (e.fit) {
      l["exponent"] = e.fit->exponent;
      l["log_prefactor"] = e.fit->log_prefactor;
      l["r_squared"] = e.fit->r_squared;
      l["window"] = {e.fit->window_lo, e.fit->window_hi};
      l["n_points"] = e.fit->n_points;
    } else {
      l["exponent"] = nullptr;
    }
    l["pass"] = e.pass;
    l["note"] = e.note;
    laws.push_back(l);
  }
  j["laws"] = laws;
  return j;
}

inline json to_json(const Certificates& c, const CertificateThresholds& th = {}) {
  json j;
  j["mass_error"] = c.mass_error;
  j["mass_total_error"] = c.mass_total_error;
  j["continuity_residual"] = c.continuity;
  j["hj_interior_residual"] = c.hj_interior;
  j["hj_exterior_residual"] = num_or_null(c.hj_exterior);
  j["exterior_ux_max"] = num_or_null(c.exterior_ux_max);
  j["glue_mismatch"] = num_or_null(c.glue_mismatch);
  j["boundary_speed_max"] = c.boundary_speed_max;
  j["terminal_pairing"] = c.terminal_pairing;
  j["sign_violations_left"] = c.sign_violations_left;
  j["sign_violations_right"] = c.sign_violations_right;
  j["compatibility"] = c.compatibility;
  j["extension_built"] = c.extension_built;
  j["extension_error"] = c.extension_error;
  j["stationary_residual"] = c.stationary_residual;
  j["thresholds"] = {{"mass", th.mass},
                     {"continuity", th.continuity},
                     {"hj_interior", th.hj_interior},
                     {"hj_exterior", th.hj_exterior}};
  j["failures"] = c.failures(th);
  j["pass"] = c.failures(th).empty();
  return j;
}

inline json manifest(const RunResult& r, const std::vector<std::string>& files) {
  json j;
  j["config"] = to_json(r.config);
  const auto& s = r.solved.report;
  j["solver"] = {{"iterations", s.iterations},
                 {"backtracks", s.backtracks},
                 {"scaled_gradient", s.scaled_gradient},
                 {"energy_initial", s.energy_initial},
                 {"energy_final", s.energy_final},
                 {"linear_solver", to_string(r.config.solver.linear_solver)}};
  j["grid"] = {{"nt", r.flow().grid.nt()},
               {"ny", r.flow().grid.ny()},
               {"r_alpha", r.flow().grid.r_alpha},
               {"time_ratio", r.flow().grid.ratio()}};
  j["profile"] = {{"alpha", r.profile.alpha()}, {"kappa", r.profile.kappa()}, {"c", r.profile.c()}};
  j["certificates"] = to_json(r.certificates);
  j["rates_all_pass"] = r.rates.all_pass();
  j["files"] = files;
  j["seconds"] = r.seconds;
  return j;
}

/// Writes every artifact of a run into `dir` and returns the relative paths.
inline std::vector<std::string> write_run(const RunResult& r, const fs::path& dir) {
  fs::create_directories(dir / "snapshots");
  std::vector<std::string> files{"config.json", "flow.csv", "boundary.csv", "series.csv", "envelopes.csv",
                                 "scaling.csv", "rates.json"};
  write_json(dir / "config.json", to_json(r.config));
  write_flow(dir / "flow.csv", r.flow());
  write_boundary(dir / "boundary.csv", r.boundary);
  write_series(dir / "series.csv", r.rescaled);
  write_envelopes(dir / "envelopes.csv", r.rescaled);
  write_scaling(dir / "scaling.csv", r.scaling);
  write_json(dir / "rates.json", to_json(r.rates));
  const int nt = r.flow().grid.nt();
  const auto* ext = r.extension ? &*r.extension : nullptr;
  for (int i = 0; i <= nt; ++i) {
    if (i % r.config.snapshot_stride != 0 && i != nt) continue;
    char name[32];
    std::snprintf(name, sizeof name, "slice_%04d.csv", i);
    write_snapshot(dir / "snapshots" / name, snapshot(r.flow(), r.profile, r.value, ext, i));
    files.push_back(std::string("snapshots/") + name);
  }
  files.push_back("manifest.json");
  write_json(dir / "manifest.json", manifest(r, files));
  return files;
}

// ---------------------------------------------------------------------------
// Reading run artifacts back

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t col(const std::string& name) const {
    for (std::size_t k = 0; k < header.size(); ++k)
      if (header[k] == name) return k;
    throw FormatError("missing column '" + name + "'");
  }
  std::vector<double> column(const std::string& name) const {
    const auto k = col(name);
    std::vector<double> v;
    for (const auto& r : rows) v.push_back(r[k]);
    return v;
  }
};

inline Table read_table(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw FormatError("'" + path.string() + "' is empty");
  std::stringstream hs(line);
  for (std::string cell; std::getline(hs, cell, ',');) t.header.push_back(cell);
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw FormatError(path.string() + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
      }
    }
    if (row.size() != t.header.size())
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                        " fields");
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline json read_json(const fs::path& path) {
  const auto text = read_text(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = detail::line_col(text, e.byte);
    throw FormatError(path.string() + ":" + std::to_string(line) + ":" + std::to_string(col) + ": malformed JSON");
  }
}

inline std::vector<ScalingRow> read_scaling(const fs::path& path) {
  const auto t = read_table(path);
  const auto a = t.col("t"), b = t.col("support_radius"), c = t.col("m_inf"), d = t.col("m_power"), e = t.col("osc_u"),
             f = t.col("ux_inf");
  std::vector<ScalingRow> out;
  for (const auto& r : t.rows) out.push_back({r[a], r[b], r[c], r[d], r[e], r[f]});
  return out;
}

inline RescaledDiagnostics read_series(const fs::path& path, double t_min) {
  const auto t = read_table(path);
  RescaledDiagnostics d;
  d.t_min = t_min;
  const auto& cols = series_columns();
  std::vector<std::size_t> k;
  for (const auto& c : cols) k.push_back(t.col(c));
  for (const auto& r : t.rows) {
    SeriesRow s;
    s.tau = r[k[0]], s.t = std::exp(s.tau), s.H = r[k[1]], s.dH_fd = r[k[2]], s.dH_identity = r[k[3]];
    s.d1 = r[k[4]], s.d2 = r[k[5]], s.mu_max = r[k[6]], s.osc_w = r[k[7]], s.supp_left = r[k[8]];
    s.supp_right = r[k[9]], s.recip_integral = r[k[10]], s.duality_pairing = r[k[11]];
    d.rows.push_back(s);
  }
  return d;
}

}  // namespace dmfp::io
