#pragma once

// Command implementations behind the dirac_mfp tool. Each returns the exit
// code; argument parsing lives in tools/dirac_mfp.cpp.
//
// Exit codes: 0 ok, 1 usage / config / input error, 2 solver failure or
// missing run artifacts, 3 certificate failure under --strict.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "dmfp/errors.hpp"
#include "dmfp/io.hpp"
#include "dmfp/run.hpp"

namespace dmfp::cli {

namespace fs = std::filesystem;

enum Exit : int { ok = 0, usage = 1, failure = 2, certificate = 3 };

/// Maps a library error to its exit code.
inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const InvalidParameter*>(&e) || dynamic_cast<const UnsupportedParameter*>(&e) ||
      dynamic_cast<const FormatError*>(&e) || dynamic_cast<const InvalidTarget*>(&e))
    return usage;
  return failure;
}

inline void report(std::ostream& err, const std::exception& e) {
  if (const auto* k = dynamic_cast<const Error*>(&e)) err << k->kind() << ": " << e.what() << "\n";
  else err << "error: " << e.what() << "\n";
}

/// Worker count for sweeps: DIRAC_MFP_THREADS if set and positive, else the
/// hardware concurrency; never more than the number of jobs.
inline int worker_count(std::size_t jobs) {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("DIRAC_MFP_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) n = static_cast<unsigned>(v);
  }
  return static_cast<int>(std::max<std::size_t>(1, std::min<std::size_t>(n, jobs)));
}

inline void print_summary(const RunResult& r, std::ostream& out) {
  const auto& c = r.certificates;
  out << "theta " << r.config.theta << "  eps " << r.config.eps << "  grid " << r.config.nt << "x" << r.config.ny
      << "  newton iterations " << r.solved.report.iterations << "  " << r.seconds << " s\n";
  out << "mass " << c.mass_error << "  continuity " << c.continuity << "  hj interior " << c.hj_interior
      << "  hj exterior " << c.hj_exterior << "  sign violations " << c.sign_violations_left + c.sign_violations_right
      << "\n";
  for (const auto& e : r.rates.entries) {
    out << "  " << e.law << ": ";
    if (e.fit) out << e.fit->exponent;
    else out << "-";
    if (e.theoretical_exponent) out << " (expected " << *e.theoretical_exponent << ") " << (e.pass ? "pass" : "fail");
    if (!e.note.empty()) out << "  [" << e.note << "]";
    out << "\n";
  }
}

inline int cmd_solve(const RunConfig& config, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  RunResult r;
  try {
    config.validate();
  } catch (const Error& e) {
    report(err, e);
    return usage;
  }
  try {
    r = run_pipeline(config);
  } catch (const Error& e) {
    report(err, e);
    return exit_code_for(e);
  }
  try {
    io::write_run(r, config.output);
  } catch (const std::exception& e) {
    report(err, e);
    return failure;
  }
  print_summary(r, out);
  const auto fails = r.certificates.failures();
  if (!fails.empty()) {
    err << "certificate failures:";
    for (const auto& f : fails) err << " " << f;
    err << "\n";
    if (config.strict) return certificate;
  }
  return ok;
}

// ---------------------------------------------------------------------------
// Sweeps

enum class SweepAxis { eps, theta };

inline SweepAxis sweep_axis_from_string(const std::string& s) {
  if (s == "eps") return SweepAxis::eps;
  if (s == "theta") return SweepAxis::theta;
  throw InvalidParameter("sweep axis must be eps or theta");
}

/// Times at which consecutive eps runs are compared.
inline const std::vector<double>& cauchy_times() {
  static const std::vector<double> t{0.05, 0.1, 0.5};
  return t;
}

struct SweepOutcome {
  double value = 0.0;
  std::optional<RunResult> result;
  std::string error;
};

inline int cmd_sweep(const RunConfig& base, SweepAxis axis, std::vector<double> values, std::ostream& out = std::cout,
                     std::ostream& err = std::cerr) {
  if (values.empty()) {
    err << "error: sweep needs at least one value\n";
    return usage;
  }
  // eps sweeps run from the largest eps down so pairs follow eps -> 0
  if (axis == SweepAxis::eps) std::sort(values.begin(), values.end(), std::greater<>());
  std::vector<RunConfig> configs;
  const std::string name = axis == SweepAxis::eps ? "eps" : "theta";
  try {
    for (double v : values) {
      RunConfig c = base;
      (axis == SweepAxis::eps ? c.eps : c.theta) = v;
      c.output = (fs::path(base.output) / (name + "_" + io::fmt(v))).string();
      c.validate();
      configs.push_back(c);
    }
  } catch (const Error& e) {
    report(err, e);
    return usage;
  }

  std::vector<SweepOutcome> outcomes(configs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < configs.size(); k = next++) {
      outcomes[k].value = values[k];
      try {
        outcomes[k].result = run_pipeline(configs[k]);
        io::write_run(*outcomes[k].result, configs[k].output);
      } catch (const std::exception& e) {
        outcomes[k].error = e.what();
      }
    }
  };
  const int n = worker_count(configs.size());
  std::vector<std::thread> pool;
  for (int k = 1; k < n; ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  fs::create_directories(base.output);
  static const std::vector<std::string> laws{"support_radius", "m_inf", "m_power", "osc_u", "ux_inf",
                                             "H",              "d2",    "duality_pairing"};
  {
    std::vector<std::string> header{name, "status", "iterations", "certificates_pass"};
    for (const auto& l : laws) header.push_back(l + "_exponent"), header.push_back(l + "_expected");
    std::ofstream f(fs::path(base.output) / "summary.csv");
    for (std::size_t k = 0; k < header.size(); ++k) f << (k ? "," : "") << header[k];
    f << "\n";
    for (const auto& o : outcomes) {
      f << io::fmt(o.value) << "," << (o.result ? "ok" : "failed");
      if (!o.result) {
        f << ",nan,nan";
        for (std::size_t k = 0; k < laws.size(); ++k) f << ",nan,nan";
        f << "\n";
        continue;
      }
      f << "," << o.result->solved.report.iterations << "," << (o.result->certificates.failures().empty() ? 1 : 0);
      for (const auto& l : laws) {
        const auto* e = o.result->rates.find(l);
        f << "," << (e && e->fit ? io::fmt(e->fit->exponent) : "nan") << ","
          << (e && e->theoretical_exponent ? io::fmt(*e->theoretical_exponent) : "nan");
      }
      f << "\n";
    }
  }

  if (axis == SweepAxis::eps) {
    io::CsvWriter w(fs::path(base.output) / "cauchy.csv", {"eps_a", "eps_b", "t", "d1"});
    for (std::size_t k = 0; k + 1 < outcomes.size(); ++k) {
      if (!outcomes[k].result || !outcomes[k + 1].result) continue;
      for (double t : cauchy_times()) {
        if (t > base.T) continue;
        w.row({outcomes[k].value, outcomes[k + 1].value, t, cauchy_distance(*outcomes[k].result, *outcomes[k + 1].result, t)});
      }
    }
  }

  int failed = 0;
  for (const auto& o : outcomes) {
    out << name << " = " << o.value << ": ";
    if (o.result) {
      const auto* s = o.result->rates.find("support_radius");
      out << "support exponent " << (s && s->fit ? io::fmt(s->fit->exponent) : "-") << "\n";
    } else {
      out << "failed: " << o.error << "\n";
      ++failed;
    }
  }
  if (failed) {
    err << failed << " of " << outcomes.size() << " runs failed\n";
    return failure;
  }
  return ok;
}

// ---------------------------------------------------------------------------
// Rates, validate, export

inline int missing(const fs::path& dir, const std::vector<std::string>& names, std::ostream& err) {
  for (const auto& n : names)
    if (!fs::exists(dir / n)) {
      err << "error: run artifact '" << (dir / n).string() << "' is missing\n";
      return failure;
    }
  return ok;
}

/// Refits the scaling laws of an existing run, optionally on a new window.
inline int cmd_rates(const fs::path& dir, std::optional<double> t_min, std::optional<double> t_max,
                     std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  if (missing(dir, {"config.json", "scaling.csv", "series.csv"}, err)) return failure;
  try {
    RunConfig c;
    io::apply_json(io::read_json(dir / "config.json"), c);
    if (t_min) c.fit_t_min = t_min;
    if (t_max) c.fit_t_max = t_max;
    c.validate();
    const auto p = make_profile(c.theta);
    const auto rep = rate_report(io::read_scaling(dir / "scaling.csv"), io::read_series(dir / "series.csv", 10.0 * c.eps),
                                 p, c.eps, c.t_lo(), c.t_hi());
    io::write_json(dir / "rates.json", io::to_json(rep));
    for (const auto& e : rep.entries) {
      out << e.law << " " << (e.fit ? io::fmt(e.fit->exponent) : "-");
      if (e.theoretical_exponent) out << " expected " << *e.theoretical_exponent << (e.pass ? " pass" : " fail");
      out << "\n";
    }
  } catch (const Error& e) {
    report(err, e);
    return exit_code_for(e);
  }
  return ok;
}

inline int cmd_validate(const fs::path& file, double theta, bool strict, std::ostream& out = std::cout,
                        std::ostream& err = std::cerr) {
  try {
    const auto m = load_csv(file.string(), theta);
    const auto& r = m.compatibility();
    out << "c_lower " << io::fmt(r.c_lower) << "\nc_upper " << io::fmt(r.c_upper) << "\nendpoints_vanish "
        << (r.endpoints_vanish ? "yes" : "no") << "\n"
        << (r.pass ? "pass" : "fail") << "\n";
    return (!r.pass && strict) ? certificate : ok;
  } catch (const Error& e) {
    report(err, e);
    return exit_code_for(e);
  }
}

/// Long-format plot data under dir/plots. Rewrites the same files on every
/// call, so repeated exports agree.
inline int cmd_export(const fs::path& dir, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  if (missing(dir, {"config.json", "series.csv", "scaling.csv", "boundary.csv", "rates.json", "snapshots"}, err))
    return failure;
  try {
    RunConfig c;
    io::apply_json(io::read_json(dir / "config.json"), c);
    const auto p = make_profile(c.theta);
    const auto rates = io::read_json(dir / "rates.json");
    const auto plots = dir / "plots";
    fs::create_directories(plots);

    auto fit_of = [&](const std::string& law) -> std::optional<std::pair<double, double>> {
      for (const auto& l : rates.at("laws"))
        if (l.at("law") == law && !l.at("exponent").is_null())
          return std::pair{l.at("log_prefactor").get<double>(), l.at("exponent").get<double>()};
      return std::nullopt;
    };
    const double nan = std::numeric_limits<double>::quiet_NaN();

    std::vector<fs::path> snaps;
    for (const auto& e : fs::directory_iterator(dir / "snapshots"))
      if (e.path().extension() == ".csv") snaps.push_back(e.path());
    std::sort(snaps.begin(), snaps.end());
    {
      io::CsvWriter w(plots / "mu_overlay.csv", {"tau", "eta", "mu", "phi"});
      for (const auto& s : snaps) {
        const auto t = io::read_table(s);
        const auto kt = t.col("t"), kx = t.col("x"), km = t.col("m");
        for (const auto& r : t.rows) {
          if (!(r[kt] > 0.0)) break;
          const double s_a = std::pow(r[kt], p.alpha());
          const double eta = r[kx] / s_a;
          w.row({std::log(r[kt]), eta, s_a * r[km], p.phi(eta)});
        }
      }
    }
    {
      const auto s = io::read_table(dir / "series.csv");
      const auto fit = fit_of("H");
      io::CsvWriter w(plots / "lyapunov.csv", {"tau", "H", "dH_fd", "dH_identity", "envelope"});
      for (const auto& r : s.rows) {
        const double tau = r[s.col("tau")];
        w.row({tau, r[s.col("H")], r[s.col("dH_fd")], r[s.col("dH_identity")],
               fit ? std::exp(fit->first + fit->second * tau) : nan});
      }
    }
    {
      const auto s = io::read_table(dir / "scaling.csv");
      const auto fit = fit_of("support_radius");
      io::CsvWriter w(plots / "support_loglog.csv", {"t", "log_t_eps", "log_radius", "log_fit"});
      for (const auto& r : s.rows) {
        const double lt = std::log(r[s.col("t")] + c.eps);
        w.row({r[s.col("t")], lt, std::log(r[s.col("support_radius")]), fit ? fit->first + fit->second * lt : nan});
      }
    }
    {
      // curve ids: 0 left boundary, 1 right boundary; the exterior
      // characteristic tangent to the boundary at node k, traced back to
      // t = 0, gets id 2 + 2k (left) and 3 + 2k (right)
      const auto b = io::read_table(dir / "boundary.csv");
      const auto t = b.column("t"), gl = b.column("gammaL"), gr = b.column("gammaR"), dl = b.column("dgL"),
                 dr = b.column("dgR");
      io::CsvWriter w(plots / "boundary_fan.csv", {"curve", "side", "t", "x"});
      for (std::size_t i = 0; i < t.size(); ++i) w.row({0, -1, t[i], gl[i]});
      for (std::size_t i = 0; i < t.size(); ++i) w.row({1, 1, t[i], gr[i]});
      const std::size_t stride = std::max<std::size_t>(1, t.size() / 16);
      for (std::size_t k = stride; k < t.size(); k += stride)
        for (std::size_t i = 0; i <= k; ++i) {
          w.row({2.0 + 2.0 * static_cast<double>(k), -1, t[i], gl[k] + (t[i] - t[k]) * dl[k]});
          w.row({3.0 + 2.0 * static_cast<double>(k), 1, t[i], gr[k] + (t[i] - t[k]) * dr[k]});
        }
    }
    out << "wrote " << (plots / "mu_overlay.csv").string() << ", lyapunov.csv, support_loglog.csv, boundary_fan.csv\n";
  } catch (const FormatError& e) {
    report(err, e);
    return failure;
  } catch (const std::exception& e) {
    report(err, e);
    return failure;
  }
  return ok;
}

}  // namespace dmfp::cli
