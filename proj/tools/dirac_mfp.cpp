// dirac_mfp: solve, sweep, refit, validate and export runs of the Lagrangian
// mean-field-planning solver. See README.md for the exit codes.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dmfp/cli.hpp"

namespace {

// Flags that override the config file; unset ones leave it untouched.
struct Overrides {
  std::string config;
  std::optional<double> theta, eps, T, a, b, t_min, t_max, tol;
  std::optional<int> nt, ny, max_iter, stride;
  std::optional<std::string> target, path, out, linear_solver;
  std::optional<std::uint64_t> seed;
  bool strict = false;

  void attach(CLI::App* app) {
    app->add_option("-c,--config", config, "JSON config file")->check(CLI::ExistingFile);
    app->add_option("--theta", theta, "pressure exponent");
    app->add_option("--eps", eps, "initial regularization time");
    app->add_option("--T", T, "terminal time");
    app->add_option("--nt", nt, "time intervals");
    app->add_option("--ny", ny, "label intervals");
    app->add_option("--target", target, "power_bump | self_similar | file");
    app->add_option("--a", a, "left end of a power_bump target");
    app->add_option("--b", b, "right end of a power_bump target");
    app->add_option("--target-path", path, "CSV file for a file target");
    app->add_option("-o,--out", out, "output directory");
    app->add_option("--fit-tmin", t_min, "start of the fit window");
    app->add_option("--fit-tmax", t_max, "end of the fit window");
    app->add_option("--max-iter", max_iter, "Newton iteration cap");
    app->add_option("--tol", tol, "Newton residual tolerance");
    app->add_option("--linear-solver", linear_solver, "banded-direct | conjugate-gradient");
    app->add_option("--snapshot-stride", stride, "write every k-th slice");
    app->add_option("--seed", seed, "seed recorded with the run");
    app->add_flag("--strict", strict, "exit 3 when a certificate fails");
  }

  dmfp::RunConfig resolve() const {
    dmfp::RunConfig c = config.empty() ? dmfp::RunConfig{} : dmfp::io::load_config(config);
    if (theta) c.theta = *theta;
    if (eps) c.eps = *eps;
    if (T) c.T = *T;
    if (nt) c.nt = *nt;
    if (ny) c.ny = *ny;
    if (target) c.target.kind = *target;
    if (a) c.target.a = *a;
    if (b) c.target.b = *b;
    if (path) c.target.path = *path;
    if (out) c.output = *out;
    if (t_min) c.fit_t_min = t_min;
    if (t_max) c.fit_t_max = t_max;
    if (max_iter) c.solver.newton_max_iter = *max_iter;
    if (tol) c.solver.residual_tol = *tol;
    if (linear_solver) c.solver.linear_solver = dmfp::linear_solver_from_string(*linear_solver);
    if (stride) c.snapshot_stride = *stride;
    if (seed) c.seed = *seed;
    if (strict) c.strict = true;
    return c;
  }
};

}  // namespace

int main(int argc, char** argv) {
  using namespace dmfp;
  CLI::App app{"Mean-field planning from a Dirac initial mass"};
  app.require_subcommand(1);

  Overrides solve_opts;
  auto* solve = app.add_subcommand("solve", "solve one configuration and write a run directory");
  solve_opts.attach(solve);

  Overrides sweep_opts;
  std::string axis = "eps";
  std::vector<double> values;
  auto* sweep = app.add_subcommand("sweep", "independent runs over eps or theta");
  sweep_opts.attach(sweep);
  sweep->add_option("--axis", axis, "eps | theta")->check(CLI::IsMember({"eps", "theta"}));
  sweep->add_option("--values", values, "values of the swept parameter")->delimiter(',');

  std::string run_dir;
  std::optional<double> r_tmin, r_tmax;
  auto* rates = app.add_subcommand("rates", "refit the scaling laws of a run directory");
  rates->add_option("run_dir", run_dir, "run directory")->required();
  rates->add_option("--fit-tmin", r_tmin, "start of the fit window");
  rates->add_option("--fit-tmax", r_tmax, "end of the fit window");

  std::string target_file;
  double v_theta = 1.0;
  bool v_strict = false;
  auto* validate = app.add_subcommand("validate", "compatibility report for a terminal density CSV");
  validate->add_option("file", target_file, "CSV with header x,density")->required();
  validate->add_option("--theta", v_theta, "pressure exponent");
  validate->add_flag("--strict", v_strict, "exit 3 when the report fails");

  std::string export_dir;
  auto* exp = app.add_subcommand("export", "write plot data under <run_dir>/plots");
  exp->add_option("run_dir", export_dir, "run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? cli::ok : cli::usage;
  }

  try {
    if (*solve) return cli::cmd_solve(solve_opts.resolve());
    if (*sweep) return cli::cmd_sweep(sweep_opts.resolve(), cli::sweep_axis_from_string(axis), values);
    if (*rates) return cli::cmd_rates(run_dir, r_tmin, r_tmax);
    if (*validate) return cli::cmd_validate(target_file, v_theta, v_strict);
    if (*exp) return cli::cmd_export(export_dir);
  } catch (const Error& e) {
    cli::report(std::cerr, e);
    return cli::exit_code_for(e);
  }
  return cli::usage;
}
