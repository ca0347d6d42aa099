#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "cli.hpp"
#include "sqrtba/synthetic.hpp"

using namespace sqrtba;
using namespace sqrtba::cli;

namespace {

struct Flags {
  std::optional<std::string> backend, precision, out;
  std::optional<int> max_iters, cg_max;
  std::optional<double> ftol, lambda0, huber, sigma, zmin, memory_limit_mb;
  std::optional<std::size_t> threads;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> config;
  bool householder = false;
  bool no_normalize = false;
};

void add_solver_flags(CLI::App* app, Flags& f) {
  app->add_option("--backend", f.backend,
                  "comma-separated backends: sqrt_ba, explicit_sc");
  app->add_option("--precision", f.precision,
                  "comma-separated precisions: single, double");
  app->add_option("--max-iters", f.max_iters, "outer iteration cap");
  app->add_option("--ftol", f.ftol, "relative function tolerance");
  app->add_option("--lambda0", f.lambda0, "initial damping");
  app->add_option("--cg-max", f.cg_max, "PCG iteration cap");
  app->add_option("--huber", f.huber, "Huber threshold in pixels");
  app->add_option("--threads", f.threads, "worker threads (0 = all)");
  app->add_option("--seed", f.seed, "perturbation seed");
  app->add_option("--sigma", f.sigma, "state perturbation scale");
  app->add_option("--zmin", f.zmin, "minimum point depth");
  app->add_option("--memory-limit-mb", f.memory_limit_mb,
                  "abort a run once tracked allocations exceed this");
  app->add_flag("--householder", f.householder,
                "marginalize with Householder instead of Givens");
  app->add_flag("--no-normalize", f.no_normalize, "skip gauge normalization");
  app->add_option("--config", f.config, "key = value settings file");
}

// defaults < environment < config file < command line
Settings resolve(const Flags& f) {
  Settings s = default_settings();
  if (f.config) apply_config(s, read_config_file(*f.config));
  auto set = [&](const char* key, const auto& v) {
    if (!v) return;
    std::ostringstream os;
    os << std::setprecision(17) << *v;
    apply_setting(s, key, os.str());
  };
  set("backend", f.backend);
  set("precision", f.precision);
  set("max_iters", f.max_iters);
  set("ftol", f.ftol);
  set("lambda0", f.lambda0);
  set("cg_max", f.cg_max);
  set("huber", f.huber);
  set("threads", f.threads);
  set("seed", f.seed);
  set("sigma", f.sigma);
  set("zmin", f.zmin);
  set("memory_limit_mb", f.memory_limit_mb);
  set("out", f.out);
  if (f.householder) s.solver.use_householder = true;
  if (f.no_normalize) s.preprocess.normalize = false;
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Square-root bundle adjustment with a Schur complement baseline"};
  app.require_subcommand(1);

  Flags solve_flags;
  std::vector<std::string> problems;
  auto* solve = app.add_subcommand("solve", "run every backend x precision on every problem");
  solve->add_option("problems", problems,
                    "BAL files (.txt/.gz), surrogate:ladybug49 or random:<seed>")
      ->required();
  add_solver_flags(solve, solve_flags);
  solve->add_option("--out", solve_flags.out, "output directory");

  std::string trace_dir;
  std::string profile_out;
  std::vector<double> taus{1e-1, 1e-2, 1e-3};
  auto* profile = app.add_subcommand("profile", "performance profiles from traces");
  profile->add_option("traces", trace_dir, "directory of <problem>__<solver>.csv")
      ->required();
  profile->add_option("--tau", taus, "cost thresholds")->check(CLI::PositiveNumber);
  profile->add_option("--out", profile_out, "output directory (default: traces)");

  Flags check_flags;
  std::string check_problem;
  double lambda = 1e-4;
  double threshold = 1e-6;
  auto* check = app.add_subcommand("check", "compare square-root and Schur complement reductions");
  check->add_option("problem", check_problem, "problem with at most 50 cameras")->required();
  add_solver_flags(check, check_flags);
  check->add_option("--lambda", lambda, "damping")->check(CLI::NonNegativeNumber);
  check->add_option("--threshold", threshold, "max relative deviation");

  std::string gen_out;
  std::uint64_t gen_seed = 49;
  auto* generate = app.add_subcommand("generate", "write the ladybug-49 surrogate as a BAL file");
  generate->add_option("output", gen_out, "output path")->required();
  generate->add_option("--seed", gen_seed, "generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfigError;
  }

  try {
    if (*solve) {
      const Settings s = resolve(solve_flags);
      return cmd_solve(make_manifest(problems, s), std::cout);
    }
    if (*profile) {
      return cmd_profile(trace_dir, taus,
                         profile_out.empty() ? trace_dir : profile_out,
                         std::cout);
    }
    if (*check) {
      Settings s = resolve(check_flags);
      if (!check_flags.precision) s.precisions = {Precision::kDouble, Precision::kSingle};
      return cmd_check(check_problem, s, lambda, threshold, std::cout);
    }
    if (*generate) {
      std::ofstream out(gen_out);
      if (!out) throw ConfigError("cannot write " + gen_out);
      write_bal(out, ladybug49_surrogate(gen_seed));
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitPartialFailure;
  }
  return kExitOk;
}
