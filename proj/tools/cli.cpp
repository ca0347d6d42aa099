#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>

#include "sqrtba/equivalence.hpp"
#include "sqrtba/evaluation.hpp"
#include "sqrtba/synthetic.hpp"

namespace sqrtba::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream is(value);
  T v{};
  is >> v;
  if (!is || !(is >> std::ws).eof())
    throw ConfigError("invalid value for " + key + ": '" + value + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "yes" || value == "on")
    return true;
  if (value == "0" || value == "false" || value == "no" || value == "off")
    return false;
  throw ConfigError("invalid boolean for " + key + ": '" + value + "'");
}

}  // namespace

void RunManifest::validate() const {
  if (problems.empty()) throw ConfigError("no problems given");
  if (solvers.empty()) throw ConfigError("no solver configurations given");
  for (const auto& s : solvers) {
    try {
      s.validate();
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  }
  if (!(preprocess.sigma >= 0)) throw ConfigError("sigma must be >= 0");
}

Settings default_settings() {
  Settings s;
  if (const char* env = std::getenv(kThreadsEnv)) {
    try {
      s.solver.thread_count = parse_number<std::size_t>(kThreadsEnv, env);
    } catch (const ConfigError&) {
      throw ConfigError(std::string("invalid ") + kThreadsEnv + ": '" + env +
                        "'");
    }
  }
  return s;
}

std::map<std::string, std::string> read_config_file(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::map<std::string, std::string> cfg;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path.string() + ":" + std::to_string(n) +
                        ": expected key = value");
    cfg[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return cfg;
}

void apply_setting(Settings& s, const std::string& key,
                   const std::string& value) {
  try {
    if (key == "backend") {
      s.backends.clear();
      for (const auto& b : split_list(value)) s.backends.push_back(parse_backend(b));
    } else if (key == "precision") {
      s.precisions.clear();
      for (const auto& p : split_list(value))
        s.precisions.push_back(parse_precision(p));
    } else if (key == "max_iters") {
      s.solver.max_outer_iterations = parse_number<int>(key, value);
    } else if (key == "ftol") {
      s.solver.function_tolerance = parse_number<double>(key, value);
    } else if (key == "lambda0") {
      s.solver.initial_lambda = parse_number<double>(key, value);
    } else if (key == "cg_max") {
      s.solver.cg_max_iterations = parse_number<int>(key, value);
    } else if (key == "huber") {
      s.solver.huber_delta = parse_number<double>(key, value);
    } else if (key == "threads") {
      s.solver.thread_count = parse_number<std::size_t>(key, value);
    } else if (key == "seed") {
      s.solver.seed = parse_number<std::uint64_t>(key, value);
      s.preprocess.seed = s.solver.seed;
    } else if (key == "sigma") {
      s.preprocess.sigma = parse_number<double>(key, value);
    } else if (key == "zmin") {
      s.preprocess.z_min = parse_number<double>(key, value);
    } else if (key == "normalize") {
      s.preprocess.normalize = parse_bool(key, value);
    } else if (key == "out") {
      s.out_dir = value;
    } else if (key == "memory_limit_mb") {
      s.solver.memory_limit_bytes =
          std::size_t(parse_number<double>(key, value) * 1024.0 * 1024.0);
    } else if (key == "householder") {
      s.solver.use_householder = parse_bool(key, value);
    } else if (key == "forcing_max") {
      s.solver.forcing_max = parse_number<double>(key, value);
    } else if (key == "forcing_exponent") {
      s.solver.forcing_exponent = parse_number<double>(key, value);
    } else if (key == "min_damping") {
      s.solver.min_damping_diagonal = parse_number<double>(key, value);
    } else {
      throw ConfigError("unknown setting '" + key + "'");
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

void apply_config(Settings& s, const std::map<std::string, std::string>& cfg) {
  for (const auto& [k, v] : cfg) apply_setting(s, k, v);
}

RunManifest make_manifest(std::vector<std::string> problems,
                          const Settings& s) {
  RunManifest m;
  m.problems = std::move(problems);
  m.preprocess = s.preprocess;
  m.out_dir = s.out_dir;
  m.seed = s.solver.seed;
  for (Backend b : s.backends)
    for (Precision p : s.precisions) {
      SolverConfig c = s.solver;
      c.backend = b;
      c.precision = p;
      m.solvers.push_back(c);
    }
  return m;
}

BaProblem load_problem(const std::string& spec) {
  if (spec == "surrogate:ladybug49") return ladybug49_surrogate();
  if (spec.rfind("random:", 0) == 0) {
    const auto seed = parse_number<std::uint64_t>("random seed", spec.substr(7));
    SyntheticOptions o;
    o.num_cameras = 3;
    o.num_landmarks = 30;
    o.max_obs = 3;
    return random_problem(o, seed);
  }
  return load_bal(spec);
}

std::string problem_id(const std::string& spec) {
  if (spec.find(':') != std::string::npos &&
      !std::filesystem::exists(spec)) {
    std::string id = spec;
    std::replace(id.begin(), id.end(), ':', '-');
    return id;
  }
  std::filesystem::path p(spec);
  while (p.has_extension() &&
         (p.extension() == ".gz" || p.extension() == ".bz2" ||
          p.extension() == ".txt"))
    p = p.stem();
  return p.filename().string();
}

int cmd_solve(const RunManifest& manifest, std::ostream& log) {
  manifest.validate();
  namespace fs = std::filesystem;
  fs::create_directories(manifest.out_dir);

  struct Row {
    std::string problem;
    std::string solver;
    LmResult result;
    double time_s;
  };
  std::vector<Row> rows;
  std::vector<ProblemSummary> sizes;
  bool failure = false;

  for (const auto& spec : manifest.problems) {
    const std::string id = problem_id(spec);
    BaProblem prepared;
    double prep_s = 0.0;
    try {
      const auto t0 = std::chrono::steady_clock::now();
      prepared = preprocess(load_problem(spec), manifest.preprocess);
      prep_s = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                             t0)
                   .count();
    } catch (const std::exception& e) {
      log << "[" << id << "] failed to load: " << e.what() << "\n";
      failure = true;
      continue;
    }
    sizes.push_back(summarize(prepared, id));
    log << "[" << id << "] " << prepared.num_cameras() << " cameras, "
        << prepared.num_landmarks() << " landmarks, "
        << prepared.num_observations() << " observations\n";

    for (const auto& config : manifest.solvers) {
      BaProblem work = prepared;
      LmResult r = optimize(work, config);
      r.trace.problem_id = id;
      r.trace.preprocessing_s = prep_s;
      const double t = r.trace.records.empty() ? 0.0 : r.trace.records.back().time_s;
      std::ofstream out(manifest.out_dir / trace_file_name(r.trace));
      write_trace_csv(out, r.trace);
      log << "[" << id << "] " << config.solver_id() << ": "
          << to_string(r.termination) << ", cost " << std::setprecision(10)
          << r.initial_cost << " -> " << r.final_cost << ", "
          << r.iterations << " iterations (" << r.accepted_steps
          << " accepted, " << r.indefinite_steps << " indefinite), "
          << std::setprecision(4) << t << " s";
      if (!r.message.empty()) log << " [" << r.message << "]";
      log << "\n";
      if (r.termination == Termination::kError ||
          r.termination == Termination::kOutOfMemory)
        failure = true;
      rows.push_back({id, config.solver_id(), std::move(r), t});
    }
  }

  std::map<std::string, double> f_star;
  for (const auto& row : rows) {
    auto [it, inserted] = f_star.try_emplace(row.problem, row.result.final_cost);
    if (!inserted) it->second = std::min(it->second, row.result.final_cost);
  }
  std::ofstream summary(manifest.out_dir / "summary.csv");
  summary << "problem_id,solver_id,termination,initial_cost,final_cost,f_star,"
             "iterations,accepted,rejected,indefinite,time_s,peak_memory_bytes\n";
  summary << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& row : rows) {
    const auto& r = row.result;
    summary << row.problem << ',' << row.solver << ','
            << to_string(r.termination) << ',' << r.initial_cost << ','
            << r.final_cost << ',' << f_star[row.problem] << ','
            << r.iterations << ',' << r.accepted_steps << ','
            << r.rejected_steps << ',' << r.indefinite_steps << ','
            << row.time_s << ','
            << (r.trace.records.empty() ? 0
                                        : r.trace.records.back().peak_memory_bytes)
            << '\n';
  }
  for (const auto& [p, f] : f_star)
    log << "[" << p << "] f* = " << std::setprecision(10) << f << "\n";
  std::ofstream sz(manifest.out_dir / "sizes.csv");
  write_summary_csv(sz, sizes);
  return failure ? kExitPartialFailure : kExitOk;
}

int cmd_profile(const std::filesystem::path& trace_dir,
                const std::vector<double>& taus,
                const std::filesystem::path& out_dir, std::ostream& log) {
  const auto traces = load_traces(trace_dir);
  if (traces.empty()) {
    log << "no traces in " << trace_dir.string()
        << "; expected one file <problem>__<solver>.csv per (problem, solver)"
           " pair, for example from `sqrtba solve`\n";
    return kExitConfigError;
  }
  std::filesystem::create_directories(out_dir);
  for (double tau : taus) {
    const PerformanceProfile prof = performance_profile(traces, tau);
    const std::string base = "profile_tau" + tau_label(tau);
    std::ofstream csv(out_dir / (base + ".csv"));
    write_profile_csv(csv, prof);
    std::ofstream svg(out_dir / (base + ".svg"));
    write_profile_svg(svg, prof);
    log << "tau " << tau << ": " << prof.problems.size() << " problems, "
        << prof.solvers.size() << " solvers -> " << base << ".csv/.svg\n";
    for (std::size_t s = 0; s < prof.solvers.size(); ++s)
      log << "  " << prof.solvers[s] << ": rho(1) = " << prof.rho[s].front()
          << "%, rho(" << prof.alphas.back() << ") = " << prof.rho[s].back()
          << "%\n";
  }
  return kExitOk;
}

int cmd_check(const std::string& problem_spec, const Settings& s,
              double lambda, double threshold, std::ostream& log) {
  const BaProblem problem = preprocess(load_problem(problem_spec), s.preprocess);
  if (problem.num_cameras() > 50)
    throw ConfigError("check is limited to problems with at most 50 cameras (" +
                      std::to_string(problem.num_cameras()) + " given)");
  int code = kExitOk;
  for (Precision p : s.precisions) {
    const EquivalenceReport rep =
        p == Precision::kDouble
            ? check_equivalence<double>(problem, lambda, s.solver.huber_delta)
            : check_equivalence<float>(problem, lambda, s.solver.huber_delta);
    const bool graded = p == Precision::kDouble;
    const bool pass = rep.max_deviation() <= threshold;
    log << std::setprecision(3) << std::scientific;
    log << "[" << problem_id(problem_spec) << "] " << to_string(p)
        << " precision, lambda " << lambda << ", " << rep.num_cameras
        << " cameras, " << rep.num_landmarks << " landmarks ("
        << rep.excluded_landmarks << " rank-deficient)\n"
        << "  column scaling     " << rep.column_scaling << "\n"
        << "  reduced matrix     " << rep.reduced_matrix << "\n"
        << "  reduced gradient   " << rep.reduced_gradient << "\n"
        << "  pose increment     " << rep.pose_increment << "\n"
        << "  landmark increment " << rep.landmark_increment << "\n";
    if (graded)
      log << "  " << (pass ? "PASS" : "FAIL") << " (threshold " << threshold
          << ")\n";
    else
      log << "  informational only\n";
    log << std::defaultfloat;
    if (graded && !pass) code = kExitPartialFailure;
  }
  return code;
}

}  // namespace sqrtba::cli
