#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sqrtba/bal_problem.hpp"
#include "sqrtba/lm_optimizer.hpp"

namespace sqrtba::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitPartialFailure = 1;
inline constexpr int kExitConfigError = 2;

inline constexpr const char* kThreadsEnv = "SQRTBA_NUM_THREADS";

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct RunManifest {
  std::vector<std::string> problems;
  std::vector<SolverConfig> solvers;
  PreprocessOptions preprocess;
  std::filesystem::path out_dir = "results";
  std::uint64_t seed = 42;

  void validate() const;
};

// Solver settings before expansion into the backend x precision matrix.
struct Settings {
  std::vector<Backend> backends{Backend::kSqrtBa};
  std::vector<Precision> precisions{Precision::kDouble};
  SolverConfig solver;
  PreprocessOptions preprocess;
  std::filesystem::path out_dir = "results";
};

// Defaults with the thread count taken from SQRTBA_NUM_THREADS if set.
Settings default_settings();

// key = value per line, '#' starts a comment.
std::map<std::string, std::string> read_config_file(
    const std::filesystem::path& path);

// Throws ConfigError on unknown keys or malformed values.
void apply_setting(Settings& s, const std::string& key,
                   const std::string& value);
void apply_config(Settings& s, const std::map<std::string, std::string>& cfg);

RunManifest make_manifest(std::vector<std::string> problems,
                          const Settings& s);

// File path, or "surrogate:ladybug49", or "random:<seed>".
BaProblem load_problem(const std::string& spec);
std::string problem_id(const std::string& spec);

int cmd_solve(const RunManifest& manifest, std::ostream& log);
int cmd_profile(const std::filesystem::path& trace_dir,
                const std::vector<double>& taus,
                const std::filesystem::path& out_dir, std::ostream& log);
int cmd_check(const std::string& problem_spec, const Settings& s,
              double lambda, double threshold, std::ostream& log);

}  // namespace sqrtba::cli
