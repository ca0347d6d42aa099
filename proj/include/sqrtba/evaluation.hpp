#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "sqrtba/bal_problem.hpp"
#include "sqrtba/trace.hpp"

namespace sqrtba {

// f_tau = f* + tau (f0 - f*)
double cost_threshold(double f0, double f_star, double tau);

// Earliest record time whose running-minimum cost is <= f_tau, +inf if the
// threshold is never reached.
double time_to_threshold(const ConvergenceTrace& trace, double f_tau);

struct PerformanceProfile {
  double tau = 0.0;
  std::vector<double> alphas;
  std::vector<std::string> solvers;
  // rho[s][a] in percent
  std::vector<std::vector<double>> rho;
  std::vector<std::string> problems;
};

// n points log-spaced in [1, alpha_max]
std::vector<double> log_spaced_alphas(std::size_t n = 64,
                                      double alpha_max = 32.0);

// Needs exactly one trace per (problem, solver) pair; throws Error listing
// missing pairs otherwise. f*(p) is the least cost of any solver on p and
// f0(p) the largest initial cost.
PerformanceProfile performance_profile(
    const std::vector<ConvergenceTrace>& traces, double tau,
    const std::vector<double>& alphas = log_spaced_alphas());

// --- problem size summary ----------------------------------------------------

struct ProblemSummary {
  std::string problem_id;
  std::size_t num_cameras = 0;
  std::size_t num_landmarks = 0;
  std::size_t num_observations = 0;
  double obs_per_camera = 0.0;
  double obs_per_landmark_mean = 0.0;
  double obs_per_landmark_std = 0.0;  // population
  std::size_t obs_per_landmark_max = 0;
};

ProblemSummary summarize(const BaProblem& problem, std::string problem_id);

// Landmark-block storage the square-root backend allocates for the problem:
// sum_j (2 k_j + 3)(9 k_j + 4) scalars.
std::size_t landmark_block_bytes(const BaProblem& problem,
                                 std::size_t scalar_size);

// --- files -------------------------------------------------------------------

void write_trace_csv(std::ostream& out, const ConvergenceTrace& trace);
// Reads all traces from a CSV produced by write_trace_csv.
std::vector<ConvergenceTrace> read_trace_csv(std::istream& in);

void write_profile_csv(std::ostream& out, const PerformanceProfile& profile);
PerformanceProfile read_profile_csv(std::istream& in);
void write_profile_svg(std::ostream& out, const PerformanceProfile& profile);

void write_summary_csv(std::ostream& out,
                       const std::vector<ProblemSummary>& rows);

// File name of a trace: <problem>__<solver>.csv
std::string trace_file_name(const ConvergenceTrace& trace);

// Loads every *.csv trace in a directory (skipping profile and summary files).
std::vector<ConvergenceTrace> load_traces(const std::filesystem::path& dir);

// One CSV per trace, one CSV and one SVG per tau, sizes.csv. Returns the
// written paths.
std::vector<std::filesystem::path> emit_outputs(
    const std::vector<ConvergenceTrace>& traces,
    const std::vector<double>& taus,
    const std::vector<ProblemSummary>& summaries,
    const std::filesystem::path& out_dir);

// "0.01" style label used in profile file names
std::string tau_label(double tau);

}  // namespace sqrtba
