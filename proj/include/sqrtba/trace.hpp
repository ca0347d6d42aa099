#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace sqrtba {

// One row per outer iteration. Row 0 is the initial state at t = 0.
struct TraceRecord {
  int iteration = 0;
  double time_s = 0.0;
  // cost of the current (accepted) state after this iteration
  double cost = 0.0;
  // cost evaluated at the trial point (equals cost for row 0)
  double trial_cost = 0.0;
  double lambda = 0.0;
  int cg_iterations = 0;
  bool accepted = false;
  bool indefinite = false;
  std::size_t peak_memory_bytes = 0;
};

struct ConvergenceTrace {
  std::string problem_id;
  std::string solver_id;
  std::string precision;
  std::vector<TraceRecord> records;
  std::string termination;
  double preprocessing_s = 0.0;

  double initial_cost() const {
    return records.empty() ? 0.0 : records.front().cost;
  }
  double final_cost() const {
    return records.empty() ? 0.0 : records.back().cost;
  }
};

}  // namespace sqrtba
