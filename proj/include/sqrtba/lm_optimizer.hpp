#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "sqrtba/bal_problem.hpp"
#include "sqrtba/common.hpp"
#include "sqrtba/pcg.hpp"
#include "sqrtba/trace.hpp"

namespace sqrtba {

enum class Backend { kSqrtBa, kExplicitSc };

std::string_view to_string(Backend b);
Backend parse_backend(std::string_view s);

struct SolverConfig {
  Backend backend = Backend::kSqrtBa;
  Precision precision = Precision::kDouble;
  int max_outer_iterations = 50;
  double function_tolerance = 1e-6;
  double initial_lambda = 1e-4;
  double min_lambda = 1e-16;
  double max_lambda = 1e16;
  int cg_max_iterations = 500;
  // eta_k = min(forcing_max, (|g_k| / |g_0|)^forcing_exponent)
  double forcing_max = 0.1;
  double forcing_exponent = 0.5;
  double huber_delta = 1.0;
  double min_damping_diagonal = 1e-12;
  bool use_householder = false;
  std::size_t thread_count = 0;
  std::uint64_t seed = 42;
  // 0 disables the limit
  std::size_t memory_limit_bytes = 0;

  // Throws Error on invalid values.
  void validate() const;
  // e.g. "sqrt_ba-64"
  std::string solver_id() const;
};

struct LmState {
  double lambda = 1e-4;
  double nu = 2.0;
  int iteration = 0;
  double cost = 0.0;
  int consecutive_rejections = 0;
};

// Accepted: lambda * max(1/3, 1 - (2 rho - 1)^3), nu reset to 2.
// Rejected: lambda * nu, then nu doubles. Result clamped to the config range.
void update_lambda(LmState& state, double rho, bool accepted,
                   const SolverConfig& config);

enum class Termination {
  kNone,
  kFunctionTolerance,
  kMaxIterations,
  kLambdaLimit,
  kOutOfMemory,
  kError,
};

std::string_view to_string(Termination t);

// Stop on an accepted step with |cost_old - cost_new| <= tol * cost_new, on a
// zero cost, or once the iteration cap is reached.
Termination check_termination(const LmState& state, bool accepted,
                              double cost_old, double cost_new,
                              const SolverConfig& config);

struct StepReport {
  bool indefinite = false;
  int cg_iterations = 0;
  CgTermination cg_termination = CgTermination::kTolerance;
  // L(0) - L(dx) of the undamped linear model, >= 0 for a useful step
  double model_decrease = 0.0;
  std::size_t excluded_landmarks = 0;
};

// What the LM driver needs from a backend. The objective owns the current
// state; solve() computes a step for the last linearization which
// apply_step() moves to and revert_step() undoes.
class LmObjective {
 public:
  virtual ~LmObjective() = default;

  virtual double cost() const = 0;
  virtual void linearize() = 0;
  // norm of the (scaled) gradient of the last linearization
  virtual double gradient_norm() const = 0;
  virtual StepReport solve(double lambda, double cg_tolerance,
                           int cg_max_iterations) = 0;
  virtual double apply_step() = 0;
  virtual void revert_step() = 0;
  // pose part of the last step in problem coordinates
  virtual Eigen::VectorXd last_pose_increment() const = 0;
};

struct LmResult {
  ConvergenceTrace trace;
  Termination termination = Termination::kNone;
  std::string message;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;
  int accepted_steps = 0;
  int rejected_steps = 0;
  int indefinite_steps = 0;
  std::size_t max_excluded_landmarks = 0;
  std::vector<Eigen::VectorXd> accepted_pose_increments;
};

class LmOptimizer {
 public:
  explicit LmOptimizer(SolverConfig config);

  LmResult run(LmObjective& objective) const;

  const SolverConfig& config() const { return config_; }

 private:
  SolverConfig config_;
};

// Backend objective for the problem in the configured precision. The problem
// is updated in place during optimization.
std::unique_ptr<LmObjective> make_objective(BaProblem& problem,
                                            const SolverConfig& config);

// Runs one solver on the problem with thread and memory limits applied and
// the peak counter reset.
LmResult optimize(BaProblem& problem, const SolverConfig& config);

}  // namespace sqrtba
