#include "sqrtba/lm_optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "sqrtba/backends.hpp"
#include "sqrtba/memory.hpp"
#include "sqrtba/parallel.hpp"

namespace sqrtba {

std::string_view to_string(Backend b) {
  return b == Backend::kSqrtBa ? "sqrt_ba" : "explicit_sc";
}

Backend parse_backend(std::string_view s) {
  if (s == "sqrt_ba" || s == "sqrtba" || s == "nm") return Backend::kSqrtBa;
  if (s == "explicit_sc" || s == "sc" || s == "explicit") return Backend::kExplicitSc;
  throw Error("unknown backend '" + std::string(s) +
              "' (expected sqrt_ba or explicit_sc)");
}

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::kNone:
      return "none";
    case Termination::kFunctionTolerance:
      return "function_tolerance";
    case Termination::kMaxIterations:
      return "max_iterations";
    case Termination::kLambdaLimit:
      return "lambda_limit";
    case Termination::kOutOfMemory:
      return "out_of_memory";
    case Termination::kError:
      return "error";
  }
  return "unknown";
}

void SolverConfig::validate() const {
  auto fail = [](const std::string& what) {
    throw Error("invalid solver config: " + what);
  };
  if (max_outer_iterations < 0) fail("max_outer_iterations < 0");
  if (!(function_tolerance >= 0)) fail("function_tolerance < 0");
  if (!(initial_lambda > 0)) fail("initial_lambda must be > 0");
  if (!(min_lambda > 0) || !(max_lambda >= min_lambda))
    fail("lambda clamp range");
  if (cg_max_iterations <= 0) fail("cg_max_iterations must be > 0");
  if (!(forcing_max > 0) || !(forcing_exponent >= 0)) fail("forcing sequence");
  if (!(huber_delta > 0)) fail("huber_delta must be > 0");
  if (!(min_damping_diagonal > 0)) fail("min_damping_diagonal must be > 0");
}

std::string SolverConfig::solver_id() const {
  std::string id(to_string(backend));
  id += precision == Precision::kSingle ? "-32" : "-64";
  return id;
}

void update_lambda(LmState& state, double rho, bool accepted,
                   const SolverConfig& config) {
  if (accepted) {
    const double t = 2.0 * rho - 1.0;
    state.lambda *= std::max(1.0 / 3.0, 1.0 - t * t * t);
    state.nu = 2.0;
    state.consecutive_rejections = 0;
  } else {
    state.lambda *= state.nu;
    state.nu *= 2.0;
    ++state.consecutive_rejections;
  }
  state.lambda = std::clamp(state.lambda, config.min_lambda, config.max_lambda);
}

Termination check_termination(const LmState& state, bool accepted,
                              double cost_old, double cost_new,
                              const SolverConfig& config) {
  if (accepted &&
      std::abs(cost_old - cost_new) <= config.function_tolerance * cost_new)
    return Termination::kFunctionTolerance;
  if (cost_new == 0.0) return Termination::kFunctionTolerance;
  if (state.iteration >= config.max_outer_iterations)
    return Termination::kMaxIterations;
  return Termination::kNone;
}

LmOptimizer::LmOptimizer(SolverConfig config) : config_(std::move(config)) {
  config_.validate();
}

LmResult LmOptimizer::run(LmObjective& objective) const {
  using clock = std::chrono::steady_clock;
  LmResult result;
  result.trace.solver_id = config_.solver_id();
  result.trace.precision = std::string(to_string(config_.precision));
  auto& records = result.trace.records;
  auto& tracker = MemoryTracker::instance();

  const auto start = clock::now();
  auto elapsed = [&] {
    double t = std::chrono::duration<double>(clock::now() - start).count();
    // keep record times strictly increasing
    if (!records.empty() && t <= records.back().time_s)
      t = std::nextafter(records.back().time_s, INFINITY);
    return t;
  };

  LmState state;
  state.lambda = config_.initial_lambda;

  auto finish = [&](Termination t) {
    result.termination = t;
    result.trace.termination = std::string(to_string(t));
    result.final_cost = state.cost;
    result.iterations = state.iteration;
    return result;
  };

  try {
    state.cost = objective.cost();
    result.initial_cost = state.cost;
    if (!std::isfinite(state.cost)) {
      result.message = "initial cost is not finite";
      records.push_back({0, 0.0, state.cost, state.cost, state.lambda});
      return finish(Termination::kError);
    }
    TraceRecord first;
    first.cost = first.trial_cost = state.cost;
    first.lambda = state.lambda;
    first.accepted = true;
    first.peak_memory_bytes = tracker.peak_bytes();
    records.push_back(first);
    if (config_.max_outer_iterations == 0)
      return finish(Termination::kMaxIterations);
    if (state.cost == 0.0) return finish(Termination::kFunctionTolerance);

    objective.linearize();
    const double g0 = objective.gradient_norm();
    double g = g0;
    if (g0 == 0.0) return finish(Termination::kFunctionTolerance);

    while (true) {
      ++state.iteration;
      const double eta = std::min(
          config_.forcing_max, std::pow(g / g0, config_.forcing_exponent));
      const StepReport step =
          objective.solve(state.lambda, eta, config_.cg_max_iterations);
      result.max_excluded_landmarks =
          std::max(result.max_excluded_landmarks, step.excluded_landmarks);

      TraceRecord rec;
      rec.iteration = state.iteration;
      rec.lambda = state.lambda;
      rec.cg_iterations = step.cg_iterations;
      rec.indefinite = step.indefinite;

      bool accepted = false;
      double rho = 0.0;
      double new_cost = state.cost;
      if (!step.indefinite) {
        new_cost = objective.apply_step();
        const double actual = state.cost - new_cost;
        rho = actual / step.model_decrease;
        accepted = std::isfinite(new_cost) && step.model_decrease > 0.0 &&
                   actual > 0.0 && rho > 0.0;
        if (!accepted) objective.revert_step();
      }
      rec.trial_cost = new_cost;
      rec.accepted = accepted;

      const double old_cost = state.cost;
      if (accepted) {
        state.cost = new_cost;
        ++result.accepted_steps;
        result.accepted_pose_increments.push_back(
            objective.last_pose_increment());
      } else {
        ++result.rejected_steps;
        if (step.indefinite) ++result.indefinite_steps;
      }
      update_lambda(state, rho, accepted, config_);
      rec.cost = state.cost;
      rec.peak_memory_bytes = tracker.peak_bytes();
      rec.time_s = elapsed();
      records.push_back(rec);

      const Termination t =
          check_termination(state, accepted, old_cost, state.cost, config_);
      if (t != Termination::kNone) return finish(t);
      if (!accepted && state.lambda >= config_.max_lambda &&
          state.consecutive_rejections > 1)
        return finish(Termination::kLambdaLimit);

      if (accepted) {
        objective.linearize();
        g = objective.gradient_norm();
        if (g == 0.0) return finish(Termination::kFunctionTolerance);
      }
    }
  } catch (const MemoryLimitExceeded& e) {
    result.message = e.what();
    return finish(Termination::kOutOfMemory);
  } catch (const std::bad_alloc& e) {
    result.message = e.what();
    return finish(Termination::kOutOfMemory);
  } catch (const Error& e) {
    result.message = e.what();
    return finish(Termination::kError);
  }
}

std::unique_ptr<LmObjective> make_objective(BaProblem& problem,
                                            const SolverConfig& config) {
  const bool single = config.precision == Precision::kSingle;
  if (config.backend == Backend::kSqrtBa) {
    if (single) return std::make_unique<SqrtBaObjective<float>>(problem, config);
    return std::make_unique<SqrtBaObjective<double>>(problem, config);
  }
  if (single) return std::make_unique<ScObjective<float>>(problem, config);
  return std::make_unique<ScObjective<double>>(problem, config);
}

LmResult optimize(BaProblem& problem, const SolverConfig& config) {
  config.validate();
  ThreadLimit threads(config.thread_count);
  ScopedMemoryLimit limit(config.memory_limit_bytes);
  MemoryTracker::instance().reset_peak();
  LmOptimizer optimizer(config);
  try {
    auto objective = make_objective(problem, config);
    return optimizer.run(*objective);
  } catch (const MemoryLimitExceeded& e) {
    LmResult result;
    result.trace.solver_id = config.solver_id();
    result.trace.precision = std::string(to_string(config.precision));
    result.termination = Termination::kOutOfMemory;
    result.trace.termination = std::string(to_string(result.termination));
    result.message = e.what();
    return result;
  }
}

}  // namespace sqrtba
