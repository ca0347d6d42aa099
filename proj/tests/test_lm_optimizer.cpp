#include <gtest/gtest.h>

#include <cmath>
#include <deque>

#include "oracle.hpp"
#include "sqrtba/backends.hpp"
#include "sqrtba/bal_problem.hpp"
#include "sqrtba/lm_optimizer.hpp"

using namespace sqrtba;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

BaProblem small_problem(std::uint64_t seed, double sigma = 0.05) {
  test::Rng rng(seed);
  return perturb(test::random_small_problem(rng), sigma, seed);
}

SolverConfig config_for(Backend b, Precision p) {
  SolverConfig c;
  c.backend = b;
  c.precision = p;
  return c;
}

// Scripted objective: returns queued trial costs and model decreases.
class ScriptedObjective final : public LmObjective {
 public:
  ScriptedObjective(double cost, std::deque<double> trial, double model)
      : cost_(cost), trial_(std::move(trial)), model_(model) {}

  double cost() const override { return cost_; }
  void linearize() override {}
  double gradient_norm() const override { return 1.0; }
  StepReport solve(double, double, int) override {
    StepReport r;
    r.model_decrease = model_;
    return r;
  }
  double apply_step() override {
    saved_ = cost_;
    if (!trial_.empty()) {
      cost_ = trial_.front();
      trial_.pop_front();
    }
    return cost_;
  }
  void revert_step() override { cost_ = saved_; }
  VectorXd last_pose_increment() const override { return VectorXd::Zero(9); }

 private:
  double cost_, saved_ = 0.0;
  std::deque<double> trial_;
  double model_;
};

}  // namespace

TEST(UpdateLambda, AcceptedSteps) {
  const SolverConfig c;
  LmState s;
  s.lambda = 1.0;
  update_lambda(s, 1.0, true, c);
  EXPECT_DOUBLE_EQ(s.lambda, 1.0 / 3.0);
  s.lambda = 1.0;
  update_lambda(s, 0.5, true, c);
  EXPECT_DOUBLE_EQ(s.lambda, 1.0);
  s.lambda = 1.0;
  update_lambda(s, 0.25, true, c);  // 1 - (-0.5)^3
  EXPECT_DOUBLE_EQ(s.lambda, 1.125);
  EXPECT_DOUBLE_EQ(s.nu, 2.0);
}

TEST(UpdateLambda, RejectionsGrowGeometricallyAndResetOnAccept) {
  const SolverConfig c;
  LmState s;
  s.lambda = 1.0;
  update_lambda(s, 0.0, false, c);
  EXPECT_DOUBLE_EQ(s.lambda, 2.0);
  update_lambda(s, 0.0, false, c);
  EXPECT_DOUBLE_EQ(s.lambda, 8.0);
  EXPECT_DOUBLE_EQ(s.nu, 8.0);
  EXPECT_EQ(s.consecutive_rejections, 2);
  update_lambda(s, 1.0, true, c);
  EXPECT_DOUBLE_EQ(s.nu, 2.0);
  EXPECT_EQ(s.consecutive_rejections, 0);
}

TEST(UpdateLambda, ClampedToRange) {
  SolverConfig c;
  LmState s;
  s.lambda = 0.9 * c.max_lambda;
  update_lambda(s, 0.0, false, c);
  EXPECT_EQ(s.lambda, c.max_lambda);
  s.lambda = 1.1 * c.min_lambda;
  update_lambda(s, 1.0, true, c);
  EXPECT_EQ(s.lambda, c.min_lambda);
}

TEST(CheckTermination, Rules) {
  SolverConfig c;
  c.max_outer_iterations = 10;
  LmState s;
  s.iteration = 3;
  EXPECT_EQ(check_termination(s, true, 100.0, 99.99999, c),
            Termination::kFunctionTolerance);
  EXPECT_EQ(check_termination(s, true, 100.0, 90.0, c), Termination::kNone);
  // a rejection never meets the tolerance rule
  EXPECT_EQ(check_termination(s, false, 100.0, 100.0, c), Termination::kNone);
  EXPECT_EQ(check_termination(s, true, 1.0, 0.0, c), Termination::kFunctionTolerance);
  s.iteration = 10;
  EXPECT_EQ(check_termination(s, true, 100.0, 90.0, c), Termination::kMaxIterations);
}

TEST(LmOptimizer, ZeroToleranceRunsAllIterations) {
  SolverConfig c;
  c.function_tolerance = 0.0;
  c.max_outer_iterations = 7;
  std::deque<double> trial;
  for (int i = 0; i < 20; ++i) trial.push_back(100.0 - i - 1);
  ScriptedObjective obj(100.0, trial, 1.0);
  const LmResult r = LmOptimizer(c).run(obj);
  EXPECT_EQ(r.termination, Termination::kMaxIterations);
  EXPECT_EQ(r.iterations, 7);
  EXPECT_EQ(r.trace.records.size(), 8u);
  EXPECT_EQ(r.accepted_steps, 7);
}

TEST(LmOptimizer, FlatCostEndsAtLambdaLimit) {
  SolverConfig c;
  c.max_outer_iterations = 1000;
  ScriptedObjective obj(5.0, std::deque<double>(2000, 5.0), 1.0);
  const LmResult r = LmOptimizer(c).run(obj);
  EXPECT_EQ(r.termination, Termination::kLambdaLimit);
  EXPECT_EQ(r.accepted_steps, 0);
  EXPECT_EQ(r.final_cost, 5.0);
  EXPECT_LT(r.iterations, 1000);
}

TEST(LmOptimizer, RejectedStepDoesNotChangeCost) {
  SolverConfig c;
  c.max_outer_iterations = 3;
  c.function_tolerance = 0.0;
  ScriptedObjective obj(10.0, {12.0, 9.0, 8.0}, 1.0);
  const LmResult r = LmOptimizer(c).run(obj);
  ASSERT_EQ(r.trace.records.size(), 4u);
  EXPECT_FALSE(r.trace.records[1].accepted);
  EXPECT_EQ(r.trace.records[1].cost, 10.0);
  EXPECT_EQ(r.trace.records[1].trial_cost, 12.0);
  EXPECT_DOUBLE_EQ(r.trace.records[1].lambda, c.initial_lambda);
  EXPECT_DOUBLE_EQ(r.trace.records[2].lambda, 2 * c.initial_lambda);
  EXPECT_EQ(r.trace.records[3].cost, 8.0);
}

TEST(LmOptimizer, ZeroResidualProblemStopsImmediately) {
  BaProblem p = small_problem(3, 0.0);
  std::vector<Observation> exact = p.observations();
  for (Observation& o : exact)
    o.pixel = project<double>(p.cameras()[o.camera_index].to_vector(),
                              p.landmarks()[o.landmark_index]);
  BaProblem q(p.cameras(), p.landmarks(), exact);
  for (Backend b : {Backend::kSqrtBa, Backend::kExplicitSc}) {
    BaProblem w = q;
    const LmResult r = optimize(w, config_for(b, Precision::kDouble));
    EXPECT_EQ(r.termination, Termination::kFunctionTolerance);
    EXPECT_LE(r.iterations, 1);
    EXPECT_LT(r.final_cost, 1e-12);
  }
}

TEST(LmOptimizer, LinearProblemInTwoAcceptedSteps) {
  test::Rng rng(17);
  for (int rep = 0; rep < 10; ++rep) {
    const MatrixXd A = MatrixXd::Random(40, 12);
    const VectorXd b = VectorXd::Random(40);
    test::LinearObjective obj(A, b, VectorXd::Random(12) * 10.0);
    const double f0 = obj.cost();
    const double fstar = obj.optimal_cost();
    SolverConfig c;
    c.function_tolerance = 0.0;
    c.max_outer_iterations = 2;
    const LmResult r = LmOptimizer(c).run(obj);
    EXPECT_EQ(r.accepted_steps, 2);
    EXPECT_LE((r.final_cost - fstar) / (f0 - fstar), 1e-10);
    EXPECT_LT((obj.x() - obj.optimum()).norm(), 1e-6 * obj.optimum().norm());
  }
}

TEST(LmOptimizer, AcceptedCostsStrictlyDecrease) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    for (Backend b : {Backend::kSqrtBa, Backend::kExplicitSc}) {
      for (Precision pr : {Precision::kDouble, Precision::kSingle}) {
        BaProblem p = small_problem(seed);
        const LmResult r = optimize(p, config_for(b, pr));
        ASSERT_NE(r.termination, Termination::kError) << r.message;
        double last = r.trace.records.front().cost;
        for (std::size_t i = 1; i < r.trace.records.size(); ++i) {
          const TraceRecord& rec = r.trace.records[i];
          if (rec.accepted) {
            EXPECT_LT(rec.cost, last);
            last = rec.cost;
          } else {
            EXPECT_EQ(rec.cost, last);
          }
        }
        EXPECT_LT(r.final_cost, r.initial_cost);
      }
    }
  }
}

TEST(Backends, DoublePrecisionStepsAgree) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    BaProblem p0 = small_problem(seed);
    BaProblem p1 = p0;
    SolverConfig c = config_for(Backend::kSqrtBa, Precision::kDouble);
    c.max_outer_iterations = 5;
    c.function_tolerance = 0.0;
    c.forcing_max = 1e-14;
    c.cg_max_iterations = 5000;
    const LmResult a = optimize(p0, c);
    c.backend = Backend::kExplicitSc;
    const LmResult b = optimize(p1, c);
    ASSERT_EQ(a.trace.records.size(), b.trace.records.size());
    for (std::size_t i = 0; i < a.trace.records.size(); ++i) {
      const double ca = a.trace.records[i].cost, cb = b.trace.records[i].cost;
      EXPECT_LE(std::abs(ca - cb), 1e-8 * std::abs(cb)) << seed << " it " << i;
    }
    ASSERT_EQ(a.accepted_pose_increments.size(), b.accepted_pose_increments.size());
    for (std::size_t i = 0; i < a.accepted_pose_increments.size(); ++i) {
      const VectorXd& da = a.accepted_pose_increments[i];
      const VectorXd& db = b.accepted_pose_increments[i];
      EXPECT_LE((da - db).norm(), 1e-6 * std::max(db.norm(), 1e-12));
    }
  }
}

TEST(Backends, RevertRestoresStateAndDampingIsReversible) {
  const BaProblem p0 = small_problem(8);
  BaProblem p = p0;
  const SolverConfig c;
  SqrtBaObjective<double> obj(p, c);
  obj.linearize();
  obj.solve(1e-3, 1e-12, 1000);
  obj.apply_step();
  EXPECT_NE(p, p0);
  obj.revert_step();
  EXPECT_EQ(p, p0);

  // second solve on the same linearization goes through the undo path
  const StepReport second = obj.solve(1e-1, 1e-14, 5000);
  obj.apply_step();
  const BaProblem after_undo = p;

  BaProblem q = p0;
  SqrtBaObjective<double> fresh(q, c);
  fresh.linearize();
  const StepReport direct = fresh.solve(1e-1, 1e-14, 5000);
  fresh.apply_step();
  EXPECT_NEAR(second.model_decrease, direct.model_decrease,
              1e-10 * std::abs(direct.model_decrease));
  for (std::size_t i = 0; i < p.num_cameras(); ++i)
    EXPECT_LT((after_undo.cameras()[i].to_vector() - q.cameras()[i].to_vector())
                  .cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Backends, MemoryLimitReportsOutOfMemory) {
  for (Backend b : {Backend::kSqrtBa, Backend::kExplicitSc}) {
    BaProblem p = small_problem(2);
    SolverConfig c = config_for(b, Precision::kDouble);
    c.memory_limit_bytes = 64;
    const LmResult r = optimize(p, c);
    EXPECT_EQ(r.termination, Termination::kOutOfMemory);
    EXPECT_FALSE(r.message.empty());
  }
}

TEST(Backends, ResultsIndependentOfThreadCount) {
  for (Backend b : {Backend::kSqrtBa, Backend::kExplicitSc}) {
    SolverConfig c = config_for(b, Precision::kDouble);
    c.max_outer_iterations = 5;
    BaProblem p1 = small_problem(9), p4 = small_problem(9);
    c.thread_count = 1;
    const LmResult r1 = optimize(p1, c);
    c.thread_count = 4;
    const LmResult r4 = optimize(p4, c);
    ASSERT_EQ(r1.trace.records.size(), r4.trace.records.size());
    for (std::size_t i = 0; i < r1.trace.records.size(); ++i)
      EXPECT_EQ(r1.trace.records[i].cost, r4.trace.records[i].cost);
    EXPECT_EQ(p1, p4);
  }
}

TEST(SolverConfig, ValidationAndIds) {
  SolverConfig c;
  EXPECT_EQ(c.solver_id(), "sqrt_ba-64");
  c.backend = Backend::kExplicitSc;
  c.precision = Precision::kSingle;
  EXPECT_EQ(c.solver_id(), "explicit_sc-32");
  c.initial_lambda = 0.0;
  EXPECT_THROW(c.validate(), Error);
  EXPECT_THROW(parse_backend("cholmod"), Error);
  EXPECT_EQ(parse_backend("sqrt_ba"), Backend::kSqrtBa);
}
