#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "sqrtba/landmark_block.hpp"
#include "sqrtba/lm_optimizer.hpp"
#include "sqrtba/reduced_solver.hpp"
#include "sqrtba/sc_baseline.hpp"

namespace sqrtba {

namespace detail {

// Current state and the last step shared by both backends.
class StepState {
 public:
  explicit StepState(BaProblem& problem) : problem_(problem) {}

  double apply(double huber_delta);
  void revert();

 protected:
  BaProblem& problem_;
  Eigen::VectorXd pose_step_;      // 9 n_p
  Eigen::VectorXd landmark_step_;  // 3 n_l
  std::vector<CameraParams> saved_cameras_;
  std::vector<Eigen::Vector3d> saved_landmarks_;
};

}  // namespace detail

// Square-root backend: one landmark block per landmark, marginalized by QR,
// damped with stored Givens rotations, reduced system solved by PCG.
template <typename Scalar>
class SqrtBaObjective final : public LmObjective, detail::StepState {
 public:
  SqrtBaObjective(BaProblem& problem, const SolverConfig& config);

  double cost() const override { return problem_.cost(config_.huber_delta); }
  void linearize() override;
  double gradient_norm() const override { return gradient_norm_; }
  StepReport solve(double lambda, double cg_tolerance,
                   int cg_max_iterations) override;
  double apply_step() override { return apply(config_.huber_delta); }
  void revert_step() override { revert(); }
  Eigen::VectorXd last_pose_increment() const override { return pose_step_; }

  const std::vector<LandmarkBlock<Scalar>>& blocks() const { return blocks_; }
  std::size_t landmark_block_bytes() const;

 private:
  SolverConfig config_;
  // landmark index of each block; landmarks without observations get none
  std::vector<std::size_t> block_landmark_;
  std::vector<LandmarkBlock<Scalar>> blocks_;
  ColumnScaling<Scalar> scaling_;
  VecX<Scalar> pose_damping_;
  double gradient_norm_ = 0.0;
};

// Explicit Schur complement backend on H = J^T J blocks.
template <typename Scalar>
class ScObjective final : public LmObjective, detail::StepState {
 public:
  ScObjective(BaProblem& problem, const SolverConfig& config);

  double cost() const override { return problem_.cost(config_.huber_delta); }
  void linearize() override;
  double gradient_norm() const override { return gradient_norm_; }
  StepReport solve(double lambda, double cg_tolerance,
                   int cg_max_iterations) override;
  double apply_step() override { return apply(config_.huber_delta); }
  void revert_step() override { revert(); }
  Eigen::VectorXd last_pose_increment() const override { return pose_step_; }

  const HessianBlocks<Scalar>& hessian() const { return hessian_; }

 private:
  SolverConfig config_;
  CameraPairPattern pattern_;
  HessianBlocks<Scalar> hessian_;
  std::optional<ReducedHessian<Scalar>> reduced_;
  VecX<Scalar> scale_;
  VecX<Scalar> damping_;
  double gradient_norm_ = 0.0;
};

extern template class SqrtBaObjective<float>;
extern template class SqrtBaObjective<double>;
extern template class ScObjective<float>;
extern template class ScObjective<double>;

}  // namespace sqrtba
