#include "sqrtba/backends.hpp"

#include <cmath>

#include "sqrtba/parallel.hpp"

namespace sqrtba {

namespace detail {

double StepState::apply(double huber_delta) {
  saved_cameras_ = problem_.cameras();
  saved_landmarks_ = problem_.landmarks();
  auto& cams = problem_.mutable_cameras();
  for (std::size_t i = 0; i < cams.size(); ++i)
    cams[i] = CameraParams::from_vector(
        cams[i].to_vector() + pose_step_.segment<kPoseSize>(kPoseSize * i));
  auto& lms = problem_.mutable_landmarks();
  for (std::size_t j = 0; j < lms.size(); ++j)
    lms[j] += landmark_step_.segment<3>(3 * j);
  return problem_.cost(huber_delta);
}

void StepState::revert() {
  problem_.mutable_cameras() = saved_cameras_;
  problem_.mutable_landmarks() = saved_landmarks_;
}

}  // namespace detail

// --- square-root backend ----------------------------------------------------

template <typename Scalar>
SqrtBaObjective<Scalar>::SqrtBaObjective(BaProblem& problem,
                                         const SolverConfig& config)
    : detail::StepState(problem), config_(config) {
  for (std::size_t j = 0; j < problem.num_landmarks(); ++j)
    if (!problem.landmark_observations(j).empty()) block_landmark_.push_back(j);
}

template <typename Scalar>
void SqrtBaObjective<Scalar>::linearize() {
  if (blocks_.empty()) {
    typename LandmarkBlock<Scalar>::Options options;
    options.use_householder = config_.use_householder;
    options.min_damping_diagonal = config_.min_damping_diagonal;
    blocks_.reserve(block_landmark_.size());
    for (std::size_t j : block_landmark_)
      blocks_.emplace_back(j, landmark_pose_indices(problem_, j), options);
  }
  const Scalar delta = Scalar(config_.huber_delta);
  parallel_for_index(blocks_.size(),
                     [&](std::size_t b) { blocks_[b].linearize(problem_, delta); });
  scaling_ = compute_column_scaling(blocks_, problem_.num_cameras());
  pose_damping_ = pose_damping_diagonal(blocks_, problem_.num_cameras(),
                                        config_.min_damping_diagonal);
  gradient_norm_ =
      double(full_gradient(blocks_, problem_.num_cameras()).norm());
  parallel_for_index(blocks_.size(),
                     [&](std::size_t b) { blocks_[b].marginalize(); });
}

template <typename Scalar>
StepReport SqrtBaObjective<Scalar>::solve(double lambda, double cg_tolerance,
                                          int cg_max_iterations) {
  const Scalar lam = Scalar(lambda);
  parallel_for_index(blocks_.size(), [&](std::size_t b) {
    auto& block = blocks_[b];
    if (block.state() == LandmarkBlock<Scalar>::State::kMarginalizedDamped)
      block.undo_landmark_damping();
    block.apply_landmark_damping(lam);
  });

  StepReport report;
  for (const auto& block : blocks_)
    if (block.is_rank_deficient()) ++report.excluded_landmarks;

  ReducedSystem<Scalar> system(blocks_, problem_.num_cameras());
  system.set_pose_damping(lam, pose_damping_);
  if (!system.compute_preconditioner()) {
    report.indefinite = true;
    return report;
  }
  CgStats stats;
  const VecX<Scalar> dxp = system.solve(cg_tolerance, cg_max_iterations, &stats);
  report.cg_iterations = stats.iterations;
  report.cg_termination = stats.termination_reason;
  if (stats.termination_reason == CgTermination::kIndefinite ||
      !dxp.allFinite()) {
    report.indefinite = true;
    return report;
  }

  std::vector<Vec3<Scalar>> dl(blocks_.size(), Vec3<Scalar>::Zero());
  parallel_for_index(blocks_.size(), [&](std::size_t b) {
    if (!blocks_[b].is_rank_deficient()) dl[b] = blocks_[b].back_substitute(dxp);
  });
  report.model_decrease = deterministic_reduce(
      blocks_.size(), 0.0,
      [&](std::size_t b, double& acc) {
        acc += blocks_[b].model_cost_decrease(dxp, dl[b]);
      },
      [](double& a, double b) { a += b; });
  if (!std::isfinite(report.model_decrease)) {
    report.indefinite = true;
    return report;
  }

  pose_step_ = (scaling_.pose.cwiseProduct(dxp)).template cast<double>();
  landmark_step_ = Eigen::VectorXd::Zero(3 * problem_.num_landmarks());
  for (std::size_t b = 0; b < blocks_.size(); ++b)
    landmark_step_.segment<3>(3 * block_landmark_[b]) =
        blocks_[b].landmark_scale().cwiseProduct(dl[b]).template cast<double>();
  return report;
}

template <typename Scalar>
std::size_t SqrtBaObjective<Scalar>::landmark_block_bytes() const {
  std::size_t bytes = 0;
  for (const auto& b : blocks_) bytes += b.memory_bytes();
  return bytes;
}

// --- explicit Schur complement backend ---------------------------------------

template <typename Scalar>
ScObjective<Scalar>::ScObjective(BaProblem& problem,
                                 const SolverConfig& config)
    : detail::StepState(problem), config_(config), pattern_(problem) {}

template <typename Scalar>
void ScObjective<Scalar>::linearize() {
  reduced_.reset();
  hessian_ = HessianBlocks<Scalar>{};
  hessian_ = assemble_hessian<Scalar>(problem_, Scalar(config_.huber_delta));
  scale_ = scale_hessian(hessian_);
  damping_ = hessian_damping_diagonal(hessian_, config_.min_damping_diagonal);
  gradient_norm_ = std::sqrt(double(hessian_.b_p.squaredNorm()) +
                             double(hessian_.b_l.squaredNorm()));
}

template <typename Scalar>
StepReport ScObjective<Scalar>::solve(double lambda, double cg_tolerance,
                                      int cg_max_iterations) {
  // from scratch for every lambda
  reduced_.reset();
  reduced_.emplace(
      schur_reduce(hessian_, Scalar(lambda), damping_, pattern_));
  const ReducedHessian<Scalar>& red = *reduced_;

  StepReport report;
  report.excluded_landmarks = red.excluded_landmarks.size();
  std::vector<Mat9<Scalar>> inverse;
  if (!invert_diagonal_blocks(red, inverse)) {
    report.indefinite = true;
    return report;
  }
  CgStats stats;
  const VecX<Scalar> dxp = solve_reduced_hessian(red, inverse, cg_tolerance,
                                                 cg_max_iterations, &stats);
  report.cg_iterations = stats.iterations;
  report.cg_termination = stats.termination_reason;
  if (stats.termination_reason == CgTermination::kIndefinite ||
      !dxp.allFinite()) {
    report.indefinite = true;
    return report;
  }
  const VecX<Scalar> dl = sc_back_substitute(hessian_, red, dxp);
  report.model_decrease =
      sc_model_cost_decrease(hessian_, dxp, dl, red.excluded);
  if (!std::isfinite(report.model_decrease)) {
    report.indefinite = true;
    return report;
  }
  const std::size_t np = kPoseSize * hessian_.num_cameras;
  pose_step_ = scale_.head(np).cwiseProduct(dxp).template cast<double>();
  landmark_step_ =
      scale_.tail(dl.size()).cwiseProduct(dl).template cast<double>();
  return report;
}

template class SqrtBaObjective<float>;
template class SqrtBaObjective<double>;
template class ScObjective<float>;
template class ScObjective<double>;

}  // namespace sqrtba
