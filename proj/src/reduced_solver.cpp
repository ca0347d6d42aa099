#include "sqrtba/reduced_solver.hpp"

#include <cmath>

#include "sqrtba/parallel.hpp"

namespace sqrtba {

namespace {

template <typename Scalar>
void add_to(VecX<Scalar>& a, const VecX<Scalar>& b) {
  a += b;
}

}  // namespace

template <typename Scalar>
ColumnScaling<Scalar> compute_column_scaling(
    std::vector<LandmarkBlock<Scalar>>& blocks, std::size_t num_cameras) {
  const VecX<Scalar> zero = VecX<Scalar>::Zero(kPoseSize * num_cameras);
  const VecX<Scalar> sq = deterministic_reduce(
      blocks.size(), zero,
      [&](std::size_t j, VecX<Scalar>& acc) {
        blocks[j].add_pose_column_squared_norms(acc);
      },
      add_to<Scalar>);

  ColumnScaling<Scalar> scaling;
  scaling.pose = sq.array().sqrt().unaryExpr(
      [](Scalar n) { return column_scale(n); });
  scaling.landmark.resize(blocks.size());
  parallel_for_index(blocks.size(), [&](std::size_t j) {
    const Vec3<Scalar> lsq = blocks[j].landmark_column_squared_norms();
    for (int c = 0; c < 3; ++c)
      scaling.landmark[j][c] = column_scale(std::sqrt(lsq[c]));
    blocks[j].scale_columns(scaling.pose, scaling.landmark[j]);
  });
  return scaling;
}

template <typename Scalar>
VecX<Scalar> pose_damping_diagonal(
    const std::vector<LandmarkBlock<Scalar>>& blocks, std::size_t num_cameras,
    double min_diagonal) {
  const VecX<Scalar> zero = VecX<Scalar>::Zero(kPoseSize * num_cameras);
  const VecX<Scalar> sq = deterministic_reduce(
      blocks.size(), zero,
      [&](std::size_t j, VecX<Scalar>& acc) {
        blocks[j].add_pose_column_squared_norms(acc);
      },
      add_to<Scalar>);
  return sq.array().max(Scalar(min_diagonal)).sqrt();
}

template <typename Scalar>
VecX<Scalar> full_gradient(const std::vector<LandmarkBlock<Scalar>>& blocks,
                           std::size_t num_cameras) {
  const std::size_t np = kPoseSize * num_cameras;
  const VecX<Scalar> zero = VecX<Scalar>::Zero(np);
  VecX<Scalar> g(np + 3 * blocks.size());
  g.head(np) = deterministic_reduce(
      blocks.size(), zero,
      [&](std::size_t j, VecX<Scalar>& acc) { blocks[j].add_pose_gradient(acc); },
      add_to<Scalar>);
  parallel_for_index(blocks.size(), [&](std::size_t j) {
    g.template segment<3>(np + 3 * j) = blocks[j].landmark_gradient();
  });
  return g;
}

template <typename Scalar>
ReducedSystem<Scalar>::ReducedSystem(
    const std::vector<LandmarkBlock<Scalar>>& blocks, std::size_t num_cameras)
    : blocks_(&blocks),
      num_cameras_(num_cameras),
      damping_sq_(VecX<Scalar>::Zero(kPoseSize * num_cameras)) {}

template <typename Scalar>
void ReducedSystem<Scalar>::set_pose_damping(Scalar lambda,
                                             const VecX<Scalar>& D_p) {
  damping_sq_ = lambda * D_p.array().square();
}

template <typename Scalar>
VecX<Scalar> ReducedSystem<Scalar>::multiply(const VecX<Scalar>& v) const {
  const auto& blocks = *blocks_;
  const VecX<Scalar> zero = VecX<Scalar>::Zero(dim());
  VecX<Scalar> out = deterministic_reduce(
      blocks.size(), zero,
      [&](std::size_t j, VecX<Scalar>& acc) {
        blocks[j].add_reduced_hessian_times(v, acc);
      },
      add_to<Scalar>);
  out.array() += damping_sq_.array() * v.array();
  return out;
}

template <typename Scalar>
VecX<Scalar> ReducedSystem<Scalar>::rhs() const {
  const auto& blocks = *blocks_;
  const VecX<Scalar> zero = VecX<Scalar>::Zero(dim());
  return deterministic_reduce(
      blocks.size(), zero,
      [&](std::size_t j, VecX<Scalar>& acc) {
        blocks[j].add_reduced_gradient(acc);
      },
      add_to<Scalar>);
}

template <typename Scalar>
bool ReducedSystem<Scalar>::compute_preconditioner() {
  using Blocks = std::vector<Mat9<Scalar>>;
  const auto& blocks = *blocks_;
  const Blocks zero(num_cameras_, Mat9<Scalar>::Zero());
  diagonal_ = deterministic_reduce(
      blocks.size(), zero,
      [&](std::size_t j, Blocks& acc) {
        blocks[j].add_preconditioner_blocks(acc);
      },
      [](Blocks& a, const Blocks& b) {
        for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
      });

  inverse_.resize(num_cameras_);
  bool ok = true;
  for (std::size_t i = 0; i < num_cameras_; ++i) {
    diagonal_[i].diagonal() += damping_sq_.template segment<kPoseSize>(kPoseSize * i);
    Eigen::LLT<Mat9<Scalar>> llt(diagonal_[i]);
    if (llt.info() != Eigen::Success) {
      ok = false;
      inverse_[i].setIdentity();
      continue;
    }
    inverse_[i] = llt.solve(Mat9<Scalar>::Identity());
    if (!inverse_[i].allFinite()) {
      ok = false;
      inverse_[i].setIdentity();
    }
  }
  return ok;
}

template <typename Scalar>
VecX<Scalar> ReducedSystem<Scalar>::precondition(const VecX<Scalar>& r) const {
  VecX<Scalar> z(r.size());
  for (std::size_t i = 0; i < num_cameras_; ++i)
    z.template segment<kPoseSize>(kPoseSize * i).noalias() =
        inverse_[i] * r.template segment<kPoseSize>(kPoseSize * i);
  return z;
}

template <typename Scalar>
VecX<Scalar> ReducedSystem<Scalar>::solve(double tolerance, int max_iters,
                                          CgStats* stats) const {
  const VecX<Scalar> b = rhs();
  VecX<Scalar> x = solve_pcg<Scalar>(
      [this](const VecX<Scalar>& v) { return multiply(v); },
      [this](const VecX<Scalar>& r) { return precondition(r); }, b, tolerance,
      max_iters, stats);
  return -x;
}

#define SQRTBA_INSTANTIATE(S)                                               \
  template ColumnScaling<S> compute_column_scaling<S>(                      \
      std::vector<LandmarkBlock<S>>&, std::size_t);                         \
  template VecX<S> pose_damping_diagonal<S>(                                \
      const std::vector<LandmarkBlock<S>>&, std::size_t, double);           \
  template VecX<S> full_gradient<S>(const std::vector<LandmarkBlock<S>>&,   \
                                    std::size_t);                           \
  template class ReducedSystem<S>;

SQRTBA_INSTANTIATE(float)
SQRTBA_INSTANTIATE(double)

#undef SQRTBA_INSTANTIATE

}  // namespace sqrtba
