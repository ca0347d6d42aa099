#pragma once

#include <cstddef>
#include <vector>

#include "sqrtba/common.hpp"
#include "sqrtba/landmark_block.hpp"
#include "sqrtba/pcg.hpp"

namespace sqrtba {

// Jacobian column scale 1 / (1 + |column|). Zero columns get scale 1.
template <typename Scalar>
Scalar column_scale(Scalar column_norm) {
  return Scalar(1) / (Scalar(1) + column_norm);
}

template <typename Scalar>
struct ColumnScaling {
  VecX<Scalar> pose;                   // 9 n_p
  std::vector<Vec3<Scalar>> landmark;  // one per block
};

// Computes scales from the column norms of the full Jacobian (summed over all
// blocks) and applies them in place. Blocks must be linearized.
template <typename Scalar>
ColumnScaling<Scalar> compute_column_scaling(
    std::vector<LandmarkBlock<Scalar>>& blocks, std::size_t num_cameras);

// D_p = sqrt(max(diag(J_p^T J_p), min_diagonal)) over the current (scaled)
// pose columns. Valid before damping is applied.
template <typename Scalar>
VecX<Scalar> pose_damping_diagonal(
    const std::vector<LandmarkBlock<Scalar>>& blocks, std::size_t num_cameras,
    double min_diagonal = 1e-12);

// Full gradient J^T r of the undamped problem in block coordinates:
// pose part (9 n_p) followed by all landmark parts in block order.
template <typename Scalar>
VecX<Scalar> full_gradient(const std::vector<LandmarkBlock<Scalar>>& blocks,
                           std::size_t num_cameras);

// Reduced camera system assembled implicitly from marginalized blocks:
//   H v = sum_j (Q2^T J_p)_j^T (Q2^T J_p)_j v + lambda D_p^2 v
// Rank-deficient blocks enter with their landmark held fixed.
template <typename Scalar>
class ReducedSystem {
 public:
  ReducedSystem(const std::vector<LandmarkBlock<Scalar>>& blocks,
                std::size_t num_cameras);

  void set_pose_damping(Scalar lambda, const VecX<Scalar>& D_p);
  std::size_t dim() const { return kPoseSize * num_cameras_; }
  std::size_t num_cameras() const { return num_cameras_; }

  VecX<Scalar> multiply(const VecX<Scalar>& v) const;
  // b = sum_j (Q2^T J_p)_j^T (Q2^T r)_j
  VecX<Scalar> rhs() const;

  // Block-Jacobi: assembles and inverts the 9x9 diagonal blocks. Returns
  // false if a Cholesky factorization fails.
  bool compute_preconditioner();
  VecX<Scalar> precondition(const VecX<Scalar>& r) const;
  const std::vector<Mat9<Scalar>>& preconditioner_blocks() const {
    return diagonal_;
  }

  // Solves H x = b with PCG and returns the pose increment -x.
  VecX<Scalar> solve(double tolerance, int max_iters,
                     CgStats* stats = nullptr) const;

 private:
  const std::vector<LandmarkBlock<Scalar>>* blocks_;
  std::size_t num_cameras_;
  VecX<Scalar> damping_sq_;
  std::vector<Mat9<Scalar>> diagonal_;
  std::vector<Mat9<Scalar>> inverse_;
};

extern template class ReducedSystem<float>;
extern template class ReducedSystem<double>;

}  // namespace sqrtba
