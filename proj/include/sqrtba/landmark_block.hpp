#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sqrtba/bal_problem.hpp"
#include "sqrtba/common.hpp"
#include "sqrtba/givens.hpp"
#include "sqrtba/memory.hpp"

namespace sqrtba {

// Dense storage of all rows that belong to one landmark (k observations):
//
//      9k pose columns   3 landmark   1 residual
//   [ J_p (block diag) |    J_l     |    r     ]   2k rows
//   [        0         |     0      |    0     ]   3 damping rows
//
// Pose column groups follow ascending camera index. Marginalization rotates
// the block in place into
//
//   [ Q1^T J_p | R1 | Q1^T r ]   rows 0..2
//   [ Q2^T J_p | 0  | Q2^T r ]   rows 3..2k+2
//
// and landmark damping folds sqrt(lambda) D_l into R1 with six rotations that
// are stored so they can be undone.
template <typename Scalar>
class LandmarkBlock {
 public:
  enum class State { kLinearized, kMarginalized, kMarginalizedDamped };

  struct Options {
    bool use_householder = false;
    // |R1_ii| < rank_tolerance * max|J_l| flags the landmark as degenerate
    double rank_tolerance = 1e-12;
    // lower clamp of diag(J_l^T J_l) used as landmark damping
    double min_damping_diagonal = 1e-12;
    // keep the Givens rotations of marginalization (for inspection)
    bool record_marginalization = false;
  };

  using Storage = Eigen::Map<RowMatX<Scalar>>;
  using ConstStorage = Eigen::Map<const RowMatX<Scalar>>;

  LandmarkBlock(std::size_t landmark_index,
                std::vector<std::size_t> pose_indices, Options options = {});

  // Evaluates residuals and Jacobians at the problem's current state.
  // Throws ProjectionDegenerate with landmark/camera indices on failure.
  void linearize(const BaProblem& problem, Scalar huber_delta);

  // Loads explicit Jacobians (2k x 9k block-diagonal pose part, 2k x 3
  // landmark part, 2k residual). Used by synthetic tests.
  void set_jacobians(const MatX<Scalar>& J_p, const MatX<Scalar>& J_l,
                     const VecX<Scalar>& r);

  // Squared column norms: pose columns are scatter-added into a vector of
  // length 9 n_p, landmark columns returned.
  void add_pose_column_squared_norms(VecX<Scalar>& out) const;
  Vec3<Scalar> landmark_column_squared_norms() const;

  // Multiplies columns by the given scales (state must be linearized).
  void scale_columns(const VecX<Scalar>& pose_scale,
                     const Vec3<Scalar>& landmark_scale);
  const Vec3<Scalar>& landmark_scale() const { return landmark_scale_; }

  void marginalize();

  // sqrt(lambda) * D_l on the damping rows, eliminated by six rotations.
  void apply_landmark_damping(Scalar lambda, const Vec3<Scalar>& D_l);
  // Uses D_l^2 = diag(J_l^T J_l) recorded at marginalization (clamped).
  void apply_landmark_damping(Scalar lambda);
  void undo_landmark_damping();

  // Delta x_l = -R1^-1 (Q1^T r + Q1^T J_p Delta x_p), in scaled coordinates.
  // delta_xp is the full pose vector (length 9 n_p).
  Vec3<Scalar> back_substitute(const VecX<Scalar>& delta_xp) const;

  // L(0) - L(dx) of the undamped model 0.5 |r + J dx|^2, for the increment
  // (delta_xp, delta_xl) and the damping lambda currently applied.
  double model_cost_decrease(const VecX<Scalar>& delta_xp,
                             const Vec3<Scalar>& delta_xl) const;

  // --- reduced camera system contributions -------------------------------
  // Rows 3..end. A rank-deficient landmark is held fixed instead: all rows
  // contribute, which equals J_p^T J_p and J_p^T r since Q is orthogonal.
  std::size_t reduced_first_row() const { return rank_deficient_ ? 0 : 3; }

  // b += (Q2^T J_p)^T (Q2^T r)
  void add_reduced_gradient(VecX<Scalar>& b) const;
  // out += (Q2^T J_p)^T (Q2^T J_p v)
  void add_reduced_hessian_times(const VecX<Scalar>& v,
                                 VecX<Scalar>& out) const;
  // blocks[i] += (Q2^T J_p)_i^T (Q2^T J_p)_i for every observing camera i
  void add_preconditioner_blocks(std::vector<Mat9<Scalar>>& blocks) const;
  // full gradient pieces of the undamped problem: g_p += J_p^T r, J_l^T r
  void add_pose_gradient(VecX<Scalar>& g_p) const;
  Vec3<Scalar> landmark_gradient() const;

  // Dense local Q2^T J_p (rows 3..end, 9k columns) for debugging and tests.
  MatX<Scalar> reduced_jacobian() const;
  VecX<Scalar> reduced_residual() const;

  // --- accessors ----------------------------------------------------------

  std::size_t landmark_index() const { return landmark_index_; }
  const std::vector<std::size_t>& pose_indices() const { return pose_indices_; }
  std::size_t num_obs() const { return pose_indices_.size(); }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t landmark_col() const { return kPoseSize * num_obs(); }
  std::size_t residual_col() const { return landmark_col() + 3; }

  State state() const { return state_; }
  bool is_rank_deficient() const { return rank_deficient_; }
  Scalar applied_lambda() const { return lambda_; }
  const Vec3<Scalar>& damping_diagonal() const { return damping_diag_; }
  const std::vector<GivensRotation<Scalar>>& damping_rotations() const {
    return damping_rotations_;
  }
  const std::vector<GivensRotation<Scalar>>& marginalization_rotations() const {
    return marginalization_rotations_;
  }

  Storage storage() { return Storage(data_.data(), rows_, cols_); }
  ConstStorage storage() const {
    return ConstStorage(data_.data(), rows_, cols_);
  }
  std::size_t memory_bytes() const { return data_.size() * sizeof(Scalar); }

  // (2k + 3) (9k + 4) scalars
  static std::size_t storage_size(std::size_t k) {
    return (2 * k + 3) * (kPoseSize * k + 4);
  }

 private:
  std::span<Scalar> row(std::size_t i) {
    return {data_.data() + i * cols_, cols_};
  }
  void rotate(const GivensRotation<Scalar>& g);
  void rotate_transposed(const GivensRotation<Scalar>& g);
  void marginalize_givens();
  void marginalize_householder();
  void check_rank(Scalar max_abs_jl);

  std::size_t landmark_index_;
  std::vector<std::size_t> pose_indices_;
  Options options_;
  std::size_t rows_;
  std::size_t cols_;
  TrackedVector<Scalar> data_;

  State state_ = State::kLinearized;
  bool rank_deficient_ = false;
  Scalar lambda_ = Scalar(0);
  Vec3<Scalar> landmark_scale_ = Vec3<Scalar>::Ones();
  Vec3<Scalar> damping_diag_ = Vec3<Scalar>::Zero();
  Vec3<Scalar> applied_damping_ = Vec3<Scalar>::Zero();
  std::vector<GivensRotation<Scalar>> damping_rotations_;
  std::vector<GivensRotation<Scalar>> marginalization_rotations_;
};

// Allocates and linearizes the block of one landmark of the problem.
template <typename Scalar>
LandmarkBlock<Scalar> linearize_landmark(
    const BaProblem& problem, std::size_t landmark_index, Scalar huber_delta,
    typename LandmarkBlock<Scalar>::Options options = {});

// Pose indices of a landmark in block column order.
std::vector<std::size_t> landmark_pose_indices(const BaProblem& problem,
                                               std::size_t landmark_index);

extern template class LandmarkBlock<float>;
extern template class LandmarkBlock<double>;

}  // namespace sqrtba
