#pragma once

#include <cstddef>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "sqrtba/bal_problem.hpp"
#include "sqrtba/common.hpp"
#include "sqrtba/memory.hpp"
#include "sqrtba/pcg.hpp"

namespace sqrtba {

// Normal equation blocks H = J^T J, b = J^T r of the IRLS-weighted problem.
template <typename Scalar>
struct HessianBlocks {
  std::size_t num_cameras = 0;
  std::size_t num_landmarks = 0;
  TrackedVector<Mat9<Scalar>> H_pp;  // per camera
  TrackedVector<Mat93<Scalar>> H_pl;  // per observation, problem order
  TrackedVector<Mat3<Scalar>> H_ll;  // per landmark
  VecX<Scalar> b_p;                   // 9 n_p
  VecX<Scalar> b_l;                   // 3 n_l
  std::vector<std::size_t> obs_camera;
  std::vector<std::size_t> obs_landmark;
  // per landmark, observation indices sorted by camera
  std::vector<std::vector<std::size_t>> landmark_obs;

  std::size_t memory_bytes() const {
    return H_pp.size() * sizeof(Mat9<Scalar>) +
           H_pl.size() * sizeof(Mat93<Scalar>) +
           H_ll.size() * sizeof(Mat3<Scalar>);
  }
};

template <typename Scalar>
HessianBlocks<Scalar> assemble_hessian(const BaProblem& problem,
                                       Scalar huber_delta);

// Column scaling 1 / (1 + sqrt(diag H)) applied symmetrically to H and b.
// Returns pose scales (9 n_p) followed by landmark scales (3 n_l).
template <typename Scalar>
VecX<Scalar> scale_hessian(HessianBlocks<Scalar>& h);

// D = sqrt(max(diag H, min_diagonal)), pose part then landmark part.
template <typename Scalar>
VecX<Scalar> hessian_damping_diagonal(const HessianBlocks<Scalar>& h,
                                      double min_diagonal = 1e-12);

// Upper-triangular 9x9 block pattern over camera pairs that share at least
// one landmark. Built once per problem.
class CameraPairPattern {
 public:
  CameraPairPattern() = default;
  explicit CameraPairPattern(const BaProblem& problem);

  std::size_t num_cameras() const { return rows_.size(); }
  std::size_t num_blocks() const { return pairs_.size(); }
  // offset of block (i, j), i <= j; throws if absent
  std::size_t offset(std::size_t i, std::size_t j) const;
  std::size_t diagonal_offset(std::size_t i) const { return diagonal_[i]; }
  const std::vector<std::pair<std::size_t, std::size_t>>& pairs() const {
    return pairs_;
  }

  struct Entry {
    std::size_t col;
    std::size_t offset;
    bool transposed;  // block stored as (col, row)
  };
  const std::vector<Entry>& row(std::size_t i) const { return rows_[i]; }

 private:
  static std::uint64_t key(std::size_t i, std::size_t j) {
    return (std::uint64_t(i) << 32) | std::uint64_t(j);
  }
  std::unordered_map<std::uint64_t, std::size_t> index_;
  std::vector<std::pair<std::size_t, std::size_t>> pairs_;
  std::vector<std::size_t> diagonal_;
  std::vector<std::vector<Entry>> rows_;
};

// Explicit reduced camera system H~ x = b~ with
//   H~ = H_pp + lambda D_p^2 - H_pl (H_ll + lambda D_l^2)^-1 H_lp
//   b~ = b_p - H_pl (H_ll + lambda D_l^2)^-1 b_l
template <typename Scalar>
struct ReducedHessian {
  const CameraPairPattern* pattern = nullptr;
  TrackedVector<Mat9<Scalar>> blocks;
  VecX<Scalar> b;
  // damped landmark inverses kept for back substitution
  TrackedVector<Mat3<Scalar>> H_ll_inv;
  std::vector<std::size_t> excluded_landmarks;
  std::vector<char> excluded;

  std::size_t dim() const { return kPoseSize * pattern->num_cameras(); }
  VecX<Scalar> multiply(const VecX<Scalar>& v) const;
  MatX<Scalar> to_dense() const;
  const Mat9<Scalar>& diagonal_block(std::size_t i) const {
    return blocks[pattern->diagonal_offset(i)];
  }
  std::size_t memory_bytes() const {
    return blocks.size() * sizeof(Mat9<Scalar>) +
           H_ll_inv.size() * sizeof(Mat3<Scalar>);
  }
};

// D holds pose damping (9 n_p) followed by landmark damping (3 n_l).
// Landmarks whose damped H_ll fails Cholesky are excluded and listed.
template <typename Scalar>
ReducedHessian<Scalar> schur_reduce(const HessianBlocks<Scalar>& h,
                                    Scalar lambda, const VecX<Scalar>& D,
                                    const CameraPairPattern& pattern);

// Delta x_l = -(H_ll + lambda D_l^2)^-1 (b_l + H_lp Delta x_p); zero for
// excluded landmarks.
template <typename Scalar>
VecX<Scalar> sc_back_substitute(const HessianBlocks<Scalar>& h,
                                const ReducedHessian<Scalar>& reduced,
                                const VecX<Scalar>& delta_xp);

// L(0) - L(dx) = -(dx^T b + 0.5 dx^T H dx) with the undamped H.
template <typename Scalar>
double sc_model_cost_decrease(const HessianBlocks<Scalar>& h,
                              const VecX<Scalar>& delta_xp,
                              const VecX<Scalar>& delta_xl,
                              const std::vector<char>& excluded);

// Block-Jacobi inverse of the diagonal blocks. Returns false if a Cholesky
// factorization fails.
template <typename Scalar>
bool invert_diagonal_blocks(const ReducedHessian<Scalar>& reduced,
                            std::vector<Mat9<Scalar>>& inverse);

// Solves the reduced system with PCG and returns Delta x_p = -x.
template <typename Scalar>
VecX<Scalar> solve_reduced_hessian(const ReducedHessian<Scalar>& reduced,
                                   const std::vector<Mat9<Scalar>>& inverse,
                                   double tolerance, int max_iters,
                                   CgStats* stats = nullptr);

// True if a diagonal block is not positive definite or a PCG probe meets
// non-positive curvature.
template <typename Scalar>
bool detect_indefinite(const ReducedHessian<Scalar>& reduced,
                       int probe_iterations = 50);

}  // namespace sqrtba
