#pragma once

// Dense reference implementations used by the tests. Everything here works on
// plain dense matrices in double precision and shares no code with the
// solvers beyond the residual function itself.

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sqrtba/bal_problem.hpp"
#include "sqrtba/landmark_block.hpp"
#include "sqrtba/lm_optimizer.hpp"

namespace sqrtba::test {

using Rng = std::mt19937_64;
using Eigen::MatrixXd;
using Eigen::VectorXd;

double uniform(Rng& rng, double lo, double hi);
std::size_t uniform_index(Rng& rng, std::size_t lo, std::size_t hi);  // [lo, hi]

// --- projection --------------------------------------------------------------

struct ProjectionConfig {
  Vec9<double> cam;
  Eigen::Vector3d point;
  Eigen::Vector2d obs;
};

// Camera with moderate rotation, focal in [300, 800], small distortion, and a
// point 2 to 10 units in front of it.
ProjectionConfig random_projection_config(Rng& rng);

// Straightforward evaluation of the camera model, written independently.
Eigen::Vector2d reference_projection(const Vec9<double>& cam,
                                     const Eigen::Vector3d& point);

struct FdJacobian {
  Eigen::Matrix<double, 2, 9> J_cam;
  Eigen::Matrix<double, 2, 3> J_lm;
};

// Central differences of the unweighted residual.
FdJacobian fd_jacobian(const ProjectionConfig& c, double step = 1e-6);

// --- landmark block data -------------------------------------------------------

struct BlockData {
  MatrixXd J_p;  // 2k x 9k, block diagonal
  MatrixXd J_l;  // 2k x 3
  VectorXd r;    // 2k
};

BlockData random_block_data(Rng& rng, std::size_t k);

// Block over cameras 0..k-1 loaded with the data.
LandmarkBlock<double> make_block(const BlockData& d,
                                 LandmarkBlock<double>::Options options = {});

// Householder QR of the damped stacked system
//   [ J_l       | J_p | r ]
//   [ sqrt(l) D |  0  | 0 ]
// applied to all columns. Columns are ordered like a landmark block.
RowMatX<double> dense_damped_qr(const BlockData& d, double lambda,
                                const Eigen::Vector3d& D_l);

// --- problems ------------------------------------------------------------------

// n_p in [2,5], n_l in [5,30], k in [2,6] (at most n_p).
BaProblem random_small_problem(Rng& rng);

// Stacked IRLS-weighted Jacobian of a whole problem with columns
// [9 n_p pose | 3 n_l landmark].
struct DenseSystem {
  MatrixXd J;
  VectorXd r;
  std::size_t num_cameras = 0;
  std::size_t num_landmarks = 0;
};

DenseSystem dense_system(const BaProblem& problem, double huber_delta);

// Column scaling 1 / (1 + |col|) followed by the damped Schur complement.
// All outputs are in scaled coordinates.
struct DenseReduced {
  VectorXd scale;  // pose then landmark
  MatrixXd H;      // undamped J^T J of the scaled system
  VectorXd g;      // J^T r
  VectorXd D;      // sqrt(max(diag H, 1e-12))
  MatrixXd H_red;
  VectorXd b_red;
  VectorXd dxp;
  VectorXd dxl;
  VectorXd dx_joint;  // solve of the full damped system
};

DenseReduced dense_reduce(const DenseSystem& sys, double lambda);

// --- LM test double --------------------------------------------------------------

// Linear residuals r(x) = A x - b. The step solves the damped normal
// equations (A^T A + lambda D^2) dx = -A^T r densely, D^2 = diag(A^T A).
class LinearObjective final : public LmObjective {
 public:
  LinearObjective(MatrixXd A, VectorXd b, VectorXd x0);

  double cost() const override;
  void linearize() override;
  double gradient_norm() const override { return g_.norm(); }
  StepReport solve(double lambda, double cg_tolerance,
                   int cg_max_iterations) override;
  double apply_step() override;
  void revert_step() override { x_ = saved_; }
  Eigen::VectorXd last_pose_increment() const override { return dx_; }

  const VectorXd& x() const { return x_; }
  VectorXd optimum() const;
  double optimal_cost() const;

 private:
  MatrixXd A_;
  VectorXd b_;
  VectorXd x_, saved_, g_, dx_;
};

}  // namespace sqrtba::test
