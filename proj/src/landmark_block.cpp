#include "sqrtba/landmark_block.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

namespace sqrtba {

namespace {

[[noreturn]] void wrong_state(const char* op) {
  throw Error(std::string("landmark block: ") + op +
              " called in the wrong state");
}

}  // namespace

std::vector<std::size_t> landmark_pose_indices(const BaProblem& problem,
                                               std::size_t landmark_index) {
  std::vector<std::size_t> poses;
  for (std::size_t o : problem.landmark_observations(landmark_index))
    poses.push_back(problem.observations()[o].camera_index);
  return poses;
}

template <typename Scalar>
LandmarkBlock<Scalar>::LandmarkBlock(std::size_t landmark_index,
                                     std::vector<std::size_t> pose_indices,
                                     Options options)
    : landmark_index_(landmark_index),
      pose_indices_(std::move(pose_indices)),
      options_(options) {
  if (pose_indices_.empty())
    throw Error("landmark block needs at least one observation");
  const std::size_t k = pose_indices_.size();
  rows_ = 2 * k + 3;
  cols_ = kPoseSize * k + 4;
  data_.assign(rows_ * cols_, Scalar(0));
}

template <typename Scalar>
void LandmarkBlock<Scalar>::linearize(const BaProblem& problem,
                                      Scalar huber_delta) {
  const auto& obs_idx = problem.landmark_observations(landmark_index_);
  if (obs_idx.size() != num_obs())
    throw Error("landmark block does not match the problem");

  std::fill(data_.begin(), data_.end(), Scalar(0));
  Storage S = storage();
  const Vec3<Scalar> point =
      problem.landmarks()[landmark_index_].template cast<Scalar>();
  const std::size_t lc = landmark_col();
  const std::size_t rc = residual_col();

  for (std::size_t i = 0; i < obs_idx.size(); ++i) {
    const Observation& obs = problem.observations()[obs_idx[i]];
    const Vec9<Scalar> cam =
        problem.cameras()[obs.camera_index].to_vector().template cast<Scalar>();
    ResidualJacobian<Scalar> rj;
    try {
      rj = residual_jacobian<Scalar>(cam, point,
                                     obs.pixel.template cast<Scalar>(),
                                     huber_delta);
    } catch (const ProjectionDegenerate& e) {
      std::ostringstream os;
      os << e.what() << " (landmark " << landmark_index_ << ", camera "
         << obs.camera_index << ")";
      throw ProjectionDegenerate(os.str());
    }
    S.template block<2, kPoseSize>(2 * i, kPoseSize * i) = rj.J_cam;
    S.template block<2, 3>(2 * i, lc) = rj.J_lm;
    S.template block<2, 1>(2 * i, rc) = rj.r;
  }

  state_ = State::kLinearized;
  rank_deficient_ = false;
  lambda_ = Scalar(0);
  landmark_scale_.setOnes();
  damping_rotations_.clear();
  marginalization_rotations_.clear();
}

template <typename Scalar>
void LandmarkBlock<Scalar>::set_jacobians(const MatX<Scalar>& J_p,
                                          const MatX<Scalar>& J_l,
                                          const VecX<Scalar>& r) {
  const std::size_t k = num_obs();
  if (std::size_t(J_p.rows()) != 2 * k ||
      std::size_t(J_p.cols()) != kPoseSize * k ||
      std::size_t(J_l.rows()) != 2 * k || J_l.cols() != 3 ||
      std::size_t(r.size()) != 2 * k)
    throw Error("landmark block: jacobian dimensions mismatch");

  std::fill(data_.begin(), data_.end(), Scalar(0));
  Storage S = storage();
  S.block(0, 0, 2 * k, kPoseSize * k) = J_p;
  S.block(0, landmark_col(), 2 * k, 3) = J_l;
  S.block(0, residual_col(), 2 * k, 1) = r;

  state_ = State::kLinearized;
  rank_deficient_ = false;
  lambda_ = Scalar(0);
  landmark_scale_.setOnes();
  damping_rotations_.clear();
  marginalization_rotations_.clear();
}

template <typename Scalar>
void LandmarkBlock<Scalar>::add_pose_column_squared_norms(
    VecX<Scalar>& out) const {
  ConstStorage S = storage();
  for (std::size_t i = 0; i < num_obs(); ++i) {
    out.template segment<kPoseSize>(kPoseSize * pose_indices_[i]) +=
        S.block(0, kPoseSize * i, rows_, kPoseSize)
            .colwise()
            .squaredNorm()
            .transpose();
  }
}

template <typename Scalar>
Vec3<Scalar> LandmarkBlock<Scalar>::landmark_column_squared_norms() const {
  return storage().block(0, landmark_col(), rows_, 3).colwise().squaredNorm()
      .transpose();
}

template <typename Scalar>
void LandmarkBlock<Scalar>::scale_columns(const VecX<Scalar>& pose_scale,
                                          const Vec3<Scalar>& landmark_scale) {
  if (state_ != State::kLinearized) wrong_state("scale_columns");
  Storage S = storage();
  for (std::size_t i = 0; i < num_obs(); ++i) {
    const auto s =
        pose_scale.template segment<kPoseSize>(kPoseSize * pose_indices_[i]);
    S.block(0, kPoseSize * i, rows_, kPoseSize) *= s.asDiagonal();
  }
  S.block(0, landmark_col(), rows_, 3) *= landmark_scale.asDiagonal();
  landmark_scale_ = landmark_scale.cwiseProduct(landmark_scale_);
}

template <typename Scalar>
void LandmarkBlock<Scalar>::rotate(const GivensRotation<Scalar>& g) {
  apply_rotation(g, row(g.pivot_row), row(g.target_row));
}

template <typename Scalar>
void LandmarkBlock<Scalar>::rotate_transposed(const GivensRotation<Scalar>& g) {
  apply_rotation_transposed(g, row(g.pivot_row), row(g.target_row));
}

template <typename Scalar>
void LandmarkBlock<Scalar>::marginalize() {
  if (state_ != State::kLinearized) wrong_state("marginalize");

  const Vec3<Scalar> sq = landmark_column_squared_norms();
  for (int c = 0; c < 3; ++c)
    damping_diag_[c] = std::sqrt(
        std::max(sq[c], Scalar(options_.min_damping_diagonal)));
  const Scalar max_abs_jl =
      storage().block(0, landmark_col(), 2 * num_obs(), 3).cwiseAbs().maxCoeff();

  if (options_.use_householder)
    marginalize_householder();
  else
    marginalize_givens();

  check_rank(max_abs_jl);
  state_ = State::kMarginalized;
}

template <typename Scalar>
void LandmarkBlock<Scalar>::marginalize_givens() {
  const std::size_t n = 2 * num_obs();
  const std::size_t lc = landmark_col();
  marginalization_rotations_.clear();
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = n - 1; i > c; --i) {
      Scalar& target = data_[i * cols_ + lc + c];
      if (target == Scalar(0)) continue;
      GivensRotation<Scalar> g =
          givens_coeffs(data_[c * cols_ + lc + c], target);
      g.pivot_row = c;
      g.target_row = i;
      rotate(g);
      target = Scalar(0);
      if (options_.record_marginalization)
        marginalization_rotations_.push_back(g);
    }
  }
}

template <typename Scalar>
void LandmarkBlock<Scalar>::marginalize_householder() {
  const std::size_t n = 2 * num_obs();
  const std::size_t lc = landmark_col();
  Storage S = storage();
  VecX<Scalar> workspace(cols_);
  for (std::size_t c = 0; c < 3 && c + 1 < n; ++c) {
    const std::size_t len = n - c;
    VecX<Scalar> v = S.block(c, lc + c, len, 1);
    VecX<Scalar> essential(len - 1);
    Scalar tau;
    Scalar beta;
    v.makeHouseholder(essential, tau, beta);
    S.block(c, 0, len, cols_)
        .applyHouseholderOnTheLeft(essential, tau, workspace.data());
    S(c, lc + c) = beta;
    S.block(c + 1, lc + c, len - 1, 1).setZero();
  }
}

template <typename Scalar>
void LandmarkBlock<Scalar>::check_rank(Scalar max_abs_jl) {
  const Scalar tol = Scalar(options_.rank_tolerance) * max_abs_jl;
  rank_deficient_ = !(max_abs_jl > Scalar(0));
  if (2 * num_obs() < 3) rank_deficient_ = true;
  for (std::size_t c = 0; c < 3 && !rank_deficient_; ++c) {
    const Scalar d = std::abs(data_[c * cols_ + landmark_col() + c]);
    if (!(d >= tol) || d == Scalar(0)) rank_deficient_ = true;
  }
}

template <typename Scalar>
void LandmarkBlock<Scalar>::apply_landmark_damping(Scalar lambda,
                                                   const Vec3<Scalar>& D_l) {
  if (state_ != State::kMarginalized) wrong_state("apply_landmark_damping");
  if (!(lambda >= Scalar(0)))
    throw Error("landmark damping requires lambda >= 0");

  const std::size_t d0 = 2 * num_obs();
  const std::size_t lc = landmark_col();
  const Scalar sl = std::sqrt(lambda);
  applied_damping_ = sl * D_l;
  for (std::size_t n = 0; n < 3; ++n)
    data_[(d0 + n) * cols_ + lc + n] = applied_damping_[n];

  damping_rotations_.clear();
  for (std::size_t n = 0; n < 3; ++n) {
    for (std::size_t m = 0; m <= n; ++m) {
      const std::size_t target_row = d0 + n - m;
      Scalar& target = data_[target_row * cols_ + lc + n];
      GivensRotation<Scalar> g =
          givens_coeffs(data_[n * cols_ + lc + n], target);
      g.pivot_row = n;
      g.target_row = target_row;
      if (!g.is_identity()) {
        rotate(g);
        target = Scalar(0);
      }
      damping_rotations_.push_back(g);
    }
  }
  lambda_ = lambda;
  state_ = State::kMarginalizedDamped;
}

template <typename Scalar>
void LandmarkBlock<Scalar>::apply_landmark_damping(Scalar lambda) {
  apply_landmark_damping(lambda, damping_diag_);
}

template <typename Scalar>
void LandmarkBlock<Scalar>::undo_landmark_damping() {
  if (state_ != State::kMarginalizedDamped)
    wrong_state("undo_landmark_damping");
  for (auto it = damping_rotations_.rbegin(); it != damping_rotations_.rend();
       ++it) {
    if (!it->is_identity()) rotate_transposed(*it);
  }
  const std::size_t d0 = 2 * num_obs();
  std::fill(data_.begin() + d0 * cols_, data_.end(), Scalar(0));
  damping_rotations_.clear();
  lambda_ = Scalar(0);
  state_ = State::kMarginalized;
}

template <typename Scalar>
Vec3<Scalar> LandmarkBlock<Scalar>::back_substitute(
    const VecX<Scalar>& delta_xp) const {
  if (state_ == State::kLinearized) wrong_state("back_substitute");
  if (rank_deficient_)
    throw Error("back substitution on a rank-deficient landmark");
  ConstStorage S = storage();
  Vec3<Scalar> rhs = S.template block<3, 1>(0, residual_col());
  for (std::size_t i = 0; i < num_obs(); ++i) {
    rhs.noalias() +=
        S.template block<3, kPoseSize>(0, kPoseSize * i) *
        delta_xp.template segment<kPoseSize>(kPoseSize * pose_indices_[i]);
  }
  const Mat3<Scalar> R1 = S.template block<3, 3>(0, landmark_col());
  return -R1.template triangularView<Eigen::Upper>().solve(rhs);
}

template <typename Scalar>
double LandmarkBlock<Scalar>::model_cost_decrease(
    const VecX<Scalar>& delta_xp, const Vec3<Scalar>& delta_xl) const {
  if (state_ == State::kLinearized) wrong_state("model_cost_decrease");
  ConstStorage S = storage();
  Eigen::VectorXd a =
      (S.block(0, landmark_col(), rows_, 3) * delta_xl).template cast<double>();
  for (std::size_t i = 0; i < num_obs(); ++i) {
    a += (S.block(0, kPoseSize * i, rows_, kPoseSize) *
          delta_xp.template segment<kPoseSize>(kPoseSize * pose_indices_[i]))
             .template cast<double>();
  }
  const Eigen::VectorXd c = S.col(residual_col()).template cast<double>();
  // the damped rows also carry the landmark damping term, which is not part
  // of the undamped model
  double damping = 0.0;
  if (state_ == State::kMarginalizedDamped)
    damping = (applied_damping_.template cast<double>().cwiseProduct(
                   delta_xl.template cast<double>()))
                  .squaredNorm();
  return -a.dot(c + 0.5 * a) + 0.5 * damping;
}

template <typename Scalar>
void LandmarkBlock<Scalar>::add_reduced_gradient(VecX<Scalar>& b) const {
  ConstStorage S = storage();
  const std::size_t r0 = reduced_first_row();
  const std::size_t m = rows_ - r0;
  const auto r = S.block(r0, residual_col(), m, 1);
  for (std::size_t i = 0; i < num_obs(); ++i) {
    b.template segment<kPoseSize>(kPoseSize * pose_indices_[i]).noalias() +=
        S.block(r0, kPoseSize * i, m, kPoseSize).transpose() * r;
  }
}

template <typename Scalar>
void LandmarkBlock<Scalar>::add_reduced_hessian_times(
    const VecX<Scalar>& v, VecX<Scalar>& out) const {
  ConstStorage S = storage();
  const std::size_t r0 = reduced_first_row();
  const std::size_t m = rows_ - r0;
  const std::size_t k = num_obs();
  // one gemv over the contiguous pose columns instead of k small ones
  thread_local VecX<Scalar> vg, t;
  vg.resize(kPoseSize * k);
  for (std::size_t i = 0; i < k; ++i)
    vg.template segment<kPoseSize>(kPoseSize * i) =
        v.template segment<kPoseSize>(kPoseSize * pose_indices_[i]);
  const auto Jp = S.block(r0, 0, m, kPoseSize * k);
  t.noalias() = Jp * vg;
  vg.noalias() = Jp.transpose() * t;
  for (std::size_t i = 0; i < k; ++i)
    out.template segment<kPoseSize>(kPoseSize * pose_indices_[i]) +=
        vg.template segment<kPoseSize>(kPoseSize * i);
}

template <typename Scalar>
void LandmarkBlock<Scalar>::add_preconditioner_blocks(
    std::vector<Mat9<Scalar>>& blocks) const {
  ConstStorage S = storage();
  const std::size_t r0 = reduced_first_row();
  const std::size_t m = rows_ - r0;
  for (std::size_t i = 0; i < num_obs(); ++i) {
    const auto Ji = S.block(r0, kPoseSize * i, m, kPoseSize);
    blocks[pose_indices_[i]].noalias() += Ji.transpose() * Ji;
  }
}

template <typename Scalar>
void LandmarkBlock<Scalar>::add_pose_gradient(VecX<Scalar>& g_p) const {
  if (state_ == State::kMarginalizedDamped) wrong_state("add_pose_gradient");
  ConstStorage S = storage();
  const auto r = S.col(residual_col());
  for (std::size_t i = 0; i < num_obs(); ++i) {
    g_p.template segment<kPoseSize>(kPoseSize * pose_indices_[i]).noalias() +=
        S.block(0, kPoseSize * i, rows_, kPoseSize).transpose() * r;
  }
}

template <typename Scalar>
Vec3<Scalar> LandmarkBlock<Scalar>::landmark_gradient() const {
  if (state_ == State::kMarginalizedDamped) wrong_state("landmark_gradient");
  ConstStorage S = storage();
  return S.block(0, landmark_col(), rows_, 3).transpose() *
         S.col(residual_col());
}

template <typename Scalar>
MatX<Scalar> LandmarkBlock<Scalar>::reduced_jacobian() const {
  const std::size_t r0 = reduced_first_row();
  return storage().block(r0, 0, rows_ - r0, landmark_col());
}

template <typename Scalar>
VecX<Scalar> LandmarkBlock<Scalar>::reduced_residual() const {
  const std::size_t r0 = reduced_first_row();
  return storage().block(r0, residual_col(), rows_ - r0, 1);
}

template <typename Scalar>
LandmarkBlock<Scalar> linearize_landmark(
    const BaProblem& problem, std::size_t landmark_index, Scalar huber_delta,
    typename LandmarkBlock<Scalar>::Options options) {
  LandmarkBlock<Scalar> block(landmark_index,
                              landmark_pose_indices(problem, landmark_index),
                              options);
  block.linearize(problem, huber_delta);
  return block;
}

template class LandmarkBlock<float>;
template class LandmarkBlock<double>;
template LandmarkBlock<float> linearize_landmark<float>(
    const BaProblem&, std::size_t, float, LandmarkBlock<float>::Options);
template LandmarkBlock<double> linearize_landmark<double>(
    const BaProblem&, std::size_t, double, LandmarkBlock<double>::Options);

}  // namespace sqrtba
