#include "sqrtba/sc_baseline.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sqrtba/parallel.hpp"

namespace sqrtba {

template <typename Scalar>
HessianBlocks<Scalar> assemble_hessian(const BaProblem& problem,
                                       Scalar huber_delta) {
  const std::size_t np = problem.num_cameras();
  const std::size_t nl = problem.num_landmarks();
  const std::size_t no = problem.num_observations();
  const auto& observations = problem.observations();

  HessianBlocks<Scalar> h;
  h.num_cameras = np;
  h.num_landmarks = nl;
  h.H_pp.assign(np, Mat9<Scalar>::Zero());
  h.H_pl.assign(no, Mat93<Scalar>::Zero());
  h.H_ll.assign(nl, Mat3<Scalar>::Zero());
  h.b_p = VecX<Scalar>::Zero(kPoseSize * np);
  h.b_l = VecX<Scalar>::Zero(3 * nl);
  h.obs_camera.resize(no);
  h.obs_landmark.resize(no);
  h.landmark_obs.resize(nl);
  for (std::size_t o = 0; o < no; ++o) {
    h.obs_camera[o] = observations[o].camera_index;
    h.obs_landmark[o] = observations[o].landmark_index;
  }

  // per-observation terms that end up in camera blocks
  TrackedVector<Mat9<Scalar>> obs_hpp(no);
  TrackedVector<Vec9<Scalar>> obs_bp(no);

  parallel_for_index(nl, [&](std::size_t j) {
    h.landmark_obs[j] = problem.landmark_observations(j);
    const Vec3<Scalar> point = problem.landmarks()[j].template cast<Scalar>();
    for (std::size_t o : h.landmark_obs[j]) {
      const Observation& obs = observations[o];
      ResidualJacobian<Scalar> rj;
      try {
        rj = residual_jacobian<Scalar>(
            problem.cameras()[obs.camera_index].to_vector().template cast<Scalar>(),
            point, obs.pixel.template cast<Scalar>(), huber_delta);
      } catch (const ProjectionDegenerate& e) {
        std::ostringstream os;
        os << e.what() << " (landmark " << j << ", camera " << obs.camera_index
           << ")";
        throw ProjectionDegenerate(os.str());
      }
      obs_hpp[o].noalias() = rj.J_cam.transpose() * rj.J_cam;
      obs_bp[o].noalias() = rj.J_cam.transpose() * rj.r;
      h.H_pl[o].noalias() = rj.J_cam.transpose() * rj.J_lm;
      h.H_ll[j].noalias() += rj.J_lm.transpose() * rj.J_lm;
      h.b_l.template segment<3>(3 * j).noalias() += rj.J_lm.transpose() * rj.r;
    }
  });

  std::vector<std::vector<std::size_t>> camera_obs(np);
  for (std::size_t o = 0; o < no; ++o) camera_obs[h.obs_camera[o]].push_back(o);
  parallel_for_index(
      np,
      [&](std::size_t i) {
        for (std::size_t o : camera_obs[i]) {
          h.H_pp[i] += obs_hpp[o];
          h.b_p.template segment<kPoseSize>(kPoseSize * i) += obs_bp[o];
        }
      },
      1);
  return h;
}

template <typename Scalar>
VecX<Scalar> scale_hessian(HessianBlocks<Scalar>& h) {
  const std::size_t np = h.num_cameras;
  const std::size_t nl = h.num_landmarks;
  VecX<Scalar> s(kPoseSize * np + 3 * nl);
  for (std::size_t i = 0; i < np; ++i)
    s.template segment<kPoseSize>(kPoseSize * i) =
        (Scalar(1) + h.H_pp[i].diagonal().array().sqrt()).inverse();
  for (std::size_t j = 0; j < nl; ++j)
    s.template segment<3>(kPoseSize * np + 3 * j) =
        (Scalar(1) + h.H_ll[j].diagonal().array().sqrt()).inverse();

  auto sp = [&](std::size_t i) {
    return s.template segment<kPoseSize>(kPoseSize * i).asDiagonal();
  };
  auto sl = [&](std::size_t j) {
    return s.template segment<3>(kPoseSize * np + 3 * j).asDiagonal();
  };
  for (std::size_t i = 0; i < np; ++i) {
    h.H_pp[i] = sp(i) * h.H_pp[i] * sp(i);
    h.b_p.template segment<kPoseSize>(kPoseSize * i) =
        sp(i) * h.b_p.template segment<kPoseSize>(kPoseSize * i);
  }
  for (std::size_t j = 0; j < nl; ++j) {
    h.H_ll[j] = sl(j) * h.H_ll[j] * sl(j);
    h.b_l.template segment<3>(3 * j) = sl(j) * h.b_l.template segment<3>(3 * j);
  }
  for (std::size_t o = 0; o < h.H_pl.size(); ++o)
    h.H_pl[o] = sp(h.obs_camera[o]) * h.H_pl[o] * sl(h.obs_landmark[o]);
  return s;
}

template <typename Scalar>
VecX<Scalar> hessian_damping_diagonal(const HessianBlocks<Scalar>& h,
                                      double min_diagonal) {
  const std::size_t np = h.num_cameras;
  VecX<Scalar> d(kPoseSize * np + 3 * h.num_landmarks);
  for (std::size_t i = 0; i < np; ++i)
    d.template segment<kPoseSize>(kPoseSize * i) = h.H_pp[i].diagonal();
  for (std::size_t j = 0; j < h.num_landmarks; ++j)
    d.template segment<3>(kPoseSize * np + 3 * j) = h.H_ll[j].diagonal();
  return d.array().max(Scalar(min_diagonal)).sqrt();
}

CameraPairPattern::CameraPairPattern(const BaProblem& problem) {
  const std::size_t np = problem.num_cameras();
  rows_.resize(np);
  diagonal_.resize(np);
  auto insert = [&](std::size_t i, std::size_t j) {
    const auto [it, inserted] = index_.try_emplace(key(i, j), pairs_.size());
    if (inserted) pairs_.emplace_back(i, j);
    return it->second;
  };
  for (std::size_t i = 0; i < np; ++i) diagonal_[i] = insert(i, i);
  for (std::size_t j = 0; j < problem.num_landmarks(); ++j) {
    const auto& obs = problem.landmark_observations(j);
    for (std::size_t a = 0; a < obs.size(); ++a)
      for (std::size_t b = a + 1; b < obs.size(); ++b) {
        const std::size_t ca = problem.observations()[obs[a]].camera_index;
        const std::size_t cb = problem.observations()[obs[b]].camera_index;
        if (ca != cb) insert(std::min(ca, cb), std::max(ca, cb));
      }
  }
  for (std::size_t o = 0; o < pairs_.size(); ++o) {
    const auto [i, j] = pairs_[o];
    rows_[i].push_back({j, o, false});
    if (i != j) rows_[j].push_back({i, o, true});
  }
  for (auto& r : rows_)
    std::sort(r.begin(), r.end(),
              [](const Entry& a, const Entry& b) { return a.col < b.col; });
}

std::size_t CameraPairPattern::offset(std::size_t i, std::size_t j) const {
  const auto it = index_.find(key(i, j));
  if (it == index_.end()) throw Error("camera pair not in pattern");
  return it->second;
}

template <typename Scalar>
VecX<Scalar> ReducedHessian<Scalar>::multiply(const VecX<Scalar>& v) const {
  VecX<Scalar> out(dim());
  parallel_for_index(
      pattern->num_cameras(),
      [&](std::size_t i) {
        Vec9<Scalar> acc = Vec9<Scalar>::Zero();
        for (const auto& e : pattern->row(i)) {
          const auto vj = v.template segment<kPoseSize>(kPoseSize * e.col);
          if (e.transposed)
            acc.noalias() += blocks[e.offset].transpose() * vj;
          else
            acc.noalias() += blocks[e.offset] * vj;
        }
        out.template segment<kPoseSize>(kPoseSize * i) = acc;
      },
      8);
  return out;
}

template <typename Scalar>
MatX<Scalar> ReducedHessian<Scalar>::to_dense() const {
  MatX<Scalar> H = MatX<Scalar>::Zero(dim(), dim());
  for (std::size_t o = 0; o < pattern->pairs().size(); ++o) {
    const auto [i, j] = pattern->pairs()[o];
    H.template block<kPoseSize, kPoseSize>(kPoseSize * i, kPoseSize * j) =
        blocks[o];
    if (i != j)
      H.template block<kPoseSize, kPoseSize>(kPoseSize * j, kPoseSize * i) =
          blocks[o].transpose();
  }
  return H;
}

template <typename Scalar>
ReducedHessian<Scalar> schur_reduce(const HessianBlocks<Scalar>& h,
                                    Scalar lambda, const VecX<Scalar>& D,
                                    const CameraPairPattern& pattern) {
  const std::size_t np = h.num_cameras;
  const std::size_t nl = h.num_landmarks;
  if (pattern.num_cameras() != np)
    throw Error("camera pair pattern does not match the problem");

  ReducedHessian<Scalar> red;
  red.pattern = &pattern;
  red.blocks.assign(pattern.num_blocks(), Mat9<Scalar>::Zero());
  red.H_ll_inv.assign(nl, Mat3<Scalar>::Zero());
  red.excluded.assign(nl, 0);
  red.b = h.b_p;

  for (std::size_t i = 0; i < np; ++i) {
    Mat9<Scalar>& d = red.blocks[pattern.diagonal_offset(i)];
    d = h.H_pp[i];
    d.diagonal().array() +=
        lambda * D.template segment<kPoseSize>(kPoseSize * i).array().square();
  }

  parallel_for_index(nl, [&](std::size_t j) {
    Mat3<Scalar> H = h.H_ll[j];
    H.diagonal().array() +=
        lambda *
        D.template segment<3>(kPoseSize * np + 3 * j).array().square();
    Eigen::LLT<Mat3<Scalar>> llt(H);
    if (llt.info() != Eigen::Success) {
      red.excluded[j] = 1;
      return;
    }
    red.H_ll_inv[j] = llt.solve(Mat3<Scalar>::Identity());
    if (!red.H_ll_inv[j].allFinite()) red.excluded[j] = 1;
  });

  std::vector<Mat93<Scalar>> W;
  for (std::size_t j = 0; j < nl; ++j) {
    if (red.excluded[j]) {
      red.excluded_landmarks.push_back(j);
      continue;
    }
    const auto& obs = h.landmark_obs[j];
    W.resize(obs.size());
    const auto bl = h.b_l.template segment<3>(3 * j);
    for (std::size_t a = 0; a < obs.size(); ++a) {
      W[a].noalias() = h.H_pl[obs[a]] * red.H_ll_inv[j];
      red.b.template segment<kPoseSize>(kPoseSize * h.obs_camera[obs[a]])
          .noalias() -= W[a] * bl;
    }
    for (std::size_t a = 0; a < obs.size(); ++a) {
      const std::size_t ca = h.obs_camera[obs[a]];
      for (std::size_t b = 0; b < obs.size(); ++b) {
        const std::size_t cb = h.obs_camera[obs[b]];
        if (ca > cb) continue;
        red.blocks[pattern.offset(ca, cb)].noalias() -=
            W[a] * h.H_pl[obs[b]].transpose();
      }
    }
  }
  return red;
}

template <typename Scalar>
VecX<Scalar> sc_back_substitute(const HessianBlocks<Scalar>& h,
                                const ReducedHessian<Scalar>& reduced,
                                const VecX<Scalar>& delta_xp) {
  VecX<Scalar> dl = VecX<Scalar>::Zero(3 * h.num_landmarks);
  parallel_for_index(h.num_landmarks, [&](std::size_t j) {
    if (reduced.excluded[j]) return;
    Vec3<Scalar> rhs = h.b_l.template segment<3>(3 * j);
    for (std::size_t o : h.landmark_obs[j])
      rhs.noalias() +=
          h.H_pl[o].transpose() *
          delta_xp.template segment<kPoseSize>(kPoseSize * h.obs_camera[o]);
    dl.template segment<3>(3 * j) = -(reduced.H_ll_inv[j] * rhs);
  });
  return dl;
}

template <typename Scalar>
double sc_model_cost_decrease(const HessianBlocks<Scalar>& h,
                              const VecX<Scalar>& delta_xp,
                              const VecX<Scalar>& delta_xl,
                              const std::vector<char>& excluded) {
  const Eigen::VectorXd xp = delta_xp.template cast<double>();
  const Eigen::VectorXd xl = delta_xl.template cast<double>();
  double linear = 0.0;
  double quad = 0.0;
  for (std::size_t i = 0; i < h.num_cameras; ++i) {
    const Vec9<double> x = xp.segment<kPoseSize>(kPoseSize * i);
    linear += x.dot(h.b_p.template segment<kPoseSize>(kPoseSize * i)
                        .template cast<double>());
    quad += x.dot(h.H_pp[i].template cast<double>() * x);
  }
  for (std::size_t j = 0; j < h.num_landmarks; ++j) {
    if (!excluded.empty() && excluded[j]) continue;
    const Vec3<double> x = xl.segment<3>(3 * j);
    linear += x.dot(h.b_l.template segment<3>(3 * j).template cast<double>());
    quad += x.dot(h.H_ll[j].template cast<double>() * x);
    for (std::size_t o : h.landmark_obs[j]) {
      const Vec9<double> y = xp.segment<kPoseSize>(kPoseSize * h.obs_camera[o]);
      quad += 2.0 * y.dot(h.H_pl[o].template cast<double>() * x);
    }
  }
  return -(linear + 0.5 * quad);
}

template <typename Scalar>
bool invert_diagonal_blocks(const ReducedHessian<Scalar>& reduced,
                            std::vector<Mat9<Scalar>>& inverse) {
  const std::size_t np = reduced.pattern->num_cameras();
  inverse.resize(np);
  bool ok = true;
  for (std::size_t i = 0; i < np; ++i) {
    Eigen::LLT<Mat9<Scalar>> llt(reduced.diagonal_block(i));
    if (llt.info() != Eigen::Success) {
      ok = false;
      inverse[i].setIdentity();
      continue;
    }
    inverse[i] = llt.solve(Mat9<Scalar>::Identity());
    if (!inverse[i].allFinite()) {
      ok = false;
      inverse[i].setIdentity();
    }
  }
  return ok;
}

template <typename Scalar>
VecX<Scalar> solve_reduced_hessian(const ReducedHessian<Scalar>& reduced,
                                   const std::vector<Mat9<Scalar>>& inverse,
                                   double tolerance, int max_iters,
                                   CgStats* stats) {
  auto precondition = [&](const VecX<Scalar>& r) {
    VecX<Scalar> z(r.size());
    for (std::size_t i = 0; i < inverse.size(); ++i)
      z.template segment<kPoseSize>(kPoseSize * i).noalias() =
          inverse[i] * r.template segment<kPoseSize>(kPoseSize * i);
    return z;
  };
  VecX<Scalar> x = solve_pcg<Scalar>(
      [&](const VecX<Scalar>& v) { return reduced.multiply(v); }, precondition,
      reduced.b, tolerance, max_iters, stats);
  return -x;
}

template <typename Scalar>
bool detect_indefinite(const ReducedHessian<Scalar>& reduced,
                       int probe_iterations) {
  std::vector<Mat9<Scalar>> inverse;
  if (!invert_diagonal_blocks(reduced, inverse)) return true;
  ReducedHessian<Scalar> probe;
  probe.pattern = reduced.pattern;
  probe.blocks = reduced.blocks;
  probe.b = reduced.b;
  if (probe.b.squaredNorm() == Scalar(0)) probe.b.setOnes();
  CgStats stats;
  solve_reduced_hessian(probe, inverse, 0.0, probe_iterations, &stats);
  return stats.termination_reason == CgTermination::kIndefinite;
}

#define SQRTBA_INSTANTIATE(S)                                                  \
  template HessianBlocks<S> assemble_hessian<S>(const BaProblem&, S);          \
  template VecX<S> scale_hessian<S>(HessianBlocks<S>&);                        \
  template VecX<S> hessian_damping_diagonal<S>(const HessianBlocks<S>&,        \
                                               double);                        \
  template struct ReducedHessian<S>;                                           \
  template ReducedHessian<S> schur_reduce<S>(                                  \
      const HessianBlocks<S>&, S, const VecX<S>&, const CameraPairPattern&);   \
  template VecX<S> sc_back_substitute<S>(                                      \
      const HessianBlocks<S>&, const ReducedHessian<S>&, const VecX<S>&);      \
  template double sc_model_cost_decrease<S>(                                   \
      const HessianBlocks<S>&, const VecX<S>&, const VecX<S>&,                 \
      const std::vector<char>&);                                               \
  template bool invert_diagonal_blocks<S>(const ReducedHessian<S>&,            \
                                          std::vector<Mat9<S>>&);              \
  template VecX<S> solve_reduced_hessian<S>(                                   \
      const ReducedHessian<S>&, const std::vector<Mat9<S>>&, double, int,      \
      CgStats*);                                                               \
  template bool detect_indefinite<S>(const ReducedHessian<S>&, int);

SQRTBA_INSTANTIATE(float)
SQRTBA_INSTANTIATE(double)

#undef SQRTBA_INSTANTIATE

}  // namespace sqrtba
