#pragma once

#include <cmath>
#include <sstream>

#include "sqrtba/common.hpp"
#include "sqrtba/rotation.hpp"

namespace sqrtba {

// Snavely camera as stored in BAL files. Pose parameters are updated by plain
// addition on the 9-vector, angle-axis included.
struct CameraParams {
  Eigen::Vector3d rotation = Eigen::Vector3d::Zero();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  double focal = 1.0;
  double k1 = 0.0;
  double k2 = 0.0;

  Vec9<double> to_vector() const {
    Vec9<double> v;
    v << rotation, translation, focal, k1, k2;
    return v;
  }

  static CameraParams from_vector(const Vec9<double>& v) {
    CameraParams c;
    c.rotation = v.segment<3>(0);
    c.translation = v.segment<3>(3);
    c.focal = v[6];
    c.k1 = v[7];
    c.k2 = v[8];
    return c;
  }

  // Camera centre in world coordinates, -R^T t.
  Eigen::Vector3d center() const {
    return -angle_axis_to_rotation(rotation).transpose() * translation;
  }

  bool operator==(const CameraParams&) const = default;
};

// Residual and Jacobians for one observation, pre-scaled by sqrt(weight).
template <typename Scalar>
struct ResidualJacobian {
  Vec2<Scalar> r;
  Mat29<Scalar> J_cam;
  Mat23<Scalar> J_lm;
  Scalar weight = Scalar(1);
};

namespace detail {

template <typename Scalar>
[[noreturn]] inline void throw_degenerate(const Vec3<Scalar>& p_cam) {
  std::ostringstream os;
  os << "projection degenerate: camera-frame point (" << p_cam.transpose()
     << ") has zero depth";
  throw ProjectionDegenerate(os.str());
}

}  // namespace detail

// Pixel position of a world point: P = R p + t, q = -P.xy / P.z,
// d = 1 + k1 |q|^2 + k2 |q|^4, u = f d q.
template <typename Scalar>
Vec2<Scalar> project(const Vec9<Scalar>& cam, const Vec3<Scalar>& point) {
  const Vec3<Scalar> p_cam =
      rotate<Scalar>(cam.template head<3>(), point) + cam.template segment<3>(3);
  if (p_cam.z() == Scalar(0)) detail::throw_degenerate(p_cam);
  const Vec2<Scalar> q = -p_cam.template head<2>() / p_cam.z();
  const Scalar n2 = q.squaredNorm();
  const Scalar d = Scalar(1) + n2 * (cam[7] + cam[8] * n2);
  return cam[6] * d * q;
}

inline Eigen::Vector2d project(const CameraParams& cam,
                               const Eigen::Vector3d& point) {
  return project<double>(cam.to_vector(), point);
}

// predicted minus observed
template <typename Scalar>
Vec2<Scalar> residual(const Vec9<Scalar>& cam, const Vec3<Scalar>& point,
                      const Vec2<Scalar>& obs) {
  return project<Scalar>(cam, point) - obs;
}

inline Eigen::Vector2d residual(const CameraParams& cam,
                                const Eigen::Vector3d& point,
                                const Eigen::Vector2d& obs) {
  return project(cam, point) - obs;
}

// IRLS weight of the Huber norm on |r|.
template <typename Scalar>
Scalar huber_weight(Scalar residual_norm, Scalar delta) {
  return residual_norm <= delta ? Scalar(1) : delta / residual_norm;
}

// Huber loss on the squared norm s = |r|^2: s inside, 2 delta sqrt(s) - delta^2
// outside. The reported cost of a problem is 0.5 * sum of these.
inline double huber_loss(double squared_norm, double delta) {
  const double delta2 = delta * delta;
  if (squared_norm <= delta2) return squared_norm;
  return 2.0 * delta * std::sqrt(squared_norm) - delta2;
}

template <typename Scalar>
ResidualJacobian<Scalar> residual_jacobian(const Vec9<Scalar>& cam,
                                           const Vec3<Scalar>& point,
                                           const Vec2<Scalar>& obs,
                                           Scalar huber_delta) {
  const Vec3<Scalar> omega = cam.template head<3>();
  const Mat3<Scalar> R = angle_axis_to_rotation(omega);
  const Vec3<Scalar> p_cam = R * point + cam.template segment<3>(3);
  if (p_cam.z() == Scalar(0)) detail::throw_degenerate(p_cam);

  const Scalar inv_z = Scalar(1) / p_cam.z();
  const Vec2<Scalar> q = -p_cam.template head<2>() * inv_z;
  const Scalar n2 = q.squaredNorm();
  const Scalar f = cam[6];
  const Scalar k1 = cam[7];
  const Scalar k2 = cam[8];
  const Scalar d = Scalar(1) + n2 * (k1 + k2 * n2);

  ResidualJacobian<Scalar> out;
  out.r = f * d * q - obs;

  // du/dq = f (d I + 2 q q^T (k1 + 2 k2 |q|^2))
  Eigen::Matrix<Scalar, 2, 2> du_dq =
      Scalar(2) * (k1 + Scalar(2) * k2 * n2) * q * q.transpose();
  du_dq.diagonal().array() += d;
  du_dq *= f;

  Mat23<Scalar> dq_dP;
  dq_dP << -inv_z, Scalar(0), -q.x() * inv_z,  //
      Scalar(0), -inv_z, -q.y() * inv_z;

  const Mat23<Scalar> du_dP = du_dq * dq_dP;

  out.J_lm = du_dP * R;
  out.J_cam.template block<2, 3>(0, 0) =
      -du_dP * R * hat<Scalar>(point) * so3_right_jacobian(omega);
  out.J_cam.template block<2, 3>(0, 3) = du_dP;
  out.J_cam.col(6) = d * q;
  out.J_cam.col(7) = f * n2 * q;
  out.J_cam.col(8) = f * n2 * n2 * q;

  out.weight = huber_weight(out.r.norm(), huber_delta);
  if (out.weight != Scalar(1)) {
    const Scalar sw = std::sqrt(out.weight);
    out.r *= sw;
    out.J_cam *= sw;
    out.J_lm *= sw;
  }
  return out;
}

inline ResidualJacobian<double> residual_jacobian(const CameraParams& cam,
                                                  const Eigen::Vector3d& point,
                                                  const Eigen::Vector2d& obs,
                                                  double huber_delta) {
  return residual_jacobian<double>(cam.to_vector(), point, obs, huber_delta);
}

}  // namespace sqrtba
