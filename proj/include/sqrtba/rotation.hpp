#pragma once

#include <cmath>

#include "sqrtba/common.hpp"

namespace sqrtba {

inline constexpr double kSmallAngle = 1e-8;

template <typename Scalar>
Mat3<Scalar> hat(const Vec3<Scalar>& v) {
  Mat3<Scalar> m;
  m << Scalar(0), -v.z(), v.y(),  //
      v.z(), Scalar(0), -v.x(),   //
      -v.y(), v.x(), Scalar(0);
  return m;
}

// Rodrigues' formula; first-order series below kSmallAngle.
template <typename Scalar>
Mat3<Scalar> angle_axis_to_rotation(const Vec3<Scalar>& omega) {
  const Scalar theta2 = omega.squaredNorm();
  const Mat3<Scalar> w = hat(omega);
  if (theta2 < Scalar(kSmallAngle * kSmallAngle)) {
    return Mat3<Scalar>::Identity() + w + Scalar(0.5) * w * w;
  }
  const Scalar theta = std::sqrt(theta2);
  const Scalar a = std::sin(theta) / theta;
  const Scalar b = (Scalar(1) - std::cos(theta)) / theta2;
  return Mat3<Scalar>::Identity() + a * w + b * w * w;
}

// Rotates a point without forming the matrix (used on the cost path).
template <typename Scalar>
Vec3<Scalar> rotate(const Vec3<Scalar>& omega, const Vec3<Scalar>& p) {
  const Scalar theta2 = omega.squaredNorm();
  if (theta2 < Scalar(kSmallAngle * kSmallAngle)) {
    return p + omega.cross(p);
  }
  const Scalar theta = std::sqrt(theta2);
  const Vec3<Scalar> axis = omega / theta;
  const Scalar c = std::cos(theta);
  const Scalar s = std::sin(theta);
  return p * c + axis.cross(p) * s + axis * (axis.dot(p) * (Scalar(1) - c));
}

// Right Jacobian of SO(3): d(R(omega) p)/d(omega) = -R(omega) [p]_x Jr(omega).
template <typename Scalar>
Mat3<Scalar> so3_right_jacobian(const Vec3<Scalar>& omega) {
  const Scalar theta2 = omega.squaredNorm();
  const Mat3<Scalar> w = hat(omega);
  if (theta2 < Scalar(kSmallAngle * kSmallAngle)) {
    return Mat3<Scalar>::Identity() - Scalar(0.5) * w + w * w / Scalar(6);
  }
  const Scalar theta = std::sqrt(theta2);
  const Scalar a = (Scalar(1) - std::cos(theta)) / theta2;
  const Scalar b = (theta - std::sin(theta)) / (theta2 * theta);
  return Mat3<Scalar>::Identity() - a * w + b * w * w;
}

}  // namespace sqrtba
