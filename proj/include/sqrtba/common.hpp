#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>

#include <Eigen/Dense>

namespace sqrtba {

// camera parameter block: angle-axis (3), translation (3), focal, k1, k2
inline constexpr int kPoseSize = 9;
inline constexpr int kLandmarkSize = 3;

template <typename Scalar>
using Vec2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Vec9 = Eigen::Matrix<Scalar, kPoseSize, 1>;
template <typename Scalar>
using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Mat3 = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar>
using Mat9 = Eigen::Matrix<Scalar, kPoseSize, kPoseSize>;
template <typename Scalar>
using Mat23 = Eigen::Matrix<Scalar, 2, 3>;
template <typename Scalar>
using Mat29 = Eigen::Matrix<Scalar, 2, kPoseSize>;
template <typename Scalar>
using Mat93 = Eigen::Matrix<Scalar, kPoseSize, 3>;
template <typename Scalar>
using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using RowMatX =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Precision { kSingle, kDouble };

std::string_view to_string(Precision p);
Precision parse_precision(std::string_view s);

template <typename Scalar>
constexpr Precision precision_of() {
  static_assert(std::is_same_v<Scalar, float> || std::is_same_v<Scalar, double>);
  return std::is_same_v<Scalar, float> ? Precision::kSingle
                                       : Precision::kDouble;
}

// Base for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Camera-frame depth of a point is exactly zero.
class ProjectionDegenerate : public Error {
 public:
  using Error::Error;
};

}  // namespace sqrtba
