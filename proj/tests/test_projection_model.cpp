#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracle.hpp"
#include "sqrtba/camera_model.hpp"

using namespace sqrtba;

namespace {

Vec9<double> camera(double f, double k1 = 0, double k2 = 0) {
  Vec9<double> c = Vec9<double>::Zero();
  c[6] = f;
  c[7] = k1;
  c[8] = k2;
  return c;
}

double rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

}  // namespace

TEST(Project, HandEvaluatedExamples) {
  EXPECT_EQ(project<double>(camera(123.0), {0, 0, -1}), Eigen::Vector2d(0, 0));
  EXPECT_LT((project<double>(camera(1.0), {1, 1, -1}) - Eigen::Vector2d(1, 1)).norm(),
            1e-15);
  // p = (0.5, 0), d = 1 + 0.1 * 0.25 = 1.025, u = 2 * 1.025 * 0.5
  EXPECT_LT((project<double>(camera(2.0, 0.1), {0.5, 0, -1}) -
             Eigen::Vector2d(1.025, 0)).norm(), 1e-15);
}

TEST(Project, ZeroDepthIsDegenerate) {
  EXPECT_THROW(project<double>(camera(1.0), {1, 0, 0}), ProjectionDegenerate);
  EXPECT_THROW(residual_jacobian<double>(camera(1.0), {1, 0, 0}, {0, 0}, 1.0),
               ProjectionDegenerate);
}

TEST(Project, MatchesIndependentReimplementation) {
  test::Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const auto c = test::random_projection_config(rng);
    EXPECT_LT(rel_err(project<double>(c.cam, c.point),
                      test::reference_projection(c.cam, c.point)), 1e-12);
  }
}

TEST(Project, RotationVectorPeriodicity) {
  test::Rng rng(2);
  for (int i = 0; i < 50; ++i) {
    auto c = test::random_projection_config(rng);
    const Eigen::Vector3d w = c.cam.head<3>();
    Vec9<double> shifted = c.cam;
    shifted.head<3>() = w.normalized() * (w.norm() + 2 * std::numbers::pi);
    EXPECT_LT((project<double>(c.cam, c.point) - project<double>(shifted, c.point))
                  .cwiseAbs().maxCoeff(), 1e-9 * c.cam[6]);
  }
}

TEST(Residual, SignConvention) {
  const Vec9<double> c = camera(1.0);
  const Eigen::Vector3d x(1, 1, -1);
  const Eigen::Vector2d u = project<double>(c, x);
  EXPECT_EQ(residual<double>(c, x, u), Eigen::Vector2d(0, 0));
  EXPECT_LT((residual<double>(c, x, u + Eigen::Vector2d(1, -2)) -
             Eigen::Vector2d(-1, 2)).norm(), 1e-15);
}

TEST(ResidualJacobian, HuberWeights) {
  const Vec9<double> c = camera(1.0);
  const Eigen::Vector3d x(1, 1, -1);
  const Eigen::Vector2d u = project<double>(c, x);

  const auto inlier = residual_jacobian<double>(c, x, u, 1.0);
  EXPECT_EQ(inlier.weight, 1.0);
  EXPECT_EQ(inlier.r, Eigen::Vector2d(0, 0));

  // |r| = 2 delta -> w = 0.5, everything scaled by sqrt(0.5)
  const double delta = 0.25;
  const Eigen::Vector2d obs = u - Eigen::Vector2d(0.3, 0.4);  // |r| = 0.5
  const auto raw = residual_jacobian<double>(c, x, obs, 1e9);
  const auto w = residual_jacobian<double>(c, x, obs, delta);
  EXPECT_DOUBLE_EQ(w.weight, 0.5);
  const double s = std::sqrt(0.5);
  EXPECT_LT((w.r - s * raw.r).norm(), 1e-15);
  EXPECT_LT((w.J_cam - s * raw.J_cam).norm(), 1e-12);
  EXPECT_LT((w.J_lm - s * raw.J_lm).norm(), 1e-12);
}

TEST(ResidualJacobian, HuberInfluenceBounded) {
  const double delta = 1.0;
  for (double n : {0.1, 0.9, 1.0, 1.5, 4.0, 100.0}) {
    const double w = huber_weight(n, delta);
    EXPECT_GT(w, 0.0);
    EXPECT_LE(w, 1.0);
    EXPECT_LE(w * n, delta + 1e-15);
  }
  // loss matches 2 delta |r| - delta^2 outside and |r|^2 inside
  EXPECT_DOUBLE_EQ(huber_loss(0.25, 1.0), 0.25);
  EXPECT_DOUBLE_EQ(huber_loss(9.0, 1.0), 5.0);
}

TEST(ResidualJacobian, MatchesCentralDifferences) {
  test::Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    const auto c = test::random_projection_config(rng);
    const auto rj = residual_jacobian<double>(c.cam, c.point, c.obs, 1e12);
    const auto fd = test::fd_jacobian(c);
    for (int col = 0; col < 9; ++col) {
      const double err = (rj.J_cam.col(col) - fd.J_cam.col(col)).norm();
      EXPECT_LE(err, 1e-5 * fd.J_cam.col(col).norm() + 1e-8)
          << "camera column " << col << " config " << i;
    }
    for (int col = 0; col < 3; ++col) {
      const double err = (rj.J_lm.col(col) - fd.J_lm.col(col)).norm();
      EXPECT_LE(err, 1e-5 * fd.J_lm.col(col).norm() + 1e-8)
          << "landmark column " << col << " config " << i;
    }
  }
}

TEST(ResidualJacobian, SmallAngleBranch) {
  test::Rng rng(9);
  auto c = test::random_projection_config(rng);
  c.cam.head<3>() = Eigen::Vector3d(3e-9, -2e-9, 1e-9);
  const auto rj = residual_jacobian<double>(c.cam, c.point, c.obs, 1e12);
  const auto fd = test::fd_jacobian(c);
  EXPECT_LT(rel_err(rj.J_cam, fd.J_cam), 1e-5);
  EXPECT_LT(rel_err(rj.J_lm, fd.J_lm), 1e-5);
}

TEST(ResidualJacobian, SinglePrecisionAgrees) {
  test::Rng rng(4);
  for (int i = 0; i < 20; ++i) {
    const auto c = test::random_projection_config(rng);
    const auto d = residual_jacobian<double>(c.cam, c.point, c.obs, 1.0);
    const auto f = residual_jacobian<float>(c.cam.cast<float>(), c.point.cast<float>(),
                                            c.obs.cast<float>(), 1.0f);
    EXPECT_LT(rel_err(f.J_cam.cast<double>(), d.J_cam), 1e-4);
    EXPECT_LT(rel_err(f.J_lm.cast<double>(), d.J_lm), 1e-4);
  }
}
