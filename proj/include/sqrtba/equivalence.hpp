#pragma once

#include <algorithm>
#include <cstddef>

#include "sqrtba/bal_problem.hpp"

namespace sqrtba {

// Largest deviations between the square-root and the explicit Schur
// complement pipelines on one linearization, each relative to the max-norm
// of the Schur complement quantity.
struct EquivalenceReport {
  std::size_t num_cameras = 0;
  std::size_t num_landmarks = 0;
  std::size_t excluded_landmarks = 0;
  double column_scaling = 0.0;
  double reduced_matrix = 0.0;
  double reduced_gradient = 0.0;
  double pose_increment = 0.0;
  double landmark_increment = 0.0;

  double max_deviation() const {
    return std::max({column_scaling, reduced_matrix, reduced_gradient,
                     pose_increment, landmark_increment});
  }
};

// Both reduced systems are formed densely and solved directly, so the report
// measures the algebra and not the iterative solver.
template <typename Scalar>
EquivalenceReport check_equivalence(const BaProblem& problem, double lambda,
                                    double huber_delta);

// max|a - b| / max|b| (absolute if b is zero)
template <typename A, typename B>
double relative_deviation(const A& a, const B& b) {
  const double num = (a - b).cwiseAbs().maxCoeff();
  const double den = b.cwiseAbs().maxCoeff();
  return den > 0 ? num / den : num;
}

}  // namespace sqrtba
