#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

#include "sqrtba/bal_problem.hpp"

namespace sqrtba {

struct SyntheticOptions {
  std::size_t num_cameras = 4;
  std::size_t num_landmarks = 20;
  std::size_t min_obs = 2;
  std::size_t max_obs = 4;  // clamped to num_cameras (distinct cameras)
  double pixel_noise = 0.5;
  double outlier_fraction = 0.0;
  // perturbation of the initial state
  double landmark_noise = 0.02;
  double rotation_noise = 1e-3;
  double translation_noise = 0.01;
  double intrinsics_noise = 1e-3;
};

// Cameras around the origin looking down -z at landmarks in front of them.
// Observations come from the unperturbed state plus pixel noise, the
// returned state is perturbed.
BaProblem random_problem(const SyntheticOptions& options, std::uint64_t seed);

// Street-sequence scene with the size of ladybug49 after filtering: 49
// cameras, 7766 landmarks, 31812 observations, observations per landmark
// with mean 4.1, std 3.3 and max 29. Written in BAL layout conventions.
BaProblem ladybug49_surrogate(std::uint64_t seed = 49);

}  // namespace sqrtba
