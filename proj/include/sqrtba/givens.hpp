#pragma once

#include <cmath>
#include <cstddef>
#include <span>

namespace sqrtba {

// Plane rotation acting on rows (pivot, target) of a matrix:
//   row_pivot' =  c row_pivot + s row_target
//   row_target' = -s row_pivot + c row_target
template <typename Scalar>
struct GivensRotation {
  std::size_t pivot_row = 0;
  std::size_t target_row = 0;
  Scalar c = Scalar(1);
  Scalar s = Scalar(0);

  bool is_identity() const { return c == Scalar(1) && s == Scalar(0); }
};

// Coefficients that zero a_ij against the pivot a_jj. A zero target entry
// yields the identity rotation, which also covers both inputs being zero.
template <typename Scalar>
GivensRotation<Scalar> givens_coeffs(Scalar a_jj, Scalar a_ij) {
  GivensRotation<Scalar> g;
  if (a_ij == Scalar(0)) return g;
  const Scalar r = std::hypot(a_jj, a_ij);
  g.c = a_jj / r;
  g.s = a_ij / r;
  return g;
}

// Applies the rotation to two contiguous rows of equal length.
template <typename Scalar>
void apply_rotation(const GivensRotation<Scalar>& g, std::span<Scalar> pivot,
                    std::span<Scalar> target) {
  for (std::size_t k = 0; k < pivot.size(); ++k) {
    const Scalar a = pivot[k];
    const Scalar b = target[k];
    pivot[k] = g.c * a + g.s * b;
    target[k] = -g.s * a + g.c * b;
  }
}

// Applies the transposed rotation (the inverse).
template <typename Scalar>
void apply_rotation_transposed(const GivensRotation<Scalar>& g,
                               std::span<Scalar> pivot,
                               std::span<Scalar> target) {
  for (std::size_t k = 0; k < pivot.size(); ++k) {
    const Scalar a = pivot[k];
    const Scalar b = target[k];
    pivot[k] = g.c * a - g.s * b;
    target[k] = g.s * a + g.c * b;
  }
}

}  // namespace sqrtba
