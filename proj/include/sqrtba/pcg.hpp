#pragma once

#include <cmath>
#include <string_view>
#include <vector>

#include "sqrtba/common.hpp"

namespace sqrtba {

enum class CgTermination { kTolerance, kMaxIterations, kIndefinite };

inline std::string_view to_string(CgTermination t) {
  switch (t) {
    case CgTermination::kTolerance:
      return "tolerance";
    case CgTermination::kMaxIterations:
      return "max_iterations";
    case CgTermination::kIndefinite:
      return "indefinite";
  }
  return "unknown";
}

struct CgStats {
  int iterations = 0;
  // sqrt(r^T M r) relative to its initial value
  double final_relative_residual = 0.0;
  CgTermination termination_reason = CgTermination::kTolerance;
  // 0.5 x^T A x - b^T x after every iteration; non-increasing for SPD A
  std::vector<double> objective_history;
};

// Preconditioned CG from x = 0 for A x = b. multiply(v) returns A v,
// precondition(r) returns M^-1 r. Stops when the preconditioned residual
// norm drops to tolerance times its initial value, after max_iters, or on
// non-positive curvature p^T A p <= 0.
template <typename Scalar, typename Multiply, typename Precondition>
VecX<Scalar> solve_pcg(Multiply&& multiply, Precondition&& precondition,
                       const VecX<Scalar>& b, double tolerance, int max_iters,
                       CgStats* stats = nullptr) {
  CgStats local;
  CgStats& st = stats ? *stats : local;
  st = CgStats{};

  VecX<Scalar> x = VecX<Scalar>::Zero(b.size());
  VecX<Scalar> r = b;
  VecX<Scalar> z = precondition(r);
  Scalar rz = r.dot(z);
  if (!(rz > Scalar(0))) {
    st.final_relative_residual = 0.0;
    st.termination_reason =
        rz == Scalar(0) ? CgTermination::kTolerance : CgTermination::kIndefinite;
    return x;
  }
  const double initial = std::sqrt(double(rz));
  VecX<Scalar> p = z;
  st.termination_reason = CgTermination::kMaxIterations;
  st.final_relative_residual = 1.0;

  for (int it = 0; it < max_iters; ++it) {
    const VecX<Scalar> Ap = multiply(p);
    const Scalar pAp = p.dot(Ap);
    if (!(pAp > Scalar(0))) {
      st.termination_reason = CgTermination::kIndefinite;
      break;
    }
    const Scalar alpha = rz / pAp;
    x.noalias() += alpha * p;
    r.noalias() -= alpha * Ap;
    z = precondition(r);
    const Scalar rz_new = r.dot(z);
    ++st.iterations;
    // with r = b - A x: 0.5 x^T A x - b^T x = -0.5 x^T (b + r)
    st.objective_history.push_back(
        -0.5 * double(x.dot(b + r)));
    if (!(rz_new >= Scalar(0))) {
      st.termination_reason = CgTermination::kIndefinite;
      break;
    }
    st.final_relative_residual = std::sqrt(double(rz_new)) / initial;
    if (st.final_relative_residual <= tolerance) {
      st.termination_reason = CgTermination::kTolerance;
      break;
    }
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  return x;
}

}  // namespace sqrtba
