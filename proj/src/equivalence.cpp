#include "sqrtba/equivalence.hpp"

#include "sqrtba/landmark_block.hpp"
#include "sqrtba/reduced_solver.hpp"
#include "sqrtba/sc_baseline.hpp"

namespace sqrtba {

template <typename Scalar>
EquivalenceReport check_equivalence(const BaProblem& problem, double lambda,
                                    double huber_delta) {
  using Mat = MatX<Scalar>;
  using Vec = VecX<Scalar>;
  const std::size_t np = problem.num_cameras();
  const std::size_t nl = problem.num_landmarks();
  const std::size_t dim = kPoseSize * np;
  const Scalar lam = Scalar(lambda);

  EquivalenceReport rep;
  rep.num_cameras = np;
  rep.num_landmarks = nl;

  // square-root pipeline
  std::vector<LandmarkBlock<Scalar>> blocks;
  std::vector<std::size_t> block_lm;
  for (std::size_t j = 0; j < nl; ++j) {
    if (problem.landmark_observations(j).empty()) continue;
    blocks.push_back(linearize_landmark<Scalar>(problem, j, Scalar(huber_delta)));
    block_lm.push_back(j);
  }
  const ColumnScaling<Scalar> scaling = compute_column_scaling(blocks, np);
  const Vec D_p = pose_damping_diagonal(blocks, np);
  for (auto& b : blocks) {
    b.marginalize();
    b.apply_landmark_damping(lam);
    if (b.is_rank_deficient()) ++rep.excluded_landmarks;
  }
  ReducedSystem<Scalar> system(blocks, np);
  system.set_pose_damping(lam, D_p);
  Mat H_nm(dim, dim);
  for (std::size_t c = 0; c < dim; ++c)
    H_nm.col(c) = system.multiply(Vec::Unit(dim, c));
  const Vec b_nm = system.rhs();
  const Vec dxp_nm = -H_nm.llt().solve(b_nm);
  Vec dxl_nm = Vec::Zero(3 * nl);
  Vec ls_nm = Vec::Ones(3 * nl);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    ls_nm.template segment<3>(3 * block_lm[b]) = scaling.landmark[b];
    if (!blocks[b].is_rank_deficient())
      dxl_nm.template segment<3>(3 * block_lm[b]) =
          blocks[b].back_substitute(dxp_nm);
  }

  // explicit Schur complement pipeline
  HessianBlocks<Scalar> h = assemble_hessian<Scalar>(problem, Scalar(huber_delta));
  const Vec s = scale_hessian(h);
  const Vec D = hessian_damping_diagonal(h);
  const CameraPairPattern pattern(problem);
  const ReducedHessian<Scalar> red = schur_reduce(h, lam, D, pattern);
  const Mat H_sc = red.to_dense();
  const Vec dxp_sc = -H_sc.llt().solve(red.b);
  const Vec dxl_sc = sc_back_substitute(h, red, dxp_sc);

  Vec s_nm(dim + 3 * nl);
  s_nm << scaling.pose, ls_nm;
  rep.column_scaling = relative_deviation(s_nm, s);
  rep.reduced_matrix = relative_deviation(H_nm, H_sc);
  rep.reduced_gradient = relative_deviation(b_nm, red.b);
  rep.pose_increment = relative_deviation(dxp_nm, dxp_sc);
  rep.landmark_increment = relative_deviation(dxl_nm, dxl_sc);
  return rep;
}

template EquivalenceReport check_equivalence<float>(const BaProblem&, double,
                                                    double);
template EquivalenceReport check_equivalence<double>(const BaProblem&, double,
                                                     double);

}  // namespace sqrtba
