#include "nhred/dirac.hpp"

#include <Eigen/SVD>

namespace nhred {

namespace {

/// <(X,a),(Y,b)> = b(X) + a(Y) on stacked intrinsic columns.
MatrixXd pairing_gram(const MatrixXd& basis_a, const MatrixXd& basis_b) {
  const Eigen::Index n = basis_a.rows() / 2;
  MatrixXd Ta = basis_a.topRows(n), Ca = basis_a.bottomRows(n);
  MatrixXd Tb = basis_b.topRows(n), Cb = basis_b.bottomRows(n);
  return Ta.transpose() * Cb + Ca.transpose() * Tb;
}

}  // namespace

std::pair<VectorXd, RowVectorXd> DiracSubspace::ambient_pair(Eigen::Index j) const {
  VectorXd X = frame * basis.col(j).head(n());
  // alpha with <alpha, frame_i> = coefficients; least-squares ambient representative
  RowVectorXd alpha = (dual_coframe(frame).transpose() * basis.col(j).tail(n())).transpose();
  return {X, alpha};
}

double isotropy_residual(const DiracSubspace& L) {
  if (L.basis.cols() == 0) return 0.0;
  double scale = std::max(1.0, L.basis.cwiseAbs().maxCoeff());
  return pairing_gram(L.basis, L.basis).cwiseAbs().maxCoeff() / (scale * scale);
}

DiracSubspace validate_dirac(DiracSubspace L) {
  if (L.basis.rows() != 2 * L.n())
    fail(ErrorCode::DegenerateInput, "DiracSubspace: basis must have 2n rows");
  if (L.basis.cols() != L.n())
    fail(ErrorCode::DegenerateInput, "DiracSubspace: dimension must equal n, got " +
                                         std::to_string(L.basis.cols()) + " of " + std::to_string(L.n()));
  if (numerical_rank(L.basis) != L.n())
    fail(ErrorCode::DegenerateInput, "DiracSubspace: basis is rank deficient");
  if (isotropy_residual(L) > 1e-10)
    fail(ErrorCode::DegenerateInput, "DiracSubspace: isotropy residual " + std::to_string(isotropy_residual(L)));
  return L;
}

DiracSubspace dirac_from_ambient_pairs(const ChartPoint& base, const MatrixXd& frame,
                                       const std::vector<std::pair<VectorXd, RowVectorXd>>& pairs) {
  const Eigen::Index n = frame.cols();
  MatrixXd basis(2 * n, static_cast<Eigen::Index>(pairs.size()));
  MatrixXd dual = dual_coframe(frame);
  for (Eigen::Index j = 0; j < basis.cols(); ++j) {
    basis.col(j).head(n) = dual * pairs[static_cast<size_t>(j)].first;
    basis.col(j).tail(n) = frame.transpose() * pairs[static_cast<size_t>(j)].second.transpose();
  }
  return validate_dirac({base, frame, orthonormal_columns(basis)});
}

double dirac_distance(const DiracSubspace& a, const DiracSubspace& b) {
  return subspace_distance(a.basis, b.basis);
}

DiracSubspace graph_of(const BivectorAt& pi, const MatrixXd& frame) {
  require_antisymmetric(pi.components, "graph_of(bivector)", 1e-9);
  const Eigen::Index n = frame.cols();
  MatrixXd dual = dual_coframe(frame);
  MatrixXd P = dual * pi.components * dual.transpose();
  MatrixXd basis(2 * n, n);
  basis.topRows(n) = P.transpose();  // sharp(e^a) columns
  basis.bottomRows(n) = MatrixXd::Identity(n, n);
  return validate_dirac({pi.base, frame, basis});
}

DiracSubspace graph_of(const TwoFormAt& omega, const MatrixXd& frame) {
  require_antisymmetric(omega.components, "graph_of(two-form)", 1e-9);
  const Eigen::Index n = frame.cols();
  MatrixXd W = frame.transpose() * omega.components * frame;
  MatrixXd basis(2 * n, n);
  basis.topRows(n) = MatrixXd::Identity(n, n);
  basis.bottomRows(n) = W.transpose();  // (i_{e_i} w)_j = W(i, j)
  return validate_dirac({omega.base, frame, basis});
}

DiracPair pair_representation(const DiracSubspace& L, std::optional<Eigen::Index> declared_rank) {
  const Eigen::Index n = L.n();
  MatrixXd T = L.tangent_part();
  MatrixXd F = orthonormal_columns(T);
  if (declared_rank && F.cols() != *declared_rank)
    fail(ErrorCode::NotRegular, "pair_representation: pr_T rank " + std::to_string(F.cols()) +
                                    " differs from declared " + std::to_string(*declared_rank));
  // For each F column find (X, alpha) in L with X = f_j, then w(f_j, f_i) = -alpha(f_i).
  MatrixXd omega(F.cols(), F.cols());
  for (Eigen::Index j = 0; j < F.cols(); ++j) {
    double res = 0.0;
    VectorXd u = solve_in_span(T, F.col(j), &res);
    if (res > 1e-9 * std::max(1.0, F.col(j).norm()))
      fail(ErrorCode::NotRegular, "pair_representation: F column not reachable in pr_T(L)");
    VectorXd alpha = L.cotangent_part() * u;
    for (Eigen::Index i = 0; i < F.cols(); ++i) omega(j, i) = -alpha.dot(F.col(i));
  }
  // Isotropy makes this antisymmetric up to roundoff.
  omega = 0.5 * (omega - omega.transpose());
  return {FrameAt{L.base, L.frame * F, Variance::Tangent}, omega};
}

DiracSubspace dirac_from_pair(const ChartPoint& base, const MatrixXd& frame, const MatrixXd& F_ambient,
                              const MatrixXd& omega_F) {
  const Eigen::Index n = frame.cols();
  MatrixXd dual = dual_coframe(frame);
  MatrixXd Fi = dual * F_ambient;  // intrinsic F columns
  const Eigen::Index r = Fi.cols();
  // L = {(X, alpha): X in F, alpha|_F = -i_X w_F}; parametrize X by F-coeffs and
  // the transverse part of alpha by the annihilator of F.
  MatrixXd ann = null_space(Fi.transpose());
  MatrixXd basis(2 * n, r + ann.cols());
  for (Eigen::Index j = 0; j < r; ++j) {
    basis.col(j).head(n) = Fi.col(j);
    // alpha with alpha(F_i) = -w(F_j, F_i): least-squares representative
    VectorXd rhs = -omega_F.row(j).transpose();
    basis.col(j).tail(n) = dual_coframe(Fi).transpose() * rhs;
  }
  for (Eigen::Index j = 0; j < ann.cols(); ++j) {
    basis.col(r + j).head(n).setZero();
    basis.col(r + j).tail(n) = ann.col(j);
  }
  return validate_dirac({base, frame, orthonormal_columns(basis)});
}

DiracSubspace backward_image_at(const DiracSubspace& L2, const LinearMapAt& Tphi,
                                Eigen::Index declared_kernel_rank) {
  if (!same_point(L2.base, Tphi.target))
    fail(ErrorCode::MismatchedBasePoint, "backward_image_at: L2 must live at the map target");
  MatrixXd J = Tphi.intrinsic();  // n2 x n1
  const Eigen::Index n1 = J.cols(), n2 = J.rows();

  // Clean-intersection rank: (0 ⊕ Ker Tphi^*) ∩ L2.
  MatrixXd kerJt = null_space(J.transpose());
  if (kerJt.cols() > 0) {
    MatrixXd K(2 * n2, kerJt.cols());
    K.topRows(n2).setZero();
    K.bottomRows(n2) = kerJt;
    MatrixXd stacked(2 * n2, K.cols() + L2.basis.cols());
    stacked << K, -L2.basis;
    MatrixXd ns = null_space(stacked);
    Eigen::Index rank = numerical_rank(K * ns.topRows(K.cols()));
    if (rank != declared_kernel_rank)
      fail(ErrorCode::CleanIntersectionViolated,
           "backward_image_at: (0+Ker Tphi*) ∩ L2 has rank " + std::to_string(rank) +
               ", declared " + std::to_string(declared_kernel_rank));
  }

  // Unknowns (X in R^{n1}, v = L2 coeffs): J X = pr_T(B2 v).
  MatrixXd sys(n2, n1 + L2.basis.cols());
  sys << J, -L2.tangent_part();
  MatrixXd ns = null_space(sys);
  MatrixXd basis(2 * n1, ns.cols());
  for (Eigen::Index j = 0; j < ns.cols(); ++j) {
    VectorXd X = ns.col(j).head(n1);
    VectorXd beta = L2.cotangent_part() * ns.col(j).tail(L2.basis.cols());
    basis.col(j).head(n1) = X;
    basis.col(j).tail(n1) = J.transpose() * beta;
  }
  MatrixXd reduced = orthonormal_columns(basis);
  if (reduced.cols() != n1)
    fail(ErrorCode::CleanIntersectionViolated,
         "backward_image_at: image dimension " + std::to_string(reduced.cols()) + " != " + std::to_string(n1));
  return validate_dirac({Tphi.source, Tphi.source_frame, reduced});
}

DiracSubspace forward_image_at(const DiracSubspace& L1, const LinearMapAt& Tphi,
                               const std::vector<std::pair<DiracSubspace, LinearMapAt>>& fiber_samples,
                               double invariance_tol) {
  if (!same_point(L1.base, Tphi.source))
    fail(ErrorCode::MismatchedBasePoint, "forward_image_at: L1 must live at the map source");
  MatrixXd J = Tphi.intrinsic();
  const Eigen::Index n1 = J.cols(), n2 = J.rows();
  if (numerical_rank(J) != n2)
    fail(ErrorCode::CleanIntersectionViolated, "forward_image_at: Tphi is not surjective");

  auto compute = [](const DiracSubspace& L, const MatrixXd& Jloc) {
    const Eigen::Index m1 = Jloc.cols(), m2 = Jloc.rows();
    MatrixXd sys(m1, L.basis.cols() + m2);
    sys << L.cotangent_part(), -Jloc.transpose();
    MatrixXd ns = null_space(sys);
    MatrixXd basis(2 * m2, ns.cols());
    for (Eigen::Index j = 0; j < ns.cols(); ++j) {
      VectorXd Y = L.tangent_part() * ns.col(j).head(L.basis.cols());
      basis.col(j).head(m2) = Jloc * Y;
      basis.col(j).tail(m2) = ns.col(j).tail(m2);
    }
    return orthonormal_columns(basis);
  };

  MatrixXd reduced = compute(L1, J);
  if (reduced.cols() != n2)
    fail(ErrorCode::CleanIntersectionViolated,
         "forward_image_at: image dimension " + std::to_string(reduced.cols()) + " != " + std::to_string(n2));
  DiracSubspace out = validate_dirac({Tphi.target, Tphi.target_frame, reduced});

  // Numerical phi-invariance plus constant-rank of Ker(Tphi) ∩ K_{L1}.
  Eigen::Index k0 = -1;
  auto kernel_null_rank = [](const DiracSubspace& L, const MatrixXd& Jloc) {
    FrameAt K = null_distribution_at(L);  // ambient
    MatrixXd Kin = dual_coframe(L.frame) * K.columns;
    MatrixXd kerJ = null_space(Jloc);
    if (Kin.cols() == 0 || kerJ.cols() == 0) return Eigen::Index{0};
    MatrixXd stacked(Kin.rows(), Kin.cols() + kerJ.cols());
    stacked << Kin, -kerJ;
    MatrixXd ns = null_space(stacked);
    return numerical_rank(Kin * ns.topRows(Kin.cols()));
  };
  k0 = kernel_null_rank(L1, J);
  for (const auto& [Ls, Ts] : fiber_samples) {
    MatrixXd Js = Ts.intrinsic();
    if (kernel_null_rank(Ls, Js) != k0)
      fail(ErrorCode::CleanIntersectionViolated, "forward_image_at: Ker(Tphi) ∩ K_L rank varies across fiber");
    MatrixXd other = compute(Ls, Js);
    if (other.cols() != reduced.cols() || subspace_distance(other, reduced) > invariance_tol)
      fail(ErrorCode::NotInvariant, "forward_image_at: fiber samples disagree (distance " +
                                        std::to_string(subspace_distance(other, reduced)) + ")");
  }
  return out;
}

FrameAt null_distribution_at(const DiracSubspace& L) {
  MatrixXd ns = null_space(L.cotangent_part());
  MatrixXd X = L.tangent_part() * ns;
  return {L.base, L.frame * orthonormal_columns(X), Variance::Tangent};
}

FrameAt u_distribution_at(const DiracSubspace& L, const LinearMapAt& Tphi, const FrameAt& F2) {
  if (!same_point(L.base, Tphi.source))
    fail(ErrorCode::MismatchedBasePoint, "u_distribution_at: L must live at the map source");
  MatrixXd J = Tphi.intrinsic();
  const Eigen::Index n2 = J.rows();
  MatrixXd F2i = dual_coframe(Tphi.target_frame) * F2.columns;
  MatrixXd annF2 = null_space(F2i.transpose());  // covectors on target vanishing on F2
  MatrixXd kerJ = null_space(J);

  // Conditions on L-coefficients u: annF2^T (J pr_T B u) = 0 and (pr_{T*} B u)^T kerJ = 0.
  MatrixXd top = annF2.transpose() * J * L.tangent_part();
  MatrixXd bot = kerJ.transpose() * L.cotangent_part();
  MatrixXd sys(top.rows() + bot.rows(), L.basis.cols());
  sys << top, bot;
  MatrixXd ns = null_space(sys);
  MatrixXd X = orthonormal_columns(L.tangent_part() * ns);
  // T phi(U) must equal F2.
  if (subspace_distance(J * X, F2i) > 1e-8)
    fail(ErrorCode::CleanIntersectionViolated, "u_distribution_at: Tphi(U) != F2");
  return {L.base, L.frame * X, Variance::Tangent};
}

DiracSubspace gauge_transform(const DiracSubspace& L, const TwoFormAt& B) {
  const Eigen::Index n = L.n();
  MatrixXd W = L.frame.transpose() * B.components * L.frame;
  MatrixXd basis = L.basis;
  basis.bottomRows(n) += W.transpose() * L.basis.topRows(n);
  return validate_dirac({L.base, L.frame, orthonormal_columns(basis)});
}

}  // namespace nhred
