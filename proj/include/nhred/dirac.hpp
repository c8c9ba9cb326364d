#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "nhred/forms.hpp"

namespace nhred {

/// Pointwise linear map between (possibly embedded) charts: an ambient matrix
/// together with tangent frames fixing intrinsic coordinates on both sides.
struct LinearMapAt {
  ChartPoint source;
  ChartPoint target;
  MatrixXd matrix;        // ambient: N2 x N1
  MatrixXd source_frame;  // N1 x n1, tangent frame at source
  MatrixXd target_frame;  // N2 x n2, tangent frame at target

  /// Intrinsic n2 x n1 matrix in the frame coordinates.
  [[nodiscard]] MatrixXd intrinsic() const {
    return dual_coframe(target_frame) * matrix * source_frame;
  }
};

/// Maximal isotropic subspace of T_m ⊕ T*_m in intrinsic frame coordinates.
/// `basis` is 2n x n: top block = tangent coefficients in `frame`, bottom
/// block = cotangent coefficients against the same frame (alpha_i = <alpha, frame_i>).
struct DiracSubspace {
  ChartPoint base;
  MatrixXd frame;  // N x n tangent frame of the manifold at base
  MatrixXd basis;  // 2n x n

  [[nodiscard]] Eigen::Index n() const { return frame.cols(); }
  [[nodiscard]] MatrixXd tangent_part() const { return basis.topRows(n()); }
  [[nodiscard]] MatrixXd cotangent_part() const { return basis.bottomRows(n()); }

  /// Ambient representation of column j as a (vector, covector) pair.
  [[nodiscard]] std::pair<VectorXd, RowVectorXd> ambient_pair(Eigen::Index j) const;
};

/// Residual of the isotropy condition max |<c_i, c_j>| over basis columns.
double isotropy_residual(const DiracSubspace& L);

/// Validates dimension and isotropy (1e-10) and returns the input.
DiracSubspace validate_dirac(DiracSubspace L);

/// Builds a Dirac subspace from ambient (vector, covector) pairs.
DiracSubspace dirac_from_ambient_pairs(const ChartPoint& base, const MatrixXd& frame,
                                       const std::vector<std::pair<VectorXd, RowVectorXd>>& pairs);

/// Basis-independent distance between two Dirac subspaces at the same point.
double dirac_distance(const DiracSubspace& a, const DiracSubspace& b);

/// graph(pi^sharp) = {(pi(alpha, .), alpha)}.
DiracSubspace graph_of(const BivectorAt& pi, const MatrixXd& frame);
/// graph(omega^flat) = {(X, i_X omega)}.
DiracSubspace graph_of(const TwoFormAt& omega, const MatrixXd& frame);

/// The associated pair (F, omega_F) with i_X omega_F = -alpha|_F for (X, alpha) in L.
/// F is returned as an ambient frame; omega_F as a matrix on the F columns.
/// `declared_rank`, when set, is enforced against rank(pr_T(L)).
struct DiracPair {
  FrameAt F;
  MatrixXd omega_F;  // on the columns of F
};
DiracPair pair_representation(const DiracSubspace& L, std::optional<Eigen::Index> declared_rank = std::nullopt);

/// Reconstructs L from a pair per the one-to-one correspondence (test oracle).
DiracSubspace dirac_from_pair(const ChartPoint& base, const MatrixXd& frame, const MatrixXd& F_ambient,
                              const MatrixXd& omega_F);

/// Backward image {(X, Tphi^* beta) : (Tphi X, beta) in L2} at the source point.
/// `declared_kernel_rank` is the expected rank of (0 ⊕ Ker Tphi^*) ∩ L2.
DiracSubspace backward_image_at(const DiracSubspace& L2, const LinearMapAt& Tphi,
                                Eigen::Index declared_kernel_rank = 0);

/// Forward image {(Tphi Y, alpha) : (Y, phi^* alpha) in L1} at the target point.
/// Each fiber sample provides (L1, Tphi) at another point of the same fiber; the
/// recomputed images must agree within `invariance_tol`.
DiracSubspace forward_image_at(const DiracSubspace& L1, const LinearMapAt& Tphi,
                               const std::vector<std::pair<DiracSubspace, LinearMapAt>>& fiber_samples = {},
                               double invariance_tol = 1e-8);

/// Null distribution K_L = pr_T((T ⊕ 0) ∩ L) as an ambient frame.
FrameAt null_distribution_at(const DiracSubspace& L);

/// Bates-style distribution: span{X in F : (X, alpha) in L, Tphi X in F2, alpha|Ker(Tphi) = 0}.
FrameAt u_distribution_at(const DiracSubspace& L, const LinearMapAt& Tphi, const FrameAt& F2);

/// Gauge transform {(X, alpha + i_X B)} of L by an ambient 2-form.
DiracSubspace gauge_transform(const DiracSubspace& L, const TwoFormAt& B);

}  // namespace nhred
