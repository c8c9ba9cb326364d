#pragma once

#include "nhred/chart.hpp"
#include "nhred/errors.hpp"

namespace nhred {

/// Relative singular-value threshold for all rank decisions.
inline constexpr double kRankTol = 1e-10;

enum class Variance { Tangent, Cotangent };

/// A frame at a point: the columns span a tangent or cotangent subspace.
/// Columns are kept as given (not orthonormalized) so that model bases keep
/// their meaning; use orthonormal_columns() when a clean basis is needed.
struct FrameAt {
  ChartPoint base;
  MatrixXd columns;  // n x r
  Variance variance = Variance::Tangent;

  [[nodiscard]] Eigen::Index ambient_dim() const { return columns.rows(); }
  [[nodiscard]] Eigen::Index count() const { return columns.cols(); }
};

/// Numerical rank by SVD with relative threshold.
Eigen::Index numerical_rank(const MatrixXd& m, double rank_tol = kRankTol);

/// Orthonormal basis of the column span (empty allowed).
MatrixXd orthonormal_columns(const MatrixXd& m, double rank_tol = kRankTol);

/// Orthonormal basis of the null space of m (right null space).
MatrixXd null_space(const MatrixXd& m, double rank_tol = kRankTol);

/// Largest principal-angle based distance between two subspaces given by
/// column spans (0 when equal; 1 when some direction is orthogonal).
double subspace_distance(const MatrixXd& a, const MatrixXd& b, double rank_tol = kRankTol);

/// Checks that a frame has full column rank (its declared rank invariant).
void require_full_rank(const FrameAt& f, const char* who);

/// Intersection of two subspaces at the same point, same variance.
FrameAt subspace_intersect(const FrameAt& a, const FrameAt& b, double rank_tol = kRankTol);

/// Sum (span union) of two subspaces at the same point.
FrameAt subspace_sum(const FrameAt& a, const FrameAt& b, double rank_tol = kRankTol);

/// Annihilator of a tangent frame: cotangent frame of covectors vanishing on it.
/// In an ambient chart of dimension n this has dimension n - rank(F); for
/// embedded submanifolds it contains the conormal directions as well.
FrameAt annihilator(const FrameAt& f, double rank_tol = kRankTol);

/// Least-squares dual coframe of a full-column-rank frame: rows theta^A with
/// theta^A(columns_B) = delta_AB and theta^A vanishing on the orthogonal
/// complement of the span.
MatrixXd dual_coframe(const MatrixXd& columns);

/// Projector onto span(a) along span(b) (requires a ⊕ b to cover their sum;
/// vectors outside the sum are first projected orthogonally onto it).
MatrixXd projector_along(const MatrixXd& a, const MatrixXd& b);

/// Coefficients c with columns * c = v (least squares); residual available.
VectorXd solve_in_span(const MatrixXd& columns, const VectorXd& v, double* residual = nullptr);

}  // namespace nhred
