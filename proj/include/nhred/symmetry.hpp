#pragma once

#include "nhred/mechanics.hpp"

namespace nhred {

/// A pointwise chart description of a quotient (M/G, a momentum leaf, Q/G).
/// Coordinates may again be ambient (e.g. unit vectors); `tangent_frame`
/// spans the quotient manifold's tangent space inside the chart.
struct QuotientChart {
  std::string chart_id;
  Eigen::Index ambient_dim = 0;
  std::function<VectorXd(const VectorXd&)> project;        // source chart -> quotient coords
  std::function<MatrixXd(const VectorXd&)> tangent_frame;  // at a quotient point
  std::function<VectorXd(const VectorXd&)> lift;           // section back into the source chart
};

namespace reduction {

/// Connection and curvature data at a configuration point, for a given
/// adapted basis (display or orthogonal splitting).
struct ConnectionData {
  MatrixXd A_W;                // lie x Nq: TQ = D ⊕ W coefficients
  MatrixXd A_V;                // lie x Nq: principal connection, horizontal H
  MatrixXd kappa_g;            // lie x Nq: <kappa_g(v), eta_A> rows
  std::vector<MatrixXd> K_W;   // dA_W with D-projected arguments, per Lie component
  std::vector<MatrixXd> K_V;   // principal curvature dA_V + [A_V, A_V]
  MatrixXd P_D, P_W, P_V, P_H; // projectors on the Q chart
};

ConnectionData connection_at(const System& sys, const AdaptedBasis& ab);

/// Canonical momentum components <m, eta_A> against the Lie-algebra basis.
VectorXd canonical_momentum(const System& sys, const VectorXd& xm);

/// Nonholonomic momentum map components J_i = <m, (xi_i)_Q> for the HGS basis.
VectorXd jnh_at(const System& sys, const VectorXd& xm);
/// Pairing of the momentum map with an arbitrary g_S section.
double jnh_pairing(const System& sys, const VectorXd& xm,
                   const std::function<VectorXd(const VectorXd&)>& section);

/// || pi^sharp(dJ) + (xi)_M ||_2 for the section xi (Euclidean chart norm).
double momentum_residual_at(const System& sys, const BivectorAt& pi, const VectorXd& xm,
                            const std::function<VectorXd(const VectorXd&)>& section);
/// Residual for the i-th horizontal gauge symmetry.
double momentum_residual_at(const System& sys, const BivectorAt& pi, const VectorXd& xm, Eigen::Index i);

/// Gauge 2-form B1 = <J, K_W> + J_i d^C Y^i as an M-chart matrix.
MatrixXd b1_at(const System& sys, const VectorXd& xm);
/// Gauge 2-form curly-B (the dynamical correction), as an M-chart matrix.
MatrixXd curlyb_at(const System& sys, const VectorXd& xm);

/// || i_{X_nh} B || plus, for the full dynamical gauge, the Hamiltonian check.
double dynamical_condition_residual_at(const System& sys, const MatrixXd& B, const VectorXd& xm);

struct LevelFrames {
  MatrixXd level_tangent;  // T J^{-1}(mu)
  MatrixXd C_mu;           // characteristic part
  MatrixXd S_mu;           // section lifts (null directions)
  MatrixXd W_mu;
};

/// Rows dJ_i on the M chart.
MatrixXd dj_rows(const System& sys, const VectorXd& xm);
/// Verifies the point lies on the level set (throws NotOnLevelSet) and
/// returns the adapted frames of the level submanifold.
LevelFrames level_tangent_at(const System& sys, const VectorXd& level, const VectorXd& xm,
                             double on_level_tol = 1e-9);

/// Shift_mu restricted to M: subtracts c_i Y^i of the orthogonal splitting.
VectorXd shift_at(const System& sys, const VectorXd& level, const VectorXd& xm,
                  double on_level_tol = 1e-9);

struct ReducedForm {
  MatrixXd omega;               // on the leaf chart
  double vertical_residual;     // contraction with S_mu
  double fiber_residual;        // disagreement across fiber samples
};

enum class WhichForm { One, B };

/// Pushes (Omega + B)|_{C_mu} to the leaf chart along the orbit projection.
/// `group_samples` are group parameters used for the well-definedness check.
ReducedForm reduced_form_at(const System& sys, const QuotientChart& leaf, const VectorXd& level,
                            const VectorXd& xm, WhichForm which,
                            const std::vector<VectorXd>& group_samples = {});

/// Same pushforward for an arbitrary 2-form on a frame sub-bundle: used by the
/// D-momentum pipeline (Omega on C_Htilde) and by tests.
MatrixXd push_two_form(const System& sys, const QuotientChart& target, const VectorXd& xm,
                       const MatrixXd& two_form, const MatrixXd& span_frame, double* vertical_residual);

/// Koiller identification at the zero level: T*(Q/G) point from pairing
/// <phi0(m), T rho(v)> = <m, v> on v in D.
VectorXd phi0_at(const System& sys, const QuotientChart& qg, const VectorXd& xm0);
/// phi_mu = phi0 ∘ shift_mu; returns the T*(Q/G) chart point (qbar, Pbar).
VectorXd phi_mu_at(const System& sys, const QuotientChart& qg, const VectorXd& level, const VectorXd& xm);

/// Tangent frame of the embedded T*(Q/G) chart at z = (qbar, Pbar).
MatrixXd cotangent_chart_frame(const QuotientChart& qg, const VectorXd& z);
/// Canonical 2-form on a (qbar, Pbar) chart (constant coefficients).
MatrixXd canonical_two_form(Eigen::Index base_ambient_dim);

/// Magnetic term on T*(Q/G) from the structure-function coordinate formula,
/// evaluated at the lift of z for the orthogonal splitting.
MatrixXd hat_b_mu_at(const System& sys, const QuotientChart& qg, const VectorXd& level, const VectorXd& z);

struct DMomentumReduction {
  MatrixXd omega_tilde;     // on the zero-leaf chart
  double h0_red;            // reduced Hamiltonian at the point
  double conservation_residual;
  double transversality_gap;   // smallest principal value of S vs Stilde-perp complementarity
  double hamilton_residual;    // i_{X0red} omega - dH0red on the leaf frame
  double vertical_residual;
};

/// Zero-level pipeline for D-momenta (Chaplygin leaf at the common zero level).
DMomentumReduction dmomentum_zero_reduction(const System& sys, const QuotientChart& leaf0,
                                            const VectorXd& xm);

}  // namespace reduction
}  // namespace nhred
