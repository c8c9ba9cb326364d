#pragma once

#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "nhred/dirac.hpp"

namespace nhred {

/// Lie group action on the configuration space. Group elements are carried as
/// model-specific parameter vectors; Ad matrices are recovered numerically
/// from the action, which doubles as a consistency check.
struct GroupActionSpec {
  Eigen::Index lie_dim = 0;
  /// Columns are the infinitesimal generators of a fixed Lie-algebra basis.
  std::function<MatrixXd(const VectorXd& q)> generators;
  /// q -> psi_g(q).
  std::function<VectorXd(const VectorXd& g, const VectorXd& q)> act;
  /// Exact tangent map of psi_g at q applied to an ambient vector.
  std::function<VectorXd(const VectorXd& g, const VectorXd& q, const VectorXd& v)> pushforward;
  /// Inverse group element (parameters of g^{-1}).
  std::function<VectorXd(const VectorXd& g)> inverse;
  /// Seeded sampler of group parameters.
  std::function<VectorXd(std::mt19937_64&)> sample;
};

/// A first integral linear in momenta generated by a vector field with values
/// in the constraint distribution.
struct DMomentum {
  std::string name;
  std::function<VectorXd(const VectorXd& q)> generator;  // ambient field in D
};

/// Adapted basis data at a configuration point: frames for the splitting
/// TQ = H + S + W with D = H + S and V = S + W, the dual coframe, and the
/// kinetic-metric blocks.
struct AdaptedBasis {
  VectorXd q;
  Eigen::Index h = 0, k = 0, w = 0;
  MatrixXd tangent;  // Nq x nq frame of T_q Q
  MatrixXd frame;    // Nq x (h+k+w), columns X_alpha | Y_i | Z_a
  MatrixXd coframe;  // (h+k+w) x Nq rows X^alpha | Y^i | eps^a
  MatrixXd gram;     // kappa in the frame, (h+k+w)^2
  MatrixXd gram_D;   // leading (h+k) block

  [[nodiscard]] Eigen::Index nd() const { return h + k; }
  [[nodiscard]] MatrixXd H() const { return frame.leftCols(h); }
  [[nodiscard]] MatrixXd S() const { return frame.middleCols(h, k); }
  [[nodiscard]] MatrixXd W() const { return frame.rightCols(w); }
  [[nodiscard]] MatrixXd D() const { return frame.leftCols(h + k); }
};

struct Trajectory {
  std::vector<double> times;
  std::vector<VectorXd> states;            // M-chart coordinates
  std::vector<std::string> conserved_names;  // H, J_1.., F_..
  MatrixXd conserved;                      // one row per state
  bool left_admissible_region = false;
  double t_last_good = 0.0;
};

/// A nonholonomic mechanical system in an (possibly redundant) ambient chart,
/// with its symmetry data and the splitting used for adapted coordinates.
/// Points of the constraint manifold are (q, p) with p the momenta against the
/// dual coframe of the D-part of the splitting frame.
class System {
 public:
  std::string name;
  std::string q_chart_id;
  std::string m_chart_id;
  Eigen::Index nq_amb = 0;  // ambient configuration coordinates
  Eigen::Index nq = 0;      // manifold dimension of Q

  std::function<MatrixXd(const VectorXd&)> kappa;          // ambient metric matrix
  ScalarField potential;
  std::function<MatrixXd(const VectorXd&)> constraints;     // w rows
  std::function<MatrixXd(const VectorXd&)> tangent_frame_q; // Nq x nq
  std::function<bool(const VectorXd&)> q_admissible;
  std::function<VectorXd(const VectorXd&)> renormalize_q;   // projection back to the Q-submanifold

  GroupActionSpec action;

  // Splitting frames (the model's display basis).
  std::function<MatrixXd(const VectorXd&)> H_frame;
  std::function<MatrixXd(const VectorXd&)> S_frame;
  std::function<MatrixXd(const VectorXd&)> W_frame;

  // Sections of the bundle g_S whose generators are the S_frame columns.
  std::function<MatrixXd(const VectorXd&)> gS_sections;  // lie_dim x k
  // Horizontal gauge symmetries (empty when the model has none, e.g. bmf).
  std::function<MatrixXd(const VectorXd&)> hgs_sections;  // lie_dim x k
  std::vector<DMomentum> d_momenta;

  Eigen::Index h = 0, k = 0, w = 0;
  double fd_step = kDefaultFdStep;

  [[nodiscard]] Eigen::Index np() const { return h + k; }
  [[nodiscard]] Eigen::Index m_dim() const { return nq_amb + np(); }

  // ---- charts -------------------------------------------------------------
  [[nodiscard]] ChartPoint m_point(const VectorXd& q, const VectorXd& p) const;
  [[nodiscard]] VectorXd q_of(const VectorXd& xm) const { return xm.head(nq_amb); }
  [[nodiscard]] VectorXd p_of(const VectorXd& xm) const { return xm.tail(np()); }
  [[nodiscard]] bool admissible(const VectorXd& xm) const { return q_admissible(q_of(xm)); }
  [[nodiscard]] VectorXd renormalize_state(const VectorXd& xm) const;

  // ---- adapted bases --------------------------------------------------------
  /// Display splitting (model frames). Validates the splitting and the
  /// dimension assumption; throws DimensionAssumptionFailed / DegenerateMetric.
  [[nodiscard]] AdaptedBasis basis_at(const VectorXd& q) const;
  /// Metric splitting H = D ∩ S-perp, W = V ∩ S-perp (kappa-orthogonal
  /// projections of the display frames; used by the identification maps).
  [[nodiscard]] AdaptedBasis orth_basis_at(const VectorXd& q) const;
  /// Adapted basis with the S-block replaced by the horizontal gauge
  /// symmetry generators (J_i = p_i in these coordinates).
  [[nodiscard]] AdaptedBasis hgs_basis_at(const VectorXd& q) const;
  /// Metric splitting with the HGS generators as the S-block; the basis the
  /// identification formulas are stated in.
  [[nodiscard]] AdaptedBasis orth_hgs_basis_at(const VectorXd& q) const;

  /// Structure functions C[A](B,C) = theta^A([E_B, E_C]) of a basis.
  [[nodiscard]] std::vector<MatrixXd> structure_functions(const AdaptedBasis& ab) const;

  // ---- momenta and energy ---------------------------------------------------
  /// Full covector of a constraint-manifold point (includes the dependent
  /// eps-components), as an ambient row on the Q chart.
  [[nodiscard]] RowVectorXd covector_at(const VectorXd& xm) const;
  /// Dependent momenta p_a against the constraint coframe.
  [[nodiscard]] VectorXd p_w_at(const VectorXd& xm) const;
  /// Velocity coefficients v with p = gram_D v.
  [[nodiscard]] VectorXd velocity_coeffs(const VectorXd& xm) const;
  [[nodiscard]] double energy_at(const VectorXd& xm) const;
  /// Momenta of a given ambient covector in this system's chart.
  [[nodiscard]] VectorXd momenta_of_covector(const VectorXd& q, const RowVectorXd& m) const;

  // ---- canonical forms ------------------------------------------------------
  /// Liouville one-form on the M chart (q block = covector, p block = 0).
  [[nodiscard]] OneFormField theta_field() const;
  /// Omega_M = -d Theta_M by central differences, as an ambient 2-form.
  [[nodiscard]] TwoFormAt omega_at(const VectorXd& xm) const;

  // ---- tangent structures on M ---------------------------------------------
  [[nodiscard]] MatrixXd m_tangent_frame(const VectorXd& xm) const;  // T_m M
  [[nodiscard]] MatrixXd c_frame(const VectorXd& xm) const;          // characteristic distribution
  [[nodiscard]] MatrixXd v_frame_m(const VectorXd& xm) const;        // vertical distribution on M
  [[nodiscard]] MatrixXd h_frame_m(const VectorXd& xm) const;        // H-lifts plus fibers
  [[nodiscard]] MatrixXd s_frame_m(const VectorXd& xm) const;        // section lifts spanning S on M
  [[nodiscard]] MatrixXd w_frame_m(const VectorXd& xm) const;

  /// Generator of a frozen Lie-algebra element on the M chart.
  [[nodiscard]] VectorXd generator_lift(const VectorXd& eta, const VectorXd& xm) const;
  /// Generator of a g_S-section (coefficients as a function of q).
  [[nodiscard]] VectorXd section_lift(const std::function<VectorXd(const VectorXd&)>& section,
                                      const VectorXd& xm) const;

  /// Cotangent-lifted action on M-chart coordinates.
  [[nodiscard]] VectorXd act_on_m(const VectorXd& g, const VectorXd& xm) const;
  [[nodiscard]] VectorXd inverse_group(const VectorXd& g) const;

  // ---- dynamics ---------------------------------------------------------------
  /// Nonholonomic vector field via the adapted-coordinate momentum equations
  /// (exact inversion of Omega_C in the adapted frame).
  [[nodiscard]] VectorXd x_nh_at(const VectorXd& xm) const;
  /// Same field through the generic route -pi_nh^sharp(dH); used as cross-check.
  [[nodiscard]] VectorXd x_nh_generic(const VectorXd& xm) const;
  [[nodiscard]] RowVectorXd dh_at(const VectorXd& xm) const;

  /// Nonholonomic bivector from the gauge transformation with B = 0.
  [[nodiscard]] BivectorAt pi_nh_at(const VectorXd& xm) const;
  /// Gauge-transformed bivector: i_X (Omega + B)|_C = -alpha|_C.
  [[nodiscard]] BivectorAt gauge_bivector_at(const VectorXd& xm, const MatrixXd& B) const;

  [[nodiscard]] Trajectory integrate(const VectorXd& xm0, double dt, double t_end) const;

  // ---- conserved quantities ----------------------------------------------------
  /// Horizontal gauge momenta J_i (HGS pairing) as functions of the state.
  [[nodiscard]] VectorXd hgs_momenta(const VectorXd& xm) const;
  [[nodiscard]] double d_momentum_value(const DMomentum& f, const VectorXd& xm) const;
  /// All conserved quantities recorded along trajectories: H, J_i, F_j.
  [[nodiscard]] std::vector<std::string> conserved_names() const;
  [[nodiscard]] VectorXd conserved_values(const VectorXd& xm) const;
};

}  // namespace nhred
