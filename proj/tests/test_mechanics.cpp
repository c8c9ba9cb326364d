#include <doctest.h>

#include "nhred/models.hpp"
#include "nhred/symmetry.hpp"

using namespace nhred;

namespace {

VectorXd state_of(const ModelDescriptor& md) { return md.preset_state(); }

std::vector<VectorXd> sampled_states(const ModelDescriptor& md, int n, uint64_t seed = 42) {
  std::mt19937_64 rng(seed);
  std::vector<VectorXd> out;
  for (int i = 0; i < n; ++i) {
    PresetState st = md.sample_state(rng);
    VectorXd xm(md.system->m_dim());
    xm << st.q, st.p;
    out.push_back(xm);
  }
  return out;
}

}  // namespace

TEST_CASE("free particle adapted basis is the coordinate frame") {
  // Unconstrained system: D = TQ, trivial group left out by using H = TQ.
  System sys;
  sys.name = "free";
  sys.q_chart_id = "free.q";
  sys.m_chart_id = "free.m";
  sys.nq_amb = 3;
  sys.nq = 3;
  sys.h = 3;
  sys.k = 0;
  sys.w = 0;
  sys.kappa = [](const VectorXd&) { return MatrixXd(MatrixXd::Identity(3, 3)); };
  sys.potential = ScalarField{[](const VectorXd&) { return 0.0; }, nullptr, kDefaultFdStep};
  sys.constraints = [](const VectorXd&) { return MatrixXd(0, 3); };
  sys.tangent_frame_q = [](const VectorXd&) { return MatrixXd(MatrixXd::Identity(3, 3)); };
  sys.q_admissible = [](const VectorXd&) { return true; };
  sys.renormalize_q = [](const VectorXd& q) { return q; };
  sys.H_frame = [](const VectorXd&) { return MatrixXd(MatrixXd::Identity(3, 3)); };
  sys.S_frame = [](const VectorXd&) { return MatrixXd(3, 0); };
  sys.W_frame = [](const VectorXd&) { return MatrixXd(3, 0); };
  sys.action.lie_dim = 0;
  sys.action.generators = [](const VectorXd&) { return MatrixXd(3, 0); };

  AdaptedBasis ab = sys.basis_at(VectorXd::Zero(3));
  CHECK((ab.frame - MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((ab.coframe - MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-14);

  // Flat free system: Omega is the canonical dq ^ dp matrix.
  VectorXd xm = VectorXd::Zero(6);
  xm << 0.1, 0.2, 0.3, 0.4, 0.5, 0.6;
  TwoFormAt om = sys.omega_at(xm);
  MatrixXd expect = MatrixXd::Zero(6, 6);
  for (int i = 0; i < 3; ++i) {
    expect(i, 3 + i) = 1;
    expect(3 + i, i) = -1;
  }
  CHECK((om.components - expect).cwiseAbs().maxCoeff() < 1e-9);

  // Unconstrained bracket is canonical.
  BivectorAt pi = sys.pi_nh_at(xm);
  CHECK((pi.components - expect).cwiseAbs().maxCoeff() < 1e-9);

  // Equilibrium of a critical potential: zero field.
  CHECK(sys.x_nh_at(VectorXd::Zero(6)).norm() < 1e-12);
}

TEST_CASE("particle model reproduces the quoted bivector on R^5") {
  ModelDescriptor md = get_model("nonholonomic-particle");
  for (const auto& xm : sampled_states(md, 10)) {
    BivectorAt pi = md.system->pi_nh_at(xm);
    MatrixXd want = md.reference("particle.pi", xm);
    CHECK((pi.components - want).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("particle Legendre round trip and energy identity") {
  ModelDescriptor md = get_model("nonholonomic-particle");
  const System& sys = *md.system;
  for (const auto& xm : sampled_states(md, 10)) {
    AdaptedBasis ab = sys.basis_at(sys.q_of(xm));
    VectorXd v = sys.velocity_coeffs(xm);
    VectorXd p_back = ab.gram_D * v;
    CHECK((p_back - sys.p_of(xm)).cwiseAbs().maxCoeff() < 1e-10);
    // dH(X_nh) = 0
    CHECK(std::abs(sys.dh_at(xm).dot(sys.x_nh_at(xm))) < 1e-10);
  }
}

TEST_CASE("fast and generic nonholonomic fields agree") {
  for (const char* name : {"nonholonomic-particle", "chaplygin-ball", "ball-on-surface", "bmf-sphere"}) {
    ModelDescriptor md = get_model(name);
    const System& sys = *md.system;
    for (const auto& xm : sampled_states(md, 3)) {
      VectorXd fast = sys.x_nh_at(xm);
      VectorXd generic = sys.x_nh_generic(xm);
      double scale = std::max(1.0, fast.cwiseAbs().maxCoeff());
      INFO(name);
      CHECK((fast - generic).cwiseAbs().maxCoeff() / scale < 1e-7);
    }
  }
}

TEST_CASE("characteristic distribution and bracket kernel") {
  for (const char* name : {"nonholonomic-particle", "chaplygin-ball", "ball-on-surface", "bmf-sphere"}) {
    ModelDescriptor md = get_model(name);
    const System& sys = *md.system;
    VectorXd xm = state_of(md);
    BivectorAt pi = sys.pi_nh_at(xm);
    MatrixXd C = sys.c_frame(xm);
    INFO(name);
    // pr_T(graph pi) = C
    CHECK(subspace_distance(pi.components.transpose(), C) < 1e-8);
    // Ker(pi^sharp) = annihilator of C (constraint forms plus conormal directions)
    MatrixXd kerP = null_space(pi.components.transpose());
    MatrixXd annC = null_space(C.transpose());
    CHECK(subspace_distance(kerP, annC) < 1e-8);
  }
}

TEST_CASE("splitting frames satisfy their defining relations") {
  for (const char* name : {"nonholonomic-particle", "chaplygin-ball", "ball-on-surface", "bmf-sphere"}) {
    ModelDescriptor md = get_model(name);
    const System& sys = *md.system;
    INFO(name);
    for (const auto& xm : sampled_states(md, 4)) {
      VectorXd q = sys.q_of(xm);
      AdaptedBasis ab = sys.basis_at(q);
      // duality
      MatrixXd duality = ab.coframe * ab.frame;
      CHECK((duality - MatrixXd::Identity(sys.nq, sys.nq)).cwiseAbs().maxCoeff() < 1e-10);
      // D = ker(constraints) within TQ
      MatrixXd T = sys.tangent_frame_q(q);
      MatrixXd D_from_eps = T * null_space(sys.constraints(q) * T);
      CHECK(subspace_distance(D_from_eps, ab.D()) < 1e-9);
      // V = span of generators; S = D cap V
      MatrixXd V = sys.action.generators(q);
      ChartPoint cq{sys.q_chart_id, q};
      FrameAt S_cap = subspace_intersect(FrameAt{cq, ab.D(), Variance::Tangent},
                                         FrameAt{cq, V, Variance::Tangent});
      CHECK(subspace_distance(S_cap.columns, ab.S()) < 1e-8);
      // dimension assumption: D + V = TQ
      MatrixXd DV(sys.nq_amb, ab.D().cols() + V.cols());
      DV << ab.D(), V;
      CHECK(numerical_rank(dual_coframe(T) * DV) == sys.nq);
      // constraint coframe rows annihilate D
      CHECK((sys.constraints(q) * ab.D()).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("orthogonal splitting is kappa-orthogonal and spans the same D") {
  for (const char* name : {"nonholonomic-particle", "chaplygin-ball", "ball-on-surface", "bmf-sphere"}) {
    ModelDescriptor md = get_model(name);
    const System& sys = *md.system;
    VectorXd xm = state_of(md);
    VectorXd q = sys.q_of(xm);
    AdaptedBasis ob = sys.orth_basis_at(q);
    MatrixXd kap = sys.kappa(q);
    INFO(name);
    CHECK((ob.H().transpose() * kap * ob.S()).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((ob.W().transpose() * kap * ob.S()).cwiseAbs().maxCoeff() < 1e-10);
    AdaptedBasis ab = sys.basis_at(q);
    CHECK(subspace_distance(ob.D(), ab.D()) < 1e-9);
  }
}

TEST_CASE("omega restricted to the characteristic frame has the adapted block form") {
  ModelDescriptor md = get_model("chaplygin-ball");
  const System& sys = *md.system;
  VectorXd xm = state_of(md);
  TwoFormAt om = sys.omega_at(xm);
  MatrixXd C = sys.c_frame(xm);
  MatrixXd got = C.transpose() * om.components * C;
  // fiber block pairings: Omega(X_A-lift, d/dp_B) = delta
  MatrixXd topRight = got.topRightCorner(3, 3);
  CHECK((topRight - MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(got.bottomRightCorner(3, 3).cwiseAbs().maxCoeff() < 1e-9);
  // base-base block pairs the covector with frame brackets
  AdaptedBasis ab = sys.basis_at(sys.q_of(xm));
  std::vector<MatrixXd> Cf = sys.structure_functions(ab);
  RowVectorXd mrow = sys.covector_at(xm);
  VectorXd pfull(5);
  for (int A = 0; A < 5; ++A) pfull(A) = mrow.dot(ab.frame.col(A));
  for (int A = 0; A < 3; ++A)
    for (int B = 0; B < 3; ++B) {
      double want = 0;
      for (int G = 0; G < 5; ++G) want += pfull(G) * Cf[static_cast<size_t>(G)](A, B);
      CHECK(std::abs(got(A, B) - want) < 1e-8);
    }
}

TEST_CASE("trajectories conserve energy and gauge momenta") {
  ModelDescriptor md = get_model("chaplygin-ball");
  const System& sys = *md.system;
  Trajectory traj = sys.integrate(state_of(md), 1e-3, 1.0);
  REQUIRE_FALSE(traj.left_admissible_region);
  REQUIRE(traj.states.size() == 1001);
  for (Eigen::Index c = 0; c < traj.conserved.cols(); ++c) {
    double first = traj.conserved(0, c);
    double drift = (traj.conserved.col(c).array() - first).abs().maxCoeff() /
                   std::max(1.0, std::abs(first));
    CHECK(drift < 1e-8);
  }
}

TEST_CASE("integrator halts at the admissible boundary") {
  ModelDescriptor md = get_model("ball-on-surface");
  const System& sys = *md.system;
  VectorXd xm = state_of(md);
  // Aim straight outward with a large momentum so tau grows past tau_max.
  xm(11) = 40.0;
  Trajectory traj = sys.integrate(xm, 1e-3, 10.0);
  CHECK(traj.left_admissible_region);
  CHECK(traj.t_last_good < 10.0);
}

TEST_CASE("zero vector field keeps the state constant") {
  ModelDescriptor md = get_model("nonholonomic-particle");
  const System& sys = *md.system;
  VectorXd xm = state_of(md);
  xm.tail(2).setZero();  // zero momenta, zero potential: equilibrium
  Trajectory traj = sys.integrate(xm, 1e-2, 0.5);
  for (const auto& st : traj.states) CHECK((st - xm).cwiseAbs().maxCoeff() < 1e-12);
}
