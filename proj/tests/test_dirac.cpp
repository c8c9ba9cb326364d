#include <doctest.h>

#include <random>

#include "nhred/dirac.hpp"

using namespace nhred;

namespace {

ChartPoint pt(int n) { return {"test", VectorXd::Zero(n)}; }

MatrixXd canonical_omega(int dof) {
  MatrixXd W = MatrixXd::Zero(2 * dof, 2 * dof);
  for (int i = 0; i < dof; ++i) {
    W(i, dof + i) = 1;
    W(dof + i, i) = -1;
  }
  return W;
}

}  // namespace

TEST_CASE("graph of the zero bivector is the cotangent space") {
  BivectorAt pi{pt(3), MatrixXd::Zero(3, 3)};
  DiracSubspace L = graph_of(pi, MatrixXd::Identity(3, 3));
  MatrixXd expect(6, 3);
  expect << MatrixXd::Zero(3, 3), MatrixXd::Identity(3, 3);
  CHECK(subspace_distance(L.basis, expect) < 1e-12);
}

TEST_CASE("graph of the canonical symplectic form") {
  TwoFormAt om{pt(2), canonical_omega(1)};
  DiracSubspace L = graph_of(om, MatrixXd::Identity(2, 2));
  // span {(dq-direction, dp), (dp-direction, -dq)}
  MatrixXd expect(4, 2);
  expect << 1, 0, 0, 1, 0, -1, 1, 0;
  CHECK(subspace_distance(L.basis, expect) < 1e-12);
}

TEST_CASE("pair representation of a symplectic graph") {
  TwoFormAt om{pt(4), canonical_omega(2)};
  DiracSubspace L = graph_of(om, MatrixXd::Identity(4, 4));
  DiracPair pr = pair_representation(L, 4);
  CHECK(subspace_distance(pr.F.columns, MatrixXd::Identity(4, 4)) < 1e-12);
  // Convention: i_X w_F = -alpha|_F gives w_F = -omega for graphs of forms.
  MatrixXd back = pr.F.columns.transpose() * (-om.components) * pr.F.columns;
  CHECK((pr.omega_F - back).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("pair representation round-trips random regular structures") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 10; ++trial) {
    int n = 5, r = 3;
    MatrixXd F(n, r);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < r; ++j) F(i, j) = g(rng);
    MatrixXd A(r, r);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < r; ++j) A(i, j) = g(rng);
    MatrixXd wF = A - A.transpose();
    DiracSubspace L = dirac_from_pair(pt(n), MatrixXd::Identity(n, n), F, wF);
    CHECK(isotropy_residual(L) < 1e-10);
    DiracPair pr = pair_representation(L, r);
    CHECK(subspace_distance(pr.F.columns, F) < 1e-9);
    DiracSubspace L2 = dirac_from_pair(pt(n), MatrixXd::Identity(n, n), pr.F.columns, pr.omega_F);
    CHECK(dirac_distance(L, L2) < 1e-9);
  }
}

TEST_CASE("backward image along a linear inclusion pulls back 2-forms") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g;
  // iota: R^2 -> R^4 linear, L2 = graph of a 2-form.
  MatrixXd J(4, 2);
  for (int i = 0; i < 8; ++i) J(i / 2, i % 2) = g(rng);
  MatrixXd A(4, 4);
  for (int i = 0; i < 16; ++i) A(i / 4, i % 4) = g(rng);
  MatrixXd W = A - A.transpose();
  TwoFormAt om{pt(4), W};
  DiracSubspace L2 = graph_of(om, MatrixXd::Identity(4, 4));
  LinearMapAt inc{pt(2), pt(4), J, MatrixXd::Identity(2, 2), MatrixXd::Identity(4, 4)};
  DiracSubspace back = backward_image_at(L2, inc);
  TwoFormAt pulled{pt(2), MatrixXd(J.transpose() * W * J)};
  DiracSubspace expect = graph_of(pulled, MatrixXd::Identity(2, 2));
  CHECK(dirac_distance(back, expect) < 1e-10);
}

TEST_CASE("forward image along a projection pushes bivectors") {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> g;
  // phi: R^4 -> R^2 surjective, invariant bivector.
  MatrixXd J(2, 4);
  for (int i = 0; i < 8; ++i) J(i / 4, i % 4) = g(rng);
  MatrixXd A(4, 4);
  for (int i = 0; i < 16; ++i) A(i / 4, i % 4) = g(rng);
  MatrixXd P = A - A.transpose();
  BivectorAt pi{pt(4), P};
  DiracSubspace L1 = graph_of(pi, MatrixXd::Identity(4, 4));
  LinearMapAt proj{pt(4), pt(2), J, MatrixXd::Identity(4, 4), MatrixXd::Identity(2, 2)};
  DiracSubspace fwd = forward_image_at(L1, proj, {{L1, proj}});
  BivectorAt pushed{pt(2), MatrixXd(J * P * J.transpose())};
  DiracSubspace expect = graph_of(pushed, MatrixXd::Identity(2, 2));
  CHECK(dirac_distance(fwd, expect) < 1e-10);
}

TEST_CASE("null distribution of a degenerate 2-form graph is its kernel") {
  MatrixXd W = MatrixXd::Zero(3, 3);
  W(0, 1) = 1;
  W(1, 0) = -1;  // kernel = e3
  TwoFormAt om{pt(3), W};
  DiracSubspace L = graph_of(om, MatrixXd::Identity(3, 3));
  FrameAt K = null_distribution_at(L);
  REQUIRE(K.columns.cols() == 1);
  CHECK(subspace_distance(K.columns, VectorXd::Unit(3, 2)) < 1e-12);
}

TEST_CASE("u distribution for the identity map is the characteristic space") {
  MatrixXd W = MatrixXd::Zero(3, 3);
  W(0, 1) = 1;
  W(1, 0) = -1;
  TwoFormAt om{pt(3), W};
  DiracSubspace L = graph_of(om, MatrixXd::Identity(3, 3));
  LinearMapAt ident{pt(3), pt(3), MatrixXd::Identity(3, 3), MatrixXd::Identity(3, 3),
                    MatrixXd::Identity(3, 3)};
  FrameAt F2{pt(3), MatrixXd::Identity(3, 3), Variance::Tangent};
  FrameAt U = u_distribution_at(L, ident, F2);
  CHECK(U.columns.cols() == 3);
}

TEST_CASE("pullback forms agree on the u distribution (quotient of a plane)") {
  // P1 = R^3 with an invariant presymplectic form, phi the projection killing e3,
  // rho the identity; Cor: Ker(T phi) inside K_L gives phi^* w2 = rho^* w3 on all of F.
  MatrixXd W = MatrixXd::Zero(3, 3);
  W(0, 1) = 1;
  W(1, 0) = -1;  // K_L = e3 = Ker(T phi)
  TwoFormAt om{pt(3), W};
  DiracSubspace L1 = graph_of(om, MatrixXd::Identity(3, 3));
  MatrixXd J(2, 3);
  J << 1, 0, 0, 0, 1, 0;
  LinearMapAt proj{pt(3), pt(2), J, MatrixXd::Identity(3, 3), MatrixXd::Identity(2, 2)};
  DiracSubspace L2 = forward_image_at(L1, proj);
  DiracPair p1 = pair_representation(L1);
  DiracPair p2 = pair_representation(L2);
  FrameAt U = u_distribution_at(L1, proj, p2.F);
  // Evaluate both pullbacks on the U basis through the pair forms.
  MatrixXd W2 = MatrixXd::Zero(2, 2);
  {
    MatrixXd dual = dual_coframe(p2.F.columns);
    W2 = dual.transpose() * p2.omega_F * dual;
  }
  MatrixXd W1full = MatrixXd::Zero(3, 3);
  {
    MatrixXd dual = dual_coframe(p1.F.columns);
    W1full = dual.transpose() * p1.omega_F * dual;
  }
  MatrixXd pushedU = J * U.columns;
  MatrixXd lhs = pushedU.transpose() * W2 * pushedU;
  MatrixXd rhs = U.columns.transpose() * W1full * U.columns;
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-9);
}
