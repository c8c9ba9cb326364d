#include <doctest.h>

#include <random>

#include "nhred/forms.hpp"

using namespace nhred;

namespace {

ChartPoint pt(const VectorXd& x) { return {"test", x}; }

FrameAt frame(const VectorXd& x, const MatrixXd& cols, Variance v = Variance::Tangent) {
  return {pt(x), cols, v};
}

MatrixXd cols(std::initializer_list<VectorXd> list) {
  MatrixXd m(list.begin()->size(), static_cast<Eigen::Index>(list.size()));
  Eigen::Index j = 0;
  for (const auto& v : list) m.col(j++) = v;
  return m;
}

}  // namespace

TEST_CASE("subspace intersection of coordinate planes") {
  VectorXd x = VectorXd::Zero(3);
  auto e = [](int i) { return VectorXd(VectorXd::Unit(3, i)); };
  FrameAt a = frame(x, cols({e(0), e(1)}));
  FrameAt b = frame(x, cols({e(1), e(2)}));
  FrameAt inter = subspace_intersect(a, b);
  REQUIRE(inter.count() == 1);
  CHECK(subspace_distance(inter.columns, cols({e(1)})) < 1e-12);
}

TEST_CASE("subspace intersection is idempotent") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  MatrixXd a(5, 2);
  for (int i = 0; i < a.size(); ++i) a(i / 2, i % 2) = g(rng);
  VectorXd x = VectorXd::Zero(5);
  FrameAt fa = frame(x, a);
  FrameAt inter = subspace_intersect(fa, fa);
  CHECK(inter.count() == 2);
  CHECK(subspace_distance(inter.columns, a) < 1e-10);
}

TEST_CASE("intersection and sum dimensions are consistent") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 20; ++trial) {
    int n = 6;
    MatrixXd a(n, 3), b(n, 3);
    for (int i = 0; i < a.rows(); ++i)
      for (int j = 0; j < a.cols(); ++j) {
        a(i, j) = g(rng);
        b(i, j) = g(rng);
      }
    // Force a shared direction half the time.
    if (trial % 2 == 0) b.col(0) = a.col(0);
    VectorXd x = VectorXd::Zero(n);
    FrameAt fa = frame(x, a), fb = frame(x, b);
    Eigen::Index di = subspace_intersect(fa, fb).count();
    Eigen::Index ds = subspace_sum(fa, fb).count();
    CHECK(di + ds == fa.count() + fb.count());
  }
}

TEST_CASE("mismatched points are rejected") {
  FrameAt a = frame(VectorXd::Zero(3), MatrixXd::Identity(3, 2));
  FrameAt b = frame(VectorXd::Ones(3), MatrixXd::Identity(3, 2));
  CHECK_THROWS_AS(subspace_intersect(a, b), Error);
}

TEST_CASE("annihilator of a coordinate line") {
  VectorXd x = VectorXd::Zero(3);
  FrameAt f = frame(x, cols({VectorXd(VectorXd::Unit(3, 0))}));
  FrameAt ann = annihilator(f);
  REQUIRE(ann.count() == 2);
  MatrixXd expect(3, 2);
  expect << 0, 0, 1, 0, 0, 1;
  CHECK(subspace_distance(ann.columns, expect) < 1e-12);
  CHECK(ann.variance == Variance::Cotangent);
}

TEST_CASE("annihilator of the full space is empty") {
  FrameAt f = frame(VectorXd::Zero(4), MatrixXd::Identity(4, 4));
  CHECK(annihilator(f).count() == 0);
}

TEST_CASE("double annihilator returns the original span") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  MatrixXd a(6, 2);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 2; ++j) a(i, j) = g(rng);
  VectorXd x = VectorXd::Zero(6);
  FrameAt ann = annihilator(frame(x, a));
  FrameAt ann2 = annihilator(FrameAt{pt(x), ann.columns, Variance::Tangent});
  CHECK(subspace_distance(ann2.columns, a) < 1e-10);
}

TEST_CASE("exterior derivative of a constant form vanishes") {
  OneFormField a{[](const VectorXd& x) {
                   RowVectorXd r(3);
                   r << 1, 0, 0;  // dx^1
                   return r;
                 },
                 kDefaultFdStep};
  MatrixXd da = exterior_derivative_at(a, pt(VectorXd::Zero(3)));
  CHECK(da.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("exterior derivative of x1 dx2") {
  OneFormField a{[](const VectorXd& x) {
                   RowVectorXd r = RowVectorXd::Zero(3);
                   r(1) = x(0);
                   return r;
                 },
                 kDefaultFdStep};
  VectorXd x(3);
  x << 0.3, -0.7, 0.2;
  MatrixXd da = exterior_derivative_at(a, pt(x));
  MatrixXd expect = MatrixXd::Zero(3, 3);
  expect(0, 1) = 1;
  expect(1, 0) = -1;  // dx1 ^ dx2
  CHECK((da - expect).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("d of d is numerically small") {
  ScalarField f{[](const VectorXd& x) { return std::sin(x(0)) * x(1) + x(2) * x(2) * x(0); },
                nullptr, kDefaultFdStep};
  VectorXd x(3);
  x << 0.4, 1.1, -0.6;
  OneFormField df{[&f](const VectorXd& y) { return RowVectorXd(fd_gradient(f.eval, y)); },
                  kDefaultFdStep};
  MatrixXd ddf = exterior_derivative_at(df, pt(x));
  CHECK(ddf.cwiseAbs().maxCoeff() < 1e-4);

  OneFormField a{[](const VectorXd& y) {
                   RowVectorXd r(3);
                   r << y(1) * y(2), std::cos(y(0)), y(0) * y(1);
                   return r;
                 },
                 kDefaultFdStep};
  TwoFormField da{[&a](const VectorXd& y) { return exterior_derivative_at(a, {"test", y}); },
                  kDefaultFdStep};
  auto dda = exterior_derivative_at(da, pt(x));
  double worst = 0;
  for (const auto& slice : dda) worst = std::max(worst, slice.cwiseAbs().maxCoeff());
  CHECK(worst < 1e-4);
}

TEST_CASE("lie bracket of coordinate fields vanishes") {
  VectorField X{[](const VectorXd&) { return VectorXd(VectorXd::Unit(3, 0)); }, nullptr, kDefaultFdStep};
  VectorField Y{[](const VectorXd&) { return VectorXd(VectorXd::Unit(3, 1)); }, nullptr, kDefaultFdStep};
  CHECK(lie_bracket_at(X, Y, pt(VectorXd::Zero(3))).norm() < 1e-12);
}

TEST_CASE("bracket of the constrained frame detects nonintegrability") {
  // [d/dx + y d/dz, d/dy] = -d/dz
  VectorField X{[](const VectorXd& x) {
                  VectorXd v(3);
                  v << 1, 0, x(1);
                  return v;
                },
                nullptr, kDefaultFdStep};
  VectorField Y{[](const VectorXd&) { return VectorXd(VectorXd::Unit(3, 1)); }, nullptr, kDefaultFdStep};
  VectorXd x(3);
  x << 0.2, 0.5, -0.1;
  VectorXd b = lie_bracket_at(X, Y, pt(x));
  VectorXd expect = -VectorXd::Unit(3, 2);
  CHECK((b - expect).norm() < 1e-9);
}

TEST_CASE("analytic and finite-difference jacobians agree") {
  VectorField X{[](const VectorXd& x) {
                  VectorXd v(2);
                  v << std::sin(x(1)), x(0) * x(0);
                  return v;
                },
                [](const VectorXd& x) {
                  MatrixXd J(2, 2);
                  J << 0, std::cos(x(1)), 2 * x(0), 0;
                  return J;
                },
                kDefaultFdStep};
  VectorXd x(2);
  x << 0.7, -0.3;
  MatrixXd fd = fd_jacobian(X.eval, x);
  CHECK(((fd - X.jac(x)).cwiseAbs().maxCoeff()) /
            std::max(1.0, X.jac(x).cwiseAbs().maxCoeff()) <
        1e-5);
}

TEST_CASE("jacobiator of the canonical bivector vanishes") {
  BivectorField pi{[](const VectorXd&) {
                     MatrixXd P = MatrixXd::Zero(4, 4);
                     P(0, 2) = 1;
                     P(2, 0) = -1;
                     P(1, 3) = 1;
                     P(3, 1) = -1;
                     return P;
                   },
                   kDefaultFdStep};
  VectorXd x(4);
  x << 0.1, 0.2, 0.3, 0.4;
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j)
      for (int k = j + 1; k < 4; ++k) CHECK(std::abs(jacobiator_at(pi, pt(x), i, j, k)) < 1e-8);
  CHECK(jacobiator_max_at(pi, pt(x)) < 1e-8);
}

TEST_CASE("jacobiator detects a non-Poisson bivector") {
  // Dual to the vector field (0, x, 1), whose helicity is nonzero.
  BivectorField pi{[](const VectorXd& x) {
                     MatrixXd P = MatrixXd::Zero(3, 3);
                     P(0, 1) = 1;
                     P(1, 0) = -1;
                     P(0, 2) = -x(0);
                     P(2, 0) = x(0);
                     return P;
                   },
                   kDefaultFdStep};
  VectorXd x(3);
  x << 0.3, 0.1, 0.5;
  CHECK(std::abs(jacobiator_at(pi, pt(x), 0, 1, 2)) > 0.5);
  CHECK(jacobiator_max_at(pi, pt(x)) > 0.5);
}
