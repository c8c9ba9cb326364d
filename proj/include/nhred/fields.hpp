#pragma once

#include <functional>

#include "nhred/chart.hpp"
#include "nhred/errors.hpp"

namespace nhred {

/// Default relative step for central differences.
inline constexpr double kDefaultFdStep = 1e-5;

/// Per-coordinate step: h_i = step * max(1, |x_i|).
inline double fd_step_at(const VectorXd& x, Eigen::Index i, double step) {
  return step * std::max(1.0, std::abs(x(i)));
}

/// Scalar function on a chart, with an optional analytic gradient.
struct ScalarField {
  std::function<double(const VectorXd&)> eval;
  std::function<RowVectorXd(const VectorXd&)> gradient;  // optional
  double fd_step = kDefaultFdStep;

  [[nodiscard]] double operator()(const VectorXd& x) const { return eval(x); }
  [[nodiscard]] RowVectorXd grad(const VectorXd& x) const;
};

/// Vector field on a chart, with an optional analytic Jacobian.
struct VectorField {
  std::function<VectorXd(const VectorXd&)> eval;
  std::function<MatrixXd(const VectorXd&)> jacobian;  // optional
  double fd_step = kDefaultFdStep;

  [[nodiscard]] VectorXd operator()(const VectorXd& x) const { return eval(x); }
  [[nodiscard]] MatrixXd jac(const VectorXd& x) const;
};

/// One-form field: row vector of coefficients per coordinate.
struct OneFormField {
  std::function<RowVectorXd(const VectorXd&)> eval;
  double fd_step = kDefaultFdStep;

  [[nodiscard]] RowVectorXd operator()(const VectorXd& x) const { return eval(x); }
};

/// Two-form field: antisymmetric coefficient matrix, W(i,j) = w(e_i, e_j).
struct TwoFormField {
  std::function<MatrixXd(const VectorXd&)> eval;
  double fd_step = kDefaultFdStep;

  [[nodiscard]] MatrixXd operator()(const VectorXd& x) const { return eval(x); }
};

/// Bivector field: antisymmetric coefficient matrix, P(i,j) = pi(dx^i, dx^j).
struct BivectorField {
  std::function<MatrixXd(const VectorXd&)> eval;
  double fd_step = kDefaultFdStep;

  [[nodiscard]] MatrixXd operator()(const VectorXd& x) const { return eval(x); }
};

MatrixXd fd_jacobian(const std::function<VectorXd(const VectorXd&)>& f, const VectorXd& x,
                     double step = kDefaultFdStep);
RowVectorXd fd_gradient(const std::function<double(const VectorXd&)>& f, const VectorXd& x,
                        double step = kDefaultFdStep);

}  // namespace nhred
