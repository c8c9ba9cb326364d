#pragma once

#include <vector>

#include "nhred/fields.hpp"
#include "nhred/frames.hpp"

namespace nhred {

/// Pointwise 2-form: components W(i,j) = w(e_i, e_j), antisymmetric.
struct TwoFormAt {
  ChartPoint base;
  MatrixXd components;

  /// i_X w as a row covector: (i_X w)_j = w(X, e_j).
  [[nodiscard]] RowVectorXd contract(const VectorXd& X) const { return (components.transpose() * X).transpose(); }
  [[nodiscard]] double operator()(const VectorXd& X, const VectorXd& Y) const {
    return X.dot(components * Y);
  }
};

/// Pointwise bivector: components P(i,j) = pi(dx^i, dx^j), antisymmetric.
struct BivectorAt {
  ChartPoint base;
  MatrixXd components;

  /// sharp(alpha) = pi(alpha, .) as a column vector.
  [[nodiscard]] VectorXd sharp(const RowVectorXd& alpha) const { return components.transpose() * alpha.transpose(); }
  [[nodiscard]] double operator()(const RowVectorXd& a, const RowVectorXd& b) const {
    return a * components * b.transpose();
  }
};

void require_antisymmetric(const MatrixXd& m, const char* who, double tol = 1e-12);

/// Exterior derivative of a 0-form: gradient as a one-form (row vector).
RowVectorXd exterior_derivative_at(const ScalarField& f, const ChartPoint& m);

/// Exterior derivative of a 1-form: (da)_{ij} = d_i a_j - d_j a_i by central
/// differences of the coefficient functions.
MatrixXd exterior_derivative_at(const OneFormField& a, const ChartPoint& m);

/// Exterior derivative of a 2-form: full antisymmetric 3-tensor, returned as
/// n slices T[k](i,j) = (dw)_{kij} with (dw)_{kij} = d_k w_{ij} + d_i w_{jk} + d_j w_{ki}.
std::vector<MatrixXd> exterior_derivative_at(const TwoFormField& w, const ChartPoint& m);

/// Evaluation of a 3-tensor from exterior_derivative_at on three vectors.
double three_form_eval(const std::vector<MatrixXd>& t, const VectorXd& X, const VectorXd& Y, const VectorXd& Z);

/// Lie bracket [X, Y] = DY·X - DX·Y at m (analytic Jacobians when present).
VectorXd lie_bracket_at(const VectorField& X, const VectorField& Y, const ChartPoint& m);

/// Jacobiator of a bivector field on the coordinate functions (i, j, k):
/// {x_i,{x_j,x_k}} + {x_j,{x_k,x_i}} + {x_k,{x_i,x_j}} with FD gradients.
double jacobiator_at(const BivectorField& pi, const ChartPoint& m, int i, int j, int k);

/// Maximum |jacobiator| over all coordinate triples, with the component
/// gradients evaluated once (n + 1 field evaluations in total per direction).
double jacobiator_max_at(const BivectorField& pi, const ChartPoint& m);

}  // namespace nhred
