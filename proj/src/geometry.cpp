#include <Eigen/SVD>

#include "nhred/forms.hpp"

namespace nhred {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::MismatchedBasePoint: return "MismatchedBasePoint";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::StepTooLarge: return "StepTooLarge";
    case ErrorCode::NotRegular: return "NotRegular";
    case ErrorCode::CleanIntersectionViolated: return "CleanIntersectionViolated";
    case ErrorCode::NotInvariant: return "NotInvariant";
    case ErrorCode::DimensionAssumptionFailed: return "DimensionAssumptionFailed";
    case ErrorCode::DegenerateMetric: return "DegenerateMetric";
    case ErrorCode::DegenerateOmegaC: return "DegenerateOmegaC";
    case ErrorCode::DegenerateGaugedForm: return "DegenerateGaugedForm";
    case ErrorCode::LeftAdmissibleRegion: return "LeftAdmissibleRegion";
    case ErrorCode::NotOnLevelSet: return "NotOnLevelSet";
    case ErrorCode::NotWellDefined: return "NotWellDefined";
    case ErrorCode::Degenerate: return "Degenerate";
    case ErrorCode::HypothesisFailed: return "HypothesisFailed";
    case ErrorCode::UnknownModel: return "UnknownModel";
    case ErrorCode::InvalidParameter: return "InvalidParameter";
    case ErrorCode::UnknownExpression: return "UnknownExpression";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Error";
}

RowVectorXd fd_gradient(const std::function<double(const VectorXd&)>& f, const VectorXd& x, double step) {
  RowVectorXd g(x.size());
  VectorXd xp = x, xm = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = fd_step_at(x, i, step);
    xp(i) = x(i) + h;
    xm(i) = x(i) - h;
    g(i) = (f(xp) - f(xm)) / (2.0 * h);
    xp(i) = x(i);
    xm(i) = x(i);
  }
  return g;
}

MatrixXd fd_jacobian(const std::function<VectorXd(const VectorXd&)>& f, const VectorXd& x, double step) {
  VectorXd xp = x, xm = x;
  MatrixXd J;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = fd_step_at(x, i, step);
    xp(i) = x(i) + h;
    xm(i) = x(i) - h;
    VectorXd d = (f(xp) - f(xm)) / (2.0 * h);
    if (J.size() == 0) J.resize(d.size(), x.size());
    J.col(i) = d;
    xp(i) = x(i);
    xm(i) = x(i);
  }
  return J;
}

RowVectorXd ScalarField::grad(const VectorXd& x) const {
  if (gradient) return gradient(x);
  return fd_gradient(eval, x, fd_step);
}

MatrixXd VectorField::jac(const VectorXd& x) const {
  if (jacobian) return jacobian(x);
  return fd_jacobian(eval, x, fd_step);
}

Eigen::Index numerical_rank(const MatrixXd& m, double rank_tol) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<MatrixXd> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > rank_tol * s(0)) ++r;
  return r;
}

MatrixXd orthonormal_columns(const MatrixXd& m, double rank_tol) {
  if (m.size() == 0 || m.cols() == 0) return MatrixXd(m.rows(), 0);
  Eigen::JacobiSVD<MatrixXd> svd(m, Eigen::ComputeThinU);
  const auto& s = svd.singularValues();
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(0) > 0 && s(i) > rank_tol * s(0)) ++r;
  return svd.matrixU().leftCols(r);
}

MatrixXd null_space(const MatrixXd& m, double rank_tol) {
  if (m.rows() == 0) return MatrixXd::Identity(m.cols(), m.cols());
  Eigen::JacobiSVD<MatrixXd> svd(m, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(0) > 0 && s(i) > rank_tol * s(0)) ++r;
  return svd.matrixV().rightCols(m.cols() - r);
}

double subspace_distance(const MatrixXd& a, const MatrixXd& b, double rank_tol) {
  MatrixXd qa = orthonormal_columns(a, rank_tol);
  MatrixXd qb = orthonormal_columns(b, rank_tol);
  if (qa.cols() != qb.cols()) return 1.0;
  if (qa.cols() == 0) return 0.0;
  // sin of the largest principal angle, via the residual (stable near zero)
  MatrixXd ra = qa - qb * (qb.transpose() * qa);
  MatrixXd rb = qb - qa * (qa.transpose() * qb);
  Eigen::JacobiSVD<MatrixXd> sa(ra), sb(rb);
  double va = sa.singularValues().size() ? sa.singularValues().maxCoeff() : 0.0;
  double vb = sb.singularValues().size() ? sb.singularValues().maxCoeff() : 0.0;
  return std::min(1.0, std::max(va, vb));
}

void require_full_rank(const FrameAt& f, const char* who) {
  if (f.count() == 0) return;
  if (numerical_rank(f.columns) != f.count())
    fail(ErrorCode::DegenerateInput, std::string(who) + ": frame columns are rank deficient");
}

static void require_compatible(const FrameAt& a, const FrameAt& b, const char* who) {
  if (!same_point(a.base, b.base))
    fail(ErrorCode::MismatchedBasePoint, std::string(who) + ": frames live at different points");
  if (a.variance != b.variance)
    fail(ErrorCode::MismatchedBasePoint, std::string(who) + ": frames have different variance");
}

FrameAt subspace_intersect(const FrameAt& a, const FrameAt& b, double rank_tol) {
  require_compatible(a, b, "subspace_intersect");
  require_full_rank(a, "subspace_intersect");
  require_full_rank(b, "subspace_intersect");
  if (a.count() == 0 || b.count() == 0) return {a.base, MatrixXd(a.ambient_dim(), 0), a.variance};
  // Solve A u = B v; null space of [A | -B].
  MatrixXd stacked(a.ambient_dim(), a.count() + b.count());
  stacked << a.columns, -b.columns;
  MatrixXd ns = null_space(stacked, rank_tol);
  MatrixXd inter = a.columns * ns.topRows(a.count());
  return {a.base, orthonormal_columns(inter, rank_tol), a.variance};
}

FrameAt subspace_sum(const FrameAt& a, const FrameAt& b, double rank_tol) {
  require_compatible(a, b, "subspace_sum");
  MatrixXd joined(a.ambient_dim(), a.count() + b.count());
  joined << a.columns, b.columns;
  return {a.base, orthonormal_columns(joined, rank_tol), a.variance};
}

FrameAt annihilator(const FrameAt& f, double rank_tol) {
  if (f.variance != Variance::Tangent)
    fail(ErrorCode::DegenerateInput, "annihilator: expects a tangent frame");
  require_full_rank(f, "annihilator");
  // Covectors alpha with alpha * columns = 0: null space of columns^T.
  MatrixXd ns = null_space(f.columns.transpose(), rank_tol);
  return {f.base, ns, Variance::Cotangent};
}

MatrixXd dual_coframe(const MatrixXd& columns) {
  // Moore-Penrose: rows of pinv(columns).
  Eigen::JacobiSVD<MatrixXd> svd(columns, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(s.size() - 1) <= kRankTol * s(0))
    fail(ErrorCode::DegenerateInput, "dual_coframe: frame is rank deficient");
  VectorXd inv = s.cwiseInverse();
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

MatrixXd projector_along(const MatrixXd& a, const MatrixXd& b) {
  const Eigen::Index n = a.rows();
  MatrixXd joined(n, a.cols() + b.cols());
  joined << a, b;
  MatrixXd dual = dual_coframe(joined);  // also least-squares on the orthogonal complement
  return a * dual.topRows(a.cols());
}

VectorXd solve_in_span(const MatrixXd& columns, const VectorXd& v, double* residual) {
  VectorXd c = columns.completeOrthogonalDecomposition().solve(v);
  if (residual) *residual = (columns * c - v).norm();
  return c;
}

void require_antisymmetric(const MatrixXd& m, const char* who, double tol) {
  double r = (m + m.transpose()).cwiseAbs().maxCoeff();
  double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if (r > tol * scale)
    fail(ErrorCode::DegenerateInput, std::string(who) + ": components are not antisymmetric");
}

RowVectorXd exterior_derivative_at(const ScalarField& f, const ChartPoint& m) {
  return f.grad(m.x);
}

MatrixXd exterior_derivative_at(const OneFormField& a, const ChartPoint& m) {
  const Eigen::Index n = m.dim();
  MatrixXd da = MatrixXd::Zero(n, n);
  VectorXd xp, xm;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double h = fd_step_at(m.x, i, a.fd_step);
    xp = m.x;
    xm = m.x;
    xp(i) += h;
    xm(i) -= h;
    RowVectorXd di = (a(xp) - a(xm)) / (2.0 * h);  // d_i a_j
    da.row(i) += di;
    da.col(i) -= di.transpose();
  }
  return 0.5 * (da - da.transpose());  // explicit antisymmetrization
}

std::vector<MatrixXd> exterior_derivative_at(const TwoFormField& w, const ChartPoint& m) {
  const Eigen::Index n = m.dim();
  std::vector<MatrixXd> dW(n, MatrixXd::Zero(n, n));
  std::vector<MatrixXd> grad(n);  // grad[k] = d_k w
  VectorXd xp, xm;
  for (Eigen::Index k = 0; k < n; ++k) {
    const double h = fd_step_at(m.x, k, w.fd_step);
    xp = m.x;
    xm = m.x;
    xp(k) += h;
    xm(k) -= h;
    grad[k] = (w(xp) - w(xm)) / (2.0 * h);
  }
  for (Eigen::Index k = 0; k < n; ++k)
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        dW[k](i, j) = grad[k](i, j) + grad[i](j, k) + grad[j](k, i);
  return dW;
}

double three_form_eval(const std::vector<MatrixXd>& t, const VectorXd& X, const VectorXd& Y, const VectorXd& Z) {
  double v = 0.0;
  for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(t.size()); ++k)
    v += X(k) * Y.dot(t[k] * Z);
  return v;
}

VectorXd lie_bracket_at(const VectorField& X, const VectorField& Y, const ChartPoint& m) {
  return Y.jac(m.x) * X(m.x) - X.jac(m.x) * Y(m.x);
}

double jacobiator_at(const BivectorField& pi, const ChartPoint& m, int i, int j, int k) {
  auto bracket_field = [&pi](int a, int b) {
    return [&pi, a, b](const VectorXd& x) { return pi(x)(a, b); };
  };
  auto term = [&](int a, int b, int c) {
    // {x_a, {x_b, x_c}} = pi(dx_a, d{x_b,x_c})
    RowVectorXd d = fd_gradient(bracket_field(b, c), m.x, pi.fd_step);
    return pi(m.x).row(a).dot(d);
  };
  return term(i, j, k) + term(j, k, i) + term(k, i, j);
}

double jacobiator_max_at(const BivectorField& pi, const ChartPoint& m) {
  const Eigen::Index n = m.dim();
  MatrixXd P = pi(m.x);
  std::vector<MatrixXd> grad(static_cast<size_t>(n));
  VectorXd xp, xm;
  for (Eigen::Index l = 0; l < n; ++l) {
    const double h = fd_step_at(m.x, l, pi.fd_step);
    xp = m.x;
    xm = m.x;
    xp(l) += h;
    xm(l) -= h;
    grad[static_cast<size_t>(l)] = (pi(xp) - pi(xm)) / (2.0 * h);
  }
  auto term = [&](Eigen::Index a, Eigen::Index b, Eigen::Index c) {
    double v = 0.0;
    for (Eigen::Index l = 0; l < n; ++l) v += P(a, l) * grad[static_cast<size_t>(l)](b, c);
    return v;
  };
  double best = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      for (Eigen::Index k = j + 1; k < n; ++k)
        best = std::max(best, std::abs(term(i, j, k) + term(j, k, i) + term(k, i, j)));
  return best;
}

}  // namespace nhred
