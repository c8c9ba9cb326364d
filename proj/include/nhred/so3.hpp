#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

namespace nhred::so3 {

using Eigen::Map;
using Eigen::Matrix3d;
using Eigen::MatrixXd;
using Eigen::Vector3d;
using Eigen::VectorXd;

inline Matrix3d hat(const Vector3d& v) {
  Matrix3d m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

/// Axial vector of the antisymmetric part.
inline Vector3d axial(const Matrix3d& m) {
  return {0.5 * (m(2, 1) - m(1, 2)), 0.5 * (m(0, 2) - m(2, 0)), 0.5 * (m(1, 0) - m(0, 1))};
}

inline Matrix3d expm(const Vector3d& v) {
  double t = v.norm();
  Matrix3d vh = hat(v);
  if (t < 1e-12) return Matrix3d::Identity() + vh + 0.5 * vh * vh;
  return Matrix3d::Identity() + (std::sin(t) / t) * vh + ((1.0 - std::cos(t)) / (t * t)) * vh * vh;
}

/// Nearest rotation by polar decomposition.
inline Matrix3d polar(const Matrix3d& g) {
  Eigen::JacobiSVD<Matrix3d> svd(g, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix3d r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0) {
    Matrix3d flip = Matrix3d::Identity();
    flip(2, 2) = -1.0;
    r = svd.matrixU() * flip * svd.matrixV().transpose();
  }
  return r;
}

/// Rotation with prescribed third row (smooth away from |row3 . e1| = 1).
inline Matrix3d from_third_row(const Vector3d& row3) {
  Vector3d c = row3.normalized();
  Vector3d a = Vector3d::UnitX() - c.x() * c;
  a.normalize();
  Vector3d b = c.cross(a);
  Matrix3d g;
  g.row(0) = a;
  g.row(1) = b;
  g.row(2) = c;
  return g;
}

// Column-major embedding of 3x3 blocks inside chart vectors.
inline Matrix3d unpack(const VectorXd& x, Eigen::Index at) {
  return Map<const Matrix3d>(x.data() + at);
}
inline void pack(VectorXd& x, Eigen::Index at, const Matrix3d& g) {
  Map<Matrix3d>(x.data() + at) = g;
}
inline VectorXd vec9(const Matrix3d& m) {
  VectorXd v(9);
  Map<Matrix3d>(v.data()) = m;
  return v;
}

/// 3x9 matrix of the left Maurer-Cartan forms: lambda(v) = axial(g^T V).
inline MatrixXd left_mc_matrix(const Matrix3d& g) {
  MatrixXd L(3, 9);
  for (int j = 0; j < 9; ++j) {
    Matrix3d E = Matrix3d::Zero();
    E(j % 3, j / 3) = 1.0;  // column-major unit
    L.col(j) = axial(g.transpose() * E);
  }
  return L;
}

/// 3x9 matrix of the right Maurer-Cartan forms: rho(v) = axial(V g^T).
inline MatrixXd right_mc_matrix(const Matrix3d& g) {
  MatrixXd R(3, 9);
  for (int j = 0; j < 9; ++j) {
    Matrix3d E = Matrix3d::Zero();
    E(j % 3, j / 3) = 1.0;
    R.col(j) = axial(E * g.transpose());
  }
  return R;
}

}  // namespace nhred::so3
