#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>

namespace nhred {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::Vector3d;
using Eigen::VectorXd;

/// A point of some chart. Charts are identified by name; models declare their
/// dimension and admissible region. Coordinates may be redundant (embedded
/// submanifolds such as SO(3) blocks or unit vectors).
struct ChartPoint {
  std::string chart;
  VectorXd x;

  ChartPoint() = default;
  ChartPoint(std::string chart_id, VectorXd coords) : chart(std::move(chart_id)), x(std::move(coords)) {}

  [[nodiscard]] Eigen::Index dim() const { return x.size(); }
};

inline bool same_point(const ChartPoint& a, const ChartPoint& b, double tol = 1e-9) {
  if (a.chart != b.chart || a.x.size() != b.x.size()) return false;
  double scale = std::max(1.0, std::max(a.x.cwiseAbs().maxCoeff(), b.x.cwiseAbs().maxCoeff()));
  return (a.x - b.x).cwiseAbs().maxCoeff() <= tol * scale;
}

}  // namespace nhred
