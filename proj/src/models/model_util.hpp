#pragma once

#include <map>
#include <string>

#include "nhred/models.hpp"
#include "nhred/so3.hpp"

namespace nhred::model_detail {

double param(const std::map<std::string, double>& overrides, std::map<std::string, double>& out,
             const std::string& key, double fallback);
void reject_unknown(const std::map<std::string, double>& overrides,
                    const std::map<std::string, double>& accepted, const std::string& model);

inline MatrixXd wedge_cols(const VectorXd& a, const VectorXd& b) {
  return a * b.transpose() - b * a.transpose();
}
/// Wedge of two covector rows as a 2-form matrix: (a^b)(X,Y) = a(X)b(Y)-a(Y)b(X).
inline MatrixXd wedge_rows(const RowVectorXd& a, const RowVectorXd& b) {
  return a.transpose() * b - b.transpose() * a;
}

}  // namespace nhred::model_detail
