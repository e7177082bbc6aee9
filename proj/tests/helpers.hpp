#pragma once

#include <initializer_list>

#include "ecoinf/core.hpp"

namespace test {

inline ecoinf::CountVector counts(std::initializer_list<ecoinf::Count> values) {
  ecoinf::CountVector v(static_cast<ecoinf::Index>(values.size()));
  ecoinf::Index k = 0;
  for (ecoinf::Count c : values) v(k++) = c;
  return v;
}

inline Eigen::VectorXd vec(std::initializer_list<double> values) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index k = 0;
  for (double c : values) v(k++) = c;
  return v;
}

inline double max_abs(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace test
