#pragma once

#include <initializer_list>

#include "vflow/space.hpp"

namespace vflow::testing {

inline Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

inline double dist(const Vector& a, const Vector& b) { return (a - b).norm(); }

}  // namespace vflow::testing
