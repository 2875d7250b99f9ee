#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "tcrl/errors.hpp"

namespace tcrl {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

// log(sum_i exp(x_i)) with max-shift stabilization.
inline double log_sum_exp(std::span<const double> x) {
  double m = x[0];
  for (double v : x) m = std::max(m, v);
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  return m + std::log(s);
}

// Solves A x = b in place by Gaussian elimination with partial pivoting.
// A is n x n row-major and is destroyed.
std::vector<double> solve_linear(std::vector<double> a, std::vector<double> b);

}  // namespace tcrl
