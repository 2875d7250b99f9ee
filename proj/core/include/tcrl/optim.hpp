#pragma once

#include <cmath>
#include <vector>

namespace tcrl {

// Adaptive-moment estimation over a flat parameter vector.
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int step = 0;
  std::vector<double> m, v;

  void apply(std::vector<double>& theta, const std::vector<double>& grad, double lr) {
    if (m.empty()) {
      m.assign(theta.size(), 0.0);
      v.assign(theta.size(), 0.0);
    }
    ++step;
    const double c1 = 1.0 - std::pow(beta1, step);
    const double c2 = 1.0 - std::pow(beta2, step);
    for (size_t i = 0; i < theta.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
      theta[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
    }
  }
};

inline void sgd_apply(std::vector<double>& theta, const std::vector<double>& grad, double lr) {
  for (size_t i = 0; i < theta.size(); ++i) theta[i] -= lr * grad[i];
}

}  // namespace tcrl
