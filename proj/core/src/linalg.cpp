#include "tcrl/linalg.hpp"

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>

#include "tcrl/errors.hpp"

namespace tcrl {

std::vector<double> solve_linear(std::vector<double> a, std::vector<double> b) {
  const size_t n = b.size();
  if (a.size() != n * n) throw ValidationError("solve_linear: matrix/vector size mismatch");

  for (size_t col = 0; col < n; ++col) {
    size_t pivot = col;
    double best = std::fabs(a[col * n + col]);
    for (size_t r = col + 1; r < n; ++r) {
      double v = std::fabs(a[r * n + col]);
      if (v > best) {
        best = v;
        pivot = r;
      }
    }
    if (best == 0.0) throw NumericError("solve_linear: singular matrix at column " + std::to_string(col));
    if (pivot != col) {
      for (size_t c = col; c < n; ++c) std::swap(a[pivot * n + c], a[col * n + c]);
      std::swap(b[pivot], b[col]);
    }
    const double inv = 1.0 / a[col * n + col];
    for (size_t r = col + 1; r < n; ++r) {
      double f = a[r * n + col] * inv;
      if (f == 0.0) continue;
      a[r * n + col] = 0.0;
      for (size_t c = col + 1; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
      b[r] -= f * b[col];
    }
  }

  std::vector<double> x(n, 0.0);
  for (size_t ri = n; ri-- > 0;) {
    double s = b[ri];
    for (size_t c = ri + 1; c < n; ++c) s -= a[ri * n + c] * x[c];
    x[ri] = s / a[ri * n + ri];
  }
  return x;
}

}  // namespace tcrl
