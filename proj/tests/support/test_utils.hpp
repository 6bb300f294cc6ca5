#pragma once

#include <functional>

#include "lps/types.hpp"

namespace lps::testing {

/// Central-difference gradient of a scalar function.
inline Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x,
                          double h = 1e-5) {
  Vector g(x.size());
  for (Index j = 0; j < x.size(); ++j) {
    Vector xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    g[j] = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

/// Central-difference Jacobian of a vector function (rows follow fn output).
inline Matrix fd_jacobian(const std::function<Vector(const Vector&)>& fn, const Vector& x,
                          double h = 1e-5) {
  const Vector f0 = fn(x);
  Matrix jac(f0.size(), x.size());
  for (Index j = 0; j < x.size(); ++j) {
    Vector xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    jac.col(j) = (fn(xp) - fn(xm)) / (2.0 * h);
  }
  return jac;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

/// max |a - b| / max(1, |b|), elementwise.
inline double max_rel_diff(const Matrix& a, const Matrix& b) {
  double worst = 0.0;
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j) {
      const double scale = std::max(1.0, std::abs(b(i, j)));
      worst = std::max(worst, std::abs(a(i, j) - b(i, j)) / scale);
    }
  return worst;
}

}  // namespace lps::testing
