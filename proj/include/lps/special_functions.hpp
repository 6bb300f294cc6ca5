#pragma once

#include <cmath>

namespace lps {

/// Digamma function, relative accuracy ~1e-13 on [1e-3, 1e8].
double digamma(double x);

/// Trigamma function, same accuracy envelope as digamma().
double trigamma(double x);

inline double logistic(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

inline double log_logistic(double x) {
  return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

/// logistic(hi) - logistic(lo) for hi >= lo without cancellation.
inline double logistic_difference(double lo, double hi) {
  return logistic(lo) * logistic(-hi) * std::expm1(hi - lo);
}

inline double norm_pdf(double x) {
  static const double inv_sqrt_2pi = 0.3989422804014326779;
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x * 0.70710678118654752440); }

inline double norm_logpdf(double x) {
  static const double log_sqrt_2pi = 0.9189385332046727418;
  return -0.5 * x * x - log_sqrt_2pi;
}

}  // namespace lps
