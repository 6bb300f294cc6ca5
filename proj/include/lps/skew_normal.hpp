#pragma once

#include <vector>

#include "lps/rng.hpp"

namespace lps {

/// Largest skewness a skew-normal can attain (the slant -> infinity limit).
inline constexpr double kSnSkewnessSup = 0.99527174643115604;
/// Requested skewness at or beyond this magnitude is clamped...
inline constexpr double kSnSkewClampThreshold = 0.995;
/// ...to this value, and the fit is flagged.
inline constexpr double kSnSkewClampValue = 0.99;

/// Skew-normal SN(psi, omega^2, alpha): density 2/omega phi(z) Phi(alpha z)
/// with z = (x - psi)/omega. alpha = 0 recovers N(psi, omega^2).
struct SkewNormalParams {
  double psi = 0.0;    // location
  double omega = 1.0;  // scale, > 0
  double alpha = 0.0;  // slant
  bool clamped = false;

  double delta() const;
  double mean() const;      // psi + omega delta sqrt(2/pi)
  double variance() const;  // omega^2 (1 - 2 delta^2 / pi)
  double skewness() const;

  double pdf(double x) const;
  double logpdf(double x) const;

  /// Stochastic representation psi + omega (delta |W0| + sqrt(1-delta^2) W1).
  double sample(Rng& rng) const;
};

double sn_skewness_from_delta(double delta);

/// Invert the skewness map by bisection (monotone in delta); |g1| must be
/// below the attainable supremum.
double sn_delta_from_skewness(double g1);

/// Three-moment fit. Skewness at or beyond the clamp threshold is pulled back
/// to +-0.99 and the result flagged.
SkewNormalParams sn_fit_moments(double mean, double variance, double skewness);

/// Piecewise-linear CDF interpolant built from a dense trapezoid integration
/// of the density over +-10 scales (plenty for KS-style comparisons).
class SnCdf {
 public:
  explicit SnCdf(const SkewNormalParams& params, long grid = 8001);
  double operator()(double x) const;

 private:
  double lo_ = 0.0;
  double step_ = 1.0;
  std::vector<double> cdf_;
};

}  // namespace lps
