#include "lps/skew_normal.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "lps/special_functions.hpp"

namespace lps {

namespace {
constexpr double kSqrt2OverPi = 0.79788456080286535588;  // sqrt(2/pi)
}

double SkewNormalParams::delta() const { return alpha / std::sqrt(1.0 + alpha * alpha); }

double SkewNormalParams::mean() const { return psi + omega * delta() * kSqrt2OverPi; }

double SkewNormalParams::variance() const {
  const double d = delta();
  return omega * omega * (1.0 - 2.0 * d * d / M_PI);
}

double SkewNormalParams::skewness() const { return sn_skewness_from_delta(delta()); }

double SkewNormalParams::pdf(double x) const {
  const double z = (x - psi) / omega;
  return 2.0 / omega * norm_pdf(z) * norm_cdf(alpha * z);
}

double SkewNormalParams::logpdf(double x) const {
  const double z = (x - psi) / omega;
  const double cdf = norm_cdf(alpha * z);
  if (cdf <= 0.0) return -std::numeric_limits<double>::infinity();
  return std::log(2.0 / omega) + norm_logpdf(z) + std::log(cdf);
}

double SkewNormalParams::sample(Rng& rng) const {
  const double d = delta();
  const double w0 = rng.normal();
  const double w1 = rng.normal();
  return psi + omega * (d * std::abs(w0) + std::sqrt(1.0 - d * d) * w1);
}

double sn_skewness_from_delta(double delta) {
  const double m = delta * kSqrt2OverPi;  // mean of SN(0, 1, alpha(delta))
  const double v = 1.0 - m * m;
  return 0.5 * (4.0 - M_PI) * m * m * m / std::pow(v, 1.5);
}

double sn_delta_from_skewness(double g1) {
  if (!(std::abs(g1) < kSnSkewnessSup))
    throw std::domain_error("sn_delta_from_skewness: skewness beyond the attainable range");
  if (g1 == 0.0) return 0.0;
  // Monotone increasing in delta; bisect on [0, 1) for |g1| and restore sign.
  const double target = std::abs(g1);
  double lo = 0.0, hi = 1.0 - 1e-15;
  for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (sn_skewness_from_delta(mid) < target)
      lo = mid;
    else
      hi = mid;
  }
  const double d = 0.5 * (lo + hi);
  return g1 > 0.0 ? d : -d;
}

SkewNormalParams sn_fit_moments(double mean, double variance, double skewness) {
  if (!(variance > 0.0))
    throw std::domain_error("sn_fit_moments: variance must be positive");
  SkewNormalParams p;
  if (std::abs(skewness) >= kSnSkewClampThreshold) {
    skewness = skewness > 0.0 ? kSnSkewClampValue : -kSnSkewClampValue;
    p.clamped = true;
  }
  const double d = sn_delta_from_skewness(skewness);
  p.alpha = d / std::sqrt(1.0 - d * d);
  p.omega = std::sqrt(variance / (1.0 - 2.0 * d * d / M_PI));
  p.psi = mean - p.omega * d * kSqrt2OverPi;
  return p;
}


SnCdf::SnCdf(const SkewNormalParams& params, long grid) {
  lo_ = params.psi - 10.0 * params.omega;
  const double hi = params.psi + 10.0 * params.omega;
  step_ = (hi - lo_) / static_cast<double>(grid - 1);
  cdf_.assign(static_cast<std::size_t>(grid), 0.0);
  double prev = params.pdf(lo_);
  for (long i = 1; i < grid; ++i) {
    const double cur = params.pdf(lo_ + step_ * static_cast<double>(i));
    cdf_[static_cast<std::size_t>(i)] =
        cdf_[static_cast<std::size_t>(i - 1)] + 0.5 * step_ * (prev + cur);
    prev = cur;
  }
  const double total = cdf_.back();
  for (double& c : cdf_) c /= total;
}

double SnCdf::operator()(double x) const {
  if (x <= lo_) return 0.0;
  const double pos = (x - lo_) / step_;
  const auto idx = static_cast<std::size_t>(pos);
  if (idx + 1 >= cdf_.size()) return 1.0;
  const double frac = pos - std::floor(pos);
  return cdf_[idx] + frac * (cdf_[idx + 1] - cdf_[idx]);
}

}  // namespace lps
