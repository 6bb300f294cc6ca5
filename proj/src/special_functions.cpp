#include "lps/special_functions.hpp"

#include <limits>
#include <stdexcept>

namespace lps {

namespace {

// Bernoulli-number coefficients B_{2n}/(2n) for the digamma asymptotic series.
constexpr double kDigammaAsym[] = {
    1.0 / 12.0, -1.0 / 120.0, 1.0 / 252.0, -1.0 / 240.0,
    1.0 / 132.0, -691.0 / 32760.0, 1.0 / 12.0,
};

// B_{2n} for the trigamma asymptotic series.
constexpr double kBernoulli[] = {
    1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0,
    5.0 / 66.0, -691.0 / 2730.0, 7.0 / 6.0,
};

}  // namespace

double digamma(double x) {
  if (!(x > 0.0)) throw std::domain_error("digamma: argument must be positive");
  double result = 0.0;
  // Recurrence psi(x) = psi(x+1) - 1/x until the asymptotic series applies.
  while (x < 10.0) {
    result -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  double series = 0.0;
  double power = inv2;
  for (double c : kDigammaAsym) {
    series += c * power;
    power *= inv2;
  }
  return result + std::log(x) - 0.5 * inv - series;
}

double trigamma(double x) {
  if (!(x > 0.0)) throw std::domain_error("trigamma: argument must be positive");
  double result = 0.0;
  while (x < 10.0) {
    result += 1.0 / (x * x);
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  double series = 0.0;
  double power = inv * inv2;  // 1/x^3
  for (double c : kBernoulli) {
    series += c * power;
    power *= inv2;
  }
  return result + inv + 0.5 * inv2 + series;
}

}  // namespace lps
