#pragma once

#include <cstdint>

namespace lps {

/// Inverse of the standard normal CDF (Wichura-style rational approximation,
/// absolute error below 1e-15 away from the endpoints).
double inverse_normal_cdf(double p);

/// xoshiro256** seeded through splitmix64. Every transform below is fully
/// specified in this file, so streams are reproducible across platforms and
/// independent of the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Independent stream derived from (seed, stream); used to give each
  /// parallel draw its own generator.
  static Rng substream(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64();

  /// Uniform on (0, 1), 53-bit resolution, never exactly 0 or 1.
  double uniform();

  /// Standard normal via the inverse CDF of uniform().
  double normal();

  /// Gamma(shape, rate) by Marsaglia-Tsang squeeze (shape boost below 1).
  double gamma(double shape, double rate);

  /// Poisson by inversion-by-multiplication; intended for moderate means.
  long poisson(double mean);

 private:
  std::uint64_t s_[4];
};

}  // namespace lps
