#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "json.hpp"
#include "lps/laplace.hpp"
#include "lps/skew_normal.hpp"

namespace lps {

/// Eigendecomposition Sigma^{gamma gamma} = V diag(zeta) V' with eigenvalues
/// nonincreasing and a deterministic sign convention (largest-magnitude entry
/// of each eigenvector positive), mapping gamma to approximately
/// uncorrelated unit-variance axes.
struct WhitenedFrame {
  Matrix V;
  Vector zeta;
  Vector gamma_hat;

  Index k1() const { return gamma_hat.size(); }
  Vector to_whitened(const Vector& gamma) const;    // Z^{-1/2} V' (gamma - gamma_hat)
  Vector from_whitened(const Vector& t) const;      // gamma_hat + V Z^{1/2} t
  Vector axis_point(Index s, double t) const;       // gamma_hat + t sqrt(zeta_s) v_s
};

WhitenedFrame whiten(const LaplaceFit& fit);

/// Profile marginal of gamma: the joint log posterior evaluated at
/// (gamma, E(theta|gamma)) plus the half log-determinant of the conditional
/// covariance (constant in gamma, kept for completeness).
class GammaMarginal {
 public:
  GammaMarginal(const LaplaceFit& fit, const Model& model, Vector lambda);

  double logdensity(const Vector& gamma) const;  // up to a constant
  const ThetaConditional& conditional() const { return cond_; }
  const Vector& lambda() const { return lambda_; }
  const Model& model() const { return *model_; }

 private:
  const Model* model_;
  Vector lambda_;
  ThetaConditional cond_;
};

/// Log marginal of whitened axis s at coordinate t, the other axes held at 0.
double axis_marginal_logdensity(const GammaMarginal& marginal, const WhitenedFrame& frame,
                                Index s, double t);

struct SkewFitOptions {
  int grid_points = 401;
  double half_width = 8.0;   // grid [-half_width, half_width] in whitened units
  bool mode_anchored = false;  // anchor the SN mean at the target mode instead
                               // of the target mean (variance/skewness still matched)
};

/// Evaluate the axis marginal on a grid, normalize, and match the first three
/// moments with a skew-normal. One automatic grid doubling if mass escapes.
SkewNormalParams fit_skew_normal_to_axis(const GammaMarginal& marginal,
                                         const WhitenedFrame& frame, Index s,
                                         const SkewFitOptions& opts = {});

/// Same grid machinery for an arbitrary unnormalized log density.
SkewNormalParams fit_skew_normal_from_logdensity(
    const std::function<double(double)>& logdensity, const SkewFitOptions& opts = {});

/// Joint approximate posterior: independent skew-normal whitened gamma axes
/// combined with the Gaussian theta | gamma law. Densities are evaluable
/// pointwise and the factorization samples i.i.d. draws.
class SkewCorrectedPosterior {
 public:
  SkewCorrectedPosterior(WhitenedFrame frame, std::vector<SkewNormalParams> axis_fits,
                         ThetaConditional theta_conditional, Vector lambda_hat);

  Index k1() const { return frame_.k1(); }
  Index k2() const { return theta_conditional_.theta_hat.size(); }

  /// log density of gamma: per-axis skew-normal factors with the 1/sqrt(zeta)
  /// Jacobian of the whitening map.
  double gamma_logdensity(const Vector& gamma) const;

  /// M x (k1 + k2) matrix of xi draws; each row samples the gamma axes then
  /// theta | gamma. Per-draw counter-derived streams keep the output
  /// deterministic for any thread count.
  Matrix sample_joint(Index m, std::uint64_t seed) const;

  /// gamma part only (same per-draw streams as sample_joint).
  Matrix sample_gamma(Index m, std::uint64_t seed) const;

  /// Skew-normal three-moment fit to Monte Carlo draws of component s of
  /// gamma (the components mix the axes, so their marginals need sampling).
  SkewNormalParams marginal_component_fit(Index s, Index m, std::uint64_t seed) const;

  const WhitenedFrame& frame() const { return frame_; }
  const std::vector<SkewNormalParams>& axis_fits() const { return axis_fits_; }
  const ThetaConditional& theta_conditional() const { return theta_conditional_; }
  const Vector& lambda_hat() const { return lambda_hat_; }

  nlohmann::ordered_json to_json() const;
  static SkewCorrectedPosterior from_json(const nlohmann::json& j);

 private:
  WhitenedFrame frame_;
  std::vector<SkewNormalParams> axis_fits_;
  ThetaConditional theta_conditional_;
  Vector lambda_hat_;
};

SkewCorrectedPosterior build_skew_posterior(const LaplaceFit& fit, const Model& model,
                                            const Vector& lambda_hat,
                                            const SkewFitOptions& opts = {});

/// Sample moments (mean, variance, skewness) with deterministic blocked sums.
struct SampleMoments {
  double mean = 0.0;
  double variance = 0.0;
  double skewness = 0.0;
};
SampleMoments sample_moments(const Vector& values);

}  // namespace lps
