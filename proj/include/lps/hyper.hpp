#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "lps/laplace.hpp"
#include "lps/model.hpp"

namespace lps {

enum class SelectionCriterion {
  marginal_posterior,   // marginal likelihood times the Gamma prior on lambda
  marginal_likelihood,  // prior omitted (parametrization-invariant empirical Bayes)
};

struct HyperOptions {
  SelectionCriterion criterion = SelectionCriterion::marginal_posterior;
  double fd_step = 1e-4;     // finite-difference step in upsilon = log lambda
  double grad_tol = 1e-6;    // sup-norm of the (projected) criterion gradient
  int max_outer_iter = 100;
  double upsilon_min = -12.0;
  double upsilon_max = 12.0;
  bool warm_start = true;    // reuse the previous inner mode across criterion calls
  NewtonOptions inner;
};

/// Approximate log marginal of lambda, up to a lambda-independent constant:
/// the log posterior at the inner mode, the half log-determinants of the
/// prior precision and of the Laplace covariance, and (for the posterior
/// criterion) the Gamma log prior on lambda. `warm_xi`, when given, seeds the
/// inner mode search and receives the mode found.
double log_marginal_lambda(const Model& model, const Vector& lambda,
                           SelectionCriterion criterion, Vector* warm_xi = nullptr,
                           const NewtonOptions& inner = {});

/// Result of maximizing the selection criterion over upsilon = log lambda.
struct HyperPosterior {
  Vector lambda_hat;
  Vector upsilon_hat;
  SelectionCriterion criterion = SelectionCriterion::marginal_posterior;
  Vector edf;                  // per-term effective degrees of freedom at lambda_hat
  std::vector<bool> boundary;  // guard-box hits: term effectively unpenalized / fully smoothed
  LaplaceFit fit;              // inner fit at lambda_hat
  int outer_iterations = 0;

  // Marginal posterior of lambda up to a constant, and its log-penalty
  // transform carrying the sum(upsilon) Jacobian. Valid while the model the
  // posterior was built from is alive.
  std::function<double(const Vector&)> log_density;
  std::function<double(const Vector&)> log_density_upsilon;
};

/// Levenberg-Marquardt-damped Newton ascent in upsilon with finite-difference
/// derivatives. Guard box [upsilon_min, upsilon_max]; boundary convergence is
/// flagged, not fatal.
HyperPosterior select_lambda(const Model& model, const HyperOptions& opts = {},
                             std::optional<Vector> upsilon0 = std::nullopt);

/// Per-term trace of (-H_lambda)^{-1} (-H_0) over the theta_j block, H_0
/// being the likelihood-only Hessian at the mode: the flexibility a penalized
/// term retains at this lambda.
Vector effective_dims(const Model& model, const LaplaceFit& fit);

}  // namespace lps
