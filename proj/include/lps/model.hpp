#pragma once

#include <utility>
#include <vector>

#include "lps/basis.hpp"
#include "lps/types.hpp"

namespace lps {

/// Split of the latent vector xi = (gamma, theta): k1 non-penalized
/// coordinates followed by k2 penalized spline coefficients, with theta tiled
/// into per-term blocks.
struct LatentPartition {
  Index k1 = 0;
  Index k2 = 0;
  std::vector<std::pair<Index, Index>> term_offsets;  // (start within theta, length)

  Index dim() const { return k1 + k2; }
  Index n_terms() const { return static_cast<Index>(term_offsets.size()); }
  void validate() const;
};

/// Gaussian prior N(gamma_mean, gamma_precision^-1) on gamma and, per term j,
/// the improper Gaussian exp(-lambda_j/2 theta_j' P_j theta_j) on theta_j,
/// with a common Gamma(a, b) prior on each lambda_j.
struct PriorSpec {
  Vector gamma_mean;                             // \tilde e
  Matrix gamma_precision;                        // Q, PSD
  std::vector<PenaltyMatrix> penalty_templates;  // one per term
  double lambda_a = 1.0;
  double lambda_b = 1e-4;

  Vector full_mean(const LatentPartition& part) const;  // e = (\tilde e, 0)
};

struct ModelEvaluation {
  double loglik = 0.0;
  Vector gradient;
  Matrix hessian;
};

/// Contract every concrete model fulfills. Evaluations are pure; models are
/// immutable after construction and safe to share across threads.
class Model {
 public:
  virtual ~Model() = default;

  virtual const LatentPartition& partition() const = 0;
  virtual const PriorSpec& prior() const = 0;

  /// Data log-likelihood. Returns -inf for reachable-but-invalid points
  /// (optimizers backtrack, samplers reject); throws EvaluationError on NaN.
  virtual double loglik(const Vector& xi) const = 0;

  /// Likelihood value and gradient (no prior terms).
  virtual ModelEvaluation loglik_grad(const Vector& xi) const;

  /// Likelihood value, gradient and Hessian (no prior terms).
  virtual ModelEvaluation loglik_grad_hess(const Vector& xi) const = 0;

  /// Non-Gaussian prior contribution (e.g. a Gamma prior mapped to the log
  /// scale). Zero for models whose priors are fully covered by PriorSpec.
  virtual double extra_log_prior(const Vector& /*xi*/) const { return 0.0; }
  virtual void add_extra_log_prior_derivs(const Vector& /*xi*/, Vector& /*grad*/,
                                          Matrix& /*hess*/) const {}

  /// Deterministic starting point for mode searches.
  virtual Vector initial_point() const = 0;
};

/// K_lambda = diag(Q, lambda_1 P_1, ..., lambda_J P_J).
Matrix assemble_precision(const PriorSpec& prior, const LatentPartition& part,
                          const Vector& lambda);

/// 0.5 * sum_j rank(P_j) * log(lambda_j): the lambda-dependent part of the
/// log pseudo-determinant of K_lambda.
double penalty_half_logdet(const PriorSpec& prior, const Vector& lambda);

/// Gamma log prior on lambda, up to an additive constant.
double lambda_log_prior(const PriorSpec& prior, const Vector& lambda);

/// loglik + extra_log_prior - 0.5 (xi-e)' K_lambda (xi-e).
double log_posterior(const Model& model, const Vector& xi, const Vector& lambda);

/// Posterior value, gradient and Hessian at xi given lambda. The Hessian is
/// symmetrized after assembly to suppress rounding drift.
ModelEvaluation gradient_hessian(const Model& model, const Vector& xi, const Vector& lambda);

/// Posterior value and gradient only (cheap path for gradient-based samplers).
ModelEvaluation posterior_grad(const Model& model, const Vector& xi, const Vector& lambda);

}  // namespace lps
