#pragma once

#include "lps/model.hpp"
#include "lps/rng.hpp"

namespace lps {

struct NewtonOptions {
  double grad_tol = 1e-8;        // sup-norm of the posterior gradient
  double rel_change_tol = 1e-12; // relative log-posterior change on the last step
  int max_iter = 200;
  double mu0_scale = 1e-4;       // initial damping = mu0_scale * max diag(-H)
  double mu_shrink = 0.2;
  double mu_grow = 5.0;
  int max_damping_retries = 60;
};

/// Gaussian approximation at the conditional posterior mode: mean xi_hat and
/// covariance = inverse negative Hessian there, partitioned into the
/// (gamma, theta) blocks.
struct LaplaceFit {
  Vector mode;
  Matrix covariance;
  Matrix sigma_gg;  // k1 x k1
  Matrix sigma_gt;  // k1 x k2 (theta-gamma block is its transpose)
  Matrix sigma_tt;  // k2 x k2
  double log_det_cov = 0.0;
  bool converged = false;
  int iterations = 0;
  double final_grad_norm = 0.0;
  double log_posterior_at_mode = 0.0;
  LatentPartition partition;
  Vector lambda;

  Vector gamma_hat() const { return mode.head(partition.k1); }
  Vector theta_hat() const { return mode.tail(partition.k2); }
};

/// Newton-Raphson ascent with Levenberg-Marquardt damping engaged whenever the
/// undamped step fails to increase the log-posterior. Deterministic given
/// (model, lambda, xi0, opts). Throws NonConvergenceError / SaddlePointError.
LaplaceFit find_mode(const Model& model, const Vector& lambda, const Vector& xi0,
                     const NewtonOptions& opts = {});

/// Multivariate normal with a cached Cholesky factor.
class GaussianLaw {
 public:
  GaussianLaw(Vector mean, Matrix cov);

  double logpdf(const Vector& x) const;
  Vector sample(Rng& rng) const;
  GaussianLaw marginal(const std::vector<Index>& indices) const;

  const Vector& mean() const { return mean_; }
  const Matrix& cov() const { return cov_; }
  const Matrix& chol() const { return chol_; }

 private:
  Vector mean_;
  Matrix cov_;
  Matrix chol_;  // lower factor
  double log_det_ = 0.0;
};

/// The fitted Gaussian law on xi. Refuses unconverged fits.
GaussianLaw laplace_conditional(const LaplaceFit& fit);

/// theta | gamma law family with the Schur complement computed once and
/// reused across gamma.
struct ThetaConditional {
  Vector theta_hat;
  Vector gamma_hat;
  Matrix slope;      // Sigma^{theta gamma} (Sigma^{gamma gamma})^{-1}
  Matrix cov;        // Sigma^{theta|gamma}
  Matrix chol;       // lower factor of cov
  double half_log_det = 0.0;

  Vector mean_at(const Vector& gamma) const;
  GaussianLaw law(const Vector& gamma) const;
};

/// Throws ConditioningError when Sigma^{gamma gamma} is singular.
ThetaConditional conditional_theta_given_gamma(const LaplaceFit& fit);

}  // namespace lps
