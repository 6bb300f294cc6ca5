#pragma once

#include <cstdint>
#include <vector>

#include "lps/model.hpp"

namespace lps {

struct CountDataset {
  std::vector<long> y;
  std::vector<double> x;

  Index n() const { return static_cast<Index>(y.size()); }
  void validate() const;
};

struct NegBinOptions {
  double gamma_prior_a = 1e-4;  // Gamma prior on the overdispersion, log-scale Jacobian included
  double gamma_prior_b = 1e-4;
  double lambda_a = 1.0;
  double lambda_b = 1e-4;
  double ridge = 1e-6;  // full-rank penalty P + ridge*I so the coefficient prior is proper
  int penalty_order = 2;
};

/// Counts y ~ NB(mu(x), gamma) with log mu(x) = theta' b(x) on a raw cubic
/// B-spline basis and variance mu + mu^2/gamma. The latent vector is
/// xi = (log gamma, theta), k1 = 1.
class NegBinModel : public Model {
 public:
  NegBinModel(CountDataset data, BasisMatrix basis, NegBinOptions opts = {});

  const LatentPartition& partition() const override { return part_; }
  const PriorSpec& prior() const override { return prior_; }
  double loglik(const Vector& xi) const override;
  ModelEvaluation loglik_grad(const Vector& xi) const override;
  ModelEvaluation loglik_grad_hess(const Vector& xi) const override;

  double extra_log_prior(const Vector& xi) const override;
  void add_extra_log_prior_derivs(const Vector& xi, Vector& grad, Matrix& hess) const override;

  /// theta from a ridged least-squares fit of log(y + 0.5), log gamma from the
  /// method-of-moments overdispersion estimate.
  Vector initial_point() const override;

  const CountDataset& data() const { return data_; }
  const BasisMatrix& basis() const { return basis_; }

 private:
  CountDataset data_;
  BasisMatrix basis_;
  LatentPartition part_;
  PriorSpec prior_;
  NegBinOptions opts_;
};

/// Log pmf sum for xi = (log gamma, theta); -inf if mu overflows.
double nb_loglik(double log_gamma, const Vector& theta, const CountDataset& data,
                 const BasisMatrix& basis);

/// Value, gradient and Hessian in (log gamma, theta).
ModelEvaluation nb_grad_hess(double log_gamma, const Vector& theta, const CountDataset& data,
                             const BasisMatrix& basis);

/// Gamma-Poisson mixture draws with mean mu_i and variance mu_i + mu_i^2/gamma.
CountDataset nb_simulate_mu(const std::vector<double>& mu, const std::vector<double>& x,
                            double gamma_true, std::uint64_t seed);

/// Spline-truth variant: x = 1..n, mu_i = exp(theta_true' b(x_i)).
CountDataset nb_simulate(const Vector& theta_true, double gamma_true, Index n,
                         std::uint64_t seed, const BasisSpec& spec);

/// Smooth nonlinear mean curve used by the bundled simulations,
/// mu(x) = exp(3 + 0.8 sin(2 pi x / n) - 2.4 (x/n - 1/2)^2) at x = 1..n.
std::vector<double> nb_fixture_mean(Index n);

}  // namespace lps
