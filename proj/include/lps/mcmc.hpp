#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lps/laplace.hpp"
#include "lps/model.hpp"
#include "lps/rng.hpp"

namespace lps {

struct ChainConfig {
  long n_iter = 20000;
  long burn_in = 5000;
  int thin = 1;
  double step_scale = 1.0;  // initial tau; tuned toward the target acceptance in burn-in
  double target_acceptance = 0.57;
  std::uint64_t seed = 1;
  std::optional<Vector> fixed_lambda;  // conditional-chain mode

  void validate() const;
};

struct ChainOutput {
  Matrix draws;         // retained x dim(xi)
  Matrix lambda_draws;  // retained x J, empty when lambda is fixed
  double acceptance_rate = 0.0;
  Vector ess;           // per xi coordinate
  double step_scale_final = 0.0;

  void write_csv(const std::string& path, const std::vector<std::string>& names) const;
};

/// Conjugate update of one penalty parameter:
/// Gamma(a + rank(P)/2, b + theta' P theta / 2).
double gibbs_lambda(const Vector& theta_j, const PenaltyMatrix& P, double a, double b,
                    Rng& rng);

/// One Langevin proposal preconditioned by `precond` (the Laplace covariance)
/// with the exact Metropolis-Hastings correction:
///   xi' = xi + (tau^2/2) precond U(xi) + tau chol(precond) z.
/// Returns the new state and whether the proposal was accepted.
std::pair<Vector, bool> mala_step(const Model& model, const Vector& xi, const Vector& lambda,
                                  double step_scale, const Matrix& precond, Rng& rng);

/// Metropolis-within-Gibbs over (xi, lambda): conjugate Gamma updates for each
/// lambda_j (skipped in conditional-chain mode) alternated with preconditioned
/// Langevin sweeps on xi. The preconditioner is a Laplace pre-fit at the
/// initial lambda and stays fixed, so the kernel remains a valid MH scheme.
ChainOutput run_chain(const Model& model, const ChainConfig& config);

/// Initial-positive-sequence effective sample size of one scalar chain.
double effective_sample_size(const Vector& chain);

/// Split-chain potential scale reduction across parallel chains of one scalar.
double potential_scale_reduction(const std::vector<Vector>& chains);

/// Kolmogorov-Smirnov distance between an approximating CDF and the empirical
/// CDF of draws (draws need not be sorted).
double ks_distance(std::vector<double> draws, const std::function<double(double)>& cdf);

}  // namespace lps
