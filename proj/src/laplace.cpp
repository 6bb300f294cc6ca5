#include "lps/laplace.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "lps/errors.hpp"

namespace lps {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double log_det_from_ldlt(const Eigen::LDLT<Matrix>& ldlt) {
  return ldlt.vectorD().array().log().sum();
}

bool ldlt_positive(const Eigen::LDLT<Matrix>& ldlt) {
  if (ldlt.info() != Eigen::Success) return false;
  return (ldlt.vectorD().array() > 0.0).all();
}

}  // namespace

LaplaceFit find_mode(const Model& model, const Vector& lambda, const Vector& xi0,
                     const NewtonOptions& opts) {
  const LatentPartition& part = model.partition();
  if (xi0.size() != part.dim())
    throw std::invalid_argument("find_mode: xi0 has the wrong dimension");
  if (!xi0.allFinite()) throw std::invalid_argument("find_mode: xi0 must be finite");

  Vector xi = xi0;
  ModelEvaluation ev = gradient_hessian(model, xi, lambda);
  if (!std::isfinite(ev.loglik))
    throw EvaluationError("find_mode: log posterior not finite at the starting point");

  double mu = 0.0;  // Levenberg-Marquardt damping, engaged on failed steps
  int iterations = 0;
  double grad_norm = ev.gradient.cwiseAbs().maxCoeff();
  bool converged = false;

  for (; iterations < opts.max_iter; ++iterations) {
    if (grad_norm < opts.grad_tol) {
      converged = true;
      break;
    }
    const Matrix neg_h = -ev.hessian;
    const double max_diag = neg_h.diagonal().maxCoeff();

    bool stepped = false;
    double new_value = -kInf;
    Vector xi_new;
    for (int retry = 0; retry <= opts.max_damping_retries; ++retry) {
      Matrix a = neg_h;
      if (mu > 0.0) a.diagonal().array() += mu;
      const Eigen::LDLT<Matrix> ldlt(a);
      if (ldlt_positive(ldlt)) {
        xi_new = xi + ldlt.solve(ev.gradient);
        new_value = log_posterior(model, xi_new, lambda);
        if (new_value > ev.loglik) {
          stepped = true;
          break;
        }
      }
      mu = (mu == 0.0) ? opts.mu0_scale * std::max(max_diag, 1e-8) : mu * opts.mu_grow;
    }
    if (!stepped) {
      // The remaining ascent can fall below the evaluation noise of the
      // log posterior before the gradient tolerance is reached; the gradient
      // norm attainable at that noise floor is ~sqrt(2 * noise * curvature).
      const double noise = 4.0 * std::numeric_limits<double>::epsilon() *
                           (1.0 + std::abs(ev.loglik));
      const double stall_norm = 4.0 * std::sqrt(2.0 * noise * std::max(max_diag, 1.0));
      if (grad_norm < stall_norm) {
        converged = true;
        break;
      }
      throw NonConvergenceError("find_mode: damping failed to produce an ascent step",
                                grad_norm, iterations);
    }

    const double rel_change =
        std::abs(new_value - ev.loglik) / std::max(1.0, std::abs(new_value));
    xi = xi_new;
    ev = gradient_hessian(model, xi, lambda);
    grad_norm = ev.gradient.cwiseAbs().maxCoeff();
    mu *= opts.mu_shrink;
    if (mu < 1e-12 * std::max(max_diag, 1.0)) mu = 0.0;
    if (grad_norm < opts.grad_tol && rel_change < opts.rel_change_tol) {
      converged = true;
      ++iterations;
      break;
    }
  }
  if (!converged && grad_norm >= opts.grad_tol)
    throw NonConvergenceError("find_mode: iteration budget exhausted", grad_norm,
                              iterations);

  const Matrix neg_h = -ev.hessian;
  const Eigen::LDLT<Matrix> ldlt(neg_h);
  if (!ldlt_positive(ldlt))
    throw SaddlePointError("find_mode: negative Hessian is not positive definite at the mode");

  LaplaceFit fit;
  fit.mode = xi;
  fit.covariance = ldlt.solve(Matrix::Identity(part.dim(), part.dim()));
  fit.covariance = 0.5 * (fit.covariance + fit.covariance.transpose()).eval();
  fit.sigma_gg = fit.covariance.topLeftCorner(part.k1, part.k1);
  fit.sigma_gt = fit.covariance.topRightCorner(part.k1, part.k2);
  fit.sigma_tt = fit.covariance.bottomRightCorner(part.k2, part.k2);
  fit.log_det_cov = -log_det_from_ldlt(ldlt);
  fit.converged = true;
  fit.iterations = iterations;
  fit.final_grad_norm = grad_norm;
  fit.log_posterior_at_mode = ev.loglik;
  fit.partition = part;
  fit.lambda = lambda;
  return fit;
}

GaussianLaw::GaussianLaw(Vector mean, Matrix cov) : mean_(std::move(mean)), cov_(std::move(cov)) {
  const Eigen::LLT<Matrix> llt(cov_);
  if (llt.info() != Eigen::Success)
    throw ConditioningError("GaussianLaw: covariance is not positive definite");
  chol_ = llt.matrixL();
  log_det_ = 2.0 * chol_.diagonal().array().log().sum();
}

double GaussianLaw::logpdf(const Vector& x) const {
  static const double log_2pi = 1.8378770664093454836;
  const Vector centered = x - mean_;
  const Vector z = chol_.triangularView<Eigen::Lower>().solve(centered);
  return -0.5 * (mean_.size() * log_2pi + log_det_ + z.squaredNorm());
}

Vector GaussianLaw::sample(Rng& rng) const {
  Vector z(mean_.size());
  for (Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  return mean_ + chol_ * z;
}

GaussianLaw GaussianLaw::marginal(const std::vector<Index>& indices) const {
  const Index m = static_cast<Index>(indices.size());
  Vector mean(m);
  Matrix cov(m, m);
  for (Index i = 0; i < m; ++i) {
    mean[i] = mean_[indices[static_cast<std::size_t>(i)]];
    for (Index j = 0; j < m; ++j)
      cov(i, j) = cov_(indices[static_cast<std::size_t>(i)], indices[static_cast<std::size_t>(j)]);
  }
  return GaussianLaw(std::move(mean), std::move(cov));
}

GaussianLaw laplace_conditional(const LaplaceFit& fit) {
  if (!fit.converged)
    throw std::invalid_argument("laplace_conditional: fit did not converge");
  return GaussianLaw(fit.mode, fit.covariance);
}

Vector ThetaConditional::mean_at(const Vector& gamma) const {
  return theta_hat + slope * (gamma - gamma_hat);
}

GaussianLaw ThetaConditional::law(const Vector& gamma) const {
  return GaussianLaw(mean_at(gamma), cov);
}

ThetaConditional conditional_theta_given_gamma(const LaplaceFit& fit) {
  if (!fit.converged)
    throw std::invalid_argument("conditional_theta_given_gamma: fit did not converge");
  const Eigen::LLT<Matrix> llt(fit.sigma_gg);
  if (llt.info() != Eigen::Success)
    throw ConditioningError("conditional_theta_given_gamma: singular gamma block");

  ThetaConditional cond;
  cond.theta_hat = fit.theta_hat();
  cond.gamma_hat = fit.gamma_hat();
  cond.slope = llt.solve(fit.sigma_gt).transpose();  // Sigma^{tg} (Sigma^{gg})^{-1}
  cond.cov = fit.sigma_tt - cond.slope * fit.sigma_gt;
  cond.cov = 0.5 * (cond.cov + cond.cov.transpose()).eval();
  const Eigen::LLT<Matrix> cllt(cond.cov);
  if (cllt.info() != Eigen::Success)
    throw ConditioningError("conditional_theta_given_gamma: conditional covariance not PD");
  cond.chol = cllt.matrixL();
  cond.half_log_det = cond.chol.diagonal().array().log().sum();
  return cond;
}

}  // namespace lps
