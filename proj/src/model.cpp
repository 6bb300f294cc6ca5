#include "lps/model.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "lps/errors.hpp"

namespace lps {

void LatentPartition::validate() const {
  if (k1 < 1 || k2 < 1)
    throw std::invalid_argument("LatentPartition: k1 and k2 must be >= 1");
  Index covered = 0;
  for (const auto& [start, len] : term_offsets) {
    if (start != covered || len < 1)
      throw std::invalid_argument("LatentPartition: term blocks must tile theta in order");
    covered += len;
  }
  if (covered != k2)
    throw std::invalid_argument("LatentPartition: term blocks must cover theta exactly");
}

Vector PriorSpec::full_mean(const LatentPartition& part) const {
  Vector e = Vector::Zero(part.dim());
  e.head(part.k1) = gamma_mean;
  return e;
}

ModelEvaluation Model::loglik_grad(const Vector& xi) const {
  ModelEvaluation ev = loglik_grad_hess(xi);
  ev.hessian.resize(0, 0);
  return ev;
}

namespace {

void check_lambda(const LatentPartition& part, const Vector& lambda) {
  if (lambda.size() != part.n_terms())
    throw std::invalid_argument("lambda: one entry per penalized term expected");
  for (Index j = 0; j < lambda.size(); ++j)
    if (!(lambda[j] > 0.0))
      throw std::invalid_argument("lambda: entries must be strictly positive");
}

}  // namespace

Matrix assemble_precision(const PriorSpec& prior, const LatentPartition& part,
                          const Vector& lambda) {
  check_lambda(part, lambda);
  Matrix k = Matrix::Zero(part.dim(), part.dim());
  k.topLeftCorner(part.k1, part.k1) = prior.gamma_precision;
  for (Index j = 0; j < part.n_terms(); ++j) {
    const auto& [start, len] = part.term_offsets[static_cast<std::size_t>(j)];
    k.block(part.k1 + start, part.k1 + start, len, len) =
        lambda[j] * prior.penalty_templates[static_cast<std::size_t>(j)].matrix;
  }
  return k;
}

double penalty_half_logdet(const PriorSpec& prior, const Vector& lambda) {
  double sum = 0.0;
  for (Index j = 0; j < lambda.size(); ++j)
    sum += 0.5 * prior.penalty_templates[static_cast<std::size_t>(j)].rank *
           std::log(lambda[j]);
  return sum;
}

double lambda_log_prior(const PriorSpec& prior, const Vector& lambda) {
  double sum = 0.0;
  for (Index j = 0; j < lambda.size(); ++j)
    sum += (prior.lambda_a - 1.0) * std::log(lambda[j]) - prior.lambda_b * lambda[j];
  return sum;
}

double log_posterior(const Model& model, const Vector& xi, const Vector& lambda) {
  const LatentPartition& part = model.partition();
  check_lambda(part, lambda);
  const double ll = model.loglik(xi);
  if (std::isnan(ll)) {
    std::ostringstream msg;
    msg << "log_posterior: likelihood is NaN at |xi|_inf = "
        << xi.cwiseAbs().maxCoeff();
    throw EvaluationError(msg.str());
  }
  if (std::isinf(ll)) return ll;  // -inf sentinel: out of support, not an error
  const Matrix k = assemble_precision(model.prior(), part, lambda);
  const Vector centered = xi - model.prior().full_mean(part);
  return ll + model.extra_log_prior(xi) - 0.5 * centered.dot(k * centered);
}

ModelEvaluation gradient_hessian(const Model& model, const Vector& xi, const Vector& lambda) {
  const LatentPartition& part = model.partition();
  check_lambda(part, lambda);
  ModelEvaluation ev = model.loglik_grad_hess(xi);
  model.add_extra_log_prior_derivs(xi, ev.gradient, ev.hessian);
  const Matrix k = assemble_precision(model.prior(), part, lambda);
  const Vector centered = xi - model.prior().full_mean(part);
  ev.loglik += model.extra_log_prior(xi) - 0.5 * centered.dot(k * centered);
  ev.gradient -= k * centered;
  ev.hessian -= k;
  ev.hessian = 0.5 * (ev.hessian + ev.hessian.transpose()).eval();
  return ev;
}

ModelEvaluation posterior_grad(const Model& model, const Vector& xi, const Vector& lambda) {
  const LatentPartition& part = model.partition();
  check_lambda(part, lambda);
  ModelEvaluation ev = model.loglik_grad(xi);
  Matrix empty;
  model.add_extra_log_prior_derivs(xi, ev.gradient, empty);
  const Matrix k = assemble_precision(model.prior(), part, lambda);
  const Vector centered = xi - model.prior().full_mean(part);
  ev.loglik += model.extra_log_prior(xi) - 0.5 * centered.dot(k * centered);
  ev.gradient -= k * centered;
  return ev;
}

}  // namespace lps
