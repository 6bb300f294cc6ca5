#pragma once

#include <functional>

#include "lps/model.hpp"

namespace lps::testing {

/// Two-coordinate model whose first coordinate follows an arbitrary
/// closed-form target (value/gradient/curvature supplied by the caller) and
/// whose second coordinate is standard normal. Used to drive the samplers
/// against known targets.
class ScalarTargetModel : public Model {
 public:
  struct Target {
    std::function<double(double)> logpdf;
    std::function<double(double)> dlogpdf;
    std::function<double(double)> d2logpdf;
  };

  explicit ScalarTargetModel(Target target) : target_(std::move(target)) {
    part_.k1 = 1;
    part_.k2 = 1;
    part_.term_offsets.emplace_back(0, 1);
    prior_.gamma_mean = Vector::Zero(1);
    prior_.gamma_precision = Matrix::Zero(1, 1);
    // the dummy theta coordinate carries a unit ridge penalty; with
    // lambda = 1 it is exactly standard normal
    PenaltyMatrix p;
    p.order = 1;
    p.matrix = Matrix::Identity(1, 1);
    p.rank = 1;
    prior_.penalty_templates.push_back(p);
  }

  const LatentPartition& partition() const override { return part_; }
  const PriorSpec& prior() const override { return prior_; }

  double loglik(const Vector& xi) const override { return target_.logpdf(xi[0]); }

  ModelEvaluation loglik_grad_hess(const Vector& xi) const override {
    ModelEvaluation ev;
    ev.loglik = target_.logpdf(xi[0]);
    ev.gradient = Vector::Zero(2);
    ev.hessian = Matrix::Zero(2, 2);
    if (std::isfinite(ev.loglik)) {
      ev.gradient[0] = target_.dlogpdf(xi[0]);
      ev.hessian(0, 0) = target_.d2logpdf(xi[0]);
    }
    return ev;
  }

  Vector initial_point() const override {
    Vector xi = Vector::Zero(2);
    xi[0] = start_;
    return xi;
  }

  void set_start(double x) { start_ = x; }

 private:
  Target target_;
  LatentPartition part_;
  PriorSpec prior_;
  double start_ = 1.0;
};

inline ScalarTargetModel gamma_target_model(double shape, double rate) {
  ScalarTargetModel::Target t;
  t.logpdf = [shape, rate](double x) {
    if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
    return (shape - 1.0) * std::log(x) - rate * x;
  };
  t.dlogpdf = [shape, rate](double x) { return (shape - 1.0) / x - rate; };
  t.d2logpdf = [shape](double x) { return -(shape - 1.0) / (x * x); };
  ScalarTargetModel model(std::move(t));
  model.set_start(shape / rate);
  return model;
}

}  // namespace lps::testing
