#pragma once

#include <atomic>
#include <string>
#include <vector>

#include "lps/model.hpp"

namespace lps {

/// Ordinal responses y_i in {1..R} with continuous covariates entering the
/// cumulative-logit predictor through additive spline terms.
struct OrdinalDataset {
  std::vector<int> y;
  Matrix X;  // n x J raw covariate values
  int R = 0;

  Index n() const { return static_cast<Index>(y.size()); }
  void validate() const;
};

/// Cumulative probabilities and the derivative intermediates shared by the
/// likelihood, gradient and Hessian:
///   v_r = F_r (1 - F_r),  w_r = 1 + pi_r - 2 F_r,  z_r = (1 - 2 F_r) v_r.
struct POWorkspace {
  Matrix F;   // n x (R+1), F_0 = 0, F_R = 1
  Matrix pi;  // n x R
  Matrix v;   // n x (R+1), zero in the boundary columns
  Matrix w;   // n x R
  Matrix z;   // n x (R+1)
  long clamp_count = 0;  // linear predictors clamped to [-30, 30]
  bool valid = false;    // pi positive wherever the likelihood uses it
};

struct PropOddsOptions {
  double lambda_a = 1.0;
  double lambda_b = 1e-4;
  double q_scale = 1e-6;  // gamma precision Q = q_scale * I
  int penalty_order = 2;
  std::vector<int> penalty_orders;  // per-term override; empty = penalty_order for all
};

POWorkspace po_workspace(const OrdinalDataset& data, const Matrix& design,
                         const Vector& gamma, const Vector& theta);

/// Sum_i log pi_{i, y_i}; -inf when a non-monotone gamma makes some pi <= 0.
double po_loglik(const Vector& gamma, const Vector& theta, const OrdinalDataset& data,
                 const Matrix& design, long* clamp_events = nullptr);
double po_loglik(const Vector& gamma, const Vector& theta, const OrdinalDataset& data,
                 const std::vector<BasisMatrix>& bases);

/// Likelihood value, gradient and Hessian over xi = (gamma, theta).
ModelEvaluation po_grad_hess(const Vector& gamma, const Vector& theta,
                             const OrdinalDataset& data, const Matrix& design,
                             long* clamp_events = nullptr);
ModelEvaluation po_grad_hess(const Vector& gamma, const Vector& theta,
                             const OrdinalDataset& data, const std::vector<BasisMatrix>& bases);

/// Value and gradient only.
ModelEvaluation po_grad(const Vector& gamma, const Vector& theta, const OrdinalDataset& data,
                        const Matrix& design, long* clamp_events = nullptr);

/// Column-concatenation of per-term design matrices.
Matrix concat_designs(const std::vector<BasisMatrix>& bases);

/// Additive proportional-odds model with category intercepts gamma_1 < ... <
/// gamma_{R-1} and shared spline coefficients.
class PropOddsModel : public Model {
 public:
  PropOddsModel(OrdinalDataset data, std::vector<BasisMatrix> bases,
                PropOddsOptions opts = {});
  /// Direct-design constructor (term structure given explicitly); used when
  /// the predictor columns are not spline evaluations.
  PropOddsModel(OrdinalDataset data, Matrix design,
                std::vector<PenaltyMatrix> penalties, PropOddsOptions opts = {});

  const LatentPartition& partition() const override { return part_; }
  const PriorSpec& prior() const override { return prior_; }
  double loglik(const Vector& xi) const override;
  ModelEvaluation loglik_grad(const Vector& xi) const override;
  ModelEvaluation loglik_grad_hess(const Vector& xi) const override;

  /// gamma at the logits of the empirical cumulative category frequencies,
  /// theta at zero.
  Vector initial_point() const override;

  const OrdinalDataset& data() const { return data_; }
  const Matrix& design() const { return design_; }
  const std::vector<BasisMatrix>& bases() const { return bases_; }
  /// Number of linear predictors clamped to [-30, 30] so far (diagnostic).
  long clamp_events() const { return clamp_events_.load(); }

 private:
  OrdinalDataset data_;
  std::vector<BasisMatrix> bases_;
  Matrix design_;
  LatentPartition part_;
  PriorSpec prior_;
  mutable std::atomic<long> clamp_events_{0};
};

/// Simulated ordinal dataset: intercepts from given cumulative logits, smooth
/// additive effect per covariate.
struct POSimTerm {
  double lo = 0.0;
  double hi = 1.0;
  enum class Shape { none, linear, sine } shape = Shape::none;
  double amplitude = 0.0;

  double value(double x) const;  // centered over [lo, hi]
};

OrdinalDataset po_simulate(const Vector& gamma, const std::vector<POSimTerm>& terms,
                           Index n, std::uint64_t seed);

}  // namespace lps
