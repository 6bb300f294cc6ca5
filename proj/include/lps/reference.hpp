#pragma once

#include "lps/negbin.hpp"
#include "lps/prop_odds.hpp"

// Plain single-threaded reference implementations of the likelihood kernels.
// They favor clarity over speed and are kept as the comparison target for the
// blocked OpenMP kernels (tests) and the benchmark baseline.
namespace lps::ref {

double po_loglik(const Vector& gamma, const Vector& theta, const OrdinalDataset& data,
                 const Matrix& design);
ModelEvaluation po_grad_hess(const Vector& gamma, const Vector& theta,
                             const OrdinalDataset& data, const Matrix& design);

double nb_loglik(double log_gamma, const Vector& theta, const CountDataset& data,
                 const BasisMatrix& basis);
ModelEvaluation nb_grad_hess(double log_gamma, const Vector& theta, const CountDataset& data,
                             const BasisMatrix& basis);

}  // namespace lps::ref
