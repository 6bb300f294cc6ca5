#pragma once

#include <stdexcept>
#include <string>

namespace lps {

/// A likelihood / posterior evaluation produced NaN (overflow paths that are
/// merely out of support return -inf instead and never throw).
class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An iterative solver exhausted its iteration budget.
class NonConvergenceError : public std::runtime_error {
 public:
  NonConvergenceError(const std::string& what, double grad_norm, int iterations)
      : std::runtime_error(what), grad_norm(grad_norm), iterations(iterations) {}
  double grad_norm = 0.0;
  int iterations = 0;
};

/// The curvature at a candidate optimum is not negative definite.
class SaddlePointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A conditioning block is numerically singular.
class ConditioningError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An MCMC kernel could not reach a workable acceptance rate.
class StepSizeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lps
