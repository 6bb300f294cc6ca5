#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "lps/errors.hpp"
#include "lps/laplace.hpp"
#include "lps/prop_odds.hpp"
#include "lps/rng.hpp"
#include "support/gaussian_model.hpp"
#include "support/test_utils.hpp"

using namespace lps;
using namespace lps::testing;

namespace {

PropOddsModel po_fixture(Index n, std::uint64_t seed) {
  Vector cut(3);
  cut << -0.8, 0.4, 1.6;
  std::vector<POSimTerm> terms{{0.0, 1.0, POSimTerm::Shape::sine, 0.7},
                               {-1.0, 2.0, POSimTerm::Shape::linear, 0.5}};
  OrdinalDataset data = po_simulate(cut, terms, n, seed);
  std::vector<BasisMatrix> bases;
  for (Index j = 0; j < 2; ++j) {
    BasisSpec spec = BasisSpec::for_recentered_columns(data.X.col(j).minCoeff(),
                                                       data.X.col(j).maxCoeff(), 8);
    spec.recentered = false;
    bases.push_back(recenter_basis(evaluate_basis(spec, data.X.col(j))));
  }
  return PropOddsModel(std::move(data), std::move(bases));
}

}  // namespace

TEST_CASE("newton converges in one undamped step on a quadratic posterior") {
  const GaussianModel model = make_gaussian_fixture(40, 2, 6, 51);
  Vector lambda(1);
  lambda << 2.5;
  const LaplaceFit fit = find_mode(model, lambda, model.initial_point());
  CHECK(fit.converged);
  CHECK(fit.iterations == 1);
  CHECK(max_abs_diff(fit.mode, model.posterior_mean(lambda)) < 1e-10);
  CHECK(max_abs_diff(fit.covariance, model.posterior_cov(lambda)) < 1e-10);
  CHECK(fit.final_grad_norm < 1e-8);

  // log determinant from the factorization
  const Eigen::LDLT<Matrix> ldlt(model.posterior_cov(lambda));
  CHECK(fit.log_det_cov ==
        doctest::Approx(ldlt.vectorD().array().log().sum()).epsilon(1e-10));
}

TEST_CASE("po mode: gradient at the mode, perturbation and permutation stability") {
  const PropOddsModel model = po_fixture(260, 9);
  Vector lambda(2);
  lambda << 12.0, 30.0;
  const LaplaceFit fit = find_mode(model, lambda, model.initial_point());
  CHECK(fit.converged);
  CHECK(fit.final_grad_norm < 1e-8);

  // perturbed start lands on the same mode
  Rng rng(2);
  Vector start = model.initial_point();
  for (Index i = 0; i < start.size(); ++i) start[i] += 0.25 * rng.normal();
  const LaplaceFit fit2 = find_mode(model, lambda, start);
  CHECK(max_abs_diff(fit.mode, fit2.mode) < 1e-8);

  // observation order does not matter
  OrdinalDataset shuffled = model.data();
  std::vector<Index> perm(shuffled.y.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<Index>(i);
  for (std::size_t i = perm.size(); i > 1; --i)
    std::swap(perm[i - 1], perm[static_cast<std::size_t>(rng.next_u64() % i)]);
  OrdinalDataset reordered = shuffled;
  Matrix design_reordered(model.design().rows(), model.design().cols());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    reordered.y[i] = shuffled.y[static_cast<std::size_t>(perm[i])];
    reordered.X.row(static_cast<Index>(i)) = shuffled.X.row(perm[i]);
    design_reordered.row(static_cast<Index>(i)) = model.design().row(perm[i]);
  }
  std::vector<PenaltyMatrix> penalties = model.prior().penalty_templates;
  const PropOddsModel reordered_model(reordered, design_reordered, penalties);
  const LaplaceFit fit3 = find_mode(reordered_model, lambda, reordered_model.initial_point());
  CHECK(max_abs_diff(fit.mode, fit3.mode) < 1e-8);

  // negative definiteness of the likelihood theta block at the mode
  const ModelEvaluation like = model.loglik_grad_hess(fit.mode);
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(
      like.hessian.bottomRightCorner(model.partition().k2, model.partition().k2));
  CHECK(eig.eigenvalues().maxCoeff() < 1e-8);
}

TEST_CASE("find_mode error paths") {
  const PropOddsModel model = po_fixture(120, 4);
  Vector lambda(2);
  lambda << 5.0, 5.0;
  NewtonOptions opts;
  opts.max_iter = 1;
  CHECK_THROWS_AS(find_mode(model, lambda, model.initial_point(), opts),
                  NonConvergenceError);
  try {
    find_mode(model, lambda, model.initial_point(), opts);
  } catch (const NonConvergenceError& e) {
    CHECK(e.grad_norm > 0.0);
    CHECK(e.iterations >= 1);
  }
  Vector bad = model.initial_point();
  bad[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(find_mode(model, lambda, bad), std::invalid_argument);
}

TEST_CASE("laplace law: exactness, sampling, marginals") {
  const GaussianModel model = make_gaussian_fixture(50, 2, 5, 77);
  Vector lambda(1);
  lambda << 1.7;
  const LaplaceFit fit = find_mode(model, lambda, model.initial_point());
  const GaussianLaw law = laplace_conditional(fit);
  CHECK(max_abs_diff(law.mean(), model.posterior_mean(lambda)) < 1e-10);
  CHECK(max_abs_diff(law.cov(), model.posterior_cov(lambda)) < 1e-10);

  // empirical covariance of 1e5 draws
  Rng rng(123);
  const Index dim = law.mean().size();
  const Index m = 100000;
  Matrix draws(m, dim);
  for (Index i = 0; i < m; ++i) draws.row(i) = law.sample(rng).transpose();
  const Vector mean = draws.colwise().mean();
  Matrix centered = draws.rowwise() - mean.transpose();
  const Matrix emp_cov = centered.transpose() * centered / static_cast<double>(m - 1);
  const double rel_frob = (emp_cov - law.cov()).norm() / law.cov().norm();
  CHECK(rel_frob < 0.03);

  // single-coordinate marginal variance equals the diagonal entry
  const GaussianLaw marginal = law.marginal({3});
  CHECK(marginal.cov()(0, 0) == doctest::Approx(law.cov()(3, 3)).epsilon(1e-14));
  CHECK(marginal.mean()[0] == doctest::Approx(law.mean()[3]).epsilon(1e-14));

  // density: against the quadratic form written out directly
  Vector x = law.mean();
  x[0] += 0.7;
  const Matrix prec = law.cov().inverse();
  const Vector c = x - law.mean();
  static const double log_2pi = 1.8378770664093454836;
  const double direct = -0.5 * (dim * log_2pi - std::log(prec.determinant()) + c.dot(prec * c));
  CHECK(law.logpdf(x) == doctest::Approx(direct).epsilon(1e-10));

  LaplaceFit unconverged = fit;
  unconverged.converged = false;
  CHECK_THROWS_AS(laplace_conditional(unconverged), std::invalid_argument);
}

TEST_CASE("theta given gamma conditional") {
  const GaussianModel model = make_gaussian_fixture(60, 3, 6, 91);
  Vector lambda(1);
  lambda << 3.0;
  const LaplaceFit fit = find_mode(model, lambda, model.initial_point());
  const ThetaConditional cond = conditional_theta_given_gamma(fit);

  // at the mode the conditional mean is theta_hat
  CHECK(max_abs_diff(cond.mean_at(fit.gamma_hat()), fit.theta_hat()) < 1e-12);

  // conditioning reduces variance: Sigma_tt - Sigma_{t|g} is PSD
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(fit.sigma_tt - cond.cov);
  CHECK(eig.eigenvalues().minCoeff() > -1e-12);

  // against the full-precision route: conditional of a Gaussian
  Rng rng(8);
  Vector gamma = fit.gamma_hat();
  for (Index s = 0; s < gamma.size(); ++s) gamma[s] += 0.3 * rng.normal();
  const Matrix prec = model.posterior_precision(lambda);
  const Index k1 = 3, k2 = 6;
  const Matrix prec_tt = prec.bottomRightCorner(k2, k2);
  const Matrix prec_tg = prec.bottomLeftCorner(k2, k1);
  const Vector mean_direct =
      fit.theta_hat() - prec_tt.ldlt().solve(prec_tg * (gamma - fit.gamma_hat()));
  CHECK(max_abs_diff(cond.mean_at(gamma), mean_direct) < 1e-9);
  const Matrix cov_direct = prec_tt.ldlt().solve(Matrix::Identity(k2, k2));
  CHECK(max_abs_diff(cond.cov, cov_direct) < 1e-9);
}

TEST_CASE("independent blocks: conditional equals marginal") {
  // block-diagonal design decouples gamma and theta
  Rng rng(5);
  const Index n = 40, k1 = 2, k2 = 4;
  Matrix a = Matrix::Zero(2 * n, k1 + k2);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < k1; ++j) a(i, j) = rng.normal();
  for (Index i = n; i < 2 * n; ++i)
    for (Index j = k1; j < k1 + k2; ++j) a(i, j) = rng.normal();
  Vector y(2 * n);
  for (Index i = 0; i < 2 * n; ++i) y[i] = rng.normal();

  LatentPartition part;
  part.k1 = k1;
  part.k2 = k2;
  part.term_offsets.emplace_back(0, k2);
  PriorSpec prior;
  prior.gamma_mean = Vector::Zero(k1);
  prior.gamma_precision = 0.5 * Matrix::Identity(k1, k1);
  prior.penalty_templates.push_back(ridged_penalty_matrix(static_cast<int>(k2), 2, 1e-2));
  const GaussianModel model(a, y, 1.0, part, prior);

  Vector lambda(1);
  lambda << 2.0;
  const LaplaceFit fit = find_mode(model, lambda, model.initial_point());
  CHECK(fit.sigma_gt.cwiseAbs().maxCoeff() < 1e-12);
  const ThetaConditional cond = conditional_theta_given_gamma(fit);
  Vector gamma = fit.gamma_hat();
  gamma[0] += 1.3;
  CHECK(max_abs_diff(cond.mean_at(gamma), fit.theta_hat()) < 1e-10);
  CHECK(max_abs_diff(cond.cov, fit.sigma_tt) < 1e-10);
}

TEST_CASE("2x2 conditional by hand") {
  LaplaceFit fit;
  fit.partition.k1 = 1;
  fit.partition.k2 = 1;
  fit.partition.term_offsets.emplace_back(0, 1);
  fit.converged = true;
  fit.mode = Vector(2);
  fit.mode << 0.5, -1.0;
  fit.covariance = Matrix(2, 2);
  fit.covariance << 2.0, 0.6, 0.6, 1.5;
  fit.sigma_gg = fit.covariance.topLeftCorner(1, 1);
  fit.sigma_gt = fit.covariance.topRightCorner(1, 1);
  fit.sigma_tt = fit.covariance.bottomRightCorner(1, 1);
  fit.lambda = Vector::Ones(1);

  const ThetaConditional cond = conditional_theta_given_gamma(fit);
  Vector gamma(1);
  gamma << 1.5;  // one unit above the mode
  CHECK(cond.mean_at(gamma)[0] == doctest::Approx(-1.0 + 0.6 / 2.0).epsilon(1e-14));
  CHECK(cond.cov(0, 0) == doctest::Approx(1.5 - 0.36 / 2.0).epsilon(1e-14));
}
