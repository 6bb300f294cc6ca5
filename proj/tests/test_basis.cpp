#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "lps/basis.hpp"
#include "lps/rng.hpp"

using namespace lps;

namespace {

// Textbook Cox-de Boor recursion, evaluated one basis function at a time.
double cox_de_boor(const std::vector<double>& t, int i, int p, double x) {
  if (p == 0) return (t[i] <= x && x < t[i + 1]) ? 1.0 : 0.0;
  double left = 0.0, right = 0.0;
  if (t[i + p] > t[i]) left = (x - t[i]) / (t[i + p] - t[i]) * cox_de_boor(t, i, p - 1, x);
  if (t[i + p + 1] > t[i + 1])
    right = (t[i + p + 1] - x) / (t[i + p + 1] - t[i + 1]) * cox_de_boor(t, i + 1, p - 1, x);
  return left + right;
}

}  // namespace

TEST_CASE("raw basis: column count and partition of unity") {
  BasisSpec spec{0.0, 1.0, 10, 3, false};
  CHECK(spec.raw_columns() == 13);

  Vector left(1);
  left[0] = 0.0;
  const BasisMatrix at_min = evaluate_basis(spec, left);
  CHECK(at_min.values.row(0).sum() == doctest::Approx(1.0).epsilon(1e-14));

  Rng rng(5);
  Vector points(1000);
  for (Index i = 0; i < points.size(); ++i) points[i] = rng.uniform();
  const BasisMatrix basis = evaluate_basis(spec, points);
  for (Index i = 0; i < points.size(); ++i) {
    CHECK(std::abs(basis.values.row(i).sum() - 1.0) < 1e-12);
    CHECK(basis.values.row(i).minCoeff() >= 0.0);
  }
}

TEST_CASE("raw basis matches the recursive oracle") {
  BasisSpec spec{-2.0, 3.0, 7, 3, false};
  const std::vector<double> knots = spec.knots();
  Rng rng(17);
  Vector points(50);
  for (Index i = 0; i < points.size(); ++i) points[i] = -2.0 + 5.0 * rng.uniform();
  const BasisMatrix basis = evaluate_basis(spec, points);
  for (Index i = 0; i < points.size(); ++i)
    for (int c = 0; c < spec.raw_columns(); ++c)
      CHECK(std::abs(basis.values(i, c) - cox_de_boor(knots, c, 3, points[i])) < 1e-12);
}

TEST_CASE("evaluate_basis rejects out-of-domain points") {
  BasisSpec spec{0.0, 1.0, 8, 3, false};
  Vector points(1);
  points[0] = 1.5;
  CHECK_THROWS_WITH_AS(evaluate_basis(spec, points),
                       doctest::Contains("1.5"), std::domain_error);
  points[0] = -0.01;
  CHECK_THROWS_AS(evaluate_basis(spec, points), std::domain_error);
}

TEST_CASE("recentered columns integrate to zero (trapezoid oracle)") {
  BasisSpec spec{1.0, 4.0, 8, 3, false};  // 11 raw -> 10 recentered
  const Index n = 100000;
  Vector grid(n);
  for (Index i = 0; i < n; ++i)
    grid[i] = 1.0 + 3.0 * static_cast<double>(i) / static_cast<double>(n - 1);
  const BasisMatrix recentered = recenter_basis(evaluate_basis(spec, grid));
  CHECK(recentered.values.cols() == 10);
  CHECK(recentered.spec.recentered);
  CHECK(recentered.spec.columns() == 10);

  const double h = 3.0 / static_cast<double>(n - 1);
  for (Index c = 0; c < recentered.values.cols(); ++c) {
    double integral = 0.5 * (recentered.values(0, c) + recentered.values(n - 1, c));
    for (Index i = 1; i + 1 < n; ++i) integral += recentered.values(i, c);
    integral *= h;
    CHECK(std::abs(integral) < 1e-8);
  }

  CHECK_THROWS_AS(recenter_basis(recentered), std::invalid_argument);
}

TEST_CASE("least-squares fit of a constant in the recentered basis is zero") {
  BasisSpec spec{0.0, 1.0, 8, 3, false};
  const Index n = 20001;
  Vector grid(n);
  for (Index i = 0; i < n; ++i) grid[i] = static_cast<double>(i) / static_cast<double>(n - 1);
  const BasisMatrix basis = recenter_basis(evaluate_basis(spec, grid));

  const double c = 2.7;
  const Vector target = Vector::Constant(n, c);
  // least squares in L2 via trapezoid weights
  Vector w = Vector::Ones(n);
  w[0] = w[n - 1] = 0.5;
  const Matrix gram = basis.values.transpose() * w.asDiagonal() * basis.values;
  const Vector coef = gram.ldlt().solve(basis.values.transpose() * (w.asDiagonal() * target));
  const Vector fitted = basis.values * coef;
  // centering removes constants: the projection of a constant is ~zero
  CHECK(fitted.cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("penalty matrix quadratic forms and rank") {
  const PenaltyMatrix p = penalty_matrix(4, 2);
  CHECK(p.rank == 2);
  Vector linear(4);
  linear << 1, 2, 3, 4;
  CHECK(linear.dot(p.matrix * linear) == doctest::Approx(0.0).epsilon(1e-14));
  Vector spike(4);
  spike << 1, 0, 0, 0;
  // expanding sum (th_{l+2} - 2 th_{l+1} + th_l)^2 by hand gives 1
  CHECK(spike.dot(p.matrix * spike) == doctest::Approx(1.0));

  const PenaltyMatrix p10 = penalty_matrix(10, 2);
  const Eigen::JacobiSVD<Matrix> svd(p10.matrix);
  int rank = 0;
  for (Index i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()[i] > 1e-10) ++rank;
  CHECK(rank == 8);
  CHECK((p10.matrix - p10.matrix.transpose()).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(penalty_matrix(4, 4), std::invalid_argument);
  CHECK_THROWS_AS(penalty_matrix(4, 0), std::invalid_argument);
}

TEST_CASE("penalty null space is exactly the low-order index polynomials") {
  const int L = 9, r = 2;
  const PenaltyMatrix p = penalty_matrix(L, r);
  for (int degree = 0; degree < 3; ++degree) {
    Vector mono(L);
    for (int l = 0; l < L; ++l) mono[l] = std::pow(static_cast<double>(l + 1), degree);
    const double quad = mono.dot(p.matrix * mono);
    if (degree < r) {
      CHECK(std::abs(quad) < 1e-9);
    } else {
      CHECK(quad > 1.0);
    }
  }
}

TEST_CASE("projected penalty: null space is the centered trend only") {
  const int L = 8;
  const PenaltyMatrix p = projected_penalty_matrix(L, 2);
  CHECK(p.rank == L - 1);

  // coefficient-flat direction is penalized...
  Vector flat = Vector::Ones(L);
  CHECK(flat.dot(p.matrix * flat) > 0.5);
  // ...while the trend vanishing at the dropped index is free
  Vector trend(L);
  for (int l = 0; l < L; ++l) trend[l] = static_cast<double>(l + 1) - (L + 1);
  CHECK(std::abs(trend.dot(p.matrix * trend)) < 1e-10);

  const Eigen::JacobiSVD<Matrix> svd(p.matrix);
  int rank = 0;
  for (Index i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()[i] > 1e-10) ++rank;
  CHECK(rank == L - 1);
}

TEST_CASE("ridged penalty is full rank") {
  const PenaltyMatrix p = ridged_penalty_matrix(6, 2, 1e-6);
  CHECK(p.rank == 6);
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(p.matrix);
  CHECK(eig.eigenvalues().minCoeff() >= 1e-6 - 1e-12);
}

TEST_CASE("spec helpers") {
  const BasisSpec by_l = BasisSpec::for_recentered_columns(0.0, 2.0, 10);
  CHECK(by_l.columns() == 10);
  CHECK(by_l.raw_columns() == 11);
  const BasisSpec raw = BasisSpec::for_raw_columns(0.0, 2.0, 15);
  CHECK(raw.columns() == 15);
  CHECK_THROWS_AS(BasisSpec::for_recentered_columns(0.0, 1.0, 2), std::invalid_argument);
  CHECK_THROWS_AS((BasisSpec{1.0, 0.0, 5, 3, false}).validate(), std::invalid_argument);
}
