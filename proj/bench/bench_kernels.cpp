#include <benchmark/benchmark.h>

#include "lps/parallel.hpp"
#include "lps/prop_odds.hpp"
#include "lps/negbin.hpp"
#include "lps/reference.hpp"
#include "lps/rng.hpp"
#include "lps/skew_posterior.hpp"
#include "lps/laplace.hpp"

namespace {

using namespace lps;

struct POFixtureData {
  OrdinalDataset data;
  Matrix design;
  Vector gamma, theta;
};

POFixtureData make_po_fixture(Index n) {
  Vector cut(4);
  cut << 0.2, 1.75, 2.67, 4.5;
  std::vector<POSimTerm> terms{{0.0, 1.0, POSimTerm::Shape::sine, 0.8},
                               {0.0, 1.0, POSimTerm::Shape::linear, 0.5}};
  POFixtureData fx;
  fx.data = po_simulate(cut, terms, n, 99);
  std::vector<BasisMatrix> bases;
  for (int j = 0; j < 2; ++j) {
    BasisSpec spec = BasisSpec::for_recentered_columns(0.0, 1.0, 10);
    spec.recentered = false;
    bases.push_back(recenter_basis(evaluate_basis(spec, fx.data.X.col(j))));
  }
  fx.design = concat_designs(bases);
  fx.gamma = cut;
  fx.theta = Vector::Zero(fx.design.cols());
  Rng rng(1);
  for (Index c = 0; c < fx.theta.size(); ++c) fx.theta[c] = 0.1 * rng.normal();
  return fx;
}

void BM_po_grad_hess_reference(benchmark::State& state) {
  const auto fx = make_po_fixture(state.range(0));
  for (auto _ : state) {
    auto ev = ref::po_grad_hess(fx.gamma, fx.theta, fx.data, fx.design);
    benchmark::DoNotOptimize(ev.loglik);
  }
}

void BM_po_grad_hess_blocked(benchmark::State& state) {
  const auto fx = make_po_fixture(state.range(0));
  par::set_threads(static_cast<int>(state.range(1)));
  for (auto _ : state) {
    auto ev = po_grad_hess(fx.gamma, fx.theta, fx.data, fx.design);
    benchmark::DoNotOptimize(ev.loglik);
  }
}

struct NBFixtureData {
  CountDataset data;
  BasisMatrix basis;
  Vector theta;
};

NBFixtureData make_nb_fixture(Index n) {
  NBFixtureData fx;
  std::vector<double> x(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] = static_cast<double>(i + 1);
  fx.data = nb_simulate_mu(nb_fixture_mean(n), x, 6.0, 42);
  const BasisSpec spec = BasisSpec::for_raw_columns(1.0, static_cast<double>(n), 15);
  fx.basis = evaluate_basis(
      spec, Eigen::Map<const Vector>(fx.data.x.data(), static_cast<Index>(n)));
  Matrix gram = fx.basis.values.transpose() * fx.basis.values;
  gram += 1e-6 * Matrix::Identity(15, 15);
  Vector logy(n);
  for (Index i = 0; i < n; ++i)
    logy[i] = std::log(static_cast<double>(fx.data.y[static_cast<std::size_t>(i)]) + 0.5);
  fx.theta = gram.ldlt().solve(fx.basis.values.transpose() * logy);
  return fx;
}

void BM_nb_grad_hess_reference(benchmark::State& state) {
  const auto fx = make_nb_fixture(state.range(0));
  for (auto _ : state) {
    auto ev = ref::nb_grad_hess(std::log(6.0), fx.theta, fx.data, fx.basis);
    benchmark::DoNotOptimize(ev.loglik);
  }
}

void BM_nb_grad_hess_blocked(benchmark::State& state) {
  const auto fx = make_nb_fixture(state.range(0));
  par::set_threads(static_cast<int>(state.range(1)));
  for (auto _ : state) {
    auto ev = nb_grad_hess(std::log(6.0), fx.theta, fx.data, fx.basis);
    benchmark::DoNotOptimize(ev.loglik);
  }
}

void BM_joint_sampler(benchmark::State& state) {
  const auto fx = make_po_fixture(2000);
  std::vector<PenaltyMatrix> penalties{penalty_matrix(10, 2), penalty_matrix(10, 2)};
  PropOddsModel m2(fx.data, fx.design, penalties);
  Vector lambda(2);
  lambda << 20.0, 20.0;
  const LaplaceFit fit = find_mode(m2, lambda, m2.initial_point());
  const SkewCorrectedPosterior posterior = build_skew_posterior(fit, m2, lambda);
  par::set_threads(static_cast<int>(state.range(1)));
  for (auto _ : state) {
    Matrix draws = posterior.sample_joint(state.range(0), 12345);
    benchmark::DoNotOptimize(draws(0, 0));
  }
}

}  // namespace

BENCHMARK(BM_po_grad_hess_reference)->Arg(50000);
BENCHMARK(BM_po_grad_hess_blocked)->Args({50000, 1})->Args({50000, 2})->Args({50000, 4});
BENCHMARK(BM_nb_grad_hess_reference)->Arg(50000);
BENCHMARK(BM_nb_grad_hess_blocked)->Args({50000, 1})->Args({50000, 2})->Args({50000, 4});
BENCHMARK(BM_joint_sampler)->Args({100000, 1})->Args({100000, 4});

BENCHMARK_MAIN();
