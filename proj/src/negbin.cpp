#include "lps/negbin.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "lps/parallel.hpp"
#include "lps/rng.hpp"
#include "lps/special_functions.hpp"

namespace lps {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLinpredOverflow = 500.0;  // exp() beyond this wrecks everything downstream

struct NbCoefs {
  Vector du;    // d loglik / d u_i (u = linear predictor)
  Vector duu;   // second derivative in u
  Vector dug;   // cross derivative (u, log gamma)
  double dg = 0.0;
  double dgg = 0.0;
};

struct NbPass {
  double loglik = 0.0;
  double dg = 0.0;
  double dgg = 0.0;
  bool valid = true;
};

NbPass nb_pass(const CountDataset& data, double log_gamma, const Vector& u,
               NbCoefs* coefs, bool need_hessian) {
  const Index n = data.n();
  const double g = std::exp(log_gamma);
  const double lgamma_g = std::lgamma(g);
  const double psi_g = coefs ? digamma(g) : 0.0;
  const double psi1_g = (coefs && need_hessian) ? trigamma(g) : 0.0;
  if (coefs) {
    coefs->du.resize(n);
    if (need_hessian) {
      coefs->duu.resize(n);
      coefs->dug.resize(n);
    }
  }
  return par::blocked_reduce<NbPass>(
      n, NbPass{},
      [&](NbPass& part, std::ptrdiff_t lo, std::ptrdiff_t hi) {
        double sum = 0.0, comp = 0.0;  // Kahan-compensated block sum
        for (std::ptrdiff_t i = lo; i < hi; ++i) {
          if (!(u[i] < kLinpredOverflow)) {
            part.valid = false;
            part.loglik = -kInf;
            continue;
          }
          const double y = static_cast<double>(data.y[static_cast<std::size_t>(i)]);
          const double mu = std::exp(u[i]);
          const double denom = g + mu;
          const double log_denom = std::log(denom);
          {
            const double term = std::lgamma(y + g) - lgamma_g - std::lgamma(y + 1.0) +
                                g * (log_gamma - log_denom) + y * (u[i] - log_denom);
            const double yk = term - comp;
            const double tk = sum + yk;
            comp = (tk - sum) - yk;
            sum = tk;
          }
          if (!coefs) continue;
          // d/d gamma, then chain rule to the log scale
          const double h = digamma(y + g) - psi_g + (log_gamma - log_denom) +
                           (mu - y) / denom;
          part.dg += g * h;
          coefs->du[i] = g * (y - mu) / denom;
          if (need_hessian) {
            const double hp = trigamma(y + g) - psi1_g + mu / (g * denom) -
                              (mu - y) / (denom * denom);
            part.dgg += g * h + g * g * hp;
            coefs->duu[i] = -mu * g * (g + y) / (denom * denom);
            coefs->dug[i] = g * mu * (y - mu) / (denom * denom);
          }
        }
        if (part.valid) part.loglik = sum;
      },
      [](NbPass& total, const NbPass& part) {
        total.loglik += part.loglik;
        total.dg += part.dg;
        total.dgg += part.dgg;
        total.valid = total.valid && part.valid;
      });
}

}  // namespace

void CountDataset::validate() const {
  if (y.empty()) throw std::invalid_argument("CountDataset: empty response");
  if (y.size() != x.size()) throw std::invalid_argument("CountDataset: y and x lengths differ");
  for (long yi : y)
    if (yi < 0) throw std::invalid_argument("CountDataset: counts must be nonnegative");
}

double nb_loglik(double log_gamma, const Vector& theta, const CountDataset& data,
                 const BasisMatrix& basis) {
  const Vector u = basis.values * theta;
  const NbPass pass = nb_pass(data, log_gamma, u, nullptr, false);
  return pass.valid ? pass.loglik : -kInf;
}

ModelEvaluation nb_grad_hess(double log_gamma, const Vector& theta, const CountDataset& data,
                             const BasisMatrix& basis) {
  const Index k = basis.values.cols();
  const Index n = data.n();
  ModelEvaluation ev;
  ev.gradient = Vector::Zero(1 + k);
  ev.hessian = Matrix::Zero(1 + k, 1 + k);

  const Vector u = basis.values * theta;
  NbCoefs coefs;
  const NbPass pass = nb_pass(data, log_gamma, u, &coefs, true);
  if (!pass.valid) {
    ev.loglik = -kInf;
    return ev;
  }
  ev.loglik = pass.loglik;
  ev.gradient[0] = pass.dg;
  ev.hessian(0, 0) = pass.dgg;

  struct ThetaPartial {
    Vector grad, cross;
    Matrix hess;
  };
  ThetaPartial init{Vector::Zero(k), Vector::Zero(k), Matrix::Zero(k, k)};
  ThetaPartial acc = par::blocked_reduce<ThetaPartial>(
      n, init,
      [&](ThetaPartial& part, std::ptrdiff_t lo, std::ptrdiff_t hi) {
        const auto rows = basis.values.middleRows(lo, hi - lo);
        part.grad.noalias() += rows.transpose() * coefs.du.segment(lo, hi - lo);
        part.cross.noalias() += rows.transpose() * coefs.dug.segment(lo, hi - lo);
        part.hess.noalias() +=
            rows.transpose() * coefs.duu.segment(lo, hi - lo).asDiagonal() * rows;
      },
      [](ThetaPartial& total, const ThetaPartial& part) {
        total.grad += part.grad;
        total.cross += part.cross;
        total.hess += part.hess;
      });
  ev.gradient.tail(k) = acc.grad;
  ev.hessian.block(0, 1, 1, k) = acc.cross.transpose();
  ev.hessian.block(1, 0, k, 1) = acc.cross;
  ev.hessian.bottomRightCorner(k, k) = acc.hess;
  return ev;
}

NegBinModel::NegBinModel(CountDataset data, BasisMatrix basis, NegBinOptions opts)
    : data_(std::move(data)), basis_(std::move(basis)), opts_(opts) {
  data_.validate();
  if (basis_.values.rows() != data_.n())
    throw std::invalid_argument("NegBinModel: basis rows != n");
  const Index k = basis_.values.cols();
  part_.k1 = 1;
  part_.k2 = k;
  part_.term_offsets.emplace_back(0, k);
  part_.validate();

  prior_.gamma_mean = Vector::Zero(1);
  prior_.gamma_precision = Matrix::Zero(1, 1);  // overdispersion prior handled below
  prior_.penalty_templates.push_back(
      ridged_penalty_matrix(static_cast<int>(k), opts.penalty_order, opts.ridge));
  prior_.lambda_a = opts.lambda_a;
  prior_.lambda_b = opts.lambda_b;
}

double NegBinModel::loglik(const Vector& xi) const {
  return nb_loglik(xi[0], xi.tail(part_.k2), data_, basis_);
}

ModelEvaluation NegBinModel::loglik_grad(const Vector& xi) const {
  const Index k = part_.k2;
  ModelEvaluation ev;
  ev.gradient = Vector::Zero(1 + k);
  const Vector u = basis_.values * xi.tail(k);
  NbCoefs coefs;
  const NbPass pass = nb_pass(data_, xi[0], u, &coefs, false);
  if (!pass.valid) {
    ev.loglik = -kInf;
    return ev;
  }
  ev.loglik = pass.loglik;
  ev.gradient[0] = pass.dg;
  ev.gradient.tail(k) = par::blocked_reduce<Vector>(
      data_.n(), Vector(Vector::Zero(k)),
      [&](Vector& part, std::ptrdiff_t lo, std::ptrdiff_t hi) {
        part.noalias() +=
            basis_.values.middleRows(lo, hi - lo).transpose() * coefs.du.segment(lo, hi - lo);
      },
      [](Vector& total, const Vector& part) { total += part; });
  return ev;
}

ModelEvaluation NegBinModel::loglik_grad_hess(const Vector& xi) const {
  return nb_grad_hess(xi[0], xi.tail(part_.k2), data_, basis_);
}

double NegBinModel::extra_log_prior(const Vector& xi) const {
  // Gamma(a, b) prior on the overdispersion, log-scale Jacobian included:
  // log p(log gamma) = a log gamma - b gamma + const.
  const double lg = xi[0];
  return opts_.gamma_prior_a * lg - opts_.gamma_prior_b * std::exp(lg);
}

void NegBinModel::add_extra_log_prior_derivs(const Vector& xi, Vector& grad,
                                             Matrix& hess) const {
  const double g = std::exp(xi[0]);
  grad[0] += opts_.gamma_prior_a - opts_.gamma_prior_b * g;
  if (hess.size() > 0) hess(0, 0) -= opts_.gamma_prior_b * g;
}

Vector NegBinModel::initial_point() const {
  const Index k = part_.k2;
  const Index n = data_.n();
  Vector logy(n);
  double mean = 0.0;
  for (Index i = 0; i < n; ++i) {
    logy[i] = std::log(static_cast<double>(data_.y[static_cast<std::size_t>(i)]) + 0.5);
    mean += static_cast<double>(data_.y[static_cast<std::size_t>(i)]);
  }
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (long yi : data_.y) {
    const double d = static_cast<double>(yi) - mean;
    var += d * d;
  }
  var /= std::max<double>(1.0, static_cast<double>(n - 1));

  Matrix gram = basis_.values.transpose() * basis_.values;
  gram += 1e-6 * Matrix::Identity(k, k);
  const Vector theta0 = gram.ldlt().solve(basis_.values.transpose() * logy);

  double gamma0 = 10.0;
  if (var > mean && mean > 0.0) gamma0 = mean * mean / (var - mean);
  gamma0 = std::min(std::max(gamma0, 0.1), 100.0);

  Vector xi(1 + k);
  xi[0] = std::log(gamma0);
  xi.tail(k) = theta0;
  return xi;
}

CountDataset nb_simulate_mu(const std::vector<double>& mu, const std::vector<double>& x,
                            double gamma_true, std::uint64_t seed) {
  if (!(gamma_true > 0.0))
    throw std::invalid_argument("nb_simulate: overdispersion must be positive");
  if (mu.size() != x.size())
    throw std::invalid_argument("nb_simulate: mu and x lengths differ");
  CountDataset data;
  data.x = x;
  data.y.resize(mu.size());
  Rng rng(seed);
  for (std::size_t i = 0; i < mu.size(); ++i) {
    // Gamma-Poisson mixture: rate ~ Gamma(gamma, gamma/mu), y ~ Poisson(rate).
    const double rate = rng.gamma(gamma_true, gamma_true / mu[i]);
    data.y[i] = rng.poisson(rate);
  }
  return data;
}

CountDataset nb_simulate(const Vector& theta_true, double gamma_true, Index n,
                         std::uint64_t seed, const BasisSpec& spec) {
  Vector x(n);
  for (Index i = 0; i < n; ++i) x[i] = static_cast<double>(i + 1);
  const BasisMatrix basis = evaluate_basis(spec, x);
  const Vector u = basis.values * theta_true;
  std::vector<double> mu(static_cast<std::size_t>(n));
  std::vector<double> xv(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    mu[static_cast<std::size_t>(i)] = std::exp(u[i]);
    xv[static_cast<std::size_t>(i)] = x[i];
  }
  return nb_simulate_mu(mu, xv, gamma_true, seed);
}

std::vector<double> nb_fixture_mean(Index n) {
  std::vector<double> mu(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const double t = static_cast<double>(i + 1) / static_cast<double>(n);
    mu[static_cast<std::size_t>(i)] =
        std::exp(3.0 + 0.8 * std::sin(2.0 * M_PI * t) - 2.4 * (t - 0.5) * (t - 0.5));
  }
  return mu;
}

}  // namespace lps
