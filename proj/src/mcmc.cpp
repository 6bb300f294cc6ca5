#include "lps/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "lps/csv.hpp"
#include "lps/errors.hpp"

namespace lps {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct MalaState {
  Vector xi;
  double value = -kInf;
  Vector grad;
};

// One Metropolis-adjusted Langevin update with a fixed preconditioner.
// `state` carries the cached target value and gradient at the current point.
bool mala_update(const Model& model, const Vector& lambda, MalaState& state,
                 double step_scale, const Matrix& precond, const Matrix& chol, Rng& rng) {
  const Index dim = state.xi.size();
  const double half_t2 = 0.5 * step_scale * step_scale;

  const Vector mean_fwd = state.xi + half_t2 * (precond * state.grad);
  Vector z(dim);
  for (Index i = 0; i < dim; ++i) z[i] = rng.normal();
  const Vector proposal = mean_fwd + step_scale * (chol * z);

  const ModelEvaluation prop_ev = posterior_grad(model, proposal, lambda);
  if (!std::isfinite(prop_ev.loglik)) return false;  // auto-reject

  const Vector mean_rev = proposal + half_t2 * (precond * prop_ev.gradient);
  const auto log_q = [&](const Vector& x, const Vector& mean) {
    const Vector r = chol.triangularView<Eigen::Lower>().solve(x - mean);
    return -0.5 * r.squaredNorm() / (step_scale * step_scale);
  };
  const double log_ratio = prop_ev.loglik - state.value + log_q(state.xi, mean_rev) -
                           log_q(proposal, mean_fwd);
  if (!std::isfinite(log_ratio)) return false;
  if (std::log(rng.uniform()) < log_ratio) {
    state.xi = proposal;
    state.value = prop_ev.loglik;
    state.grad = prop_ev.gradient;
    return true;
  }
  return false;
}

}  // namespace

void ChainConfig::validate() const {
  if (n_iter < 1 || burn_in < 0 || burn_in >= n_iter)
    throw std::invalid_argument("ChainConfig: need 0 <= burn_in < n_iter");
  if (thin < 1) throw std::invalid_argument("ChainConfig: thin must be >= 1");
  if (!(step_scale > 0.0)) throw std::invalid_argument("ChainConfig: step_scale must be > 0");
}

double gibbs_lambda(const Vector& theta_j, const PenaltyMatrix& P, double a, double b,
                    Rng& rng) {
  const double quad = theta_j.dot(P.matrix * theta_j);
  return rng.gamma(a + 0.5 * P.rank, b + 0.5 * quad);
}

std::pair<Vector, bool> mala_step(const Model& model, const Vector& xi, const Vector& lambda,
                                  double step_scale, const Matrix& precond, Rng& rng) {
  const Eigen::LLT<Matrix> llt(precond);
  if (llt.info() != Eigen::Success)
    throw ConditioningError("mala_step: preconditioner is not positive definite");
  const Matrix chol = llt.matrixL();

  MalaState state;
  state.xi = xi;
  const ModelEvaluation ev = posterior_grad(model, xi, lambda);
  if (!std::isfinite(ev.loglik))
    throw std::invalid_argument("mala_step: current state has non-finite target density");
  state.value = ev.loglik;
  state.grad = ev.gradient;
  const bool accepted = mala_update(model, lambda, state, step_scale, precond, chol, rng);
  return {state.xi, accepted};
}

ChainOutput run_chain(const Model& model, const ChainConfig& config) {
  config.validate();
  const LatentPartition& part = model.partition();
  const Index dim = part.dim();
  const Index terms = part.n_terms();
  const bool sample_lambda = !config.fixed_lambda.has_value();

  Vector lambda = sample_lambda ? Vector(Vector::Ones(terms)) : *config.fixed_lambda;

  // Laplace pre-fit: starting point and the (fixed) proposal preconditioner.
  const LaplaceFit prefit = find_mode(model, lambda, model.initial_point());
  const Matrix precond = prefit.covariance;
  const Eigen::LLT<Matrix> llt(precond);
  if (llt.info() != Eigen::Success)
    throw ConditioningError("run_chain: preconditioner is not positive definite");
  const Matrix chol = llt.matrixL();

  Rng rng(config.seed);
  MalaState state;
  state.xi = prefit.mode;
  {
    const ModelEvaluation ev = posterior_grad(model, state.xi, lambda);
    state.value = ev.loglik;
    state.grad = ev.gradient;
  }

  double log_tau = std::log(config.step_scale);
  const long retained = (config.n_iter - config.burn_in + config.thin - 1) / config.thin;
  ChainOutput out;
  out.draws.resize(retained, dim);
  if (sample_lambda) out.lambda_draws.resize(retained, terms);

  long kept = 0;
  long accepted_post = 0;
  for (long t = 0; t < config.n_iter; ++t) {
    if (sample_lambda) {
      for (Index j = 0; j < terms; ++j) {
        const auto& [start, len] = part.term_offsets[static_cast<std::size_t>(j)];
        lambda[j] = gibbs_lambda(state.xi.segment(part.k1 + start, len),
                                 model.prior().penalty_templates[static_cast<std::size_t>(j)],
                                 model.prior().lambda_a, model.prior().lambda_b, rng);
      }
      // target changed; refresh the cached value and gradient
      const ModelEvaluation ev = posterior_grad(model, state.xi, lambda);
      state.value = ev.loglik;
      state.grad = ev.gradient;
    }

    const double tau = std::exp(log_tau);
    const bool accepted = mala_update(model, lambda, state, tau, precond, chol, rng);

    if (t < config.burn_in) {
      // Robbins-Monro drift toward the target acceptance rate, burn-in only.
      const double gain = 1.0 / std::pow(static_cast<double>(t + 10), 0.6);
      log_tau += gain * ((accepted ? 1.0 : 0.0) - config.target_acceptance);
    } else {
      if (accepted) ++accepted_post;
      const long since = t - config.burn_in;
      if (since % config.thin == 0) {
        out.draws.row(kept) = state.xi.transpose();
        if (sample_lambda) out.lambda_draws.row(kept) = lambda.transpose();
        ++kept;
      }
    }
  }

  out.acceptance_rate =
      static_cast<double>(accepted_post) / static_cast<double>(config.n_iter - config.burn_in);
  out.step_scale_final = std::exp(log_tau);
  if (out.acceptance_rate < 0.01)
    throw StepSizeError("run_chain: acceptance rate below 1% after tuning");

  out.ess.resize(dim);
  for (Index c = 0; c < dim; ++c) out.ess[c] = effective_sample_size(out.draws.col(c));
  return out;
}

double effective_sample_size(const Vector& chain) {
  const Index n = chain.size();
  if (n < 4) return static_cast<double>(n);
  const double mean = chain.mean();
  const Index max_lag = n / 2;
  Vector cov(max_lag + 1);
  for (Index k = 0; k <= max_lag; ++k) {
    double s = 0.0;
    for (Index i = 0; i + k < n; ++i) s += (chain[i] - mean) * (chain[i + k] - mean);
    cov[k] = s / static_cast<double>(n);
  }
  if (!(cov[0] > 0.0)) return static_cast<double>(n);

  // Initial positive sequence: accumulate paired autocorrelations while the
  // pair sums stay positive.
  double tau = -1.0;
  for (Index m = 0; 2 * m + 1 <= max_lag; ++m) {
    const double pair = (cov[2 * m] + cov[2 * m + 1]) / cov[0];
    if (pair <= 0.0) break;
    tau += 2.0 * pair;
  }
  tau = std::max(tau, 1e-10);
  return static_cast<double>(n) / tau;
}

double potential_scale_reduction(const std::vector<Vector>& chains) {
  std::vector<Vector> halves;
  for (const Vector& c : chains) {
    const Index half = c.size() / 2;
    halves.push_back(c.head(half));
    halves.push_back(c.tail(half));
  }
  const auto m = static_cast<double>(halves.size());
  const double len = static_cast<double>(halves.front().size());

  double grand = 0.0;
  std::vector<double> means;
  for (const Vector& h : halves) {
    means.push_back(h.mean());
    grand += h.mean();
  }
  grand /= m;

  double w = 0.0, b = 0.0;
  for (std::size_t i = 0; i < halves.size(); ++i) {
    const Vector& h = halves[i];
    w += (h.array() - means[i]).square().sum() / (len - 1.0);
    b += (means[i] - grand) * (means[i] - grand);
  }
  w /= m;
  b *= len / (m - 1.0);
  const double var_plus = (len - 1.0) / len * w + b / len;
  return std::sqrt(var_plus / w);
}

double ks_distance(std::vector<double> draws, const std::function<double(double)>& cdf) {
  std::sort(draws.begin(), draws.end());
  const double n = static_cast<double>(draws.size());
  double sup = 0.0;
  for (std::size_t i = 0; i < draws.size(); ++i) {
    const double f = cdf(draws[i]);
    sup = std::max(sup, std::abs(f - static_cast<double>(i) / n));
    sup = std::max(sup, std::abs(f - static_cast<double>(i + 1) / n));
  }
  return sup;
}

void ChainOutput::write_csv(const std::string& path,
                            const std::vector<std::string>& names) const {
  if (static_cast<Index>(names.size()) != draws.cols())
    throw std::invalid_argument("ChainOutput::write_csv: one name per xi column expected");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("ChainOutput::write_csv: cannot open " + path);
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i) out << ',';
    out << names[i];
  }
  for (Index j = 0; j < lambda_draws.cols(); ++j) out << ",lambda_" << (j + 1);
  out << '\n';
  for (Index r = 0; r < draws.rows(); ++r) {
    for (Index c = 0; c < draws.cols(); ++c) {
      if (c) out << ',';
      out << format_double(draws(r, c));
    }
    for (Index j = 0; j < lambda_draws.cols(); ++j)
      out << ',' << format_double(lambda_draws(r, j));
    out << '\n';
  }
}

}  // namespace lps
