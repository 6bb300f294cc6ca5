#include "lps/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "lps/errors.hpp"
#include "lps/negbin.hpp"
#include "lps/parallel.hpp"
#include "lps/special_functions.hpp"

namespace lps {

namespace {

// fixed offsets deriving the per-purpose streams from the user seed
constexpr std::uint64_t kSeedCurves = 0x63757276u;
constexpr std::uint64_t kSeedGamma = 0x67616d6du;
constexpr std::uint64_t kSeedChain = 0x636861696eu;
constexpr Index kCurveGrid = 101;
constexpr Index kCurveDraws = 10000;
constexpr Index kComponentDraws = 10000;

std::vector<long> integer_column(const CsvTable& data, const std::string& name) {
  const auto& raw = data.column(name);
  std::vector<long> values(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!std::isfinite(raw[i]) || raw[i] != std::floor(raw[i]))
      throw CsvParseError("column '" + name + "' must hold integers (row " +
                          std::to_string(i + 1) + ")");
    values[i] = static_cast<long>(raw[i]);
  }
  return values;
}

nlohmann::ordered_json vector_json(const Vector& v) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

std::vector<std::string> gamma_names(const FitConfig& config, Index k1) {
  std::vector<std::string> names;
  if (config.model == ModelKind::negbin) {
    names.emplace_back("log_gamma");
  } else {
    for (Index s = 0; s < k1; ++s) names.push_back("gamma_" + std::to_string(s + 1));
  }
  return names;
}

nlohmann::ordered_json summary_entry(double mean, double sd, double skew, double q025,
                                     double q50, double q975) {
  return {{"mean", mean}, {"sd", sd},   {"skewness", skew},
          {"q2.5", q025}, {"q50", q50}, {"q97.5", q975}};
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << text;
}

}  // namespace

double quantile_type7(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("quantile_type7: empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + (h - std::floor(h)) * (values[lo + 1] - values[lo]);
}

std::shared_ptr<Model> build_model(const FitConfig& config, const CsvTable& data) {
  if (!data.has_column(config.response))
    throw ConfigError("data: missing response column '" + config.response + "'");
  for (const auto& cov : config.covariates)
    if (!data.has_column(cov.name))
      throw ConfigError("data: missing covariate column '" + cov.name + "'");

  if (config.model == ModelKind::negbin) {
    const auto& cov = config.covariates.front();
    CountDataset dataset;
    dataset.y = integer_column(data, config.response);
    dataset.x = data.column(cov.name);
    dataset.validate();
    const auto [lo, hi] = std::minmax_element(dataset.x.begin(), dataset.x.end());
    const BasisSpec spec = BasisSpec::for_raw_columns(*lo, *hi, cov.L);
    const BasisMatrix basis =
        evaluate_basis(spec, Eigen::Map<const Vector>(dataset.x.data(),
                                                      static_cast<Index>(dataset.x.size())));
    NegBinOptions opts;
    opts.lambda_a = config.prior_a;
    opts.lambda_b = config.prior_b;
    opts.penalty_order = cov.r;
    return std::make_shared<NegBinModel>(std::move(dataset), basis, opts);
  }

  OrdinalDataset dataset;
  const std::vector<long> y = integer_column(data, config.response);
  dataset.y.reserve(y.size());
  long max_y = 0;
  for (long yi : y) {
    if (yi < 1) throw ConfigError("response categories must be >= 1");
    max_y = std::max(max_y, yi);
    dataset.y.push_back(static_cast<int>(yi));
  }
  if (max_y < 2) throw ConfigError("response must have at least two categories");
  dataset.R = static_cast<int>(max_y);
  dataset.X.resize(static_cast<Index>(y.size()), static_cast<Index>(config.covariates.size()));

  std::vector<BasisMatrix> bases;
  PropOddsOptions opts;
  opts.lambda_a = config.prior_a;
  opts.lambda_b = config.prior_b;
  opts.q_scale = config.q_scale;
  for (std::size_t j = 0; j < config.covariates.size(); ++j) {
    const auto& cov = config.covariates[j];
    const auto& col = data.column(cov.name);
    for (std::size_t i = 0; i < col.size(); ++i)
      dataset.X(static_cast<Index>(i), static_cast<Index>(j)) = col[i];
    const auto [lo, hi] = std::minmax_element(col.begin(), col.end());
    const BasisSpec spec = BasisSpec::for_recentered_columns(*lo, *hi, cov.L);
    BasisSpec raw = spec;
    raw.recentered = false;
    bases.push_back(recenter_basis(evaluate_basis(
        raw, Eigen::Map<const Vector>(col.data(), static_cast<Index>(col.size())))));
    opts.penalty_orders.push_back(cov.r);
  }
  dataset.validate();
  return std::make_shared<PropOddsModel>(std::move(dataset), std::move(bases), opts);
}

namespace {

// theta draws for the credible curves: joint-posterior sampling when the skew
// correction is on, otherwise the Laplace Gaussian with the same per-draw
// substream scheme.
Matrix theta_draws_for_curves(const FitResult& result, std::uint64_t seed) {
  const LaplaceFit& fit = result.hyper.fit;
  const Index k1 = fit.partition.k1;
  const Index k2 = fit.partition.k2;
  if (result.posterior) {
    const Matrix joint = result.posterior->sample_joint(kCurveDraws, seed);
    return joint.rightCols(k2);
  }
  const Eigen::LLT<Matrix> llt(fit.sigma_tt);
  if (llt.info() != Eigen::Success)
    throw ConditioningError("curves: theta covariance not positive definite");
  const Matrix chol = llt.matrixL();
  const Vector theta_hat = fit.theta_hat();
  Matrix draws(kCurveDraws, k2);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < kCurveDraws; ++i) {
    Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(i));
    // keep the stream layout of sample_joint: gamma axes first
    for (Index s = 0; s < 2 * k1; ++s) (void)rng.normal();
    Vector z(k2);
    for (Index c = 0; c < k2; ++c) z[c] = rng.normal();
    draws.row(i) = (theta_hat + chol * z).transpose();
  }
  return draws;
}

void append_curves(FitResult& result, const FitConfig& config, const Model& model) {
  const LaplaceFit& fit = result.hyper.fit;
  const Matrix theta = theta_draws_for_curves(result, config.seed ^ kSeedCurves);
  const Vector theta_hat = fit.theta_hat();

  const auto* po = dynamic_cast<const PropOddsModel*>(&model);
  const auto* nb = dynamic_cast<const NegBinModel*>(&model);
  for (std::size_t j = 0; j < config.covariates.size(); ++j) {
    const auto& [start, len] = fit.partition.term_offsets[j];
    BasisSpec spec;
    if (po) {
      spec = po->bases()[j].spec;
    } else {
      spec = nb->basis().spec;
    }
    Vector grid(kCurveGrid);
    for (Index g = 0; g < kCurveGrid; ++g)
      grid[g] = spec.xmin + (spec.xmax - spec.xmin) * static_cast<double>(g) /
                                static_cast<double>(kCurveGrid - 1);
    BasisSpec raw = spec;
    raw.recentered = false;
    BasisMatrix basis = evaluate_basis(raw, grid);
    if (spec.recentered) basis = recenter_basis(basis);

    const Vector estimate = basis.values * theta_hat.segment(start, len);
    const Matrix curves = theta.middleCols(start, len) * basis.values.transpose();
    for (Index g = 0; g < kCurveGrid; ++g) {
      std::vector<double> column(static_cast<std::size_t>(curves.rows()));
      for (Index m = 0; m < curves.rows(); ++m)
        column[static_cast<std::size_t>(m)] = curves(m, g);
      result.curve_term.push_back(config.covariates[j].name);
      result.curve_x.push_back(grid[g]);
      result.curve_estimate.push_back(estimate[g]);
      result.curve_lower.push_back(quantile_type7(column, 0.025));
      result.curve_upper.push_back(quantile_type7(std::move(column), 0.975));
    }
  }
}

}  // namespace

FitResult run_fit(const FitConfig& config, const CsvTable& data) {
  FitResult result;
  result.model = build_model(config, data);
  const Model& model = *result.model;

  HyperOptions hopts;
  hopts.criterion = config.criterion;
  result.hyper = select_lambda(model, hopts);
  const LaplaceFit& fit = result.hyper.fit;
  const Index k1 = fit.partition.k1;
  const Index k2 = fit.partition.k2;

  if (config.skew_enabled) {
    SkewFitOptions sopts;
    sopts.mode_anchored = config.mode_anchored;
    result.posterior = build_skew_posterior(fit, model, result.hyper.lambda_hat, sopts);
  }

  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["model"] = config.model == ModelKind::negbin ? "negbin" : "prop_odds";
  j["seed"] = config.seed;
  j["criterion"] = config.criterion == SelectionCriterion::marginal_posterior
                       ? "marginal_posterior"
                       : "marginal_likelihood";

  nlohmann::ordered_json lambda_block;
  nlohmann::ordered_json term_names = nlohmann::ordered_json::array();
  for (const auto& cov : config.covariates) term_names.push_back(cov.name);
  lambda_block["terms"] = std::move(term_names);
  lambda_block["hat"] = vector_json(result.hyper.lambda_hat);
  lambda_block["edf"] = vector_json(result.hyper.edf);
  nlohmann::ordered_json boundary = nlohmann::ordered_json::array();
  for (bool b : result.hyper.boundary) boundary.push_back(b);
  lambda_block["boundary"] = std::move(boundary);
  j["lambda"] = std::move(lambda_block);

  // gamma summaries: analytic Laplace quantiles, and when the correction is
  // on, skew-normal fits to the component marginals with sampled quantiles.
  const std::vector<std::string> names = gamma_names(config, k1);
  const Vector gamma_hat = fit.gamma_hat();
  static const double z025 = inverse_normal_cdf(0.025);
  static const double z975 = inverse_normal_cdf(0.975);

  nlohmann::ordered_json gamma_block;
  gamma_block["names"] = names;
  nlohmann::ordered_json laplace = nlohmann::ordered_json::array();
  for (Index s = 0; s < k1; ++s) {
    const double sd = std::sqrt(fit.sigma_gg(s, s));
    laplace.push_back(summary_entry(gamma_hat[s], sd, 0.0, gamma_hat[s] + z025 * sd,
                                    gamma_hat[s], gamma_hat[s] + z975 * sd));
  }
  gamma_block["laplace"] = laplace;

  if (result.posterior) {
    const Matrix gdraws =
        result.posterior->sample_gamma(kComponentDraws, config.seed ^ kSeedGamma);
    nlohmann::ordered_json corrected = nlohmann::ordered_json::array();
    for (Index s = 0; s < k1; ++s) {
      const SampleMoments sm = sample_moments(gdraws.col(s));
      const SkewNormalParams sn = sn_fit_moments(sm.mean, sm.variance, sm.skewness);
      std::vector<double> column(gdraws.rows());
      for (Index m = 0; m < gdraws.rows(); ++m)
        column[static_cast<std::size_t>(m)] = gdraws(m, s);
      nlohmann::ordered_json entry = summary_entry(
          sm.mean, std::sqrt(sm.variance), sm.skewness, quantile_type7(column, 0.025),
          quantile_type7(column, 0.5), quantile_type7(std::move(column), 0.975));
      entry["sn"] = {{"psi", sn.psi},
                     {"omega", sn.omega},
                     {"alpha", sn.alpha},
                     {"clamped", sn.clamped}};
      corrected.push_back(std::move(entry));
    }
    gamma_block["summaries"] = std::move(corrected);
  } else {
    gamma_block["summaries"] = laplace;
  }
  j["gamma"] = std::move(gamma_block);

  nlohmann::ordered_json theta_block;
  theta_block["mean"] = vector_json(fit.theta_hat());
  Vector theta_sd(k2);
  for (Index c = 0; c < k2; ++c) theta_sd[c] = std::sqrt(fit.sigma_tt(c, c));
  theta_block["sd"] = vector_json(theta_sd);
  j["theta"] = std::move(theta_block);

  nlohmann::ordered_json diag;
  diag["converged"] = fit.converged;
  diag["inner_iterations"] = fit.iterations;
  diag["outer_iterations"] = result.hyper.outer_iterations;
  diag["log_posterior_at_mode"] = fit.log_posterior_at_mode;
  if (const auto* po = dynamic_cast<const PropOddsModel*>(&model))
    diag["clamp_events"] = po->clamp_events();
  j["diagnostics"] = std::move(diag);

  result.fit_json = std::move(j);
  append_curves(result, config, model);
  return result;
}

ValidateResult run_validate(const FitConfig& config, const CsvTable& data,
                            const FitResult& fit_result) {
  (void)data;
  const Model& model = *fit_result.model;
  const LaplaceFit& fit = fit_result.hyper.fit;
  const Index k1 = fit.partition.k1;

  // The comparison needs the corrected posterior; build it if the fit skipped it.
  SkewCorrectedPosterior posterior =
      fit_result.posterior ? *fit_result.posterior
                           : build_skew_posterior(fit, model, fit_result.hyper.lambda_hat);

  ChainConfig chain_config;
  chain_config.n_iter = config.chain.n_iter;
  chain_config.burn_in = config.chain.burn_in;
  chain_config.thin = config.chain.thin;
  chain_config.step_scale = config.chain.step_scale;
  chain_config.seed = config.seed ^ kSeedChain;
  chain_config.fixed_lambda = fit_result.hyper.lambda_hat;

  ValidateResult result;
  result.chain = run_chain(model, chain_config);
  const Matrix& draws = result.chain.draws;

  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["lambda_hat"] = vector_json(fit_result.hyper.lambda_hat);
  j["chain"] = {{"retained", draws.rows()},
                {"acceptance_rate", result.chain.acceptance_rate},
                {"min_ess", result.chain.ess.minCoeff()},
                {"step_scale", result.chain.step_scale_final}};

  const std::vector<std::string> names = gamma_names(config, k1);
  const Vector gamma_hat = fit.gamma_hat();
  nlohmann::ordered_json components = nlohmann::ordered_json::array();
  for (Index s = 0; s < k1; ++s) {
    std::vector<double> chain_s(draws.rows());
    for (Index m = 0; m < draws.rows(); ++m)
      chain_s[static_cast<std::size_t>(m)] = draws(m, s);

    const double mean = gamma_hat[s];
    const double sd = std::sqrt(fit.sigma_gg(s, s));
    const double ks_laplace = ks_distance(
        chain_s, [&](double x) { return norm_cdf((x - mean) / sd); });

    const SkewNormalParams sn =
        posterior.marginal_component_fit(s, kComponentDraws, config.seed ^ kSeedGamma);
    const SnCdf sn_cdf(sn);
    const double ks_skew = ks_distance(chain_s, [&](double x) { return sn_cdf(x); });

    const SampleMoments sm =
        sample_moments(Eigen::Map<const Vector>(chain_s.data(), draws.rows()));
    components.push_back({{"name", names[static_cast<std::size_t>(s)]},
                          {"ks_laplace", ks_laplace},
                          {"ks_skew", ks_skew},
                          {"chain_mean", sm.mean},
                          {"chain_sd", std::sqrt(sm.variance)},
                          {"chain_skewness", sm.skewness},
                          {"sn_alpha", sn.alpha}});
  }
  j["gamma_components"] = std::move(components);
  result.validate_json = std::move(j);

  // axis overlays: profile target density, its skew-normal fit, and the chain
  // histogram, all on one whitened grid per axis
  const GammaMarginal marginal(fit, model, fit_result.hyper.lambda_hat);
  const WhitenedFrame& frame = posterior.frame();
  const Index overlay_n = 161;
  const double overlay_half = 6.0;
  const double oh = 2.0 * overlay_half / static_cast<double>(overlay_n - 1);
  Matrix whitened(draws.rows(), k1);
  for (Index m = 0; m < draws.rows(); ++m)
    whitened.row(m) = frame.to_whitened(draws.row(m).head(k1).transpose()).transpose();

  for (Index s = 0; s < k1; ++s) {
    Vector t(overlay_n), logp(overlay_n);
    for (Index i = 0; i < overlay_n; ++i) {
      t[i] = -overlay_half + oh * static_cast<double>(i);
      logp[i] = axis_marginal_logdensity(marginal, frame, s, t[i]);
    }
    const double top = logp.maxCoeff();
    Vector density(overlay_n);
    for (Index i = 0; i < overlay_n; ++i) density[i] = std::exp(logp[i] - top);
    double mass = 0.5 * (density[0] + density[overlay_n - 1]);
    for (Index i = 1; i + 1 < overlay_n; ++i) mass += density[i];
    mass *= oh;

    Vector hist = Vector::Zero(overlay_n);
    for (Index m = 0; m < draws.rows(); ++m) {
      const double pos = (whitened(m, s) + overlay_half) / oh;
      const auto idx = static_cast<Index>(std::llround(pos));
      if (idx >= 0 && idx < overlay_n) hist[idx] += 1.0;
    }
    hist /= static_cast<double>(draws.rows()) * oh;

    const SkewNormalParams& axis_fit = posterior.axis_fits()[static_cast<std::size_t>(s)];
    for (Index i = 0; i < overlay_n; ++i) {
      result.overlay_axis.push_back(static_cast<double>(s + 1));
      result.overlay_t.push_back(t[i]);
      result.overlay_target.push_back(density[i] / mass);
      result.overlay_sn.push_back(axis_fit.pdf(t[i]));
      result.overlay_chain.push_back(hist[i]);
    }
  }
  return result;
}

namespace {

void write_fit_outputs(const FitConfig& config, const FitResult& result) {
  namespace fs = std::filesystem;
  fs::create_directories(config.out_dir);
  write_text((fs::path(config.out_dir) / "fit.json").string(), result.fit_json.dump(2) + "\n");

  std::ostringstream curves;
  curves << "term,x,estimate,lower,upper\n";
  for (std::size_t i = 0; i < result.curve_x.size(); ++i) {
    curves << result.curve_term[i] << ',' << format_double(result.curve_x[i]) << ','
           << format_double(result.curve_estimate[i]) << ','
           << format_double(result.curve_lower[i]) << ','
           << format_double(result.curve_upper[i]) << '\n';
  }
  write_text((fs::path(config.out_dir) / "curves.csv").string(), curves.str());

  if (result.posterior) {
    write_text((fs::path(config.out_dir) / "posterior.json").string(),
               result.posterior->to_json().dump(2) + "\n");
  }
}

}  // namespace

int cmd_fit(const FitConfig& config) {
  par::set_threads(config.threads);
  CsvTable data;
  try {
    data = CsvTable::read_file(config.data_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  try {
    const FitResult result = run_fit(config, data);
    write_fit_outputs(config, result);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const CsvParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const NonConvergenceError& e) {
    std::cerr << "error: " << e.what() << " (gradient norm " << e.grad_norm << ")\n";
    return 2;
  } catch (const SaddlePointError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

int cmd_validate(const FitConfig& config) {
  par::set_threads(config.threads);
  if (!config.mcmc_enabled) {
    std::cerr << "error: validate requires mcmc.enabled = true\n";
    return 1;
  }
  CsvTable data;
  try {
    data = CsvTable::read_file(config.data_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  FitResult fit;
  try {
    fit = run_fit(config, data);
    write_fit_outputs(config, fit);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const CsvParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const NonConvergenceError& e) {
    std::cerr << "error: " << e.what() << " (gradient norm " << e.grad_norm << ")\n";
    return 2;
  } catch (const SaddlePointError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  try {
    namespace fs = std::filesystem;
    const ValidateResult result = run_validate(config, data, fit);
    write_text((fs::path(config.out_dir) / "validate.json").string(),
               result.validate_json.dump(2) + "\n");
    write_csv((fs::path(config.out_dir) / "overlays.csv").string(),
              {"axis", "t", "target_density", "sn_density", "chain_density"},
              {&result.overlay_axis, &result.overlay_t, &result.overlay_target,
               &result.overlay_sn, &result.overlay_chain});
    if (config.chain.save_draws) {
      std::vector<std::string> names = gamma_names(config, fit.hyper.fit.partition.k1);
      for (Index c = 0; c < fit.hyper.fit.partition.k2; ++c)
        names.push_back("theta_" + std::to_string(c + 1));
      result.chain.write_csv((fs::path(config.out_dir) / "chain.csv").string(), names);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: chain validation failed: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

int cmd_simulate(const SimulateParams& params, const std::string& out_path) {
  try {
    if (params.n < 1) throw std::invalid_argument("simulate: n must be >= 1");
    if (params.model == ModelKind::negbin) {
      if (!(params.gamma > 0.0))
        throw std::invalid_argument("simulate: overdispersion must be positive");
      const std::vector<double> mu = nb_fixture_mean(params.n);
      std::vector<double> x(static_cast<std::size_t>(params.n));
      for (Index i = 0; i < params.n; ++i)
        x[static_cast<std::size_t>(i)] = static_cast<double>(i + 1);
      const CountDataset data = nb_simulate_mu(mu, x, params.gamma, params.seed);
      std::vector<double> y(data.y.size());
      for (std::size_t i = 0; i < data.y.size(); ++i) y[i] = static_cast<double>(data.y[i]);
      write_csv(out_path, {"x", "y"}, {&data.x, &y});
      return 0;
    }
    const OrdinalDataset data =
        po_simulate(params.gamma_cutpoints, params.terms, params.n, params.seed);
    std::vector<std::string> header{"y"};
    for (std::size_t j = 0; j < params.terms.size(); ++j)
      header.push_back(j < params.term_names.size() ? params.term_names[j]
                                                    : "x" + std::to_string(j + 1));
    std::vector<double> y(data.y.size());
    for (std::size_t i = 0; i < data.y.size(); ++i) y[i] = static_cast<double>(data.y[i]);
    std::vector<std::vector<double>> xcols(params.terms.size());
    std::vector<const std::vector<double>*> columns{&y};
    for (std::size_t j = 0; j < params.terms.size(); ++j) {
      xcols[j].resize(data.y.size());
      for (Index i = 0; i < data.n(); ++i)
        xcols[j][static_cast<std::size_t>(i)] = data.X(i, static_cast<Index>(j));
      columns.push_back(&xcols[j]);
    }
    write_csv(out_path, header, columns);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace lps
