#pragma once

#include <memory>
#include <optional>
#include <string>

#include "json.hpp"
#include "lps/config.hpp"
#include "lps/csv.hpp"
#include "lps/mcmc.hpp"
#include "lps/prop_odds.hpp"
#include "lps/skew_posterior.hpp"

namespace lps {

/// Everything a fit produces, kept in memory so the CLI and the tests share
/// one code path. `model` owns the data the other members reference.
struct FitResult {
  std::shared_ptr<Model> model;
  HyperPosterior hyper;
  std::optional<SkewCorrectedPosterior> posterior;  // present when skew correction is on
  nlohmann::ordered_json fit_json;
  // curves.csv companion: one block of rows per covariate term
  std::vector<std::string> curve_term;
  std::vector<double> curve_x, curve_estimate, curve_lower, curve_upper;
};

std::shared_ptr<Model> build_model(const FitConfig& config, const CsvTable& data);

FitResult run_fit(const FitConfig& config, const CsvTable& data);

struct ValidateResult {
  nlohmann::ordered_json validate_json;
  ChainOutput chain;
  // overlays.csv columns
  std::vector<double> overlay_axis, overlay_t, overlay_target, overlay_sn, overlay_chain;
};

ValidateResult run_validate(const FitConfig& config, const CsvTable& data,
                            const FitResult& fit);

/// CLI entry points; exit codes: 0 ok, 1 bad input, 2 non-convergence,
/// 3 chain failure. Diagnostics go to stderr.
int cmd_fit(const FitConfig& config);
int cmd_validate(const FitConfig& config);

struct SimulateParams {
  ModelKind model = ModelKind::negbin;
  Index n = 120;
  std::uint64_t seed = 1;
  // negbin
  double gamma = 6.0;
  // prop_odds
  Vector gamma_cutpoints;             // cumulative-logit intercepts
  std::vector<POSimTerm> terms;
  std::vector<std::string> term_names;
};

int cmd_simulate(const SimulateParams& params, const std::string& out_path);

/// Sorted-sample quantile with type-7 interpolation.
double quantile_type7(std::vector<double> values, double p);

}  // namespace lps
