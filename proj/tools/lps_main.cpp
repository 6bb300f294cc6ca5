#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "lps/pipeline.hpp"
#include "lps/parallel.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::int64_t seed = -1;
  std::string out;
  int threads = 0;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "configuration file")->required();
  cmd->add_option("--seed", args.seed, "override the configured seed");
  cmd->add_option("--out", args.out, "override the configured output directory");
  cmd->add_option("--threads", args.threads, "worker threads (0 = all available)");
}

int load_config(const CommonArgs& args, lps::FitConfig& config) {
  try {
    config = lps::FitConfig::load(args.config_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  if (args.seed >= 0) config.seed = static_cast<std::uint64_t>(args.seed);
  if (!args.out.empty()) config.out_dir = args.out;
  if (args.threads > 0) config.threads = args.threads;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Penalized-spline regression with skew-corrected posterior approximations"};
  app.require_subcommand(1);

  CommonArgs fit_args, validate_args;
  CLI::App* fit = app.add_subcommand("fit", "fit a model and write posterior summaries");
  add_common(fit, fit_args);
  CLI::App* validate =
      app.add_subcommand("validate", "fit, then check the approximations against MCMC");
  add_common(validate, validate_args);

  // simulate takes its parameters directly
  std::string sim_model = "negbin", sim_out = "simulated.csv";
  std::int64_t sim_seed = 1;
  long sim_n = 120;
  double sim_gamma = 6.0;
  std::vector<double> sim_cutpoints;
  std::vector<std::string> sim_terms;
  int sim_threads = 0;
  CLI::App* simulate = app.add_subcommand("simulate", "write a synthetic dataset");
  simulate->add_option("--model", sim_model, "negbin or prop_odds");
  simulate->add_option("--n", sim_n, "sample size")->required();
  simulate->add_option("--seed", sim_seed, "random seed");
  simulate->add_option("--out", sim_out, "output CSV path");
  simulate->add_option("--threads", sim_threads, "worker threads (0 = all available)");
  simulate->add_option("--gamma", sim_gamma, "negbin overdispersion");
  simulate->add_option("--cutpoints", sim_cutpoints,
                       "prop_odds cumulative-logit intercepts (R-1 values)");
  simulate->add_option(
      "--term", sim_terms,
      "prop_odds covariate spec name:lo:hi:shape[:amplitude], shape in {none,linear,sine}");

  CLI11_PARSE(app, argc, argv);

  if (fit->parsed()) {
    lps::FitConfig config;
    if (int rc = load_config(fit_args, config)) return rc;
    return lps::cmd_fit(config);
  }
  if (validate->parsed()) {
    lps::FitConfig config;
    if (int rc = load_config(validate_args, config)) return rc;
    return lps::cmd_validate(config);
  }

  lps::par::set_threads(sim_threads);
  lps::SimulateParams params;
  params.n = sim_n;
  params.seed = static_cast<std::uint64_t>(sim_seed);
  if (sim_model == "negbin") {
    params.model = lps::ModelKind::negbin;
    params.gamma = sim_gamma;
  } else if (sim_model == "prop_odds") {
    params.model = lps::ModelKind::prop_odds;
    if (sim_cutpoints.empty()) {
      std::cerr << "error: prop_odds simulation needs --cutpoints\n";
      return 1;
    }
    params.gamma_cutpoints.resize(static_cast<lps::Index>(sim_cutpoints.size()));
    for (std::size_t i = 0; i < sim_cutpoints.size(); ++i)
      params.gamma_cutpoints[static_cast<lps::Index>(i)] = sim_cutpoints[i];
    for (const std::string& spec : sim_terms) {
      // name:lo:hi:shape[:amplitude]
      std::vector<std::string> parts;
      std::size_t start = 0;
      while (start <= spec.size()) {
        const std::size_t colon = spec.find(':', start);
        parts.push_back(spec.substr(start, colon == std::string::npos ? colon : colon - start));
        if (colon == std::string::npos) break;
        start = colon + 1;
      }
      if (parts.size() < 4) {
        std::cerr << "error: bad --term spec '" << spec << "'\n";
        return 1;
      }
      lps::POSimTerm term;
      params.term_names.push_back(parts[0]);
      try {
        term.lo = std::stod(parts[1]);
        term.hi = std::stod(parts[2]);
        if (parts.size() > 4) term.amplitude = std::stod(parts[4]);
      } catch (const std::exception&) {
        std::cerr << "error: bad numbers in --term spec '" << spec << "'\n";
        return 1;
      }
      if (parts[3] == "none")
        term.shape = lps::POSimTerm::Shape::none;
      else if (parts[3] == "linear")
        term.shape = lps::POSimTerm::Shape::linear;
      else if (parts[3] == "sine")
        term.shape = lps::POSimTerm::Shape::sine;
      else {
        std::cerr << "error: unknown shape '" << parts[3] << "'\n";
        return 1;
      }
      params.terms.push_back(term);
    }
    if (params.terms.empty()) {
      std::cerr << "error: prop_odds simulation needs at least one --term\n";
      return 1;
    }
  } else {
    std::cerr << "error: unknown model '" << sim_model << "'\n";
    return 1;
  }
  return lps::cmd_simulate(params, sim_out);
}
