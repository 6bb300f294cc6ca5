#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "lps/hyper.hpp"

namespace lps {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Value tree for the TOML-style configuration grammar documented in the
/// README: `key = value` pairs, `[dotted.table]` headers, strings, numbers,
/// booleans and flat arrays.
class ConfigValue {
 public:
  using Array = std::vector<ConfigValue>;
  using Table = std::map<std::string, ConfigValue>;

  ConfigValue() : v_(Table{}) {}
  explicit ConfigValue(std::string s) : v_(std::move(s)) {}
  explicit ConfigValue(double d) : v_(d) {}
  explicit ConfigValue(bool b) : v_(b) {}
  explicit ConfigValue(Array a) : v_(std::move(a)) {}
  explicit ConfigValue(Table t) : v_(std::move(t)) {}

  bool is_table() const { return std::holds_alternative<Table>(v_); }
  bool is_array() const { return std::holds_alternative<Array>(v_); }
  bool is_string() const { return std::holds_alternative<std::string>(v_); }
  bool is_number() const { return std::holds_alternative<double>(v_); }
  bool is_bool() const { return std::holds_alternative<bool>(v_); }

  const std::string& as_string() const;
  double as_number() const;
  bool as_bool() const;
  const Array& as_array() const;
  const Table& as_table() const;
  Table& as_table();

  /// Dotted-path lookup; nullptr when absent.
  const ConfigValue* find(const std::string& dotted_path) const;

  static ConfigValue parse(const std::string& text);
  static ConfigValue parse_file(const std::string& path);

 private:
  std::variant<std::string, double, bool, Array, Table> v_;
};

enum class ModelKind { prop_odds, negbin };

struct CovariateConfig {
  std::string name;
  int L = 10;  // spline columns in the fitted term
  int r = 2;   // difference-penalty order
};

struct ChainSettings {
  long n_iter = 20000;
  long burn_in = 5000;
  int thin = 1;
  double step_scale = 1.0;
  bool save_draws = false;
};

struct FitConfig {
  ModelKind model = ModelKind::prop_odds;
  std::string data_path;
  std::string response;
  std::vector<CovariateConfig> covariates;
  SelectionCriterion criterion = SelectionCriterion::marginal_posterior;
  double prior_a = 1.0;
  double prior_b = 1e-4;
  double q_scale = 1e-6;
  bool skew_enabled = true;
  bool mode_anchored = false;
  bool mcmc_enabled = false;
  ChainSettings chain;
  std::uint64_t seed = 1;
  std::string out_dir = ".";
  int threads = 0;  // 0 = library default

  /// Parse and validate (L >= r + 1, covariates present, ...). Column
  /// existence is checked against the data at load time.
  static FitConfig load(const std::string& path);
  static FitConfig from_value(const ConfigValue& root);
};

}  // namespace lps
