#include "lps/config.hpp"

#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace lps {

namespace {

struct Parser {
  const std::string& text;
  std::size_t pos = 0;
  int line = 1;

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("config: line " + std::to_string(line) + ": " + what);
  }
  bool done() const { return pos >= text.size(); }
  char peek() const { return text[pos]; }
  void advance() {
    if (text[pos] == '\n') ++line;
    ++pos;
  }
  void skip_ws_inline() {
    while (!done() && (peek() == ' ' || peek() == '\t')) advance();
  }
  void skip_to_eol() {
    while (!done() && peek() != '\n') advance();
    if (!done()) advance();
  }
  void expect_eol() {
    skip_ws_inline();
    if (done()) return;
    if (peek() == '#') {
      skip_to_eol();
      return;
    }
    if (peek() == '\r') advance();
    if (done()) return;
    if (peek() != '\n') fail("unexpected trailing characters");
    advance();
  }

  std::string parse_key() {
    skip_ws_inline();
    std::string key;
    while (!done() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' ||
                       peek() == '-' || peek() == '.')) {
      key.push_back(peek());
      advance();
    }
    if (key.empty()) fail("expected a key");
    return key;
  }

  std::string parse_string() {
    advance();  // opening quote
    std::string s;
    while (!done() && peek() != '"') {
      char c = peek();
      if (c == '\\') {
        advance();
        if (done()) fail("unterminated escape");
        switch (peek()) {
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          case '"': c = '"'; break;
          case '\\': c = '\\'; break;
          default: fail("unsupported escape sequence");
        }
      } else if (c == '\n') {
        fail("unterminated string");
      }
      s.push_back(c);
      advance();
    }
    if (done()) fail("unterminated string");
    advance();  // closing quote
    return s;
  }

  ConfigValue parse_scalar() {
    skip_ws_inline();
    if (done()) fail("expected a value");
    const char c = peek();
    if (c == '"') return ConfigValue(parse_string());
    if (c == '[') {
      advance();
      ConfigValue::Array arr;
      for (;;) {
        skip_ws_inline();
        if (done()) fail("unterminated array");
        if (peek() == ']') {
          advance();
          break;
        }
        arr.push_back(parse_scalar());
        skip_ws_inline();
        if (!done() && peek() == ',') advance();
      }
      return ConfigValue(std::move(arr));
    }
    // bare token: bool or number
    std::string tok;
    while (!done() && peek() != ',' && peek() != ']' && peek() != '#' && peek() != '\n' &&
           peek() != '\r' && peek() != ' ' && peek() != '\t') {
      tok.push_back(peek());
      advance();
    }
    if (tok == "true") return ConfigValue(true);
    if (tok == "false") return ConfigValue(false);
    errno = 0;
    char* end = nullptr;
    const double value = std::strtod(tok.c_str(), &end);
    if (tok.empty() || end != tok.c_str() + tok.size() || errno == ERANGE)
      fail("cannot parse value '" + tok + "'");
    return ConfigValue(value);
  }
};

ConfigValue::Table* descend(ConfigValue::Table& root, const std::string& dotted, Parser& p) {
  ConfigValue::Table* table = &root;
  std::size_t start = 0;
  while (start <= dotted.size()) {
    const std::size_t dot = dotted.find('.', start);
    const std::string part = dotted.substr(start, dot == std::string::npos ? dot : dot - start);
    if (part.empty()) p.fail("empty table-name component");
    auto [it, inserted] = table->try_emplace(part, ConfigValue{});
    if (!it->second.is_table()) p.fail("'" + part + "' is not a table");
    table = &it->second.as_table();
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  return table;
}

}  // namespace

const std::string& ConfigValue::as_string() const {
  if (!is_string()) throw ConfigError("config: expected a string value");
  return std::get<std::string>(v_);
}
double ConfigValue::as_number() const {
  if (!is_number()) throw ConfigError("config: expected a numeric value");
  return std::get<double>(v_);
}
bool ConfigValue::as_bool() const {
  if (!is_bool()) throw ConfigError("config: expected a boolean value");
  return std::get<bool>(v_);
}
const ConfigValue::Array& ConfigValue::as_array() const {
  if (!is_array()) throw ConfigError("config: expected an array value");
  return std::get<Array>(v_);
}
const ConfigValue::Table& ConfigValue::as_table() const {
  if (!is_table()) throw ConfigError("config: expected a table");
  return std::get<Table>(v_);
}
ConfigValue::Table& ConfigValue::as_table() {
  if (!is_table()) throw ConfigError("config: expected a table");
  return std::get<Table>(v_);
}

const ConfigValue* ConfigValue::find(const std::string& dotted_path) const {
  const ConfigValue* node = this;
  std::size_t start = 0;
  while (start <= dotted_path.size()) {
    const std::size_t dot = dotted_path.find('.', start);
    const std::string part =
        dotted_path.substr(start, dot == std::string::npos ? dot : dot - start);
    if (!node->is_table()) return nullptr;
    const auto& table = std::get<Table>(node->v_);
    const auto it = table.find(part);
    if (it == table.end()) return nullptr;
    node = &it->second;
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  return node;
}

ConfigValue ConfigValue::parse(const std::string& text) {
  ConfigValue root;
  Parser p{text};
  ConfigValue::Table* current = &root.as_table();
  while (!p.done()) {
    p.skip_ws_inline();
    if (p.done()) break;
    const char c = p.peek();
    if (c == '\n' || c == '\r') {
      p.advance();
      continue;
    }
    if (c == '#') {
      p.skip_to_eol();
      continue;
    }
    if (c == '[') {
      p.advance();
      const std::string name = p.parse_key();
      p.skip_ws_inline();
      if (p.done() || p.peek() != ']') p.fail("expected ']' after table name");
      p.advance();
      p.expect_eol();
      current = descend(root.as_table(), name, p);
      continue;
    }
    const std::string key = p.parse_key();
    if (key.find('.') != std::string::npos) p.fail("dotted keys are not supported");
    p.skip_ws_inline();
    if (p.done() || p.peek() != '=') p.fail("expected '=' after key '" + key + "'");
    p.advance();
    ConfigValue value = p.parse_scalar();
    p.expect_eol();
    if (!current->insert_or_assign(key, std::move(value)).second)
      throw ConfigError("config: duplicate key '" + key + "'");
  }
  return root;
}

ConfigValue ConfigValue::parse_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

namespace {

double get_number(const ConfigValue& root, const std::string& path, double fallback) {
  const ConfigValue* v = root.find(path);
  return v ? v->as_number() : fallback;
}

bool get_bool(const ConfigValue& root, const std::string& path, bool fallback) {
  const ConfigValue* v = root.find(path);
  return v ? v->as_bool() : fallback;
}

std::string get_string(const ConfigValue& root, const std::string& path,
                       const std::string& fallback) {
  const ConfigValue* v = root.find(path);
  return v ? v->as_string() : fallback;
}

long get_integer(const ConfigValue& root, const std::string& path, long fallback) {
  const ConfigValue* v = root.find(path);
  if (!v) return fallback;
  const double d = v->as_number();
  const long n = static_cast<long>(d);
  if (static_cast<double>(n) != d)
    throw ConfigError("config: '" + path + "' must be an integer");
  return n;
}

}  // namespace

FitConfig FitConfig::from_value(const ConfigValue& root) {
  FitConfig cfg;
  const std::string model = get_string(root, "model", "");
  if (model == "prop_odds")
    cfg.model = ModelKind::prop_odds;
  else if (model == "negbin")
    cfg.model = ModelKind::negbin;
  else
    throw ConfigError("config: model must be \"prop_odds\" or \"negbin\"");

  cfg.data_path = get_string(root, "data", "");
  if (cfg.data_path.empty()) throw ConfigError("config: 'data' path is required");
  cfg.response = get_string(root, "response", "");
  if (cfg.response.empty()) throw ConfigError("config: 'response' column is required");

  const ConfigValue* cov = root.find("covariates");
  if (!cov || !cov->is_array() || cov->as_array().empty())
    throw ConfigError("config: 'covariates' must be a non-empty array of column names");
  for (const auto& entry : cov->as_array()) {
    CovariateConfig cc;
    cc.name = entry.as_string();
    cc.L = static_cast<int>(get_integer(root, "terms." + cc.name + ".L", 10));
    cc.r = static_cast<int>(get_integer(root, "terms." + cc.name + ".r", 2));
    if (cc.r < 1) throw ConfigError("config: penalty order must be >= 1");
    if (cc.L < cc.r + 1)
      throw ConfigError("config: term '" + cc.name + "' needs L >= r + 1");
    cfg.covariates.push_back(std::move(cc));
  }
  if (cfg.model == ModelKind::negbin && cfg.covariates.size() != 1)
    throw ConfigError("config: negbin takes exactly one covariate");

  const std::string crit = get_string(root, "selection.criterion", "marginal_posterior");
  if (crit == "marginal_posterior")
    cfg.criterion = SelectionCriterion::marginal_posterior;
  else if (crit == "marginal_likelihood")
    cfg.criterion = SelectionCriterion::marginal_likelihood;
  else
    throw ConfigError("config: unknown selection criterion '" + crit + "'");

  cfg.prior_a = get_number(root, "prior.a", 1.0);
  cfg.prior_b = get_number(root, "prior.b", 1e-4);
  cfg.q_scale = get_number(root, "prior.q_scale", 1e-6);
  if (!(cfg.prior_a > 0.0) || !(cfg.prior_b > 0.0) || !(cfg.q_scale >= 0.0))
    throw ConfigError("config: prior constants out of range");

  cfg.skew_enabled = get_bool(root, "skew.enabled", true);
  cfg.mode_anchored = get_bool(root, "skew.mode_anchored", false);

  cfg.mcmc_enabled = get_bool(root, "mcmc.enabled", false);
  cfg.chain.n_iter = get_integer(root, "mcmc.n_iter", 20000);
  cfg.chain.burn_in = get_integer(root, "mcmc.burn_in", 5000);
  cfg.chain.thin = static_cast<int>(get_integer(root, "mcmc.thin", 1));
  cfg.chain.step_scale = get_number(root, "mcmc.step_scale", 1.0);
  cfg.chain.save_draws = get_bool(root, "mcmc.save_draws", false);

  const long seed = get_integer(root, "seed", 1);
  if (seed < 0) throw ConfigError("config: seed must be nonnegative");
  cfg.seed = static_cast<std::uint64_t>(seed);
  cfg.out_dir = get_string(root, "out", ".");
  cfg.threads = static_cast<int>(get_integer(root, "threads", 0));
  return cfg;
}

FitConfig FitConfig::load(const std::string& path) {
  return from_value(ConfigValue::parse_file(path));
}

}  // namespace lps
