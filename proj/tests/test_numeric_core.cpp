#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "lps/config.hpp"
#include "lps/csv.hpp"
#include "lps/parallel.hpp"
#include "lps/rng.hpp"
#include "lps/special_functions.hpp"

using namespace lps;

TEST_CASE("digamma and trigamma against high-precision values") {
  // reference values computed with 30-digit arithmetic
  const struct {
    double x, psi, psi1;
  } table[] = {
      {0.001, -1000.5755719318103005, 1000001.642533195869},
      {0.01, -100.5608854578686745, 10001.62121352831322},
      {0.1, -10.423754940411076795, 101.43329915079275882},
      {0.5, -1.9635100260214234794, 4.9348022005446793094},
      {1.0, -0.57721566490153286061, 1.6449340668482264365},
      {2.0, 0.42278433509846713939, 0.64493406684822643647},
      {5.0, 1.5061176684318004727, 0.22132295573711532536},
      {7.25, 1.9104535268837360284, 0.14787923315893216965},
      {10.0, 2.2517525890667211076, 0.10516633568168574612},
      {100.0, 4.6001618527380874002, 0.010050166663333571395},
      {1e4, 9.2102903711428494036, 0.00010000500016666666633},
      {1e8, 18.420680738952365464, 1.0000000050000000167e-8},
  };
  for (const auto& row : table) {
    CHECK(std::abs(digamma(row.x) - row.psi) <= 1e-10 * std::abs(row.psi));
    CHECK(std::abs(trigamma(row.x) - row.psi1) <= 1e-10 * std::abs(row.psi1));
  }
  CHECK_THROWS_AS(digamma(0.0), std::domain_error);
  CHECK_THROWS_AS(trigamma(-1.0), std::domain_error);
}

TEST_CASE("inverse normal cdf") {
  CHECK(inverse_normal_cdf(0.5) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(inverse_normal_cdf(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  CHECK(inverse_normal_cdf(0.025) == doctest::Approx(-1.959963984540054).epsilon(1e-12));
  for (double p : {1e-10, 1e-4, 0.2, 0.5, 0.77, 1.0 - 1e-6}) {
    CHECK(norm_cdf(inverse_normal_cdf(p)) == doctest::Approx(p).epsilon(1e-11));
  }
  CHECK_THROWS_AS(inverse_normal_cdf(0.0), std::domain_error);
  CHECK_THROWS_AS(inverse_normal_cdf(1.0), std::domain_error);
}

TEST_CASE("rng reproducibility and moments") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng rng(7);
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sq += z * z;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(std::abs(sq / n - 1.0) < 0.02);

  double gsum = 0.0, gsq = 0.0;
  const double shape = 3.0, rate = 2.0;
  for (int i = 0; i < n; ++i) {
    const double g = rng.gamma(shape, rate);
    gsum += g;
    gsq += g * g;
  }
  const double gmean = gsum / n;
  CHECK(std::abs(gmean - shape / rate) < 0.01);
  CHECK(std::abs((gsq / n - gmean * gmean) - shape / (rate * rate)) < 0.02);

  double psum = 0.0;
  const double mean = 17.5;
  for (int i = 0; i < n; ++i) psum += static_cast<double>(rng.poisson(mean));
  CHECK(std::abs(psum / n - mean) < 0.05);

  // substreams: distinct streams decorrelate, same stream reproduces
  Rng s1 = Rng::substream(9, 1);
  Rng s1b = Rng::substream(9, 1);
  Rng s2 = Rng::substream(9, 2);
  CHECK(s1.next_u64() == s1b.next_u64());
  CHECK(s1.next_u64() != s2.next_u64());
}

TEST_CASE("blocked reductions are identical across thread counts") {
  const std::ptrdiff_t n = 10007;
  std::vector<double> values(n);
  Rng rng(3);
  for (auto& v : values) v = rng.normal() * 1e6 + rng.uniform();

  const int saved = par::max_threads();
  par::set_threads(1);
  const double s1 = par::blocked_sum(n, [&](std::ptrdiff_t i) { return values[i]; });
  par::set_threads(4);
  const double s4 = par::blocked_sum(n, [&](std::ptrdiff_t i) { return values[i]; });
  par::set_threads(saved);

  CHECK(s1 == s4);  // bitwise equality is the contract
  double serial = 0.0;
  for (double v : values) serial += v;
  CHECK(s1 == doctest::Approx(serial).epsilon(1e-12));
}

TEST_CASE("csv parsing") {
  const CsvTable t = CsvTable::from_string("a,b,\"c,1\"\r\n1,2.5,3\n4,-5e-1,\"6\"\n");
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK(t.has_column("c,1"));
  CHECK(t.column("a")[1] == 4.0);
  CHECK(t.column("b")[1] == -0.5);

  CHECK_THROWS_AS(CsvTable::from_string(""), CsvParseError);
  CHECK_THROWS_AS(CsvTable::from_string("a,b\n1\n"), CsvParseError);       // ragged
  CHECK_THROWS_AS(CsvTable::from_string("a,b\n1,\n"), CsvParseError);      // missing
  CHECK_THROWS_AS(CsvTable::from_string("a,b\n1,x\n"), CsvParseError);     // non-numeric
  CHECK_THROWS_AS(CsvTable::from_string("a,b\n"), CsvParseError);          // no data
}

TEST_CASE("format_double round-trips") {
  for (double x : {0.0, 1.0, -1.5, 0.1, 1e-300, 3.141592653589793, 1.0 / 3.0, 6.02e23}) {
    CHECK(std::strtod(format_double(x).c_str(), nullptr) == x);
  }
}

TEST_CASE("config parsing") {
  const std::string text = R"(# sample
model = "prop_odds"
data = "data.csv"
response = "y"
covariates = ["age", "eduyrs"]
seed = 11

[terms.age]
L = 12
r = 2

[selection]
criterion = "marginal_likelihood"

[mcmc]
enabled = true
n_iter = 4000
burn_in = 1000
)";
  const FitConfig cfg = FitConfig::from_value(ConfigValue::parse(text));
  CHECK(cfg.model == ModelKind::prop_odds);
  CHECK(cfg.covariates.size() == 2);
  CHECK(cfg.covariates[0].name == "age");
  CHECK(cfg.covariates[0].L == 12);
  CHECK(cfg.covariates[1].L == 10);  // default
  CHECK(cfg.criterion == SelectionCriterion::marginal_likelihood);
  CHECK(cfg.mcmc_enabled);
  CHECK(cfg.chain.n_iter == 4000);
  CHECK(cfg.seed == 11);
  CHECK(cfg.skew_enabled);  // default on

  CHECK_THROWS_AS(FitConfig::from_value(ConfigValue::parse("model = \"mystery\"\n")),
                  ConfigError);
  const std::string bad_l = R"(model = "negbin"
data = "d.csv"
response = "y"
covariates = ["x"]
[terms.x]
L = 2
r = 2
)";
  CHECK_THROWS_AS(FitConfig::from_value(ConfigValue::parse(bad_l)), ConfigError);
  CHECK_THROWS_AS(ConfigValue::parse("a = 1\na = 2\n"), ConfigError);
}
