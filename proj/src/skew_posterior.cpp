#include "lps/skew_posterior.hpp"

#include <cmath>
#include <limits>

#include "lps/errors.hpp"
#include "lps/parallel.hpp"

namespace lps {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Matrix json_to_matrix(const nlohmann::json& j) {
  const Index rows = static_cast<Index>(j.size());
  const Index cols = rows > 0 ? static_cast<Index>(j.at(0).size()) : 0;
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index c = 0; c < cols; ++c)
      m(i, c) = j.at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(c)).get<double>();
  return m;
}

nlohmann::ordered_json matrix_to_json(const Matrix& m) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(i, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Vector json_to_vector(const nlohmann::json& j) {
  Vector v(static_cast<Index>(j.size()));
  for (Index i = 0; i < v.size(); ++i) v[i] = j.at(static_cast<std::size_t>(i)).get<double>();
  return v;
}

nlohmann::ordered_json vector_to_json(const Vector& v) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

struct GridMoments {
  double mass = 0.0;
  double mean = 0.0;
  double variance = 0.0;
  double skewness = 0.0;
  double mode = 0.0;
  bool escaped = false;
};

// Trapezoid moments of exp(logp - max) on a uniform grid; flags non-finite
// results and visible endpoint mass.
GridMoments grid_moments(const Vector& t, const Vector& logp) {
  const Index n = t.size();
  const double h = t[1] - t[0];
  const double top = logp.maxCoeff();
  if (!std::isfinite(top)) return {.escaped = true};

  Vector p(n);
  for (Index i = 0; i < n; ++i) p[i] = std::exp(logp[i] - top);

  GridMoments gm;
  auto trapz = [&](auto f) {
    double s = 0.5 * (f(Index(0)) + f(n - 1));
    for (Index i = 1; i + 1 < n; ++i) s += f(i);
    return s * h;
  };
  gm.mass = trapz([&](Index i) { return p[i]; });
  if (!(gm.mass > 0.0) || !std::isfinite(gm.mass)) return {.escaped = true};
  gm.mean = trapz([&](Index i) { return t[i] * p[i]; }) / gm.mass;
  gm.variance =
      trapz([&](Index i) { return (t[i] - gm.mean) * (t[i] - gm.mean) * p[i]; }) / gm.mass;
  const double m3 =
      trapz([&](Index i) { return std::pow(t[i] - gm.mean, 3) * p[i]; }) / gm.mass;
  if (!(gm.variance > 0.0) || !std::isfinite(gm.variance) || !std::isfinite(m3))
    return {.escaped = true};
  gm.skewness = m3 / std::pow(gm.variance, 1.5);
  if (!std::isfinite(gm.mean) || !std::isfinite(gm.skewness)) return {.escaped = true};

  // density not negligible at either end: widen the grid
  if (p[0] > 1e-6 || p[n - 1] > 1e-6) gm.escaped = true;

  Index arg = 0;
  logp.maxCoeff(&arg);
  gm.mode = t[arg];
  if (arg > 0 && arg + 1 < n) {
    // quadratic refinement of the grid argmax
    const double a = logp[arg - 1], b = logp[arg], c = logp[arg + 1];
    const double denom = a - 2.0 * b + c;
    if (denom < 0.0) gm.mode = t[arg] + 0.5 * h * (a - c) / denom;
  }
  return gm;
}

}  // namespace

Vector WhitenedFrame::to_whitened(const Vector& gamma) const {
  return zeta.array().rsqrt().matrix().asDiagonal() * (V.transpose() * (gamma - gamma_hat));
}

Vector WhitenedFrame::from_whitened(const Vector& t) const {
  return gamma_hat + V * (zeta.array().sqrt().matrix().asDiagonal() * t);
}

Vector WhitenedFrame::axis_point(Index s, double t) const {
  return gamma_hat + t * std::sqrt(zeta[s]) * V.col(s);
}

WhitenedFrame whiten(const LaplaceFit& fit) {
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(fit.sigma_gg);
  if (eig.info() != Eigen::Success)
    throw ConditioningError("whiten: eigendecomposition failed");
  const Index k1 = fit.sigma_gg.rows();

  WhitenedFrame frame;
  frame.gamma_hat = fit.gamma_hat();
  frame.V.resize(k1, k1);
  frame.zeta.resize(k1);
  // Eigen returns ascending eigenvalues; store nonincreasing with a
  // deterministic sign per eigenvector.
  for (Index s = 0; s < k1; ++s) {
    const Index src = k1 - 1 - s;
    frame.zeta[s] = eig.eigenvalues()[src];
    Vector v = eig.eigenvectors().col(src);
    Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v[arg] < 0.0) v = -v;
    frame.V.col(s) = v;
  }
  if (!(frame.zeta.minCoeff() > 0.0))
    throw ConditioningError("whiten: gamma covariance block is not positive definite");
  return frame;
}

GammaMarginal::GammaMarginal(const LaplaceFit& fit, const Model& model, Vector lambda)
    : model_(&model), lambda_(std::move(lambda)), cond_(conditional_theta_given_gamma(fit)) {}

double GammaMarginal::logdensity(const Vector& gamma) const {
  Vector xi(gamma.size() + cond_.theta_hat.size());
  xi.head(gamma.size()) = gamma;
  xi.tail(cond_.theta_hat.size()) = cond_.mean_at(gamma);
  // + 0.5 log |Sigma^{theta|gamma}|, constant in gamma
  return log_posterior(*model_, xi, lambda_) + cond_.half_log_det;
}

double axis_marginal_logdensity(const GammaMarginal& marginal, const WhitenedFrame& frame,
                                Index s, double t) {
  if (s < 0 || s >= frame.k1())
    throw std::invalid_argument("axis_marginal_logdensity: axis out of range");
  return marginal.logdensity(frame.axis_point(s, t));
}

SkewNormalParams fit_skew_normal_from_logdensity(
    const std::function<double(double)>& logdensity, const SkewFitOptions& opts) {
  const Index n = opts.grid_points;
  double width = opts.half_width;
  for (int attempt = 0; attempt < 2; ++attempt) {
    Vector t(n), logp(n);
    const double h = 2.0 * width / static_cast<double>(n - 1);
    for (Index i = 0; i < n; ++i) t[i] = -width + h * static_cast<double>(i);
    bool failed = false;  // exceptions must not unwind through the parallel region
#pragma omp parallel for schedule(static)
    for (Index i = 0; i < n; ++i) {
      try {
        logp[i] = logdensity(t[i]);
      } catch (...) {
        logp[i] = std::numeric_limits<double>::quiet_NaN();
#pragma omp atomic write
        failed = true;
      }
    }
    if (failed) throw EvaluationError("skew fit: density evaluation failed");

    const GridMoments gm = grid_moments(t, logp);
    if (gm.escaped) {
      width *= 2.0;
      continue;
    }
    SkewNormalParams fit = sn_fit_moments(gm.mean, gm.variance, gm.skewness);
    if (opts.mode_anchored) {
      // anchor the skew-normal mean at the target mode, keep scale and slant
      fit.psi += gm.mode - gm.mean;
    }
    return fit;
  }
  throw EvaluationError("skew fit: density mass escapes the doubled grid");
}

SkewNormalParams fit_skew_normal_to_axis(const GammaMarginal& marginal,
                                         const WhitenedFrame& frame, Index s,
                                         const SkewFitOptions& opts) {
  return fit_skew_normal_from_logdensity(
      [&](double t) { return axis_marginal_logdensity(marginal, frame, s, t); }, opts);
}

SkewCorrectedPosterior::SkewCorrectedPosterior(WhitenedFrame frame,
                                               std::vector<SkewNormalParams> axis_fits,
                                               ThetaConditional theta_conditional,
                                               Vector lambda_hat)
    : frame_(std::move(frame)),
      axis_fits_(std::move(axis_fits)),
      theta_conditional_(std::move(theta_conditional)),
      lambda_hat_(std::move(lambda_hat)) {
  if (static_cast<Index>(axis_fits_.size()) != frame_.k1())
    throw std::invalid_argument("SkewCorrectedPosterior: one axis fit per gamma axis");
}

double SkewCorrectedPosterior::gamma_logdensity(const Vector& gamma) const {
  const Vector t = frame_.to_whitened(gamma);
  double sum = 0.0;
  for (Index s = 0; s < frame_.k1(); ++s)
    sum += axis_fits_[static_cast<std::size_t>(s)].logpdf(t[s]) - 0.5 * std::log(frame_.zeta[s]);
  return sum;
}

Matrix SkewCorrectedPosterior::sample_joint(Index m, std::uint64_t seed) const {
  if (m < 1) throw std::invalid_argument("sample_joint: need m >= 1");
  const Index k1 = this->k1();
  const Index k2 = this->k2();
  const Matrix scale = frame_.V * frame_.zeta.array().sqrt().matrix().asDiagonal();
  const Matrix slope_scale = theta_conditional_.slope * scale;  // theta response to t

  Matrix draws(m, k1 + k2);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < m; ++i) {
    Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(i));
    Vector t(k1);
    for (Index s = 0; s < k1; ++s) t[s] = axis_fits_[static_cast<std::size_t>(s)].sample(rng);
    Vector z(k2);
    for (Index c = 0; c < k2; ++c) z[c] = rng.normal();
    draws.row(i).head(k1) = (frame_.gamma_hat + scale * t).transpose();
    draws.row(i).tail(k2) =
        (theta_conditional_.theta_hat + slope_scale * t + theta_conditional_.chol * z)
            .transpose();
  }
  return draws;
}

Matrix SkewCorrectedPosterior::sample_gamma(Index m, std::uint64_t seed) const {
  if (m < 1) throw std::invalid_argument("sample_gamma: need m >= 1");
  const Index k1 = this->k1();
  const Matrix scale = frame_.V * frame_.zeta.array().sqrt().matrix().asDiagonal();
  Matrix draws(m, k1);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < m; ++i) {
    Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(i));
    Vector t(k1);
    for (Index s = 0; s < k1; ++s) t[s] = axis_fits_[static_cast<std::size_t>(s)].sample(rng);
    draws.row(i) = (frame_.gamma_hat + scale * t).transpose();
  }
  return draws;
}

SkewNormalParams SkewCorrectedPosterior::marginal_component_fit(Index s, Index m,
                                                                std::uint64_t seed) const {
  if (s < 0 || s >= k1())
    throw std::invalid_argument("marginal_component_fit: component out of range");
  const Matrix draws = sample_gamma(m, seed);
  const SampleMoments sm = sample_moments(draws.col(s));
  return sn_fit_moments(sm.mean, sm.variance, sm.skewness);
}

SampleMoments sample_moments(const Vector& values) {
  const Index n = values.size();
  SampleMoments sm;
  sm.mean = par::blocked_sum(n, [&](std::ptrdiff_t i) { return values[i]; }) /
            static_cast<double>(n);
  const double m2 = par::blocked_sum(n, [&](std::ptrdiff_t i) {
                      const double d = values[i] - sm.mean;
                      return d * d;
                    }) / static_cast<double>(n);
  const double m3 = par::blocked_sum(n, [&](std::ptrdiff_t i) {
                      const double d = values[i] - sm.mean;
                      return d * d * d;
                    }) / static_cast<double>(n);
  sm.variance = m2 * static_cast<double>(n) / std::max<double>(1.0, static_cast<double>(n - 1));
  sm.skewness = m3 / std::pow(m2, 1.5);
  return sm;
}

nlohmann::ordered_json SkewCorrectedPosterior::to_json() const {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["lambda_hat"] = vector_to_json(lambda_hat_);
  j["frame"] = {{"gamma_hat", vector_to_json(frame_.gamma_hat)},
                {"zeta", vector_to_json(frame_.zeta)},
                {"V", matrix_to_json(frame_.V)}};
  nlohmann::ordered_json axes = nlohmann::ordered_json::array();
  for (const auto& fit : axis_fits_)
    axes.push_back({{"psi", fit.psi},
                    {"omega", fit.omega},
                    {"alpha", fit.alpha},
                    {"clamped", fit.clamped}});
  j["axis_fits"] = std::move(axes);
  j["theta_conditional"] = {{"theta_hat", vector_to_json(theta_conditional_.theta_hat)},
                            {"gamma_hat", vector_to_json(theta_conditional_.gamma_hat)},
                            {"slope", matrix_to_json(theta_conditional_.slope)},
                            {"cov", matrix_to_json(theta_conditional_.cov)}};
  return j;
}

SkewCorrectedPosterior SkewCorrectedPosterior::from_json(const nlohmann::json& j) {
  if (j.at("schema_version").get<int>() != 1)
    throw std::invalid_argument("SkewCorrectedPosterior: unsupported schema version");
  WhitenedFrame frame;
  frame.gamma_hat = json_to_vector(j.at("frame").at("gamma_hat"));
  frame.zeta = json_to_vector(j.at("frame").at("zeta"));
  frame.V = json_to_matrix(j.at("frame").at("V"));

  std::vector<SkewNormalParams> axes;
  for (const auto& a : j.at("axis_fits")) {
    SkewNormalParams p;
    p.psi = a.at("psi").get<double>();
    p.omega = a.at("omega").get<double>();
    p.alpha = a.at("alpha").get<double>();
    p.clamped = a.at("clamped").get<bool>();
    axes.push_back(p);
  }

  ThetaConditional cond;
  cond.theta_hat = json_to_vector(j.at("theta_conditional").at("theta_hat"));
  cond.gamma_hat = json_to_vector(j.at("theta_conditional").at("gamma_hat"));
  cond.slope = json_to_matrix(j.at("theta_conditional").at("slope"));
  cond.cov = json_to_matrix(j.at("theta_conditional").at("cov"));
  const Eigen::LLT<Matrix> llt(cond.cov);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("SkewCorrectedPosterior: conditional covariance not PD");
  cond.chol = llt.matrixL();
  cond.half_log_det = cond.chol.diagonal().array().log().sum();

  return SkewCorrectedPosterior(std::move(frame), std::move(axes), std::move(cond),
                                json_to_vector(j.at("lambda_hat")));
}

SkewCorrectedPosterior build_skew_posterior(const LaplaceFit& fit, const Model& model,
                                            const Vector& lambda_hat,
                                            const SkewFitOptions& opts) {
  const WhitenedFrame frame = whiten(fit);
  const GammaMarginal marginal(fit, model, lambda_hat);
  std::vector<SkewNormalParams> axes(static_cast<std::size_t>(frame.k1()));
  for (Index s = 0; s < frame.k1(); ++s)
    axes[static_cast<std::size_t>(s)] = fit_skew_normal_to_axis(marginal, frame, s, opts);
  return SkewCorrectedPosterior(frame, axes, marginal.conditional(), lambda_hat);
}

}  // namespace lps
