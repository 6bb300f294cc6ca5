#include "lps/prop_odds.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "lps/parallel.hpp"
#include "lps/rng.hpp"
#include "lps/special_functions.hpp"

namespace lps {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kEtaClamp = 30.0;


bool strictly_increasing(const Vector& gamma) {
  for (Index r = 1; r < gamma.size(); ++r)
    if (!(gamma[r] > gamma[r - 1])) return false;
  return true;
}

// Per-observation derivative coefficients; everything the gradient and
// Hessian need besides the design row.
struct ObsCoefs {
  Vector inv_pi;   // 1 / pi_{i, y_i}
  Vector vy, vym;  // v at y_i and y_i - 1 (zero at the boundaries)
  Vector zy, zym;
  Vector wy;       // w at y_i
  Vector dtheta;   // pi_y w_y - 2 sum_{j <= y} pi_j w_j
};

struct CoefPass {
  double loglik = 0.0;
  long clamps = 0;
  bool valid = true;
};

inline double clamp_eta(double eta, long& clamps) {
  if (eta > kEtaClamp) {
    ++clamps;
    return kEtaClamp;
  }
  if (eta < -kEtaClamp) {
    ++clamps;
    return -kEtaClamp;
  }
  return eta;
}

// pi_r = F_r - F_{r-1} via an expm1 product: logistic differences cancel
// catastrophically when the category probability is small, which desyncs the
// likelihood from its gradient near heavily smoothed modes.
inline double stable_pi(int r, int R, double eta_lo, double eta_hi) {
  if (r == 1) return logistic(eta_hi);
  if (r == R) return logistic(-eta_lo);
  return logistic_difference(eta_lo, eta_hi);
}

inline double stable_log_pi(int r, int R, double eta_lo, double eta_hi) {
  if (r == 1) return log_logistic(eta_hi);
  if (r == R) return log_logistic(-eta_lo);
  return log_logistic(eta_lo) + log_logistic(-eta_hi) + std::log(std::expm1(eta_hi - eta_lo));
}

// w_r = 1 + pi_r - 2 F_r = (1 - F_r) - F_{r-1}, same cancellation treatment.
inline double stable_w(int r, int R, double eta_lo, double eta_hi) {
  if (r == 1) return logistic(-eta_hi);
  if (r == R) return -logistic(eta_lo);
  return logistic(eta_lo) * logistic(eta_hi) * std::expm1(-eta_hi - eta_lo);
}

// One parallel sweep computing the likelihood and (optionally) the
// coefficient arrays. O(R) work per observation.
CoefPass coefficient_pass(const OrdinalDataset& data, const Vector& gamma,
                          const Vector& u, ObsCoefs* coefs, bool need_hessian) {
  const Index n = data.n();
  const int R = data.R;
  if (coefs) {
    coefs->inv_pi.resize(n);
    coefs->vy.resize(n);
    coefs->vym.resize(n);
    coefs->wy.resize(n);
    if (need_hessian) {
      coefs->zy.resize(n);
      coefs->zym.resize(n);
      coefs->dtheta.resize(n);
    }
  }
  return par::blocked_reduce<CoefPass>(
      n, CoefPass{},
      [&](CoefPass& part, std::ptrdiff_t lo, std::ptrdiff_t hi) {
        double sum = 0.0, comp = 0.0;  // Kahan-compensated block sum
        for (std::ptrdiff_t i = lo; i < hi; ++i) {
          const int y = data.y[static_cast<std::size_t>(i)];
          // eta at the two cutpoints framing category y (unused at boundaries)
          const double eta_lo = y >= 2 ? clamp_eta(gamma[y - 2] + u[i], part.clamps) : 0.0;
          const double eta_hi = y <= R - 1 ? clamp_eta(gamma[y - 1] + u[i], part.clamps) : 0.0;
          const double pi_y = stable_pi(y, R, eta_lo, eta_hi);
          const double log_pi = stable_log_pi(y, R, eta_lo, eta_hi);
          if (!(pi_y > 0.0) || !std::isfinite(log_pi)) {
            part.valid = false;
            part.loglik = -kInf;
            continue;
          }
          {
            const double yk = log_pi - comp;
            const double tk = sum + yk;
            comp = (tk - sum) - yk;
            sum = tk;
          }
          if (!coefs) continue;
          const double fy = y <= R - 1 ? logistic(eta_hi) : 1.0;
          const double vy = y <= R - 1 ? fy * logistic(-eta_hi) : 0.0;
          const double vym = y >= 2 ? logistic(eta_lo) * logistic(-eta_lo) : 0.0;
          coefs->inv_pi[i] = 1.0 / pi_y;
          coefs->vy[i] = vy;
          coefs->vym[i] = vym;
          coefs->wy[i] = stable_w(y, R, eta_lo, eta_hi);
          if (need_hessian) {
            coefs->zy[i] = y <= R - 1 ? -std::tanh(0.5 * eta_hi) * vy : 0.0;
            coefs->zym[i] = y >= 2 ? -std::tanh(0.5 * eta_lo) * vym : 0.0;
            double cum = 0.0;
            long dummy = 0;  // already counted above
            for (int j = 1; j <= y; ++j) {
              const double elo = j >= 2 ? clamp_eta(gamma[j - 2] + u[i], dummy) : 0.0;
              const double ehi = j <= R - 1 ? clamp_eta(gamma[j - 1] + u[i], dummy) : 0.0;
              cum += stable_pi(j, R, elo, ehi) * stable_w(j, R, elo, ehi);
            }
            coefs->dtheta[i] = pi_y * coefs->wy[i] - 2.0 * cum;
          }
        }
        if (part.valid) part.loglik = sum;
      },
      [](CoefPass& total, const CoefPass& part) {
        total.loglik += part.loglik;
        total.clamps += part.clamps;
        total.valid = total.valid && part.valid;
      });
}

struct GammaPartial {
  Vector grad;
  Matrix hess;      // gamma-gamma block
  Matrix cross;     // k2 x (R-1) theta-gamma block
};

}  // namespace

void OrdinalDataset::validate() const {
  if (R < 2) throw std::invalid_argument("OrdinalDataset: need R >= 2 categories");
  if (y.empty()) throw std::invalid_argument("OrdinalDataset: empty response");
  if (X.rows() != n()) throw std::invalid_argument("OrdinalDataset: X rows != n");
  for (int yi : y)
    if (yi < 1 || yi > R)
      throw std::invalid_argument("OrdinalDataset: responses must lie in 1..R");
}

POWorkspace po_workspace(const OrdinalDataset& data, const Matrix& design,
                         const Vector& gamma, const Vector& theta) {
  data.validate();
  const Index n = data.n();
  const int R = data.R;
  const Vector u = design * theta;

  POWorkspace ws;
  ws.F.resize(n, R + 1);
  ws.pi.resize(n, R);
  ws.v.resize(n, R + 1);
  ws.w.resize(n, R);
  ws.z.resize(n, R + 1);
  ws.valid = strictly_increasing(gamma);

  std::vector<long> clamp_partial(static_cast<std::size_t>(par::block_count(n)), 0);
  par::for_blocks(n, [&](std::ptrdiff_t b, std::ptrdiff_t lo, std::ptrdiff_t hi) {
    long clamps = 0;
    long dummy = 0;
    for (std::ptrdiff_t i = lo; i < hi; ++i) {
      ws.F(i, 0) = 0.0;
      ws.v(i, 0) = ws.z(i, 0) = 0.0;
      for (int r = 1; r < R; ++r) {
        const double eta = clamp_eta(gamma[r - 1] + u[i], clamps);
        ws.F(i, r) = logistic(eta);
        ws.v(i, r) = logistic(eta) * logistic(-eta);
        ws.z(i, r) = -std::tanh(0.5 * eta) * ws.v(i, r);
      }
      ws.F(i, R) = 1.0;
      ws.v(i, R) = ws.z(i, R) = 0.0;
      for (int r = 1; r <= R; ++r) {
        const double elo = r >= 2 ? clamp_eta(gamma[r - 2] + u[i], dummy) : 0.0;
        const double ehi = r <= R - 1 ? clamp_eta(gamma[r - 1] + u[i], dummy) : 0.0;
        ws.pi(i, r - 1) = stable_pi(r, R, elo, ehi);
        ws.w(i, r - 1) = stable_w(r, R, elo, ehi);
      }
    }
    clamp_partial[static_cast<std::size_t>(b)] = clamps;
  });
  for (long c : clamp_partial) ws.clamp_count += c;
  if (ws.valid) {
    for (Index i = 0; i < n && ws.valid; ++i)
      if (!(ws.pi(i, data.y[static_cast<std::size_t>(i)] - 1) > 0.0)) ws.valid = false;
  }
  return ws;
}

double po_loglik(const Vector& gamma, const Vector& theta, const OrdinalDataset& data,
                 const Matrix& design, long* clamp_events) {
  if (gamma.size() != data.R - 1)
    throw std::invalid_argument("po_loglik: gamma must have R - 1 entries");
  if (theta.size() != design.cols())
    throw std::invalid_argument("po_loglik: theta size does not match design");
  if (!strictly_increasing(gamma)) return -kInf;
  const Vector u = design * theta;
  const CoefPass pass = coefficient_pass(data, gamma, u, nullptr, false);
  if (clamp_events) *clamp_events += pass.clamps;
  return pass.valid ? pass.loglik : -kInf;
}

double po_loglik(const Vector& gamma, const Vector& theta, const OrdinalDataset& data,
                 const std::vector<BasisMatrix>& bases) {
  return po_loglik(gamma, theta, data, concat_designs(bases));
}

Matrix concat_designs(const std::vector<BasisMatrix>& bases) {
  if (bases.empty()) throw std::invalid_argument("concat_designs: no bases");
  Index cols = 0;
  for (const auto& b : bases) cols += b.values.cols();
  Matrix design(bases.front().values.rows(), cols);
  Index at = 0;
  for (const auto& b : bases) {
    if (b.values.rows() != design.rows())
      throw std::invalid_argument("concat_designs: row mismatch across bases");
    design.middleCols(at, b.values.cols()) = b.values;
    at += b.values.cols();
  }
  return design;
}

ModelEvaluation po_grad_hess(const Vector& gamma, const Vector& theta,
                             const OrdinalDataset& data, const Matrix& design,
                             long* clamp_events) {
  const Index k1 = data.R - 1;
  const Index k2 = design.cols();
  const Index n = data.n();
  ModelEvaluation ev;
  ev.gradient = Vector::Zero(k1 + k2);
  ev.hessian = Matrix::Zero(k1 + k2, k1 + k2);
  if (!strictly_increasing(gamma)) {
    ev.loglik = -kInf;
    return ev;
  }

  const Vector u = design * theta;
  ObsCoefs coefs;
  const CoefPass pass = coefficient_pass(data, gamma, u, &coefs, true);
  if (clamp_events) *clamp_events += pass.clamps;
  if (!pass.valid) {
    ev.loglik = -kInf;
    return ev;
  }
  ev.loglik = pass.loglik;

  // Sparse per-observation pieces: the gamma gradient touches categories
  // y_i and y_i - 1 only, and the gamma Hessian subtracts the outer product
  // of that two-entry gradient.
  GammaPartial init;
  init.grad = Vector::Zero(k1);
  init.hess = Matrix::Zero(k1, k1);
  init.cross = Matrix::Zero(k2, k1);
  GammaPartial acc = par::blocked_reduce<GammaPartial>(
      n, init,
      [&](GammaPartial& part, std::ptrdiff_t lo, std::ptrdiff_t hi) {
        for (std::ptrdiff_t i = lo; i < hi; ++i) {
          const int y = data.y[static_cast<std::size_t>(i)];
          const double inv_pi = coefs.inv_pi[i];
          const double gy = coefs.vy[i] * inv_pi;    // d log pi / d gamma_y
          const double gym = -coefs.vym[i] * inv_pi; // d log pi / d gamma_{y-1}
          const bool has_y = y <= data.R - 1;
          const bool has_ym = y >= 2;
          if (has_y) {
            part.grad[y - 1] += gy;
            part.hess(y - 1, y - 1) += coefs.zy[i] * inv_pi - gy * gy;
            part.cross.col(y - 1) -= coefs.vy[i] * design.row(i).transpose();
          }
          if (has_ym) {
            part.grad[y - 2] += gym;
            part.hess(y - 2, y - 2) += -coefs.zym[i] * inv_pi - gym * gym;
            part.cross.col(y - 2) -= coefs.vym[i] * design.row(i).transpose();
          }
          if (has_y && has_ym) {
            const double off = -gy * gym;
            part.hess(y - 1, y - 2) += off;
            part.hess(y - 2, y - 1) += off;
          }
        }
      },
      [](GammaPartial& total, const GammaPartial& part) {
        total.grad += part.grad;
        total.hess += part.hess;
        total.cross += part.cross;
      });

  ev.gradient.head(k1) = acc.grad;
  ev.hessian.topLeftCorner(k1, k1) = acc.hess;
  ev.hessian.bottomLeftCorner(k2, k1) = acc.cross;
  ev.hessian.topRightCorner(k1, k2) = acc.cross.transpose();

  // Dense theta blocks: X' wy and X' diag(dtheta) X, accumulated per block.
  struct ThetaPartial {
    Vector grad;
    Matrix hess;
  };
  ThetaPartial tinit{Vector::Zero(k2), Matrix::Zero(k2, k2)};
  ThetaPartial tacc = par::blocked_reduce<ThetaPartial>(
      n, tinit,
      [&](ThetaPartial& part, std::ptrdiff_t lo, std::ptrdiff_t hi) {
        const auto rows = design.middleRows(lo, hi - lo);
        part.grad.noalias() += rows.transpose() * coefs.wy.segment(lo, hi - lo);
        part.hess.noalias() +=
            rows.transpose() * coefs.dtheta.segment(lo, hi - lo).asDiagonal() * rows;
      },
      [](ThetaPartial& total, const ThetaPartial& part) {
        total.grad += part.grad;
        total.hess += part.hess;
      });
  ev.gradient.tail(k2) = tacc.grad;
  ev.hessian.bottomRightCorner(k2, k2) = tacc.hess;
  return ev;
}

ModelEvaluation po_grad_hess(const Vector& gamma, const Vector& theta,
                             const OrdinalDataset& data,
                             const std::vector<BasisMatrix>& bases) {
  return po_grad_hess(gamma, theta, data, concat_designs(bases));
}

ModelEvaluation po_grad(const Vector& gamma, const Vector& theta, const OrdinalDataset& data,
                        const Matrix& design, long* clamp_events) {
  const Index k1 = data.R - 1;
  const Index k2 = design.cols();
  const Index n = data.n();
  ModelEvaluation ev;
  ev.gradient = Vector::Zero(k1 + k2);
  if (!strictly_increasing(gamma)) {
    ev.loglik = -kInf;
    return ev;
  }
  const Vector u = design * theta;
  ObsCoefs coefs;
  const CoefPass pass = coefficient_pass(data, gamma, u, &coefs, false);
  if (clamp_events) *clamp_events += pass.clamps;
  if (!pass.valid) {
    ev.loglik = -kInf;
    return ev;
  }
  ev.loglik = pass.loglik;

  Vector ggrad = par::blocked_reduce<Vector>(
      n, Vector(Vector::Zero(k1)),
      [&](Vector& part, std::ptrdiff_t lo, std::ptrdiff_t hi) {
        for (std::ptrdiff_t i = lo; i < hi; ++i) {
          const int y = data.y[static_cast<std::size_t>(i)];
          if (y <= data.R - 1) part[y - 1] += coefs.vy[i] * coefs.inv_pi[i];
          if (y >= 2) part[y - 2] -= coefs.vym[i] * coefs.inv_pi[i];
        }
      },
      [](Vector& total, const Vector& part) { total += part; });
  ev.gradient.head(k1) = ggrad;

  Vector tgrad = par::blocked_reduce<Vector>(
      n, Vector(Vector::Zero(k2)),
      [&](Vector& part, std::ptrdiff_t lo, std::ptrdiff_t hi) {
        part.noalias() +=
            design.middleRows(lo, hi - lo).transpose() * coefs.wy.segment(lo, hi - lo);
      },
      [](Vector& total, const Vector& part) { total += part; });
  ev.gradient.tail(k2) = tgrad;
  return ev;
}

PropOddsModel::PropOddsModel(OrdinalDataset data, std::vector<BasisMatrix> bases,
                             PropOddsOptions opts)
    : data_(std::move(data)), bases_(std::move(bases)) {
  data_.validate();
  if (bases_.empty()) throw std::invalid_argument("PropOddsModel: no bases");
  design_ = concat_designs(bases_);
  if (design_.rows() != data_.n())
    throw std::invalid_argument("PropOddsModel: design rows != n");

  part_.k1 = data_.R - 1;
  part_.k2 = design_.cols();
  Index at = 0;
  for (const auto& b : bases_) {
    part_.term_offsets.emplace_back(at, b.values.cols());
    at += b.values.cols();
  }
  part_.validate();

  prior_.gamma_mean = Vector::Zero(part_.k1);
  prior_.gamma_precision = opts.q_scale * Matrix::Identity(part_.k1, part_.k1);
  if (!opts.penalty_orders.empty() && opts.penalty_orders.size() != bases_.size())
    throw std::invalid_argument("PropOddsModel: one penalty order per term expected");
  for (std::size_t j = 0; j < bases_.size(); ++j) {
    const int order =
        opts.penalty_orders.empty() ? opts.penalty_order : opts.penalty_orders[j];
    const int cols = static_cast<int>(bases_[j].values.cols());
    // recentered terms carry the projected parent penalty so that full
    // smoothing collapses them to a centered polynomial trend
    prior_.penalty_templates.push_back(bases_[j].spec.recentered
                                           ? projected_penalty_matrix(cols, order)
                                           : penalty_matrix(cols, order));
  }
  prior_.lambda_a = opts.lambda_a;
  prior_.lambda_b = opts.lambda_b;
}

PropOddsModel::PropOddsModel(OrdinalDataset data, Matrix design,
                             std::vector<PenaltyMatrix> penalties, PropOddsOptions opts)
    : data_(std::move(data)), design_(std::move(design)) {
  data_.validate();
  if (design_.rows() != data_.n())
    throw std::invalid_argument("PropOddsModel: design rows != n");
  part_.k1 = data_.R - 1;
  part_.k2 = design_.cols();
  Index at = 0;
  for (const auto& p : penalties) {
    part_.term_offsets.emplace_back(at, p.matrix.rows());
    at += p.matrix.rows();
  }
  part_.validate();
  prior_.gamma_mean = Vector::Zero(part_.k1);
  prior_.gamma_precision = opts.q_scale * Matrix::Identity(part_.k1, part_.k1);
  prior_.penalty_templates = std::move(penalties);
  prior_.lambda_a = opts.lambda_a;
  prior_.lambda_b = opts.lambda_b;
}

double PropOddsModel::loglik(const Vector& xi) const {
  long clamps = 0;
  const double ll =
      po_loglik(xi.head(part_.k1), xi.tail(part_.k2), data_, design_, &clamps);
  if (clamps) clamp_events_.fetch_add(clamps, std::memory_order_relaxed);
  return ll;
}

ModelEvaluation PropOddsModel::loglik_grad(const Vector& xi) const {
  long clamps = 0;
  ModelEvaluation ev = po_grad(xi.head(part_.k1), xi.tail(part_.k2), data_, design_, &clamps);
  if (clamps) clamp_events_.fetch_add(clamps, std::memory_order_relaxed);
  return ev;
}

ModelEvaluation PropOddsModel::loglik_grad_hess(const Vector& xi) const {
  long clamps = 0;
  ModelEvaluation ev =
      po_grad_hess(xi.head(part_.k1), xi.tail(part_.k2), data_, design_, &clamps);
  if (clamps) clamp_events_.fetch_add(clamps, std::memory_order_relaxed);
  return ev;
}

Vector PropOddsModel::initial_point() const {
  const Index n = data_.n();
  Vector counts = Vector::Zero(data_.R);
  for (int yi : data_.y) counts[yi - 1] += 1.0;
  Vector xi = Vector::Zero(part_.dim());
  double cum = 0.0;
  double prev = 0.0;
  for (Index r = 0; r + 1 < data_.R; ++r) {
    cum += counts[r];
    double p = cum / static_cast<double>(n);
    p = std::min(std::max(p, 1.0 / (n + 1.0)), n / (n + 1.0));
    // Empty categories would give tied cutpoints; nudge to keep gamma strict.
    p = std::max(p, prev + 0.5 / static_cast<double>(n));
    prev = p;
    xi[r] = logit(p);
  }
  return xi;
}

double POSimTerm::value(double x) const {
  const double range = hi - lo;
  switch (shape) {
    case Shape::linear:
      return amplitude * (2.0 * (x - lo) / range - 1.0);
    case Shape::sine:
      return amplitude * std::sin(2.0 * M_PI * (x - lo) / range);
    case Shape::none:
    default:
      return 0.0;
  }
}

OrdinalDataset po_simulate(const Vector& gamma, const std::vector<POSimTerm>& terms,
                           Index n, std::uint64_t seed) {
  if (!strictly_increasing(gamma))
    throw std::invalid_argument("po_simulate: cutpoints must be strictly increasing");
  const int R = static_cast<int>(gamma.size()) + 1;
  OrdinalDataset data;
  data.R = R;
  data.y.resize(static_cast<std::size_t>(n));
  data.X.resize(n, static_cast<Index>(terms.size()));

  Rng rng(seed);
  for (Index i = 0; i < n; ++i) {
    double f = 0.0;
    for (std::size_t j = 0; j < terms.size(); ++j) {
      const POSimTerm& term = terms[j];
      const double x = term.lo + (term.hi - term.lo) * rng.uniform();
      data.X(i, static_cast<Index>(j)) = x;
      f += term.value(x);
    }
    const double u = rng.uniform();
    int y = R;
    for (int r = 1; r < R; ++r) {
      if (u <= logistic(gamma[r - 1] + f)) {
        y = r;
        break;
      }
    }
    data.y[static_cast<std::size_t>(i)] = y;
  }
  return data;
}

}  // namespace lps
