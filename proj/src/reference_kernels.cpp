#include "lps/reference.hpp"

#include <cmath>
#include <limits>

#include "lps/special_functions.hpp"

namespace lps::ref {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

double clamp_eta(double eta) { return std::min(std::max(eta, -30.0), 30.0); }
}  // namespace

double po_loglik(const Vector& gamma, const Vector& theta, const OrdinalDataset& data,
                 const Matrix& design) {
  for (Index r = 1; r < gamma.size(); ++r)
    if (!(gamma[r] > gamma[r - 1])) return -kInf;
  const int R = data.R;
  double ll = 0.0;
  for (Index i = 0; i < data.n(); ++i) {
    const double u = design.row(i).dot(theta);
    const int y = data.y[static_cast<std::size_t>(i)];
    const double fy = y < R ? logistic(clamp_eta(gamma[y - 1] + u)) : 1.0;
    const double fym = y > 1 ? logistic(clamp_eta(gamma[y - 2] + u)) : 0.0;
    const double pi = fy - fym;
    if (!(pi > 0.0)) return -kInf;
    ll += std::log(pi);
  }
  return ll;
}

ModelEvaluation po_grad_hess(const Vector& gamma, const Vector& theta,
                             const OrdinalDataset& data, const Matrix& design) {
  const int R = data.R;
  const Index k1 = R - 1;
  const Index k2 = design.cols();
  ModelEvaluation ev;
  ev.loglik = ref::po_loglik(gamma, theta, data, design);
  ev.gradient = Vector::Zero(k1 + k2);
  ev.hessian = Matrix::Zero(k1 + k2, k1 + k2);
  if (!std::isfinite(ev.loglik)) return ev;

  std::vector<double> F(static_cast<std::size_t>(R) + 1), pi(static_cast<std::size_t>(R) + 1),
      v(static_cast<std::size_t>(R) + 1), w(static_cast<std::size_t>(R) + 1),
      z(static_cast<std::size_t>(R) + 1);
  for (Index i = 0; i < data.n(); ++i) {
    const double u = design.row(i).dot(theta);
    const int y = data.y[static_cast<std::size_t>(i)];
    F[0] = 0.0;
    F[static_cast<std::size_t>(R)] = 1.0;
    for (int r = 1; r < R; ++r) F[static_cast<std::size_t>(r)] = logistic(clamp_eta(gamma[r - 1] + u));
    for (int r = 0; r <= R; ++r) {
      v[static_cast<std::size_t>(r)] = F[static_cast<std::size_t>(r)] * (1.0 - F[static_cast<std::size_t>(r)]);
      z[static_cast<std::size_t>(r)] = (1.0 - 2.0 * F[static_cast<std::size_t>(r)]) * v[static_cast<std::size_t>(r)];
    }
    for (int r = 1; r <= R; ++r) {
      pi[static_cast<std::size_t>(r)] = F[static_cast<std::size_t>(r)] - F[static_cast<std::size_t>(r - 1)];
      w[static_cast<std::size_t>(r)] = 1.0 + pi[static_cast<std::size_t>(r)] - 2.0 * F[static_cast<std::size_t>(r)];
    }

    const double py = pi[static_cast<std::size_t>(y)];
    // gamma gradient: (delta_{rs} v_r - delta_{r-1,s} v_{r-1}) / pi_r at r = y
    Vector dgamma = Vector::Zero(k1);
    if (y <= R - 1) dgamma[y - 1] += v[static_cast<std::size_t>(y)] / py;
    if (y >= 2) dgamma[y - 2] -= v[static_cast<std::size_t>(y - 1)] / py;
    ev.gradient.head(k1) += dgamma;

    // theta gradient: x w_y
    ev.gradient.tail(k2) += w[static_cast<std::size_t>(y)] * design.row(i).transpose();

    // gamma-gamma block: delta z terms minus the gradient outer product
    if (y <= R - 1) ev.hessian(y - 1, y - 1) += z[static_cast<std::size_t>(y)] / py;
    if (y >= 2) ev.hessian(y - 2, y - 2) -= z[static_cast<std::size_t>(y - 1)] / py;
    ev.hessian.topLeftCorner(k1, k1) -= dgamma * dgamma.transpose();

    // theta-theta block coefficient: pi_y w_y - 2 sum_{j<=y} pi_j w_j
    double cum = 0.0;
    for (int j = 1; j <= y; ++j)
      cum += pi[static_cast<std::size_t>(j)] * w[static_cast<std::size_t>(j)];
    const double d = py * w[static_cast<std::size_t>(y)] - 2.0 * cum;
    ev.hessian.bottomRightCorner(k2, k2) += d * design.row(i).transpose() * design.row(i);

    // cross block: -x (delta_{ys} v_y + delta_{y-1,s} v_{y-1})
    if (y <= R - 1)
      ev.hessian.block(k1, y - 1, k2, 1) -= v[static_cast<std::size_t>(y)] * design.row(i).transpose();
    if (y >= 2)
      ev.hessian.block(k1, y - 2, k2, 1) -= v[static_cast<std::size_t>(y - 1)] * design.row(i).transpose();
  }
  ev.hessian.topRightCorner(k1, k2) = ev.hessian.bottomLeftCorner(k2, k1).transpose();
  return ev;
}

double nb_loglik(double log_gamma, const Vector& theta, const CountDataset& data,
                 const BasisMatrix& basis) {
  const double g = std::exp(log_gamma);
  double ll = 0.0;
  for (Index i = 0; i < data.n(); ++i) {
    const double u = basis.values.row(i).dot(theta);
    if (!(u < 500.0)) return -kInf;
    const double mu = std::exp(u);
    const double y = static_cast<double>(data.y[static_cast<std::size_t>(i)]);
    ll += std::lgamma(y + g) - std::lgamma(g) - std::lgamma(y + 1.0) +
          g * std::log(g / (g + mu)) + y * std::log(mu / (g + mu));
  }
  return ll;
}

ModelEvaluation nb_grad_hess(double log_gamma, const Vector& theta, const CountDataset& data,
                             const BasisMatrix& basis) {
  const Index k = basis.values.cols();
  ModelEvaluation ev;
  ev.loglik = ref::nb_loglik(log_gamma, theta, data, basis);
  ev.gradient = Vector::Zero(1 + k);
  ev.hessian = Matrix::Zero(1 + k, 1 + k);
  if (!std::isfinite(ev.loglik)) return ev;

  const double g = std::exp(log_gamma);
  for (Index i = 0; i < data.n(); ++i) {
    const Vector b = basis.values.row(i).transpose();
    const double mu = std::exp(b.dot(theta));
    const double y = static_cast<double>(data.y[static_cast<std::size_t>(i)]);
    const double denom = g + mu;

    const double dldgamma = digamma(y + g) - digamma(g) + std::log(g / denom) + (mu - y) / denom;
    const double d2ldgamma2 =
        trigamma(y + g) - trigamma(g) + mu / (g * denom) - (mu - y) / (denom * denom);
    ev.gradient[0] += g * dldgamma;
    ev.hessian(0, 0) += g * dldgamma + g * g * d2ldgamma2;

    const double du = g * (y - mu) / denom;
    const double duu = -mu * g * (g + y) / (denom * denom);
    const double dug = g * mu * (y - mu) / (denom * denom);
    ev.gradient.tail(k) += du * b;
    ev.hessian.bottomRightCorner(k, k) += duu * b * b.transpose();
    ev.hessian.block(1, 0, k, 1) += dug * b;
  }
  ev.hessian.block(0, 1, 1, k) = ev.hessian.block(1, 0, k, 1).transpose();
  return ev;
}

}  // namespace lps::ref
