#include "lps/basis.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace lps {

namespace {

// 8-point Gauss-Legendre rule on [-1, 1]; exact through degree 15.
constexpr double kGlNodes[8] = {
    -0.96028985649753623168, -0.79666647741362673959, -0.52553240991632898582,
    -0.18343464249564980494, 0.18343464249564980494,  0.52553240991632898582,
    0.79666647741362673959,  0.96028985649753623168,
};
constexpr double kGlWeights[8] = {
    0.10122853629037625915, 0.22238103445337447054, 0.31370664587788728734,
    0.36268378337836198297, 0.36268378337836198297, 0.31370664587788728734,
    0.22238103445337447054, 0.10122853629037625915,
};

// de Boor triangular scheme: the degree+1 nonzero basis values at x, which
// lies in knot span [t_k, t_{k+1}).
void nonzero_basis(const std::vector<double>& t, int k, int degree, double x,
                   double* out) {
  double left[8], right[8];
  out[0] = 1.0;
  for (int j = 1; j <= degree; ++j) {
    left[j] = x - t[k + 1 - j];
    right[j] = t[k + j] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double temp = out[r] / (right[r + 1] + left[j - r]);
      out[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    out[j] = saved;
  }
}

}  // namespace

void BasisSpec::validate() const {
  if (!(xmin < xmax)) throw std::invalid_argument("BasisSpec: xmin must be < xmax");
  if (n_inner_segments < 1)
    throw std::invalid_argument("BasisSpec: need at least one inner segment");
  if (degree != 3) throw std::invalid_argument("BasisSpec: basis is cubic (degree 3)");
}

std::vector<double> BasisSpec::knots() const {
  validate();
  const double h = knot_spacing();
  std::vector<double> t(static_cast<std::size_t>(n_inner_segments + 1 + 2 * degree));
  for (std::size_t i = 0; i < t.size(); ++i)
    t[i] = xmin + (static_cast<int>(i) - degree) * h;
  return t;
}

BasisSpec BasisSpec::for_recentered_columns(double xmin, double xmax, int L) {
  if (L < 4) throw std::invalid_argument("BasisSpec: recentered basis needs L >= 4");
  BasisSpec spec{xmin, xmax, L - 2, 3, true};
  spec.validate();
  return spec;
}

BasisSpec BasisSpec::for_raw_columns(double xmin, double xmax, int n_columns) {
  if (n_columns < 4) throw std::invalid_argument("BasisSpec: raw basis needs >= 4 columns");
  BasisSpec spec{xmin, xmax, n_columns - 3, 3, false};
  spec.validate();
  return spec;
}

BasisMatrix evaluate_basis(const BasisSpec& spec, const Vector& points) {
  spec.validate();
  const std::vector<double> t = spec.knots();
  const int degree = spec.degree;
  const int n_basis = spec.raw_columns();
  const double h = spec.knot_spacing();

  Matrix values = Matrix::Zero(points.size(), n_basis);
  double buf[8];
  for (Index i = 0; i < points.size(); ++i) {
    const double x = points[i];
    if (!(x >= spec.xmin && x <= spec.xmax)) {
      std::ostringstream msg;
      msg << "evaluate_basis: point " << x << " outside [" << spec.xmin << ", "
          << spec.xmax << "]";
      throw std::domain_error(msg.str());
    }
    int span = degree + static_cast<int>(std::floor((x - spec.xmin) / h));
    span = std::min(span, degree + spec.n_inner_segments - 1);
    nonzero_basis(t, span, degree, x, buf);
    for (int j = 0; j <= degree; ++j) values(i, span - degree + j) = buf[j];
  }

  BasisMatrix out;
  out.values = std::move(values);
  out.spec = spec;
  out.spec.recentered = false;
  return out;
}

Vector basis_column_integrals(const BasisSpec& spec) {
  spec.validate();
  const std::vector<double> t = spec.knots();
  const int degree = spec.degree;
  const double h = spec.knot_spacing();

  Vector integrals = Vector::Zero(spec.raw_columns());
  double buf[8];
  for (int seg = 0; seg < spec.n_inner_segments; ++seg) {
    const int span = degree + seg;
    const double a = t[span];
    const double mid = a + 0.5 * h;
    for (int q = 0; q < 8; ++q) {
      const double x = mid + 0.5 * h * kGlNodes[q];
      nonzero_basis(t, span, degree, x, buf);
      const double w = 0.5 * h * kGlWeights[q];
      for (int j = 0; j <= degree; ++j) integrals[span - degree + j] += w * buf[j];
    }
  }
  return integrals;
}

BasisMatrix recenter_basis(const BasisMatrix& raw) {
  if (raw.spec.recentered)
    throw std::invalid_argument("recenter_basis: basis is already recentered");
  const int n_raw = raw.spec.raw_columns();
  if (raw.values.cols() != n_raw)
    throw std::invalid_argument("recenter_basis: column count does not match spec");

  const Vector integrals = basis_column_integrals(raw.spec);
  const double range = raw.spec.xmax - raw.spec.xmin;

  BasisMatrix out;
  out.values.resize(raw.values.rows(), n_raw - 1);
  for (int c = 0; c < n_raw - 1; ++c)
    out.values.col(c) = raw.values.col(c).array() - integrals[c] / range;
  out.spec = raw.spec;
  out.spec.recentered = true;
  return out;
}

Matrix difference_operator(int L, int r) {
  if (r < 1 || r >= L)
    throw std::invalid_argument("difference_operator: need 1 <= r < L");
  Matrix d = Matrix::Identity(L, L);
  for (int step = 0; step < r; ++step) {
    const Index rows = d.rows() - 1;
    Matrix next(rows, L);
    next = d.bottomRows(rows) - d.topRows(rows);
    d = std::move(next);
  }
  return d;
}

PenaltyMatrix penalty_matrix(int L, int r) {
  const Matrix d = difference_operator(L, r);
  PenaltyMatrix p;
  p.order = r;
  p.matrix = d.transpose() * d;
  p.rank = L - r;
  return p;
}

PenaltyMatrix ridged_penalty_matrix(int L, int r, double ridge) {
  if (!(ridge > 0.0)) throw std::invalid_argument("ridged_penalty_matrix: ridge must be > 0");
  PenaltyMatrix p = penalty_matrix(L, r);
  p.matrix += ridge * Matrix::Identity(L, L);
  p.rank = L;
  return p;
}

PenaltyMatrix projected_penalty_matrix(int L, int r) {
  const Matrix parent = difference_operator(L + 1, r);
  const Matrix d = parent.leftCols(L);  // dropped coefficient pinned at zero
  PenaltyMatrix p;
  p.order = r;
  p.matrix = d.transpose() * d;
  p.rank = L - r + 1;
  return p;
}

}  // namespace lps
