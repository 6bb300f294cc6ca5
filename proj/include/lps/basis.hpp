#pragma once

#include <vector>

#include "lps/types.hpp"

namespace lps {

/// Cubic B-spline basis on an equidistant knot grid spanning [xmin, xmax],
/// extended by `degree` knots with the same spacing on each side.
struct BasisSpec {
  double xmin = 0.0;
  double xmax = 1.0;
  int n_inner_segments = 8;  // 8 segments -> 11 raw cubic columns -> 10 recentered
  int degree = 3;
  bool recentered = false;

  int raw_columns() const { return n_inner_segments + degree; }
  int columns() const { return recentered ? raw_columns() - 1 : raw_columns(); }
  double knot_spacing() const { return (xmax - xmin) / n_inner_segments; }

  /// Full extended knot grid, n_inner_segments + 1 + 2*degree values.
  std::vector<double> knots() const;

  /// Spec whose recentered basis has exactly L columns.
  static BasisSpec for_recentered_columns(double xmin, double xmax, int L);
  /// Spec whose raw basis has exactly n_columns columns.
  static BasisSpec for_raw_columns(double xmin, double xmax, int n_columns);

  void validate() const;
};

struct BasisMatrix {
  Matrix values;  // n_points x columns
  BasisSpec spec;
};

/// P = D_r^T D_r for the order-r finite-difference operator D_r, plus the
/// ridged full-rank variant used when a proper coefficient prior is required.
struct PenaltyMatrix {
  int order = 2;  // difference order r
  Matrix matrix;  // L x L symmetric PSD
  int rank = 0;   // rho(P): L - r, or L for the ridged variant
};

/// Order-r finite-difference operator, (L-r) x L.
Matrix difference_operator(int L, int r);

PenaltyMatrix penalty_matrix(int L, int r);
PenaltyMatrix ridged_penalty_matrix(int L, int r, double ridge = 1e-6);

/// Penalty for a recentered (drop-last-column) basis: the order-r difference
/// penalty of the L+1 parent coefficients with the dropped coefficient pinned
/// at zero. Its null space (dimension r-1) maps to centered polynomial
/// trends, so fully smoothed terms collapse to the degree r-1 polynomial
/// instead of keeping the coefficient-flat artifact direction.
PenaltyMatrix projected_penalty_matrix(int L, int r);

/// Cox-de Boor evaluation of the raw basis at the given points.
/// Points outside [xmin, xmax] raise std::domain_error naming the point.
BasisMatrix evaluate_basis(const BasisSpec& spec, const Vector& points);

/// Integral of each raw column over [xmin, xmax], by Gauss-Legendre quadrature
/// with 8 nodes per knot span (exact for cubics).
Vector basis_column_integrals(const BasisSpec& spec);

/// Subtract each column's average value over [xmin, xmax] and drop the last
/// raw column, leaving L columns that integrate to zero. This restores
/// identifiability when the term enters an additive predictor.
BasisMatrix recenter_basis(const BasisMatrix& raw);

}  // namespace lps
