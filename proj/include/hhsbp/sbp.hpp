#pragma once

// Diagonal-norm summation-by-parts first-derivative operators on uniform grids.
//
// Global order s maps onto interior/boundary accuracy as
//   s = 2: interior 2, closure 1      s = 3: interior 4, closure 2
//   s = 4: interior 6, closure 3      s = 5: interior 8, closure 4
// The coefficient tables live in detail/sbp_coefficients.hpp.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "hhsbp/detail/sbp_coefficients.hpp"
#include "hhsbp/error.hpp"

namespace hhsbp {

using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Uniform grid of n_points nodes on [0, length].
struct GridSpec {
  double length = 1.0;
  int n_points = 2;

  static GridSpec make(double length, int n_points) {
    if (!(length > 0.0) || !std::isfinite(length)) {
      throw ConfigError("grid length must be positive and finite");
    }
    if (n_points < 2) throw ConfigError("grid needs at least 2 points");
    return GridSpec{length, n_points};
  }

  double spacing() const { return length / (n_points - 1); }
  double x(int i) const { return i == n_points - 1 ? length : i * spacing(); }
  Vector nodes() const {
    Vector out(n_points);
    for (int i = 0; i < n_points; ++i) out[i] = x(i);
    return out;
  }
};

namespace detail {

struct ClosureView {
  int half_width;
  int block_rows;
  std::span<const double> interior;
  std::span<const double> norm;
  std::span<const double> skew_upper;
};

template <class Table>
ClosureView view_of() {
  return ClosureView{Table::kHalfWidth, Table::kBlockRows, Table::interior, Table::norm,
                     Table::skew_upper};
}

inline ClosureView closure_for(int order) {
  switch (order) {
    case 2: return view_of<Sbp2>();
    case 3: return view_of<Sbp4>();
    case 4: return view_of<Sbp6>();
    case 5: return view_of<Sbp8>();
    default:
      throw ConfigError("unsupported SBP order " + std::to_string(order) +
                        " (supported: 2, 3, 4, 5)");
  }
}

// Entry (i, j) of the unit-spacing Q for an n-point grid.
inline double q_entry(const ClosureView& c, int n, int i, int j) {
  const int r = c.block_rows;
  auto block = [&](int a, int b) -> double {
    if (a == b) return a == 0 ? -0.5 : 0.0;
    const int lo = std::min(a, b), hi = std::max(a, b);
    // row-major strict upper triangle index
    const int idx = lo * r - lo * (lo + 1) / 2 + (hi - lo - 1);
    const double v = c.skew_upper[idx];
    return a < b ? v : -v;
  };
  if (i < r && j < r) return block(i, j);
  if (i >= n - r && j >= n - r) return -block(n - 1 - i, n - 1 - j);
  const int d = j - i;
  if (d != 0 && std::abs(d) <= c.half_width) {
    const double v = c.interior[std::abs(d) - 1];
    return d > 0 ? v : -v;
  }
  return 0.0;
}

}  // namespace detail

/// Smallest grid accepted for each global order: twice the closure block plus one.
inline int minimum_points(int order) {
  return 2 * detail::closure_for(order).block_rows + 1;
}

/// Interior polynomial degree differentiated exactly by D1.
inline int interior_degree(int order) { return 2 * detail::closure_for(order).half_width; }

/// Polynomial degree differentiated exactly in the boundary closure rows.
inline int boundary_degree(int order) { return detail::closure_for(order).half_width; }

/// P, Q, B and D1 = P^{-1} Q for one branch grid. Immutable after construction.
class SbpOperatorSet {
 public:
  SbpOperatorSet(int order, GridSpec grid, Vector norm, SparseMatrix q)
      : order_(order), grid_(grid), norm_(std::move(norm)), q_(std::move(q)) {
    const auto n = static_cast<std::size_t>(grid_.n_points);
    require_size(static_cast<std::size_t>(norm_.size()), n, "SBP norm");
    require_size(static_cast<std::size_t>(q_.rows()), n, "SBP Q rows");
    require_size(static_cast<std::size_t>(q_.cols()), n, "SBP Q cols");
    q_.makeCompressed();
    d1_ = norm_.cwiseInverse().asDiagonal() * q_;
    d1_.makeCompressed();
    d1t_ = SparseMatrix(d1_.transpose());
    d1t_.makeCompressed();
  }

  int order() const { return order_; }
  int size() const { return grid_.n_points; }
  double spacing() const { return grid_.spacing(); }
  const GridSpec& grid() const { return grid_; }

  /// Diagonal of P, including the grid spacing.
  const Vector& norm() const { return norm_; }
  const SparseMatrix& q() const { return q_; }
  const SparseMatrix& d1() const { return d1_; }
  const SparseMatrix& d1_transpose() const { return d1t_; }

  /// Diagonal of B = diag(-1, 0, ..., 0, 1).
  Vector boundary_diagonal() const {
    Vector b = Vector::Zero(size());
    b[0] = -1.0;
    b[size() - 1] = 1.0;
    return b;
  }

  /// Number of boundary-closure rows at each end.
  int closure_rows() const { return order_ >= 2 && order_ <= 5 ? detail::closure_for(order_).block_rows : 0; }

  /// Column of D1^T at node `node`, i.e. D1^T e_node, as a dense vector.
  Vector d1_transpose_column(int node) const {
    Vector out = Vector::Zero(size());
    for (SparseMatrix::InnerIterator it(d1_, node); it; ++it) out[it.col()] = it.value();
    return out;
  }

  /// (D1 v) at a single node.
  double derivative_at(const Vector& v, int node) const {
    double s = 0.0;
    for (SparseMatrix::InnerIterator it(d1_, node); it; ++it) s += it.value() * v[it.col()];
    return s;
  }

 private:
  int order_;
  GridSpec grid_;
  Vector norm_;
  SparseMatrix q_;
  SparseMatrix d1_;
  SparseMatrix d1t_;
};

/// Builds the standard diagonal-norm operator of global order 2..5 on `grid`.
inline SbpOperatorSet build_sbp(int order, const GridSpec& grid) {
  const auto closure = detail::closure_for(order);
  const int n = grid.n_points;
  const int nmin = 2 * closure.block_rows + 1;
  if (n < nmin) {
    throw ConfigError("order " + std::to_string(order) + " needs at least " +
                      std::to_string(nmin) + " grid points, got " + std::to_string(n));
  }
  const double h = grid.spacing();
  const int r = closure.block_rows;
  Vector norm = Vector::Constant(n, h);
  for (int i = 0; i < r; ++i) {
    norm[i] = closure.norm[i] * h;
    norm[n - 1 - i] = closure.norm[i] * h;
  }
  std::vector<Eigen::Triplet<double>> triplets;
  const int reach = std::max(r + closure.half_width, closure.half_width + 1);
  for (int i = 0; i < n; ++i) {
    const int j0 = std::max(0, i - reach), j1 = std::min(n - 1, i + reach);
    for (int j = j0; j <= j1; ++j) {
      const double v = detail::q_entry(closure, n, i, j);
      if (v != 0.0) triplets.emplace_back(i, j, v);
    }
  }
  SparseMatrix q(n, n);
  q.setFromTriplets(triplets.begin(), triplets.end());
  return SbpOperatorSet(order, grid, std::move(norm), std::move(q));
}

inline Vector apply_d1(const SbpOperatorSet& ops, const Vector& v) {
  require_size(static_cast<std::size_t>(v.size()), static_cast<std::size_t>(ops.size()), "apply_d1");
  return ops.d1() * v;
}

inline Vector apply_d1_transpose(const SbpOperatorSet& ops, const Vector& v) {
  require_size(static_cast<std::size_t>(v.size()), static_cast<std::size_t>(ops.size()),
               "apply_d1_transpose");
  return ops.d1_transpose() * v;
}

/// v^T P w.
inline double p_inner(const SbpOperatorSet& ops, const Vector& v, const Vector& w) {
  require_size(static_cast<std::size_t>(v.size()), static_cast<std::size_t>(ops.size()), "p_inner");
  require_size(static_cast<std::size_t>(w.size()), static_cast<std::size_t>(ops.size()), "p_inner");
  return (v.array() * ops.norm().array() * w.array()).sum();
}

inline double p_norm(const SbpOperatorSet& ops, const Vector& v) {
  return std::sqrt(p_inner(ops, v, v));
}

struct SbpTolerances {
  double identity = 1e-13;
  double exactness = 1e-10;
};

/// Diagnostics of the SBP contract for one operator set.
struct SbpReport {
  int order = 0;
  int n_points = 0;
  double skew_residual = 0.0;               ///< max |Q + Q^T - B|
  double min_norm_weight = 0.0;             ///< min diag(P)
  double quadrature_residual = 0.0;         ///< |1^T P 1 - L| / L
  std::vector<double> interior_exactness;   ///< relative residual per degree 0..interior
  std::vector<double> boundary_exactness;   ///< relative residual per degree 0..closure
  bool skew_ok = false;
  bool positivity_ok = false;
  bool exactness_ok = false;
  bool quadrature_ok = false;

  bool passed() const { return skew_ok && positivity_ok && exactness_ok && quadrature_ok; }
};

inline SbpReport validate_sbp(const SbpOperatorSet& ops, SbpTolerances tol = {}) {
  SbpReport rep;
  rep.order = ops.order();
  rep.n_points = ops.size();
  const int n = ops.size();

  const Eigen::MatrixXd q = Eigen::MatrixXd(ops.q());
  Eigen::MatrixXd sym = q + q.transpose();
  sym(0, 0) += 1.0;
  sym(n - 1, n - 1) -= 1.0;
  rep.skew_residual = sym.cwiseAbs().maxCoeff();
  rep.skew_ok = rep.skew_residual <= tol.identity;

  rep.min_norm_weight = ops.norm().minCoeff();
  rep.positivity_ok = rep.min_norm_weight > 0.0;

  const double len = ops.grid().length;
  rep.quadrature_residual = std::abs(ops.norm().sum() - len) / len;
  rep.quadrature_ok = rep.quadrature_residual <= 1e-12;

  // Work in the unit coordinate xi = x / L so high monomials stay O(1).
  const Vector xi = ops.grid().nodes() / len;
  const int rows = ops.closure_rows();
  const int deg_int = interior_degree(ops.order());
  const int deg_bnd = boundary_degree(ops.order());
  rep.interior_exactness.assign(deg_int + 1, 0.0);
  rep.boundary_exactness.assign(deg_bnd + 1, 0.0);
  for (int k = 0; k <= deg_int; ++k) {
    const Vector mono = xi.array().pow(k);
    Vector exact = Vector::Zero(n);
    if (k > 0) exact = k * xi.array().pow(k - 1);
    const Vector approx = (ops.d1() * mono) * len;
    const double scale = std::max(1.0, exact.cwiseAbs().maxCoeff());
    for (int i = 0; i < n; ++i) {
      const double err = std::abs(approx[i] - exact[i]) / scale;
      const bool boundary = i < rows || i >= n - rows;
      if (!boundary) {
        rep.interior_exactness[k] = std::max(rep.interior_exactness[k], err);
      } else if (k <= deg_bnd) {
        rep.boundary_exactness[k] = std::max(rep.boundary_exactness[k], err);
      }
    }
  }
  rep.exactness_ok = true;
  for (double e : rep.interior_exactness) rep.exactness_ok = rep.exactness_ok && e <= tol.exactness;
  for (double e : rep.boundary_exactness) rep.exactness_ok = rep.exactness_ok && e <= tol.exactness;
  return rep;
}

}  // namespace hhsbp
