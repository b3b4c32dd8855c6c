#pragma once

// Discrete differential operators and norms on the staggered grid.
//
// Conventions: divergence and gradient are the MAC pair (gradient = -divergence^T
// on wall-compatible fields), so summation by parts holds to rounding. The
// gradient carries zero normal flux through slip walls. Vorticity and the
// off-diagonal strain live on nodes; wall nodes are filled by quadratic
// extrapolation along the wall normal before averaging to cells.

#include "heavyflow/field.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace heavyflow {

template <typename Scalar>
struct SymTensorFieldT {
  ScalarFieldT<Scalar> xx;
  ScalarFieldT<Scalar> xy;
  ScalarFieldT<Scalar> yy;

  ScalarFieldT<Scalar> trace() const { return xx + yy; }
};
using SymTensorField = SymTensorFieldT<double>;

namespace detail {

template <typename Scalar>
void require_finite(const ScalarFieldT<Scalar>& s, const char* op) {
  if (!s.all_finite())
    throw std::domain_error(std::string(op) + ": non-finite input");
}

template <typename Scalar>
void require_finite(const VectorFieldT<Scalar>& v, const char* op) {
  if (!v.all_finite())
    throw std::domain_error(std::string(op) + ": non-finite input");
}

inline int wrap(int i, int n) { return (i % n + n) % n; }

/// Fill wall nodes of a node array whose interior is already set.
template <typename Array>
void extrapolate_wall_nodes(Array& a, const GridSpec& g) {
  const int nx = g.nx(), ny = g.ny();
  const int i0 = g.periodic_x() ? 0 : 1;
  const int i1 = g.periodic_x() ? nx - 1 : nx - 1;
  for (int i = i0; i <= i1; ++i) {
    a(i, 0) = 3 * a(i, 1) - 3 * a(i, 2) + a(i, 3);
    a(i, ny) = 3 * a(i, ny - 1) - 3 * a(i, ny - 2) + a(i, ny - 3);
  }
  if (g.periodic_x()) {
    a.row(nx) = a.row(0);
  } else {
    for (int j = 0; j <= ny; ++j) {
      a(0, j) = 3 * a(1, j) - 3 * a(2, j) + a(3, j);
      a(nx, j) = 3 * a(nx - 1, j) - 3 * a(nx - 2, j) + a(nx - 3, j);
    }
  }
}

template <typename Array>
Array nodes_to_cells(const Array& a, int nx, int ny) {
  Array c(nx, ny);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i)
      c(i, j) = (a(i, j) + a(i + 1, j) + a(i, j + 1) + a(i + 1, j + 1)) / 4;
  return c;
}

/// d/dx of a cell array: central inside, second-order one-sided at walls.
template <typename Array>
Array cell_dx(const Array& s, const GridSpec& g) {
  const int nx = g.nx(), ny = g.ny();
  const double h = g.hx();
  Array d(nx, ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      if (g.periodic_x()) {
        d(i, j) = (s(wrap(i + 1, nx), j) - s(wrap(i - 1, nx), j)) / (2 * h);
      } else if (i == 0) {
        d(i, j) = (-3 * s(0, j) + 4 * s(1, j) - s(2, j)) / (2 * h);
      } else if (i == nx - 1) {
        d(i, j) = (3 * s(nx - 1, j) - 4 * s(nx - 2, j) + s(nx - 3, j)) / (2 * h);
      } else {
        d(i, j) = (s(i + 1, j) - s(i - 1, j)) / (2 * h);
      }
    }
  }
  return d;
}

template <typename Array>
Array cell_dy(const Array& s, const GridSpec& g) {
  const int nx = g.nx(), ny = g.ny();
  const double h = g.hy();
  Array d(nx, ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      if (j == 0)
        d(i, j) = (-3 * s(i, 0) + 4 * s(i, 1) - s(i, 2)) / (2 * h);
      else if (j == ny - 1)
        d(i, j) = (3 * s(i, ny - 1) - 4 * s(i, ny - 2) + s(i, ny - 3)) / (2 * h);
      else
        d(i, j) = (s(i, j + 1) - s(i, j - 1)) / (2 * h);
    }
  }
  return d;
}

template <typename Array>
Array cell_dxx(const Array& s, const GridSpec& g) {
  const int nx = g.nx(), ny = g.ny();
  const double h2 = g.hx() * g.hx();
  Array d(nx, ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      if (g.periodic_x())
        d(i, j) = (s(wrap(i + 1, nx), j) - 2 * s(i, j) + s(wrap(i - 1, nx), j)) / h2;
      else if (i == 0)
        d(i, j) = (2 * s(0, j) - 5 * s(1, j) + 4 * s(2, j) - s(3, j)) / h2;
      else if (i == nx - 1)
        d(i, j) = (2 * s(nx - 1, j) - 5 * s(nx - 2, j) + 4 * s(nx - 3, j) - s(nx - 4, j)) / h2;
      else
        d(i, j) = (s(i + 1, j) - 2 * s(i, j) + s(i - 1, j)) / h2;
    }
  }
  return d;
}

template <typename Array>
Array cell_dyy(const Array& s, const GridSpec& g) {
  const int nx = g.nx(), ny = g.ny();
  const double h2 = g.hy() * g.hy();
  Array d(nx, ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      if (j == 0)
        d(i, j) = (2 * s(i, 0) - 5 * s(i, 1) + 4 * s(i, 2) - s(i, 3)) / h2;
      else if (j == ny - 1)
        d(i, j) = (2 * s(i, ny - 1) - 5 * s(i, ny - 2) + 4 * s(i, ny - 3) - s(i, ny - 4)) / h2;
      else
        d(i, j) = (s(i, j + 1) - 2 * s(i, j) + s(i, j - 1)) / h2;
    }
  }
  return d;
}

/// Neumaier-compensated sum; keeps mass bookkeeping at rounding level.
template <typename Derived>
double compensated_sum(const Eigen::DenseBase<Derived>& a) {
  double sum = 0.0, comp = 0.0;
  for (Eigen::Index c = 0; c < a.cols(); ++c) {
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
      const double v = static_cast<double>(a(r, c));
      const double t = sum + v;
      if (std::abs(sum) >= std::abs(v))
        comp += (sum - t) + v;
      else
        comp += (v - t) + sum;
      sum = t;
    }
  }
  return sum + comp;
}

/// (sum w |a|^p)^(1/p) computed with max-scaling; p = inf gives max |a|.
template <typename Derived, typename WDerived>
double weighted_lp(const Eigen::ArrayBase<Derived>& a, const Eigen::ArrayBase<WDerived>& w,
                   double p) {
  const double amax = a.size() ? static_cast<double>(a.abs().maxCoeff()) : 0.0;
  if (std::isinf(p) || amax == 0.0)
    return amax;
  const auto scaled = (a.abs() / amax).template cast<double>();
  return amax * std::pow(compensated_sum((scaled.pow(p) * w).eval()), 1.0 / p);
}

inline void check_exponent(double p) {
  if (!(p >= 1.0))
    throw std::invalid_argument("lp_norm: exponent must satisfy p >= 1");
}

/// Quadrature weights for the face arrays of a VectorField (trapezoid at walls,
/// duplicate periodic row weighted zero).
inline std::pair<Eigen::ArrayXXd, Eigen::ArrayXXd> face_weights(const GridSpec& g) {
  const double a = g.cell_area();
  Eigen::ArrayXXd wx = Eigen::ArrayXXd::Constant(g.nx() + 1, g.ny(), a);
  Eigen::ArrayXXd wy = Eigen::ArrayXXd::Constant(g.nx(), g.ny() + 1, a);
  if (g.periodic_x()) {
    wx.row(g.nx()).setZero();
  } else {
    wx.row(0) *= 0.5;
    wx.row(g.nx()) *= 0.5;
  }
  wy.col(0) *= 0.5;
  wy.col(g.ny()) *= 0.5;
  return {wx, wy};
}

inline Eigen::ArrayXXd node_weights(const GridSpec& g) {
  Eigen::ArrayXXd w = Eigen::ArrayXXd::Constant(g.nx() + 1, g.ny() + 1, g.cell_area());
  w.col(0) *= 0.5;
  w.col(g.ny()) *= 0.5;
  if (g.periodic_x()) {
    w.row(g.nx()).setZero();
  } else {
    w.row(0) *= 0.5;
    w.row(g.nx()) *= 0.5;
  }
  return w;
}

} // namespace detail

// ---------------------------------------------------------------------------
// First-order operators
// ---------------------------------------------------------------------------

/// Conservative cell divergence, using every face including wall-normal ones.
template <typename Scalar>
ScalarFieldT<Scalar> divergence(const VectorFieldT<Scalar>& v) {
  detail::require_finite(v, "divergence");
  const GridSpec& g = v.grid();
  typename ScalarFieldT<Scalar>::Array d(g.nx(), g.ny());
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i)
      d(i, j) = (v.x()(i + 1, j) - v.x()(i, j)) / g.hx() + (v.y()(i, j + 1) - v.y()(i, j)) / g.hy();
  return ScalarFieldT<Scalar>(g, std::move(d));
}

/// Face gradient of a cell scalar; wall-normal faces carry zero flux.
template <typename Scalar>
VectorFieldT<Scalar> gradient(const ScalarFieldT<Scalar>& s) {
  detail::require_finite(s, "gradient");
  const GridSpec& g = s.grid();
  const int nx = g.nx(), ny = g.ny();
  VectorFieldT<Scalar> v(g);
  for (int j = 0; j < ny; ++j) {
    for (int i = 1; i < nx; ++i)
      v.x()(i, j) = (s(i, j) - s(i - 1, j)) / g.hx();
    if (g.periodic_x()) {
      v.x()(0, j) = (s(0, j) - s(nx - 1, j)) / g.hx();
      v.x()(nx, j) = v.x()(0, j);
    }
  }
  for (int j = 1; j < ny; ++j)
    for (int i = 0; i < nx; ++i)
      v.y()(i, j) = (s(i, j) - s(i, j - 1)) / g.hy();
  return v;
}

/// Scalar vorticity dv_y/dx - dv_x/dy at nodes (wall nodes extrapolated).
template <typename Scalar>
NodeFieldT<Scalar> node_curl(const VectorFieldT<Scalar>& v) {
  detail::require_finite(v, "curl2d");
  const GridSpec& g = v.grid();
  const int nx = g.nx(), ny = g.ny();
  NodeFieldT<Scalar> w(g);
  const int i0 = g.periodic_x() ? 0 : 1;
  for (int j = 1; j < ny; ++j) {
    for (int i = i0; i < nx; ++i) {
      const int im = detail::wrap(i - 1, nx);
      w(i, j) = (v.y()(i, j) - v.y()(im, j)) / g.hx() - (v.x()(i, j) - v.x()(i, j - 1)) / g.hy();
    }
  }
  detail::extrapolate_wall_nodes(w.values(), g);
  return w;
}

/// Vorticity averaged from nodes to cell centers.
template <typename Scalar>
ScalarFieldT<Scalar> curl2d(const VectorFieldT<Scalar>& v) {
  const GridSpec& g = v.grid();
  return ScalarFieldT<Scalar>(g, detail::nodes_to_cells(node_curl(v).values(), g.nx(), g.ny()));
}

/// Cell-centered symmetric gradient D(v) = (grad v + grad v^T) / 2.
/// The diagonal uses the same face differences as divergence, so trace(D(v))
/// equals divergence(v) to rounding.
template <typename Scalar>
SymTensorFieldT<Scalar> sym_grad(const VectorFieldT<Scalar>& v) {
  detail::require_finite(v, "sym_grad");
  const GridSpec& g = v.grid();
  const int nx = g.nx(), ny = g.ny();
  typename ScalarFieldT<Scalar>::Array xx(nx, ny), yy(nx, ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      xx(i, j) = (v.x()(i + 1, j) - v.x()(i, j)) / g.hx();
      yy(i, j) = (v.y()(i, j + 1) - v.y()(i, j)) / g.hy();
    }
  }
  typename NodeFieldT<Scalar>::Array shear = NodeFieldT<Scalar>::Array::Zero(nx + 1, ny + 1);
  const int i0 = g.periodic_x() ? 0 : 1;
  for (int j = 1; j < ny; ++j) {
    for (int i = i0; i < nx; ++i) {
      const int im = detail::wrap(i - 1, nx);
      shear(i, j) = 0.5 * ((v.x()(i, j) - v.x()(i, j - 1)) / g.hy() +
                           (v.y()(i, j) - v.y()(im, j)) / g.hx());
    }
  }
  detail::extrapolate_wall_nodes(shear, g);
  return {ScalarFieldT<Scalar>(g, std::move(xx)),
          ScalarFieldT<Scalar>(g, detail::nodes_to_cells(shear, nx, ny)),
          ScalarFieldT<Scalar>(g, std::move(yy))};
}

/// Cell-centered components of a staggered vector (average of opposite faces).
template <typename Scalar>
std::pair<typename ScalarFieldT<Scalar>::Array, typename ScalarFieldT<Scalar>::Array>
cell_components(const VectorFieldT<Scalar>& v) {
  const int nx = v.grid().nx(), ny = v.grid().ny();
  return {(v.x().topRows(nx) + v.x().bottomRows(nx)) / 2,
          (v.y().leftCols(ny) + v.y().rightCols(ny)) / 2};
}

// ---------------------------------------------------------------------------
// Integrals, inner products and norms
// ---------------------------------------------------------------------------

template <typename Scalar>
double integral(const ScalarFieldT<Scalar>& s) {
  return detail::compensated_sum(s.values()) * s.grid().cell_area();
}

template <typename Scalar>
double mean(const ScalarFieldT<Scalar>& s) {
  return detail::compensated_sum(s.values()) / s.grid().cell_count();
}

template <typename Scalar>
double dot(const ScalarFieldT<Scalar>& a, const ScalarFieldT<Scalar>& b) {
  require_same_grid(a.grid(), b.grid(), "dot");
  return detail::compensated_sum((a.values() * b.values()).eval()) * a.grid().cell_area();
}

/// Face inner product with trapezoid weights on wall-normal faces.
template <typename Scalar>
double dot(const VectorFieldT<Scalar>& a, const VectorFieldT<Scalar>& b) {
  require_same_grid(a.grid(), b.grid(), "dot");
  const auto [wx, wy] = detail::face_weights(a.grid());
  return detail::compensated_sum((a.x() * b.x() * wx).eval()) +
         detail::compensated_sum((a.y() * b.y() * wy).eval());
}

/// Discrete L^p norm, (sum |s|^p cell_area)^(1/p); p = infinity gives the max.
template <typename Scalar>
double lp_norm(const ScalarFieldT<Scalar>& s, double p) {
  detail::check_exponent(p);
  const Eigen::ArrayXXd w = Eigen::ArrayXXd::Constant(s.grid().nx(), s.grid().ny(),
                                                      s.grid().cell_area());
  return detail::weighted_lp(s.values(), w, p);
}

/// L^p norm of a staggered vector: both component arrays pooled into one sum.
template <typename Scalar>
double lp_norm(const VectorFieldT<Scalar>& v, double p) {
  detail::check_exponent(p);
  const auto [wx, wy] = detail::face_weights(v.grid());
  if (std::isinf(p))
    return std::max(static_cast<double>(v.x().abs().maxCoeff()),
                    static_cast<double>(v.y().abs().maxCoeff()));
  const double nx_p = detail::weighted_lp(v.x(), wx, p);
  const double ny_p = detail::weighted_lp(v.y(), wy, p);
  return std::pow(std::pow(nx_p, p) + std::pow(ny_p, p), 1.0 / p);
}

template <typename Scalar>
double lp_norm(const NodeFieldT<Scalar>& n, double p) {
  detail::check_exponent(p);
  return detail::weighted_lp(n.values(), detail::node_weights(n.grid()), p);
}

namespace detail {

/// Combine per-term L^p norms the way W^{k,p} does: (sum ||.||_p^p)^(1/p).
inline double combine_lp(std::initializer_list<double> terms, double p) {
  double acc = 0.0;
  if (std::isinf(p)) {
    for (double t : terms)
      acc = std::max(acc, t);
    return acc;
  }
  double tmax = 0.0;
  for (double t : terms)
    tmax = std::max(tmax, t);
  if (tmax == 0.0)
    return 0.0;
  for (double t : terms)
    acc += std::pow(t / tmax, p);
  return tmax * std::pow(acc, 1.0 / p);
}

template <typename Array>
double cell_lp(const Array& a, const GridSpec& g, double p) {
  const Eigen::ArrayXXd w = Eigen::ArrayXXd::Constant(g.nx(), g.ny(), g.cell_area());
  return weighted_lp(a, w, p);
}

/// Derivative norms of order 1..k of a cell array (each multi-index once).
template <typename Array>
double derivative_seminorm_p(const Array& s, const GridSpec& g, int order, double p) {
  if (order == 1) {
    return combine_lp({cell_lp(cell_dx(s, g), g, p), cell_lp(cell_dy(s, g), g, p)}, p);
  }
  const Array sx = cell_dx(s, g);
  return combine_lp({cell_lp(cell_dxx(s, g), g, p), cell_lp(cell_dy(sx, g), g, p),
                     cell_lp(cell_dyy(s, g), g, p)},
                    p);
}

} // namespace detail

/// Discrete W^{k,p} norm, k in {0, 1, 2}: (sum over |alpha| <= k of ||D^alpha s||_p^p)^(1/p).
/// Derivatives are cell-centered differences, one-sided next to walls.
template <typename Scalar>
double sobolev_norm(const ScalarFieldT<Scalar>& s, int order, double p) {
  detail::check_exponent(p);
  if (order < 0 || order > 2)
    throw std::invalid_argument("sobolev_norm: order must be 0, 1 or 2");
  const GridSpec& g = s.grid();
  const double n0 = lp_norm(s, p);
  if (order == 0)
    return n0;
  const double n1 = detail::derivative_seminorm_p(s.values(), g, 1, p);
  if (order == 1)
    return detail::combine_lp({n0, n1}, p);
  return detail::combine_lp({n0, n1, detail::derivative_seminorm_p(s.values(), g, 2, p)}, p);
}

/// L^p norm of the order-k derivatives only (k = 1 or 2), e.g. ||grad r||_p.
template <typename Scalar>
double derivative_norm(const ScalarFieldT<Scalar>& s, int order, double p) {
  detail::check_exponent(p);
  if (order < 1 || order > 2)
    throw std::invalid_argument("derivative_norm: order must be 1 or 2");
  return detail::derivative_seminorm_p(s.values(), s.grid(), order, p);
}

template <typename Scalar>
double derivative_norm(const VectorFieldT<Scalar>& v, int order, double p) {
  detail::check_exponent(p);
  if (order < 1 || order > 2)
    throw std::invalid_argument("derivative_norm: order must be 1 or 2");
  const auto [cx, cy] = cell_components(v);
  return detail::combine_lp({detail::derivative_seminorm_p(cx, v.grid(), order, p),
                             detail::derivative_seminorm_p(cy, v.grid(), order, p)},
                            p);
}

/// W^{k,p} norm of a staggered vector: face-based L^p term plus cell-centered
/// derivative terms of both components.
template <typename Scalar>
double sobolev_norm(const VectorFieldT<Scalar>& v, int order, double p) {
  detail::check_exponent(p);
  if (order < 0 || order > 2)
    throw std::invalid_argument("sobolev_norm: order must be 0, 1 or 2");
  const double n0 = lp_norm(v, p);
  if (order == 0)
    return n0;
  const double n1 = derivative_norm(v, 1, p);
  if (order == 1)
    return detail::combine_lp({n0, n1}, p);
  return detail::combine_lp({n0, n1, derivative_norm(v, 2, p)}, p);
}

/// L2 norm of the staggered velocity gradient: face differences at cells for
/// the diagonal terms, interior nodes for the cross terms. For wall-compatible
/// fields this is the discrete ||grad v||_2 matching the energy identities.
template <typename Scalar>
double staggered_gradient_l2(const VectorFieldT<Scalar>& v) {
  const GridSpec& g = v.grid();
  const int nx = g.nx(), ny = g.ny();
  double acc = 0.0;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const double a = (v.x()(i + 1, j) - v.x()(i, j)) / g.hx();
      const double b = (v.y()(i, j + 1) - v.y()(i, j)) / g.hy();
      acc += a * a + b * b;
    }
  }
  const int i0 = g.periodic_x() ? 0 : 1;
  for (int j = 1; j < ny; ++j) {
    for (int i = i0; i < nx; ++i) {
      const int im = detail::wrap(i - 1, nx);
      const double a = (v.x()(i, j) - v.x()(i, j - 1)) / g.hy();
      const double b = (v.y()(i, j) - v.y()(im, j)) / g.hx();
      acc += a * a + b * b;
    }
  }
  return std::sqrt(acc * g.cell_area());
}

/// Subtract the mean so the field integrates to zero (two passes for rounding).
template <typename Scalar>
ScalarFieldT<Scalar> mean_zero_project(const ScalarFieldT<Scalar>& s) {
  ScalarFieldT<Scalar> out = s;
  for (int pass = 0; pass < 2; ++pass)
    out.values() -= static_cast<Scalar>(mean(out));
  return out;
}

} // namespace heavyflow
