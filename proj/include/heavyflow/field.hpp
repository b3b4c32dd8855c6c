#pragma once

#include "heavyflow/grid.hpp"

#include <Eigen/Core>

#include <functional>
#include <stdexcept>
#include <utility>

namespace heavyflow {

/// Cell-centered scalar on a GridSpec, stored as an nx x ny array indexed (i, j).
template <typename Scalar>
class ScalarFieldT {
public:
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  ScalarFieldT() = default;
  explicit ScalarFieldT(const GridSpec& grid)
      : grid_(grid), values_(Array::Zero(grid.nx(), grid.ny())) {}
  ScalarFieldT(const GridSpec& grid, Array values) : grid_(grid), values_(std::move(values)) {
    if (values_.rows() != grid.nx() || values_.cols() != grid.ny())
      throw std::invalid_argument("ScalarField: array shape does not match grid");
  }

  template <typename F>
  static ScalarFieldT sample(const GridSpec& grid, F&& f) {
    ScalarFieldT s(grid);
    for (int j = 0; j < grid.ny(); ++j)
      for (int i = 0; i < grid.nx(); ++i)
        s.values_(i, j) = static_cast<Scalar>(f(grid.xc(i), grid.yc(j)));
    return s;
  }

  static ScalarFieldT constant(const GridSpec& grid, Scalar c) {
    return ScalarFieldT(grid, Array::Constant(grid.nx(), grid.ny(), c));
  }

  const GridSpec& grid() const { return grid_; }
  const Array& values() const { return values_; }
  Array& values() { return values_; }
  Scalar operator()(int i, int j) const { return values_(i, j); }
  Scalar& operator()(int i, int j) { return values_(i, j); }

  bool all_finite() const { return values_.allFinite(); }

  ScalarFieldT& operator+=(const ScalarFieldT& o) {
    require_same_grid(grid_, o.grid_, "ScalarField +=");
    values_ += o.values_;
    return *this;
  }
  ScalarFieldT& operator-=(const ScalarFieldT& o) {
    require_same_grid(grid_, o.grid_, "ScalarField -=");
    values_ -= o.values_;
    return *this;
  }
  ScalarFieldT& operator*=(Scalar c) {
    values_ *= c;
    return *this;
  }
  friend ScalarFieldT operator+(ScalarFieldT a, const ScalarFieldT& b) { return a += b; }
  friend ScalarFieldT operator-(ScalarFieldT a, const ScalarFieldT& b) { return a -= b; }
  friend ScalarFieldT operator*(Scalar c, ScalarFieldT a) { return a *= c; }
  friend ScalarFieldT operator*(ScalarFieldT a, Scalar c) { return a *= c; }
  friend ScalarFieldT operator-(ScalarFieldT a) { return a *= Scalar(-1); }

private:
  GridSpec grid_;
  Array values_;
};

/// Staggered vector: x-components on x-faces ((nx+1) x ny), y-components on
/// y-faces (nx x (ny+1)). In periodic-x mode row nx of the x-array mirrors row 0.
template <typename Scalar>
class VectorFieldT {
public:
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  VectorFieldT() = default;
  explicit VectorFieldT(const GridSpec& grid)
      : grid_(grid), x_(Array::Zero(grid.nx() + 1, grid.ny())),
        y_(Array::Zero(grid.nx(), grid.ny() + 1)) {}
  VectorFieldT(const GridSpec& grid, Array x, Array y)
      : grid_(grid), x_(std::move(x)), y_(std::move(y)) {
    if (x_.rows() != grid.nx() + 1 || x_.cols() != grid.ny() || y_.rows() != grid.nx() ||
        y_.cols() != grid.ny() + 1)
      throw std::invalid_argument("VectorField: array shapes do not match grid");
  }

  /// Point samples of (fx, fy) at the face centers.
  template <typename FX, typename FY>
  static VectorFieldT sample(const GridSpec& grid, FX&& fx, FY&& fy) {
    VectorFieldT v(grid);
    for (int j = 0; j < grid.ny(); ++j)
      for (int i = 0; i <= grid.nx(); ++i)
        v.x_(i, j) = static_cast<Scalar>(fx(grid.xn(i), grid.yc(j)));
    for (int j = 0; j <= grid.ny(); ++j)
      for (int i = 0; i < grid.nx(); ++i)
        v.y_(i, j) = static_cast<Scalar>(fy(grid.xc(i), grid.yn(j)));
    if (grid.periodic_x())
      v.x_.row(grid.nx()) = v.x_.row(0);
    return v;
  }

  const GridSpec& grid() const { return grid_; }
  const Array& x() const { return x_; }
  const Array& y() const { return y_; }
  Array& x() { return x_; }
  Array& y() { return y_; }

  bool all_finite() const { return x_.allFinite() && y_.allFinite(); }

  /// Copy with the wall-normal face values set to zero (u . n = 0).
  VectorFieldT wall_compatible() const {
    VectorFieldT v = *this;
    v.y_.col(0).setZero();
    v.y_.col(grid_.ny()).setZero();
    if (grid_.periodic_x()) {
      v.x_.row(grid_.nx()) = v.x_.row(0);
    } else {
      v.x_.row(0).setZero();
      v.x_.row(grid_.nx()).setZero();
    }
    return v;
  }

  bool is_wall_compatible() const {
    bool ok = (y_.col(0) == Scalar(0)).all() && (y_.col(grid_.ny()) == Scalar(0)).all();
    if (grid_.periodic_x())
      return ok && (x_.row(grid_.nx()) == x_.row(0)).all();
    return ok && (x_.row(0) == Scalar(0)).all() && (x_.row(grid_.nx()) == Scalar(0)).all();
  }

  VectorFieldT& operator+=(const VectorFieldT& o) {
    require_same_grid(grid_, o.grid_, "VectorField +=");
    x_ += o.x_;
    y_ += o.y_;
    return *this;
  }
  VectorFieldT& operator-=(const VectorFieldT& o) {
    require_same_grid(grid_, o.grid_, "VectorField -=");
    x_ -= o.x_;
    y_ -= o.y_;
    return *this;
  }
  VectorFieldT& operator*=(Scalar c) {
    x_ *= c;
    y_ *= c;
    return *this;
  }
  friend VectorFieldT operator+(VectorFieldT a, const VectorFieldT& b) { return a += b; }
  friend VectorFieldT operator-(VectorFieldT a, const VectorFieldT& b) { return a -= b; }
  friend VectorFieldT operator*(Scalar c, VectorFieldT a) { return a *= c; }
  friend VectorFieldT operator*(VectorFieldT a, Scalar c) { return a *= c; }
  friend VectorFieldT operator-(VectorFieldT a) { return a *= Scalar(-1); }

private:
  GridSpec grid_;
  Array x_;
  Array y_;
};

/// Node-located scalar ((nx+1) x (ny+1)); houses vorticity and stream function.
template <typename Scalar>
class NodeFieldT {
public:
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  NodeFieldT() = default;
  explicit NodeFieldT(const GridSpec& grid)
      : grid_(grid), values_(Array::Zero(grid.nx() + 1, grid.ny() + 1)) {}
  NodeFieldT(const GridSpec& grid, Array values) : grid_(grid), values_(std::move(values)) {
    if (values_.rows() != grid.nx() + 1 || values_.cols() != grid.ny() + 1)
      throw std::invalid_argument("NodeField: array shape does not match grid");
  }

  template <typename F>
  static NodeFieldT sample(const GridSpec& grid, F&& f) {
    NodeFieldT n(grid);
    for (int j = 0; j <= grid.ny(); ++j)
      for (int i = 0; i <= grid.nx(); ++i)
        n.values_(i, j) = static_cast<Scalar>(f(grid.xn(i), grid.yn(j)));
    return n;
  }

  const GridSpec& grid() const { return grid_; }
  const Array& values() const { return values_; }
  Array& values() { return values_; }
  Scalar operator()(int i, int j) const { return values_(i, j); }
  Scalar& operator()(int i, int j) { return values_(i, j); }

private:
  GridSpec grid_;
  Array values_;
};

using ScalarField = ScalarFieldT<double>;
using VectorField = VectorFieldT<double>;
using NodeField = NodeFieldT<double>;

/// Tangential data attached to the wall nodes, one array per wall.
/// Horizontal walls are indexed by node column i (0..nx), vertical walls by node
/// row j (0..ny). Corner entries are ignored; in periodic-x mode the vertical
/// walls do not exist and entry nx mirrors entry 0.
struct WallData {
  Eigen::ArrayXd bottom;
  Eigen::ArrayXd top;
  Eigen::ArrayXd left;
  Eigen::ArrayXd right;

  WallData() = default;
  explicit WallData(const GridSpec& grid)
      : bottom(Eigen::ArrayXd::Zero(grid.nx() + 1)), top(Eigen::ArrayXd::Zero(grid.nx() + 1)),
        left(Eigen::ArrayXd::Zero(grid.ny() + 1)), right(Eigen::ArrayXd::Zero(grid.ny() + 1)) {}

  bool all_zero() const {
    return (bottom == 0.0).all() && (top == 0.0).all() && (left == 0.0).all() &&
           (right == 0.0).all();
  }
  WallData& operator*=(double c) {
    bottom *= c;
    top *= c;
    left *= c;
    right *= c;
    return *this;
  }
};

} // namespace heavyflow
