#include "heavyflow/staggered.hpp"

#include <map>
#include <mutex>

namespace heavyflow {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

SpMat build(int rows, int cols, const Triplets& t) {
  SpMat m(rows, cols);
  m.setFromTriplets(t.begin(), t.end());
  m.makeCompressed();
  return m;
}

int wrap(int i, int n) { return (i % n + n) % n; }

} // namespace

StaggeredOps::StaggeredOps(const GridSpec& grid) : grid_(grid) {
  const int nx = grid.nx(), ny = grid.ny();
  const bool per = grid.periodic_x();
  const double hx = grid.hx(), hy = grid.hy();
  n_xdof_ = (per ? nx : nx - 1) * ny;
  n_ydof_ = nx * (ny - 1);
  const int nxn = per ? nx : nx + 1;
  n_nodes_ = nxn * (ny + 1);
  inode_of_node_.assign(n_nodes_, -1);
  for (int j = 1; j < ny; ++j) {
    for (int i = per ? 0 : 1; i < nx; ++i) {
      inode_of_node_[node(i, j)] = static_cast<int>(node_of_inode_.size());
      node_of_inode_.push_back(node(i, j));
    }
  }
  n_inodes_ = static_cast<int>(node_of_inode_.size());
  const int nf = face_dofs(), nc = cells();

  Triplets t;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int c = cell(i, j);
      if (int d = xdof(i + 1, j); d >= 0) t.emplace_back(c, d, 1.0 / hx);
      if (int d = xdof(i, j); d >= 0) t.emplace_back(c, d, -1.0 / hx);
      if (int d = ydof(i, j + 1); d >= 0) t.emplace_back(c, d, 1.0 / hy);
      if (int d = ydof(i, j); d >= 0) t.emplace_back(c, d, -1.0 / hy);
    }
  }
  div_ = build(nc, nf, t);
  grad_ = SpMat(-div_.transpose());
  grad_.makeCompressed();

  t.clear();
  Triplets tx, ty;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int c = cell(i, j);
      if (int d = xdof(i + 1, j); d >= 0) tx.emplace_back(c, d, 1.0 / hx);
      if (int d = xdof(i, j); d >= 0) tx.emplace_back(c, d, -1.0 / hx);
      if (int d = ydof(i, j + 1); d >= 0) ty.emplace_back(c, d, 1.0 / hy);
      if (int d = ydof(i, j); d >= 0) ty.emplace_back(c, d, -1.0 / hy);
    }
  }
  dxx_ = build(nc, nf, tx);
  dyy_ = build(nc, nf, ty);

  // Interior-node curl and shear rate.
  Triplets tc, ts;
  for (int k = 0; k < n_inodes_; ++k) {
    const int n = node_of_inode_[k];
    const int i = n % nxn, j = n / nxn;
    const int im = per ? wrap(i - 1, nx) : i - 1;
    if (int d = ydof(i, j); d >= 0) {
      tc.emplace_back(k, d, 1.0 / hx);
      ts.emplace_back(k, d, 1.0 / hx);
    }
    if (int d = ydof(im, j); d >= 0) {
      tc.emplace_back(k, d, -1.0 / hx);
      ts.emplace_back(k, d, -1.0 / hx);
    }
    if (int d = xdof(i, j); d >= 0) {
      tc.emplace_back(k, d, -1.0 / hy);
      ts.emplace_back(k, d, 1.0 / hy);
    }
    if (int d = xdof(i, j - 1); d >= 0) {
      tc.emplace_back(k, d, 1.0 / hy);
      ts.emplace_back(k, d, -1.0 / hy);
    }
  }
  curl_v_ = build(n_inodes_, nf, tc);
  shear_ = build(n_inodes_, nf, ts);

  // Stream-function curl from all nodes to faces.
  t.clear();
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i <= nx; ++i)
      if (int d = xdof(i, j); d >= 0 && !(per && i == nx)) {
        t.emplace_back(d, node(i, j + 1), 1.0 / hy);
        t.emplace_back(d, node(i, j), -1.0 / hy);
      }
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i < nx; ++i)
      if (int d = ydof(i, j); d >= 0) {
        t.emplace_back(d, node(i + 1, j), -1.0 / hx);
        t.emplace_back(d, node(i, j), 1.0 / hx);
      }
  curl_s_ = build(nf, n_nodes_, t);

  lap_n_ = div_ * grad_;
  lap_n_.makeCompressed();

  const SpMat full = curl_v_ * curl_s_;
  Triplets si, sw;
  for (int n = 0; n < n_nodes_; ++n) {
    if (inode_of_node_[n] >= 0)
      si.emplace_back(n, inode_of_node_[n], 1.0);
    else
      sw.emplace_back(n, n, 1.0);
  }
  lap_node_ = full * build(n_nodes_, n_inodes_, si);
  lap_node_.makeCompressed();
  lap_node_wall_ = full * build(n_nodes_, n_nodes_, sw);
  lap_node_wall_.makeCompressed();

  t.clear();
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i <= nx; ++i)
      if (int d = xdof(i, j); d >= 0 && !(per && i == nx)) {
        t.emplace_back(d, cell(wrap(i - 1, nx), j), 0.5);
        t.emplace_back(d, cell(wrap(i, nx), j), 0.5);
      }
  for (int j = 1; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      t.emplace_back(ydof(i, j), cell(i, j - 1), 0.5);
      t.emplace_back(ydof(i, j), cell(i, j), 0.5);
    }
  avg_ = build(nf, nc, t);
}

int StaggeredOps::xdof(int i, int j) const {
  const int nx = grid_.nx();
  if (j < 0 || j >= grid_.ny())
    return -1;
  if (grid_.periodic_x())
    return wrap(i, nx) + nx * j;
  if (i <= 0 || i >= nx)
    return -1;
  return (i - 1) + (nx - 1) * j;
}

int StaggeredOps::ydof(int i, int j) const {
  const int nx = grid_.nx();
  if (j <= 0 || j >= grid_.ny())
    return -1;
  if (grid_.periodic_x())
    i = wrap(i, nx);
  else if (i < 0 || i >= nx)
    return -1;
  return n_xdof_ + i + nx * (j - 1);
}

int StaggeredOps::node(int i, int j) const {
  if (grid_.periodic_x())
    return wrap(i, grid_.nx()) + grid_.nx() * j;
  return i + (grid_.nx() + 1) * j;
}

Vec StaggeredOps::pack(const VectorField& v) const {
  require_same_grid(grid_, v.grid(), "StaggeredOps::pack");
  Vec x(face_dofs());
  for (int j = 0; j < grid_.ny(); ++j)
    for (int i = 0; i < grid_.nx(); ++i)
      if (int d = xdof(i, j); d >= 0) x[d] = v.x()(i, j);
  for (int j = 1; j < grid_.ny(); ++j)
    for (int i = 0; i < grid_.nx(); ++i)
      x[ydof(i, j)] = v.y()(i, j);
  return x;
}

VectorField StaggeredOps::unpack(const Vec& x) const {
  VectorField v(grid_);
  for (int j = 0; j < grid_.ny(); ++j)
    for (int i = 0; i <= grid_.nx(); ++i)
      if (int d = xdof(i, j); d >= 0) v.x()(i, j) = x[d];
  for (int j = 1; j < grid_.ny(); ++j)
    for (int i = 0; i < grid_.nx(); ++i)
      v.y()(i, j) = x[ydof(i, j)];
  return v;
}

Vec StaggeredOps::pack(const ScalarField& s) const {
  require_same_grid(grid_, s.grid(), "StaggeredOps::pack");
  return Eigen::Map<const Vec>(s.values().data(), cells());
}

ScalarField StaggeredOps::unpack_cells(const Vec& x) const {
  ScalarField::Array a = Eigen::Map<const Eigen::ArrayXXd>(x.data(), grid_.nx(), grid_.ny());
  return ScalarField(grid_, std::move(a));
}

Vec StaggeredOps::pack(const NodeField& n) const {
  require_same_grid(grid_, n.grid(), "StaggeredOps::pack");
  Vec x(n_nodes_);
  const int nxn = grid_.periodic_x() ? grid_.nx() : grid_.nx() + 1;
  for (int j = 0; j <= grid_.ny(); ++j)
    for (int i = 0; i < nxn; ++i)
      x[node(i, j)] = n(i, j);
  return x;
}

NodeField StaggeredOps::unpack_nodes(const Vec& x) const {
  NodeField n(grid_);
  for (int j = 0; j <= grid_.ny(); ++j)
    for (int i = 0; i <= grid_.nx(); ++i)
      n(i, j) = x[node(i, j)];
  return n;
}

std::shared_ptr<const StaggeredOps> StaggeredOps::get(const GridSpec& grid) {
  static std::mutex mutex;
  static std::map<std::uint64_t, std::shared_ptr<const StaggeredOps>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto& slot = cache[grid.hash()];
  if (!slot || slot->grid() != grid)
    slot = std::make_shared<const StaggeredOps>(grid);
  return slot;
}

} // namespace heavyflow
