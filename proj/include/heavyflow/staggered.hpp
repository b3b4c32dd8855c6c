#pragma once

// Sparse matrix form of the MAC operators, cached per grid.
//
// Unknown layout:
//   face DOFs  - interior x-faces then interior y-faces (wall-normal faces are
//                not unknowns; in periodic-x mode x-face i = nx is x-face 0)
//   cells      - i + nx * j
//   nodes      - every distinct node, i + nxn * j with nxn = nx + 1 (box) or nx
//                (periodic, node i = nx is node 0)
//   interior nodes - nodes off the slip walls, numbered consecutively

#include "heavyflow/field.hpp"

#include <Eigen/SparseCore>

#include <memory>
#include <vector>

namespace heavyflow {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;

class StaggeredOps {
public:
  explicit StaggeredOps(const GridSpec& grid);

  /// Shared instance for a grid; built once and immutable afterwards.
  static std::shared_ptr<const StaggeredOps> get(const GridSpec& grid);

  const GridSpec& grid() const { return grid_; }
  int face_dofs() const { return n_xdof_ + n_ydof_; }
  int x_dofs() const { return n_xdof_; }
  int cells() const { return grid_.cell_count(); }
  int nodes() const { return n_nodes_; }
  int interior_nodes() const { return n_inodes_; }

  /// -1 for wall-normal faces.
  int xdof(int i, int j) const;
  int ydof(int i, int j) const;
  int cell(int i, int j) const { return i + grid_.nx() * j; }
  int node(int i, int j) const;
  /// -1 for wall nodes.
  int inode(int i, int j) const { return inode_of_node_[node(i, j)]; }
  const std::vector<int>& interior_node_list() const { return node_of_inode_; }

  Vec pack(const VectorField& v) const;
  VectorField unpack(const Vec& x) const;
  Vec pack(const ScalarField& s) const;
  ScalarField unpack_cells(const Vec& x) const;
  Vec pack(const NodeField& n) const;
  NodeField unpack_nodes(const Vec& x) const;

  const SpMat& div() const { return div_; }           // cells x faces
  const SpMat& grad() const { return grad_; }         // faces x cells, = -div^T
  const SpMat& curl_v() const { return curl_v_; }     // interior nodes x faces
  const SpMat& curl_s() const { return curl_s_; }     // faces x nodes
  const SpMat& dxx() const { return dxx_; }           // cells x faces, d ux/dx
  const SpMat& dyy() const { return dyy_; }           // cells x faces, d uy/dy
  const SpMat& shear() const { return shear_; }       // interior nodes x faces, du_x/dy + du_y/dx
  const SpMat& neumann_laplacian() const { return lap_n_; } // cells x cells, div * grad
  /// -Laplacian on interior nodes, split into interior and wall-node columns.
  const SpMat& node_laplacian() const { return lap_node_; }
  const SpMat& node_laplacian_wall() const { return lap_node_wall_; }
  /// Face average of cell values (faces x cells); wrap in periodic x.
  const SpMat& cell_to_face() const { return avg_; }

  /// Quadrature weight of every face DOF (cell area).
  double weight() const { return grid_.cell_area(); }

private:
  GridSpec grid_;
  int n_xdof_ = 0, n_ydof_ = 0, n_nodes_ = 0, n_inodes_ = 0;
  std::vector<int> inode_of_node_;
  std::vector<int> node_of_inode_;
  SpMat div_, grad_, curl_v_, curl_s_, dxx_, dyy_, shear_, lap_n_, lap_node_, lap_node_wall_,
      avg_;
};

} // namespace heavyflow
