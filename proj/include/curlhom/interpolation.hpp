#pragma once

#include "curlhom/grid.hpp"

#include <array>

namespace curlhom {

/// Tensor four-point Lagrange stencil of a point on a periodic macro grid.
struct MacroStencil {
  std::array<Eigen::Index, 64> nodes;
  std::array<double, 64> weights;
};

MacroStencil lagrange_stencil(const Grid& macro, const Eigen::Vector3d& x);

/// Maps fine-grid nodes x to the cell nodes y = x / eps (mod the unit cube).
/// Requires a macro cube with the unit cubic cell and an integer number of
/// fine nodes per eps-period, at least 8 per axis.
class FineCellMap {
 public:
  FineCellMap(const Grid& fine, double eps);

  /// Fine nodes per eps-period along each axis.
  const std::array<int, 3>& period() const { return period_; }
  /// Index on a cell grid whose resolution equals period().
  Eigen::Index cell_index(Eigen::Index fine_node) const;

 private:
  Grid fine_;
  std::array<int, 3> period_;
  std::array<int, 3> offset_;
};

/// Fine nodes per eps-period required by `FineCellMap`.
int nodes_per_period(const Grid& fine, double eps);

}  // namespace curlhom
