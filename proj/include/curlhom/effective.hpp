#pragma once

#include "curlhom/cell_solver.hpp"
#include "curlhom/coefficients.hpp"
#include "curlhom/interpolation.hpp"

#include <vector>

namespace curlhom {

/// Correctors of one coefficient at every macro node; nodes where the
/// coefficient is constant in y carry no data.
struct CorrectorBank {
  Grid macro;
  Grid cell;
  CorrectorSide side = CorrectorSide::alpha;
  std::vector<int> slot;  // per macro node, -1 when trivial
  std::vector<CorrectorSet> sets;

  bool trivial(Eigen::Index node) const { return slot[node] < 0; }
  /// Corrector set of a nontrivial node.
  const CorrectorSet& at(Eigen::Index node) const { return sets[slot[node]]; }
  std::size_t active() const { return sets.size(); }
};

/// Effective tensor at one macro point with its diagnostics.
struct EffectiveAt {
  Eigen::Matrix3d lambda;     // symmetrized
  double asymmetry = 0.0;     // max |Lambda - Lambda^T| before symmetrization
  Eigen::Matrix3d harmonic;   // (mean beta^-1)^-1
  Eigen::Matrix3d arithmetic; // mean beta
  CorrectorSet correctors;
};

EffectiveAt effective_at(const CoefficientModel& model, const Eigen::Vector3d& x, const Grid& cell,
                         const CellSolveConfig& cfg = {}, const CorrectorSet* warm = nullptr);

/// Smallest eigenvalues of Lambda - H and A - Lambda, scaled by ||Lambda||;
/// both nonnegative when Voigt-Reuss bracketing holds.
std::array<double, 2> bound_margins(const EffectiveAt& e);

struct NodeProvenance {
  Eigen::Index node;
  int iterations_u = 0, iterations_v = 0;
  double residual_u = 0.0, residual_v = 0.0;
  double asymmetry_u = 0.0, asymmetry_v = 0.0;
  double lower_margin = 0.0, upper_margin = 0.0;  // worst of both sides
};

struct EffectiveTensors {
  Grid macro;
  Grid cell;
  MatrixField lambda_u;
  MatrixField lambda_v;
  CorrectorBank zeta;  // alpha side
  CorrectorBank xi;    // mu side
  std::vector<NodeProvenance> provenance;  // nontrivial nodes, in node order
  double max_asymmetry = 0.0;
  double min_lower_margin = 0.0;
  double min_upper_margin = 0.0;
};

/// Nodes are processed in fixed chunks (warm-started within a chunk), so the
/// result does not depend on `workers`.
EffectiveTensors effective_fields(const CoefficientModel& alpha, const CoefficientModel& mu,
                                  const Grid& macro, const Grid& cell, const CellSolveConfig& cfg = {},
                                  int workers = 1);

/// Tensor at an arbitrary point by four-point Lagrange interpolation.
Eigen::Matrix3d interpolate(const MatrixField& field, const Eigen::Vector3d& x);

/// beta(x, x/eps) Z(x, x/eps) Lambda(x)^-1 for both sides on a fine grid.
struct ThetaMultiplier {
  Grid fine;
  double eps = 0.0;
  Eigen::Matrix<double, Eigen::Dynamic, 9, Eigen::RowMajor> block_u;  // row-major 3x3 per node
  Eigen::Matrix<double, Eigen::Dynamic, 9, Eigen::RowMajor> block_v;

  Eigen::Matrix3d u_at(Eigen::Index i) const;
  Eigen::Matrix3d v_at(Eigen::Index i) const;
  /// Largest entry deviation from the identity over all nodes.
  double identity_defect() const;
};

ThetaMultiplier theta_multiplier(const CoefficientModel& alpha, const CoefficientModel& mu,
                                 const EffectiveTensors& tensors, double eps, const Grid& fine);

/// Corrector matrix Z = (zeta_1, zeta_2, zeta_3) of a bank at a fine node,
/// interpolated in x; `cell_node` indexes a cell grid of resolution
/// `period` (the bank's cell data is resampled when it differs).
class CorrectorSampler {
 public:
  CorrectorSampler(const CorrectorBank& bank, std::array<int, 3> period);
  Eigen::Matrix3d Z(const MacroStencil& st, Eigen::Index cell_node) const;
  /// True when every stencil node is trivial.
  bool trivial(const MacroStencil& st) const;

 private:
  const CorrectorBank* bank_;
  std::vector<std::array<Field3<double>, 3>> resampled_;
};

}  // namespace curlhom
