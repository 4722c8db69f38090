#pragma once

#include "curlhom/maxwell.hpp"

#include <functional>
#include <vector>

namespace curlhom {

/// u(x, y) sampled on macro nodes x times cell nodes y. Nodes where u does
/// not depend on y keep a single row in `uniform`; the others own a block.
struct TwoScaleField {
  Grid macro;
  Grid cell;
  int components = 3;
  Eigen::MatrixXcd uniform;  // macro.size() x components
  std::vector<int> slot;     // -1 where u is constant in y
  std::vector<Eigen::MatrixXcd> blocks;

  static TwoScaleField zeros(const Grid& macro, const Grid& cell, int components = 3);
  /// y-independent field with the values of `u` (on `macro`).
  static TwoScaleField from_macro(const Grid& cell, const VectorField& u);

  bool y_constant(Eigen::Index node) const { return slot[node] < 0; }
  /// Cell field at a macro node (broadcast when constant in y).
  Eigen::MatrixXcd at(Eigen::Index node) const;
  Eigen::RowVectorXcd cell_mean(Eigen::Index node) const;
  void set(Eigen::Index node, Eigen::MatrixXcd block);
  void set(Eigen::Index node, const Eigen::RowVectorXcd& row);
  std::size_t active() const { return blocks.size(); }
  /// max |u(x, y)| over macro nodes with |x| >= radius.
  double max_outside(double radius) const;
  double max_abs() const;
};

/// Central-difference x-derivatives of a two-scale field (macro rule, cell
/// node by cell node). The support grows by the stencil reach.
TwoScaleField partial_x(const TwoScaleField& u, int axis);
TwoScaleField rot_x(const TwoScaleField& u);
TwoScaleField div_x(const TwoScaleField& u);

/// Everything a recurrence needs besides the terms themselves.
struct ExpansionSetup {
  const CoefficientModel* alpha = nullptr;
  const CoefficientModel* mu = nullptr;
  const EffectiveTensors* tensors = nullptr;
  /// Divergence-free source on tensors->macro.
  FieldPair f;
  Complex E{0.0, 1.0};
  /// Support radius R of the coefficients.
  double radius = 0.0;
  CellSolveConfig cell;
  ResolventConfig hat{1e-12, 5000, false};
  int workers = 1;
};

/// Largest compatibility residual of each of the four conditions, taken over
/// macro nodes and both systems, relative to ||f||.
struct Compatibility {
  std::array<double, 4> v{};  // pairings of F^V with xi_k, mean of G^V
  std::array<double, 4> u{};  // pairings of F^U with zeta_k, mean of G^U
  double max() const;
};

struct ExpansionTerm {
  int n = 0;
  VectorField a, b;          // a^n, b^n
  VectorField hat_u, hat_v;  // Lambda^u a^n, Lambda^v b^n
  TwoScaleField tilde_u, tilde_v;
  /// The hats were set to zero (last order of a partial sum).
  bool truncated = false;

  Compatibility compatibility;  // of this order's cell systems
  double hat_residual = 0.0;
  int hat_iterations = 0;
  /// Largest cell-system residuals over macro nodes, relative to ||f||. On
  /// even cell grids they include the data content at the zero-symbol corner
  /// modes, which no discrete solution can reach.
  double curl_residual = 0.0, div_residual = 0.0, orthogonality = 0.0;
  /// max |tilde| outside B_R, relative to ||f||.
  double support_defect = 0.0;
  bool support_flag = true;
};

/// Order 0: (M_hat - E)(u_hat, v_hat) = f on the macro grid, tildes zero.
ExpansionTerm leading_term(const ExpansionSetup& setup);

/// Order n = terms.size(): cell curl-div systems for the tildes, then the
/// averaged system for the hats (skipped when `truncate`).
ExpansionTerm recurrence_step(const std::vector<ExpansionTerm>& terms, const ExpansionSetup& setup,
                              bool truncate = false);

/// Compatibility residuals of the order-n cell systems, n = terms.size(),
/// without solving them.
Compatibility next_compatibility(const std::vector<ExpansionTerm>& terms, const ExpansionSetup& setup);

/// u_n = tilde_u + alpha Z a^n and v_n = tilde_v + mu Xi b^n.
TwoScaleField full_u(const ExpansionTerm& t, const ExpansionSetup& setup);
TwoScaleField full_v(const ExpansionTerm& t, const ExpansionSetup& setup);

struct DeltaCorrector {
  VectorField delta;
  ScalarField g;
  double support_defect = 0.0;     // max |g| outside B_R
  double divergence_defect = 0.0;  // ||div delta - g|| / ||g||, spectral div
  double h1_delta = 0.0, h1_g = 0.0;
  double radius = 0.0;
  /// Largest |x| at a node where |g| > 1e-12 max |g|.
  double support_radius = 0.0;

  double ratio() const { return h1_g > 0.0 ? h1_delta / h1_g : 0.0; }
  /// sqrt(2 R^2 + 6), with R widened to the measured support of g.
  double bound() const;
};

using ScalarFunction = std::function<Complex(const Eigen::Vector3d&)>;

/// delta(x) = x int_0^1 g(t x) t^2 dt by adaptive Gauss-Kronrod along the
/// ray to every node of `grid`; beyond R the ray is cut at t = R / |x|.
/// Throws std::domain_error when g is not supported in B_R (unless
/// `check_support` is false, in which case rays run to t = 1).
DeltaCorrector divergence_fixer(const ScalarFunction& g, const Grid& grid, double radius,
                                bool check_support = true, int workers = 1);
/// Same for nodal g; off-node values come from four-point Lagrange interpolation.
DeltaCorrector divergence_fixer(const ScalarField& g, double radius, bool check_support = true,
                                int workers = 1);

struct PartialSum {
  int N = 0;
  double eps = 0.0;
  /// eps^n (u_n, v_n)(x, x/eps) on the fine grid, n = 0..N.
  std::vector<FieldPair> orders;
  /// U_N, V_N including eps^N delta when a corrector was built.
  FieldPair sum;
  bool has_delta = false;
  DeltaCorrector delta_u, delta_v;
  double divergence_before = 0.0;  // ||div U_N|| + ||div V_N|| without delta
  double divergence_after = 0.0;
};

/// Two-scale evaluation of the terms at y = x / eps. `fine_leading`, when
/// given, replaces the order-0 evaluation (e.g. a fine-grid homogenized solve
/// passed through Theta). Builds delta from -div_x of the last order when
/// `with_delta`.
PartialSum partial_sum(const std::vector<ExpansionTerm>& terms, const ExpansionSetup& setup, double eps,
                       const Grid& fine, bool with_delta = false, const FieldPair* fine_leading = nullptr);

/// (u_0, v_0)(x, x/eps) from a homogenized resolvent solve on the fine grid
/// itself (Lambda interpolated), multiplied by Theta(eps).
FieldPair leading_on_fine(const ExpansionSetup& setup, const FieldPair& f_fine, double eps,
                          const Grid& fine, ResolventSolution* hom = nullptr,
                          const ResolventConfig& cfg = {});

/// L2 norm of fine_solution - sum_{n <= through_order} eps^n (u_n, v_n).
double estimate_error(const FieldPair& fine_solution, const PartialSum& sum, int through_order);

struct TermNorms {
  int n = 0;
  int order = 0;  // Sobolev index s - n + 1 used for the hats
  double hat_u = 0.0, hat_v = 0.0, a = 0.0, b = 0.0;
  double tilde_u = 0.0, tilde_v = 0.0;  // L2 over macro x cell
};

std::vector<TermNorms> term_norm_diagnostics(const std::vector<ExpansionTerm>& terms, int s);

}  // namespace curlhom
