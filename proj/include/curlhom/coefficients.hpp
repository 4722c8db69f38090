#pragma once

#include "curlhom/field.hpp"

#include <functional>
#include <string>

namespace curlhom {

/// A material law beta(x, y): symmetric positive-definite, periodic in y
/// with respect to `lattice`, identity for |x| >= support_radius.
struct CoefficientModel {
  std::string label;
  Lattice lattice;
  double support_radius = 1.0;
  /// Declared ellipticity floor m0.
  double floor = 1.0;
  std::function<Eigen::Matrix3d(const Eigen::Vector3d& x, const Eigen::Vector3d& y)> evaluator;
  /// Optional: true where beta(x, .) does not depend on y.
  std::function<bool(const Eigen::Vector3d& x)> y_constant;

  Eigen::Matrix3d operator()(const Eigen::Vector3d& x, const Eigen::Vector3d& y) const {
    return evaluator(x, y);
  }
  bool constant_in_y(const Eigen::Vector3d& x) const { return y_constant && y_constant(x); }
};

/// C-infinity step: 1 for s >= 1, 0 for s <= 0.
double smooth_step(double s);
/// Radial blend: 1 for t <= plateau, 0 for t >= 1.
double radial_blend(double t, double plateau);

/// Parameters of the builtin families. Lengths in the units of the lattice.
struct BuiltinParams {
  Lattice lattice;
  double support_radius = 0.45;
  /// Radius where the blend reaches zero; 0 means support_radius.
  double blend_radius = 0.0;
  /// Fraction of blend_radius over which the periodic structure is unblended.
  double plateau = 0.4;
  // laminate and separable: midpoint + amplitude * sin(2 pi theta_d)
  double midpoint = 2.0;
  double amplitude = 1.0;
  int direction = 0;
  // inclusion: 1 + (contrast - 1) * bump(|y - centre| / radius)
  double radius = 0.25;
  double contrast = 5.0;
  double inclusion_plateau = 0.3;
  // separable macro factor 1 + x_amplitude * sin(x_frequency * x_0)
  double x_amplitude = 0.3;
  double x_frequency = 6.0;
};

/// Families: identity, laminate, inclusion, separable. Throws
/// std::invalid_argument on unknown family or out-of-range parameters.
CoefficientModel builtin(const std::string& family, const BuiltinParams& params = {});

/// y -> beta(x, y) at the nodes of a cell grid on the model's lattice.
MatrixField sample_cell(const CoefficientModel& model, const Eigen::Vector3d& x, const Grid& cell);
/// x -> beta(x, x/eps) at the nodes of a macro grid.
MatrixField sample_fine(const CoefficientModel& model, double eps, const Grid& fine);

struct ValidationReport {
  double min_eigenvalue = 0.0;
  double max_asymmetry = 0.0;
  double max_periodicity_defect = 0.0;
  double max_identity_defect = 0.0;
  double declared_floor = 0.0;
  long samples = 0;
  bool passed = false;
  std::string note;
};

/// Samples (x, y) on tensor grids of `x_count`^3 points in [-1.25R, 1.25R]^3
/// and `y_count`^3 points of the cell; both counts must be >= 8.
ValidationReport validate(const CoefficientModel& model, int x_count = 8, int y_count = 8,
                          double tolerance = 1e-10);

}  // namespace curlhom
