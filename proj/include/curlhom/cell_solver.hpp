#pragma once

#include "curlhom/calculus.hpp"

#include <array>
#include <stdexcept>

namespace curlhom {

struct CellSolveConfig {
  /// Relative L2 residual target.
  double tolerance = 1e-11;
  int max_iterations = 1000;
  /// Scalar reference medium of the preconditioner; <= 0 means mean trace / 3.
  double reference_medium = 0.0;
};

/// Iterative solver failure with the last relative residual.
struct NotConverged : std::runtime_error {
  NotConverged(const std::string& what, double residual, int iterations);
  double residual;
  int iterations;
};

struct ScalarSolve {
  Field1<Complex> phi;
  int iterations = 0;
  double residual = 0.0;  // relative L2
};

/// Zero-mean solution of -div(beta grad phi) = s by preconditioned conjugate
/// gradients; the modes of s with a vanishing derivative symbol (the mean,
/// and the zero/Nyquist corner modes of even grids) are discarded. `initial` may warm-start the
/// iteration. Constant beta is solved directly in Fourier space.
ScalarSolve solve_scalar(const MatrixField& beta, const Field1<Complex>& s, const CellSolveConfig& cfg,
                         const Field1<Complex>* initial = nullptr);

/// Potential phi_k with div(beta (grad phi_k + e_k)) = 0, zero mean.
ScalarField solve_potential(const MatrixField& beta, int k, const CellSolveConfig& cfg = {});

enum class CorrectorSide { alpha, mu };

/// Potentials phi_k (zeta side) or psi_k (xi side) and the gradients that
/// make zeta_k = e_k + grad phi_k, for one frozen macro point.
struct CorrectorSet {
  Eigen::Vector3d x = Eigen::Vector3d::Zero();
  Grid grid;
  CorrectorSide side = CorrectorSide::alpha;
  /// beta constant in y: every potential vanishes identically.
  bool trivial = true;
  std::array<Field1<double>, 3> phi;
  std::array<Field3<double>, 3> grad_phi;
  int iterations = 0;
  double residual = 0.0;

  /// zeta_k at node i.
  Eigen::Vector3d zeta(int k, Eigen::Index i) const {
    Eigen::Vector3d z = Eigen::Vector3d::Unit(k);
    if (!trivial) z += grad_phi[k].row(i).transpose();
    return z;
  }
  /// Full field zeta_k.
  Field3<double> zeta_field(int k) const;
};

/// Solves the three potentials. `warm` (same grid) seeds the iterations.
CorrectorSet correctors(const MatrixField& beta, const CellSolveConfig& cfg = {},
                        const CorrectorSet* warm = nullptr);

/// |int (F, zeta_k) dy| for k = 1..3 and |int G dy|.
std::array<double, 4> compatibility_check(const Field3<Complex>& F, const Field1<Complex>& G,
                                          const CorrectorSet& c);

struct CurlDivSolve {
  Field3<Complex> w;
  double curl_residual = 0.0;  // ||rot(beta^-1 w) - F|| / max(||F||, ||G||)
  double div_residual = 0.0;   // ||div w - G|| / max(||F||, ||G||)
  double orthogonality = 0.0;  // max_k |<w, beta zeta_k>| / (||w|| ||beta zeta_k||)
  int iterations = 0;
};

/// rot(beta^-1 w) = F, div w = G, w L2-orthogonal to {beta zeta_k}.
/// `c` must be the corrector set of the same beta.
/// Throws std::domain_error when a compatibility residual, relative to the
/// data norm, exceeds `compat_tolerance`.
CurlDivSolve solve_curl_div(const MatrixField& beta, const Field3<Complex>& F, const Field1<Complex>& G,
                            const CorrectorSet& c, const CellSolveConfig& cfg = {},
                            double compat_tolerance = 1e-9);

/// Lambda_kp = |Omega|^-1 int (beta zeta_p, zeta_k) dy before symmetrization.
Eigen::Matrix3d corrector_energy(const MatrixField& beta, const CorrectorSet& c);

}  // namespace curlhom
