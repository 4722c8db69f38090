#pragma once

#include "curlhom/fft.hpp"
#include "curlhom/field.hpp"

#include <array>
#include <vector>

namespace curlhom {

/// Differential calculus on one periodic grid. Every derivative is a Fourier
/// multiplier i*k(m); k is the exact wavevector for spectral grids (Nyquist
/// modes differentiate to zero) and the modified wavevector of the central
/// stencil otherwise. Nodal in, nodal out.
class Calculus {
 public:
  explicit Calculus(const Grid& grid);

  const Grid& grid() const { return grid_; }

  /// Derivative symbol of the mode stored at linear index `mode`.
  Eigen::Vector3d wavevector(Eigen::Index mode) const;

  /// Visits every mode in storage order with its derivative symbol.
  template <class F>
  void for_each_mode(F&& f) const {
    const auto& n = grid_.resolution();
    Eigen::Index idx = 0;
    for (int i0 = 0; i0 < n[0]; ++i0) {
      const Eigen::Vector3d k0 = kmap_.col(0) * symbol_[0][i0];
      for (int i1 = 0; i1 < n[1]; ++i1) {
        const Eigen::Vector3d k01 = k0 + kmap_.col(1) * symbol_[1][i1];
        for (int i2 = 0; i2 < n[2]; ++i2, ++idx) {
          f(idx, Eigen::Vector3d(k01 + kmap_.col(2) * symbol_[2][i2]));
        }
      }
    }
  }

  void forward(Complex* data) const { fft_.forward(data); }
  void backward(Complex* data) const { fft_.backward_normalized(data); }
  Field3<Complex> forward(Field3<Complex> x) const;
  Field3<Complex> backward(Field3<Complex> x) const;
  Field1<Complex> forward(Field1<Complex> x) const;
  Field1<Complex> backward(Field1<Complex> x) const;

  Field3<Complex> grad(const Field1<Complex>& f) const;
  Field1<Complex> div(const Field3<Complex>& u) const;
  Field3<Complex> rot(const Field3<Complex>& u) const;
  /// Single partial derivative along Cartesian axis `axis`.
  Field1<Complex> partial(const Field1<Complex>& f, int axis) const;
  /// Orthogonal projection onto discretely divergence-free fields; keeps the mean.
  Field3<Complex> leray(const Field3<Complex>& u) const;
  /// Zero-mean, divergence-free A with rot A equal to the solenoidal,
  /// zero-mean part of F.
  Field3<Complex> inverse_rot(const Field3<Complex>& F) const;
  /// Zero-mean solution p of -Laplace p = s (mean of s ignored).
  Field1<Complex> inverse_negative_laplacian(const Field1<Complex>& s) const;

 private:
  Grid grid_;
  Fft3 fft_;
  Eigen::Matrix3d kmap_;
  std::array<std::vector<double>, 3> symbol_;
};

// Field-core operations on grid-carrying fields.
VectorField grad(const ScalarField& f);
ScalarField div(const VectorField& u);
VectorField rot(const VectorField& u);
VectorField leray_project(const VectorField& u);

/// L2 pairing sum w * (a, conj b) with the nodal quadrature.
Complex inner(const VectorField& a, const VectorField& b);
Complex inner(const ScalarField& a, const ScalarField& b);
double l2_norm(const VectorField& a);
double l2_norm(const ScalarField& a);
double l2_norm(const FieldPair& p);
double max_norm(const VectorField& a);
double max_norm(const ScalarField& a);

/// Discrete H^s norm with Parseval weights (1 + |k|^2)^s.
double sobolev_norm(const VectorField& u, int order);
double sobolev_norm(const ScalarField& f, int order);
double sobolev_norm(const FieldPair& p, int order);

/// Integral of (alpha^-1 u1, u2) + (mu^-1 v1, v2); conjugate-linear in q.
Complex weighted_inner(const FieldPair& p, const FieldPair& q, const MatrixField& alpha,
                       const MatrixField& mu);

/// Fourier resampling of a periodic field to another resolution of the same
/// cell (exact for band-limited data below both Nyquist limits).
Field3<Complex> resample(const Grid& from, const Field3<Complex>& values,
                         std::array<int, 3> to);

}  // namespace curlhom
