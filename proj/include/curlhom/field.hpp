#pragma once

#include "curlhom/grid.hpp"

#include <functional>
#include <stdexcept>

namespace curlhom {

/// Complex scalar per node.
struct ScalarField {
  Grid grid;
  Field1<Complex> values;

  ScalarField() = default;
  ScalarField(Grid g, Field1<Complex> v) : grid(std::move(g)), values(std::move(v)) {
    if (values.size() != grid.size()) throw std::invalid_argument("scalar field size mismatch");
  }
  static ScalarField zeros(const Grid& g) { return {g, Field1<Complex>::Zero(g.size())}; }
  static ScalarField from(const Grid& g, const std::function<Complex(const Eigen::Vector3d&)>& f);

  Complex mean() const { return values.mean(); }
};

/// Complex 3-vector per node; column c holds component c.
struct VectorField {
  Grid grid;
  Field3<Complex> values;

  VectorField() = default;
  VectorField(Grid g, Field3<Complex> v) : grid(std::move(g)), values(std::move(v)) {
    if (values.rows() != grid.size()) throw std::invalid_argument("vector field size mismatch");
  }
  static VectorField zeros(const Grid& g) { return {g, Field3<Complex>::Zero(g.size(), 3)}; }
  static VectorField from(const Grid& g,
                          const std::function<Eigen::Vector3cd(const Eigen::Vector3d&)>& f);

  Eigen::Vector3cd mean() const { return values.colwise().mean().transpose(); }
  bool all_finite() const { return values.allFinite(); }

  VectorField& operator+=(const VectorField& o) {
    require_same_grid(grid, o.grid, "vector field +=");
    values += o.values;
    return *this;
  }
  VectorField& operator-=(const VectorField& o) {
    require_same_grid(grid, o.grid, "vector field -=");
    values -= o.values;
    return *this;
  }
  VectorField& operator*=(Complex s) {
    values *= s;
    return *this;
  }
};

inline VectorField operator+(VectorField a, const VectorField& b) { return a += b; }
inline VectorField operator-(VectorField a, const VectorField& b) { return a -= b; }
inline VectorField operator*(Complex s, VectorField a) { return a *= s; }

/// One Maxwell state (u, v) on a shared grid.
struct FieldPair {
  VectorField u;
  VectorField v;

  FieldPair() = default;
  FieldPair(VectorField u_, VectorField v_) : u(std::move(u_)), v(std::move(v_)) {
    require_same_grid(u.grid, v.grid, "field pair");
  }
  static FieldPair zeros(const Grid& g) { return {VectorField::zeros(g), VectorField::zeros(g)}; }
  const Grid& grid() const { return u.grid; }

  FieldPair& operator+=(const FieldPair& o) {
    u += o.u;
    v += o.v;
    return *this;
  }
  FieldPair& operator-=(const FieldPair& o) {
    u -= o.u;
    v -= o.v;
    return *this;
  }
  FieldPair& operator*=(Complex s) {
    u *= s;
    v *= s;
    return *this;
  }
};

inline FieldPair operator+(FieldPair a, const FieldPair& b) { return a += b; }
inline FieldPair operator-(FieldPair a, const FieldPair& b) { return a -= b; }
inline FieldPair operator*(Complex s, FieldPair a) { return a *= s; }

/// Packed symmetric 3x3 storage: xx, yy, zz, xy, xz, yz.
using SymPacked = Eigen::Matrix<double, 1, 6>;

inline SymPacked pack_symmetric(const Eigen::Matrix3d& m) {
  SymPacked p;
  p << m(0, 0), m(1, 1), m(2, 2), 0.5 * (m(0, 1) + m(1, 0)), 0.5 * (m(0, 2) + m(2, 0)),
      0.5 * (m(1, 2) + m(2, 1));
  return p;
}

inline Eigen::Matrix3d unpack_symmetric(const Eigen::Ref<const SymPacked>& p) {
  Eigen::Matrix3d m;
  m << p(0), p(3), p(4), p(3), p(1), p(5), p(4), p(5), p(2);
  return m;
}

template <class Vec>
inline auto apply_packed(const double* p, const Vec& x) {
  using S = std::decay_t<decltype(x(0))>;
  Eigen::Matrix<S, 3, 1> y;
  y(0) = p[0] * x(0) + p[3] * x(1) + p[4] * x(2);
  y(1) = p[3] * x(0) + p[1] * x(1) + p[5] * x(2);
  y(2) = p[4] * x(0) + p[5] * x(1) + p[2] * x(2);
  return y;
}

/// Thrown when a sampled coefficient is not symmetric positive-definite.
struct NotPositiveDefinite : std::runtime_error {
  NotPositiveDefinite(Eigen::Index node, double eigenvalue);
  Eigen::Index node;
  double eigenvalue;
};

/// Real symmetric positive-definite 3x3 matrix per node, with its inverse.
class MatrixField {
 public:
  MatrixField() = default;
  /// Builds from per-node matrices; throws NotPositiveDefinite.
  MatrixField(Grid grid, const std::function<Eigen::Matrix3d(Eigen::Index)>& at_node);
  static MatrixField identity(const Grid& grid);

  const Grid& grid() const { return grid_; }
  Eigen::Matrix3d at(Eigen::Index i) const { return unpack_symmetric(values_.row(i)); }
  Eigen::Matrix3d inverse_at(Eigen::Index i) const { return unpack_symmetric(inverses_.row(i)); }
  const double* packed(Eigen::Index i) const { return values_.data() + 6 * i; }
  const double* packed_inverse(Eigen::Index i) const { return inverses_.data() + 6 * i; }
  /// Smallest eigenvalue seen at construction.
  double min_eigenvalue() const { return min_eigenvalue_; }
  bool is_identity() const { return identity_; }

  /// Nodewise product with the matrix (or its inverse).
  Field3<Complex> apply(const Field3<Complex>& x) const;
  Field3<Complex> apply_inverse(const Field3<Complex>& x) const;
  VectorField apply(const VectorField& x) const;
  VectorField apply_inverse(const VectorField& x) const;

 private:
  Grid grid_;
  // Row-major so that one node's six entries are contiguous.
  Eigen::Matrix<double, Eigen::Dynamic, 6, Eigen::RowMajor> values_;
  Eigen::Matrix<double, Eigen::Dynamic, 6, Eigen::RowMajor> inverses_;
  double min_eigenvalue_ = 1.0;
  bool identity_ = false;
};

}  // namespace curlhom
