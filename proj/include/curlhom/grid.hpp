#pragma once

#include <Eigen/Dense>

#include <array>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace curlhom {

using Complex = std::complex<double>;

template <class Scalar>
using Field3 = Eigen::Matrix<Scalar, Eigen::Dynamic, 3>;
template <class Scalar>
using Field1 = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Thrown when two operands live on different grids.
struct GridMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Periodicity lattice. Columns of `basis` span the lattice, the elementary
/// cell is { basis * t : t in [0,1)^3 }.
class Lattice {
 public:
  Lattice();
  explicit Lattice(const Eigen::Matrix3d& basis);

  static Lattice cubic(double side = 1.0);

  const Eigen::Matrix3d& basis() const { return basis_; }
  /// 2*pi * basis^{-T}: columns are reciprocal vectors.
  const Eigen::Matrix3d& reciprocal() const { return reciprocal_; }
  double volume() const { return volume_; }
  bool is_cubic() const;

  /// Fractional coordinates of a Cartesian point.
  Eigen::Vector3d fractional(const Eigen::Vector3d& p) const;

  bool operator==(const Lattice& other) const { return basis_ == other.basis_; }

 private:
  Eigen::Matrix3d basis_;
  Eigen::Matrix3d reciprocal_;
  double volume_;
};

/// How first derivatives are discretized on a grid.
enum class DerivativeRule : std::uint32_t {
  spectral = 0,
  central2 = 2,
  central4 = 4,
  central6 = 6,
  central8 = 8,
};

/// Half-width of the stencil of a central rule (0 for spectral).
int stencil_reach(DerivativeRule rule);
/// Coefficients a_j of D f_i = h^{-1} sum_j a_j (f_{i+j} - f_{i-j}).
std::vector<double> central_coefficients(DerivativeRule rule);
DerivativeRule derivative_rule_from_string(const std::string& name);
std::string to_string(DerivativeRule rule);

enum class GridKind : std::uint32_t { cell = 1, macro = 2 };

/// Uniform periodic sampling of a parallelepiped: nodes origin + basis * (i/n).
/// Cell grids sample the lattice cell Omega; macro grids sample the periodic
/// box [-L/2, L/2)^3.
class Grid {
 public:
  Grid() = default;
  Grid(GridKind kind, const Lattice& lattice, const Eigen::Vector3d& origin,
       std::array<int, 3> resolution, DerivativeRule rule);

  /// Cell grid on the lattice cell; resolutions >= 4 and even.
  static Grid cell(const Lattice& lattice, std::array<int, 3> resolution);
  /// Periodic cube of side L centred at the origin; resolutions even.
  static Grid macro(double side, std::array<int, 3> resolution,
                    DerivativeRule rule = DerivativeRule::spectral);

  GridKind kind() const { return kind_; }
  const Lattice& lattice() const { return lattice_; }
  const Eigen::Vector3d& origin() const { return origin_; }
  const std::array<int, 3>& resolution() const { return n_; }
  DerivativeRule rule() const { return rule_; }
  Grid with_rule(DerivativeRule rule) const;

  Eigen::Index size() const {
    return Eigen::Index(n_[0]) * n_[1] * n_[2];
  }
  double volume() const { return lattice_.volume(); }
  /// Quadrature weight of every node (midpoint rule).
  double weight() const { return volume() / double(size()); }
  /// Side length of a macro cube (basis(0,0)).
  double side() const { return lattice_.basis()(0, 0); }

  Eigen::Index index(int i0, int i1, int i2) const {
    return (Eigen::Index(i0) * n_[1] + i1) * n_[2] + i2;
  }
  /// Periodic wrap of possibly out-of-range indices.
  Eigen::Index wrapped_index(int i0, int i1, int i2) const;
  std::array<int, 3> multi_index(Eigen::Index idx) const;
  Eigen::Vector3d node(Eigen::Index idx) const;
  Eigen::Vector3d node(int i0, int i1, int i2) const;

  /// Signed integer frequency of index i along an axis of length n.
  static int frequency(int i, int n) { return i <= n / 2 ? i : i - n; }

  bool operator==(const Grid& other) const;
  bool operator!=(const Grid& other) const { return !(*this == other); }

 private:
  GridKind kind_ = GridKind::cell;
  Lattice lattice_;
  Eigen::Vector3d origin_ = Eigen::Vector3d::Zero();
  std::array<int, 3> n_{4, 4, 4};
  DerivativeRule rule_ = DerivativeRule::spectral;
};

void require_same_grid(const Grid& a, const Grid& b, const char* what);

}  // namespace curlhom
