#include "curlhom/grid.hpp"

#include <cmath>
#include <numbers>

namespace curlhom {

Lattice::Lattice() : Lattice(Eigen::Matrix3d::Identity()) {}

Lattice::Lattice(const Eigen::Matrix3d& basis) : basis_(basis) {
  volume_ = std::abs(basis_.determinant());
  if (!(volume_ > 1e-14 * std::pow(basis_.norm(), 3))) {
    throw std::invalid_argument("lattice basis vectors are linearly dependent");
  }
  reciprocal_ = 2.0 * std::numbers::pi * basis_.inverse().transpose();
}

Lattice Lattice::cubic(double side) {
  if (!(side > 0)) throw std::invalid_argument("lattice side must be positive");
  return Lattice(side * Eigen::Matrix3d::Identity());
}

bool Lattice::is_cubic() const {
  const Eigen::Matrix3d d = basis_(0, 0) * Eigen::Matrix3d::Identity();
  return basis_(0, 0) > 0 && (basis_ - d).cwiseAbs().maxCoeff() == 0.0;
}

Eigen::Vector3d Lattice::fractional(const Eigen::Vector3d& p) const {
  return reciprocal_.transpose() * p / (2.0 * std::numbers::pi);
}

int stencil_reach(DerivativeRule rule) {
  return rule == DerivativeRule::spectral ? 0 : int(rule) / 2;
}

std::vector<double> central_coefficients(DerivativeRule rule) {
  switch (rule) {
    case DerivativeRule::central2:
      return {0.5};
    case DerivativeRule::central4:
      return {2.0 / 3.0, -1.0 / 12.0};
    case DerivativeRule::central6:
      return {3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0};
    case DerivativeRule::central8:
      return {4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0};
    case DerivativeRule::spectral:
      break;
  }
  return {};
}

DerivativeRule derivative_rule_from_string(const std::string& name) {
  if (name == "spectral") return DerivativeRule::spectral;
  if (name == "central2") return DerivativeRule::central2;
  if (name == "central4") return DerivativeRule::central4;
  if (name == "central6") return DerivativeRule::central6;
  if (name == "central8") return DerivativeRule::central8;
  throw std::invalid_argument("unknown derivative rule '" + name + "'");
}

std::string to_string(DerivativeRule rule) {
  switch (rule) {
    case DerivativeRule::spectral:
      return "spectral";
    case DerivativeRule::central2:
      return "central2";
    case DerivativeRule::central4:
      return "central4";
    case DerivativeRule::central6:
      return "central6";
    case DerivativeRule::central8:
      return "central8";
  }
  return "unknown";
}

Grid::Grid(GridKind kind, const Lattice& lattice, const Eigen::Vector3d& origin,
           std::array<int, 3> resolution, DerivativeRule rule)
    : kind_(kind), lattice_(lattice), origin_(origin), n_(resolution), rule_(rule) {
  for (int n : n_) {
    if (n < 4) {
      throw std::invalid_argument("grid resolution " + std::to_string(n) +
                                  " too small: at least 4 nodes per axis");
    }
    if (n % 2 != 0) {
      throw std::invalid_argument("grid resolution " + std::to_string(n) +
                                  " must be even");
    }
    if (rule_ != DerivativeRule::spectral && n < 2 * stencil_reach(rule_) + 1) {
      throw std::invalid_argument("grid resolution too small for the stencil");
    }
  }
}

Grid Grid::cell(const Lattice& lattice, std::array<int, 3> resolution) {
  return Grid(GridKind::cell, lattice, Eigen::Vector3d::Zero(), resolution,
              DerivativeRule::spectral);
}

Grid Grid::macro(double side, std::array<int, 3> resolution, DerivativeRule rule) {
  return Grid(GridKind::macro, Lattice::cubic(side),
              Eigen::Vector3d::Constant(-0.5 * side), resolution, rule);
}

Grid Grid::with_rule(DerivativeRule rule) const {
  return Grid(kind_, lattice_, origin_, n_, rule);
}

Eigen::Index Grid::wrapped_index(int i0, int i1, int i2) const {
  auto wrap = [](int i, int n) { return ((i % n) + n) % n; };
  return index(wrap(i0, n_[0]), wrap(i1, n_[1]), wrap(i2, n_[2]));
}

std::array<int, 3> Grid::multi_index(Eigen::Index idx) const {
  const int i2 = int(idx % n_[2]);
  idx /= n_[2];
  const int i1 = int(idx % n_[1]);
  const int i0 = int(idx / n_[1]);
  return {i0, i1, i2};
}

Eigen::Vector3d Grid::node(int i0, int i1, int i2) const {
  const Eigen::Vector3d t(double(i0) / n_[0], double(i1) / n_[1], double(i2) / n_[2]);
  return origin_ + lattice_.basis() * t;
}

Eigen::Vector3d Grid::node(Eigen::Index idx) const {
  const auto m = multi_index(idx);
  return node(m[0], m[1], m[2]);
}

bool Grid::operator==(const Grid& other) const {
  return kind_ == other.kind_ && lattice_ == other.lattice_ && origin_ == other.origin_ &&
         n_ == other.n_ && rule_ == other.rule_;
}

void require_same_grid(const Grid& a, const Grid& b, const char* what) {
  if (a != b) throw GridMismatch(std::string(what) + ": operands live on different grids");
}

}  // namespace curlhom
