#include "curlhom/field.hpp"

#include <limits>
#include <string>

namespace curlhom {

ScalarField ScalarField::from(const Grid& g,
                              const std::function<Complex(const Eigen::Vector3d&)>& f) {
  ScalarField out = zeros(g);
  for (Eigen::Index i = 0; i < g.size(); ++i) out.values(i) = f(g.node(i));
  return out;
}

VectorField VectorField::from(const Grid& g,
                              const std::function<Eigen::Vector3cd(const Eigen::Vector3d&)>& f) {
  VectorField out = zeros(g);
  for (Eigen::Index i = 0; i < g.size(); ++i) out.values.row(i) = f(g.node(i)).transpose();
  return out;
}

NotPositiveDefinite::NotPositiveDefinite(Eigen::Index n, double ev)
    : std::runtime_error("coefficient not positive-definite at node " + std::to_string(n) +
                         " (smallest eigenvalue " + std::to_string(ev) + ")"),
      node(n),
      eigenvalue(ev) {}

MatrixField::MatrixField(Grid grid, const std::function<Eigen::Matrix3d(Eigen::Index)>& at_node)
    : grid_(std::move(grid)) {
  const Eigen::Index n = grid_.size();
  values_.resize(n, 6);
  inverses_.resize(n, 6);
  min_eigenvalue_ = std::numeric_limits<double>::infinity();
  identity_ = true;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Matrix3d m = at_node(i);
    const SymPacked p = pack_symmetric(m);
    const Eigen::Matrix3d s = unpack_symmetric(p);
    eig.computeDirect(s, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues()(0);
    if (!(lo > 0.0)) throw NotPositiveDefinite(i, lo);
    min_eigenvalue_ = std::min(min_eigenvalue_, lo);
    values_.row(i) = p;
    inverses_.row(i) = pack_symmetric(s.inverse());
    if (identity_ && s != Eigen::Matrix3d::Identity()) identity_ = false;
  }
}

MatrixField MatrixField::identity(const Grid& grid) {
  return MatrixField(grid, [](Eigen::Index) { return Eigen::Matrix3d::Identity(); });
}

namespace {

Field3<Complex> apply_rows(const double* data, const Field3<Complex>& x) {
  Field3<Complex> y(x.rows(), 3);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double* p = data + 6 * i;
    const Complex a = x(i, 0), b = x(i, 1), c = x(i, 2);
    y(i, 0) = p[0] * a + p[3] * b + p[4] * c;
    y(i, 1) = p[3] * a + p[1] * b + p[5] * c;
    y(i, 2) = p[4] * a + p[5] * b + p[2] * c;
  }
  return y;
}

}  // namespace

Field3<Complex> MatrixField::apply(const Field3<Complex>& x) const {
  if (x.rows() != grid_.size()) throw GridMismatch("matrix field apply: size mismatch");
  if (identity_) return x;
  return apply_rows(values_.data(), x);
}

Field3<Complex> MatrixField::apply_inverse(const Field3<Complex>& x) const {
  if (x.rows() != grid_.size()) throw GridMismatch("matrix field apply: size mismatch");
  if (identity_) return x;
  return apply_rows(inverses_.data(), x);
}

VectorField MatrixField::apply(const VectorField& x) const {
  require_same_grid(grid_, x.grid, "matrix field apply");
  return {grid_, apply(x.values)};
}

VectorField MatrixField::apply_inverse(const VectorField& x) const {
  require_same_grid(grid_, x.grid, "matrix field apply");
  return {grid_, apply_inverse(x.values)};
}

}  // namespace curlhom
