#include "curlhom/calculus.hpp"

#include <cmath>
#include <numbers>

namespace curlhom {

namespace {

std::vector<double> axis_symbol(int n, DerivativeRule rule) {
  std::vector<double> s(n, 0.0);
  const double two_pi = 2.0 * std::numbers::pi;
  if (rule == DerivativeRule::spectral) {
    for (int i = 0; i < n; ++i) {
      const int m = Grid::frequency(i, n);
      s[i] = (2 * m == n) ? 0.0 : two_pi * m;
    }
    return s;
  }
  const auto a = central_coefficients(rule);
  for (int i = 0; i < n; ++i) {
    const double theta = two_pi * Grid::frequency(i, n) / n;
    double acc = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) acc += a[j] * std::sin(double(j + 1) * theta);
    s[i] = 2.0 * n * acc;
  }
  return s;
}

const Complex I(0.0, 1.0);

}  // namespace

Calculus::Calculus(const Grid& grid)
    : grid_(grid),
      fft_(grid.resolution()),
      kmap_(grid.lattice().reciprocal() / (2.0 * std::numbers::pi)) {
  for (int a = 0; a < 3; ++a) symbol_[a] = axis_symbol(grid.resolution()[a], grid.rule());
}

Eigen::Vector3d Calculus::wavevector(Eigen::Index mode) const {
  const auto m = grid_.multi_index(mode);
  return kmap_.col(0) * symbol_[0][m[0]] + kmap_.col(1) * symbol_[1][m[1]] +
         kmap_.col(2) * symbol_[2][m[2]];
}

Field3<Complex> Calculus::forward(Field3<Complex> x) const {
  for (int c = 0; c < x.cols(); ++c) fft_.forward(x.col(c).data());
  return x;
}

Field3<Complex> Calculus::backward(Field3<Complex> x) const {
  for (int c = 0; c < x.cols(); ++c) fft_.backward_normalized(x.col(c).data());
  return x;
}

Field1<Complex> Calculus::forward(Field1<Complex> x) const {
  fft_.forward(x.data());
  return x;
}

Field1<Complex> Calculus::backward(Field1<Complex> x) const {
  fft_.backward_normalized(x.data());
  return x;
}

Field3<Complex> Calculus::grad(const Field1<Complex>& f) const {
  const Field1<Complex> fh = forward(f);
  Field3<Complex> out(f.size(), 3);
  for_each_mode([&](Eigen::Index i, const Eigen::Vector3d& k) {
    for (int c = 0; c < 3; ++c) out(i, c) = I * k(c) * fh(i);
  });
  return backward(std::move(out));
}

Field1<Complex> Calculus::div(const Field3<Complex>& u) const {
  const Field3<Complex> uh = forward(u);
  Field1<Complex> out(u.rows());
  for_each_mode([&](Eigen::Index i, const Eigen::Vector3d& k) {
    out(i) = I * (k(0) * uh(i, 0) + k(1) * uh(i, 1) + k(2) * uh(i, 2));
  });
  return backward(std::move(out));
}

Field3<Complex> Calculus::rot(const Field3<Complex>& u) const {
  const Field3<Complex> uh = forward(u);
  Field3<Complex> out(u.rows(), 3);
  for_each_mode([&](Eigen::Index i, const Eigen::Vector3d& k) {
    out(i, 0) = I * (k(1) * uh(i, 2) - k(2) * uh(i, 1));
    out(i, 1) = I * (k(2) * uh(i, 0) - k(0) * uh(i, 2));
    out(i, 2) = I * (k(0) * uh(i, 1) - k(1) * uh(i, 0));
  });
  return backward(std::move(out));
}

Field1<Complex> Calculus::partial(const Field1<Complex>& f, int axis) const {
  Field1<Complex> fh = forward(f);
  for_each_mode([&](Eigen::Index i, const Eigen::Vector3d& k) { fh(i) *= I * k(axis); });
  return backward(std::move(fh));
}

Field3<Complex> Calculus::leray(const Field3<Complex>& u) const {
  Field3<Complex> uh = forward(u);
  for_each_mode([&](Eigen::Index i, const Eigen::Vector3d& k) {
    const double k2 = k.squaredNorm();
    if (k2 == 0.0) return;
    const Complex kd = (k(0) * uh(i, 0) + k(1) * uh(i, 1) + k(2) * uh(i, 2)) / k2;
    for (int c = 0; c < 3; ++c) uh(i, c) -= k(c) * kd;
  });
  return backward(std::move(uh));
}

Field3<Complex> Calculus::inverse_rot(const Field3<Complex>& F) const {
  const Field3<Complex> fh = forward(F);
  Field3<Complex> out(F.rows(), 3);
  for_each_mode([&](Eigen::Index i, const Eigen::Vector3d& k) {
    const double k2 = k.squaredNorm();
    if (k2 == 0.0) {
      out.row(i).setZero();
      return;
    }
    out(i, 0) = I * (k(1) * fh(i, 2) - k(2) * fh(i, 1)) / k2;
    out(i, 1) = I * (k(2) * fh(i, 0) - k(0) * fh(i, 2)) / k2;
    out(i, 2) = I * (k(0) * fh(i, 1) - k(1) * fh(i, 0)) / k2;
  });
  return backward(std::move(out));
}

Field1<Complex> Calculus::inverse_negative_laplacian(const Field1<Complex>& s) const {
  Field1<Complex> sh = forward(s);
  for_each_mode([&](Eigen::Index i, const Eigen::Vector3d& k) {
    const double k2 = k.squaredNorm();
    sh(i) = k2 == 0.0 ? Complex(0.0) : sh(i) / k2;
  });
  return backward(std::move(sh));
}

VectorField grad(const ScalarField& f) {
  return {f.grid, Calculus(f.grid).grad(f.values)};
}

ScalarField div(const VectorField& u) {
  return {u.grid, Calculus(u.grid).div(u.values)};
}

VectorField rot(const VectorField& u) {
  return {u.grid, Calculus(u.grid).rot(u.values)};
}

VectorField leray_project(const VectorField& u) {
  return {u.grid, Calculus(u.grid).leray(u.values)};
}

Complex inner(const VectorField& a, const VectorField& b) {
  require_same_grid(a.grid, b.grid, "inner");
  Complex acc = 0.0;
  for (int c = 0; c < 3; ++c) acc += b.values.col(c).dot(a.values.col(c));
  return acc * a.grid.weight();
}

Complex inner(const ScalarField& a, const ScalarField& b) {
  require_same_grid(a.grid, b.grid, "inner");
  // Eigen's dot conjugates its first argument.
  return b.values.dot(a.values) * a.grid.weight();
}

double l2_norm(const VectorField& a) {
  return std::sqrt(a.values.squaredNorm() * a.grid.weight());
}

double l2_norm(const ScalarField& a) {
  return std::sqrt(a.values.squaredNorm() * a.grid.weight());
}

double l2_norm(const FieldPair& p) {
  return std::sqrt((p.u.values.squaredNorm() + p.v.values.squaredNorm()) * p.grid().weight());
}

double max_norm(const VectorField& a) {
  return a.values.rows() == 0 ? 0.0 : a.values.rowwise().norm().maxCoeff();
}

double max_norm(const ScalarField& a) {
  return a.values.size() == 0 ? 0.0 : a.values.cwiseAbs().maxCoeff();
}

namespace {

template <class M>
double sobolev_sq(const Calculus& calc, const M& x, int order) {
  const M xh = calc.forward(x);
  double acc = 0.0;
  calc.for_each_mode([&](Eigen::Index i, const Eigen::Vector3d& k) {
    acc += std::pow(1.0 + k.squaredNorm(), order) * xh.row(i).squaredNorm();
  });
  const double n = double(calc.grid().size());
  return acc * calc.grid().volume() / (n * n);
}

}  // namespace

double sobolev_norm(const VectorField& u, int order) {
  return std::sqrt(sobolev_sq(Calculus(u.grid), u.values, order));
}

double sobolev_norm(const ScalarField& f, int order) {
  return std::sqrt(sobolev_sq(Calculus(f.grid), f.values, order));
}

double sobolev_norm(const FieldPair& p, int order) {
  const Calculus calc(p.grid());
  return std::sqrt(sobolev_sq(calc, p.u.values, order) + sobolev_sq(calc, p.v.values, order));
}

Complex weighted_inner(const FieldPair& p, const FieldPair& q, const MatrixField& alpha,
                       const MatrixField& mu) {
  require_same_grid(p.grid(), q.grid(), "weighted inner");
  require_same_grid(p.grid(), alpha.grid(), "weighted inner alpha");
  require_same_grid(p.grid(), mu.grid(), "weighted inner mu");
  Complex acc = 0.0;
  const Eigen::Index n = p.grid().size();
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Vector3cd au = apply_packed(alpha.packed_inverse(i), p.u.values.row(i));
    const Eigen::Vector3cd mv = apply_packed(mu.packed_inverse(i), p.v.values.row(i));
    for (int c = 0; c < 3; ++c) {
      acc += au(c) * std::conj(q.u.values(i, c)) + mv(c) * std::conj(q.v.values(i, c));
    }
  }
  return acc * p.grid().weight();
}

namespace {

struct Target {
  int index;
  double weight;
};

// Where source mode i (of n) lands among m modes.
std::vector<std::vector<Target>> axis_map(int n, int m) {
  std::vector<std::vector<Target>> map(n);
  for (int i = 0; i < n; ++i) {
    const int f = Grid::frequency(i, n);
    const int af = std::abs(f);
    if (2 * af < std::min(n, m)) {
      map[i].push_back({(f + m) % m, 1.0});
    } else if (2 * af == n && m > n) {
      map[i].push_back({f, 0.5});
      map[i].push_back({m - f, 0.5});
    } else if (2 * af == m) {
      map[i].push_back({m / 2, 1.0});
    }
  }
  return map;
}

}  // namespace

Field3<Complex> resample(const Grid& from, const Field3<Complex>& values, std::array<int, 3> to) {
  if (to == from.resolution()) return values;
  const Grid target(from.kind(), from.lattice(), from.origin(), to, from.rule());
  const Calculus src(from);
  const Field3<Complex> vh = src.forward(values);
  std::array<std::vector<std::vector<Target>>, 3> maps;
  for (int a = 0; a < 3; ++a) maps[a] = axis_map(from.resolution()[a], to[a]);
  const double scale = double(target.size()) / double(from.size());
  Field3<Complex> out = Field3<Complex>::Zero(target.size(), values.cols());
  const auto& n = from.resolution();
  for (int i0 = 0; i0 < n[0]; ++i0)
    for (int i1 = 0; i1 < n[1]; ++i1)
      for (int i2 = 0; i2 < n[2]; ++i2) {
        const Eigen::Index s = from.index(i0, i1, i2);
        for (const auto& t0 : maps[0][i0])
          for (const auto& t1 : maps[1][i1])
            for (const auto& t2 : maps[2][i2]) {
              const double w = scale * t0.weight * t1.weight * t2.weight;
              out.row(target.index(t0.index, t1.index, t2.index)) += w * vh.row(s);
            }
      }
  return Calculus(target).backward(std::move(out));
}

}  // namespace curlhom
