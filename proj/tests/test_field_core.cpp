#include <doctest.h>

#include "curlhom/calculus.hpp"
#include "curlhom/field_io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numbers>

using namespace curlhom;
using Eigen::Vector3cd;
using Eigen::Vector3d;

namespace {
const double pi = std::numbers::pi;
const Complex I(0.0, 1.0);
}  // namespace

TEST_CASE("grid indexing round trips") {
  const Grid g = Grid::cell(Lattice::cubic(), {4, 6, 8});
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const auto m = g.multi_index(i);
    CHECK(g.index(m[0], m[1], m[2]) == i);
  }
  CHECK(g.wrapped_index(-1, 6, 9) == g.index(3, 0, 1));
  CHECK_THROWS_AS(Grid::cell(Lattice::cubic(), {5, 4, 4}), std::invalid_argument);
}

TEST_CASE("spectral derivatives of trigonometric fields are exact") {
  const Grid g = Grid::cell(Lattice::cubic(), {8, 8, 8});
  const auto f = ScalarField::from(g, [](const Vector3d& x) {
    return Complex(std::sin(2 * pi * x(0)) * std::cos(4 * pi * x(2)));
  });
  const VectorField df = grad(f);
  double err = 0.0;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const Vector3d x = g.node(i);
    const Vector3d exact(2 * pi * std::cos(2 * pi * x(0)) * std::cos(4 * pi * x(2)), 0.0,
                         -4 * pi * std::sin(2 * pi * x(0)) * std::sin(4 * pi * x(2)));
    err = std::max(err, (df.values.row(i).transpose() - exact.cast<Complex>()).norm());
  }
  CHECK(err < 1e-11);
}

TEST_CASE("plane waves on a skew lattice differentiate by their wavevector") {
  Eigen::Matrix3d B;
  B << 1.0, 0.3, 0.1, 0.0, 0.9, -0.2, 0.0, 0.0, 1.2;
  const Lattice lat(B);
  const Grid g = Grid::cell(lat, {8, 8, 8});
  const Vector3d k = lat.reciprocal() * Vector3d(1, -2, 1);
  const auto f = ScalarField::from(g, [&](const Vector3d& x) { return std::exp(I * k.dot(x)); });
  const VectorField df = grad(f);
  double err = 0.0;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const Vector3cd exact = I * k.cast<Complex>() * f.values(i);
    err = std::max(err, (df.values.row(i).transpose() - exact).norm());
  }
  CHECK(err < 1e-10);
}

TEST_CASE("central rules agree with the explicit stencil") {
  for (auto rule : {DerivativeRule::central2, DerivativeRule::central4, DerivativeRule::central6,
                    DerivativeRule::central8}) {
    const Grid g = Grid::macro(2.0, {16, 10, 10}, rule);
    const auto f = ScalarField::from(g, [](const Vector3d& x) {
      return Complex(std::exp(std::sin(pi * x(0))) + 0.3 * std::cos(pi * x(1)), x(2) * 0.0);
    });
    const auto a = central_coefficients(rule);
    const double h = 2.0 / 16;
    const Calculus calc(g);
    const Field1<Complex> d0 = calc.partial(f.values, 0);
    double err = 0.0;
    for (int i0 = 0; i0 < 16; ++i0)
      for (int i1 = 0; i1 < 10; ++i1)
        for (int i2 = 0; i2 < 10; ++i2) {
          Complex s = 0.0;
          for (std::size_t j = 0; j < a.size(); ++j) {
            const int o = int(j) + 1;
            s += a[j] * (f.values(g.wrapped_index(i0 + o, i1, i2)) -
                         f.values(g.wrapped_index(i0 - o, i1, i2)));
          }
          err = std::max(err, std::abs(s / h - d0(g.index(i0, i1, i2))));
        }
    CHECK(err < 1e-11);
  }
}

TEST_CASE("discrete de Rham identities hold") {
  const Grid g = Grid::macro(1.0, {8, 8, 8}, DerivativeRule::central4);
  const auto phi = ScalarField::from(g, [](const Vector3d& x) {
    return Complex(std::exp(-10 * x.squaredNorm()), x(0));
  });
  const auto u = VectorField::from(g, [](const Vector3d& x) {
    return Vector3cd(std::sin(x(1) * 7), Complex(0, x(0) * x(2)), std::exp(x(0)));
  });
  CHECK(max_norm(rot(grad(phi))) < 1e-10);
  CHECK(max_norm(div(rot(u))) < 1e-10);
  const VectorField p = leray_project(u);
  CHECK(max_norm(div(p)) < 1e-10);
  CHECK(max_norm(leray_project(p) - p) < 1e-12);
  CHECK((p.mean() - u.mean()).norm() < 1e-13);
}

TEST_CASE("inverse rot recovers the solenoidal part") {
  const Grid g = Grid::cell(Lattice::cubic(), {8, 8, 8});
  const auto F = VectorField::from(g, [](const Vector3d& x) {
    return Vector3cd(std::cos(2 * pi * x(1)) + 0.5, std::sin(2 * pi * (x(0) + x(2))),
                     Complex(0, std::cos(4 * pi * x(0))));
  });
  const Calculus calc(g);
  const Field3<Complex> A = calc.inverse_rot(F.values);
  const Field3<Complex> target = calc.leray(F.values).rowwise() - F.values.colwise().mean();
  CHECK((calc.rot(A) - target).cwiseAbs().maxCoeff() < 1e-11);
  CHECK(calc.div(A).cwiseAbs().maxCoeff() < 1e-11);
}

TEST_CASE("Sobolev norms match closed forms") {
  const Grid g = Grid::cell(Lattice::cubic(), {8, 8, 8});
  const auto f = ScalarField::from(g, [](const Vector3d& x) {
    return Complex(std::sin(2 * pi * x(0)));
  });
  CHECK(l2_norm(f) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-13));
  CHECK(sobolev_norm(f, 0) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-13));
  CHECK(sobolev_norm(f, 1) == doctest::Approx(std::sqrt(0.5 * (1 + 4 * pi * pi))).epsilon(1e-13));
  CHECK(sobolev_norm(f, 2) ==
        doctest::Approx(std::sqrt(0.5) * (1 + 4 * pi * pi)).epsilon(1e-13));
}

TEST_CASE("inner products are conjugate-linear in the second slot") {
  const Grid g = Grid::cell(Lattice::cubic(2.0), {4, 4, 4});
  const auto a = VectorField::from(g, [](const Vector3d& x) { return Vector3cd(1.0, x(0), 0.0); });
  const VectorField b = I * a;
  CHECK(std::abs(inner(a, b) - (-I) * inner(a, a)) < 1e-13);
  CHECK(std::abs(inner(b, a) - I * inner(a, a)) < 1e-13);
  const MatrixField id = MatrixField::identity(g);
  const FieldPair p(a, b);
  CHECK(std::abs(weighted_inner(p, p, id, id) - std::pow(l2_norm(p), 2)) < 1e-12);
  const MatrixField two(g, [](Eigen::Index) { return Eigen::Matrix3d(2.0 * Eigen::Matrix3d::Identity()); });
  CHECK(std::abs(weighted_inner(p, p, two, id) - (0.5 * inner(a, a) + inner(b, b))) < 1e-12);
}

TEST_CASE("matrix fields reject indefinite samples") {
  const Grid g = Grid::cell(Lattice::cubic(), {4, 4, 4});
  try {
    MatrixField bad(g, [](Eigen::Index i) {
      Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
      if (i == 7) m(2, 2) = -0.5;
      return m;
    });
    FAIL("no throw");
  } catch (const NotPositiveDefinite& e) {
    CHECK(e.node == 7);
    CHECK(e.eigenvalue == doctest::Approx(-0.5));
  }
}

TEST_CASE("Fourier resampling is exact for band-limited data") {
  const Grid g = Grid::cell(Lattice::cubic(), {8, 8, 8});
  auto fn = [](const Vector3d& x) {
    return Vector3cd(std::cos(2 * pi * x(0)) * std::sin(4 * pi * x(1)), 1.0,
                     std::sin(2 * pi * (x(0) - x(2))));
  };
  const auto u = VectorField::from(g, fn);
  const Field3<Complex> up = resample(g, u.values, {16, 12, 8});
  const Grid fine = Grid::cell(Lattice::cubic(), {16, 12, 8});
  const auto exact = VectorField::from(fine, fn);
  CHECK((up - exact.values).cwiseAbs().maxCoeff() < 1e-12);
  const Field3<Complex> back = resample(fine, up, {8, 8, 8});
  CHECK((back - u.values).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("single-mode rot and div on the macro box") {
  const double L = 2.0;
  const Grid g = Grid::macro(L, {8, 8, 8});
  const auto u = VectorField::from(g, [&](const Vector3d& x) {
    return Vector3cd(std::sin(2 * pi * x(1) / L), 0.0, 0.0);
  });
  CHECK(max_norm(div(u)) < 1e-12);
  const VectorField r = rot(u);
  double err = 0.0;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const Vector3d x = g.node(i);
    const Vector3cd exact(0.0, 0.0, -(2 * pi / L) * std::cos(2 * pi * x(1) / L));
    err = std::max(err, (r.values.row(i).transpose() - exact).norm());
  }
  // rot (sin(k x2), 0, 0) = (0, 0, -k cos(k x2)).
  CHECK(err < 1e-12);
  const auto c = VectorField::from(g, [](const Vector3d&) { return Vector3cd(1.0, -2.0, I); });
  CHECK(max_norm(div(c)) < 1e-13);
  CHECK(sobolev_norm(c, 0) == doctest::Approx(std::sqrt(6.0) * std::sqrt(L * L * L)));
}

TEST_CASE("Leray projection removes gradients and is self-adjoint") {
  const Grid g = Grid::cell(Lattice::cubic(), {8, 8, 8});
  std::srand(7);
  Field1<Complex> w = Field1<Complex>::Random(g.size());
  const Calculus calc(g);
  // Smooth the random data so the test covers many modes but not only Nyquist.
  w = calc.inverse_negative_laplacian(w);
  const VectorField gw(g, calc.grad(w));
  CHECK(max_norm(leray_project(gw)) < 1e-12);
  const VectorField a(g, Field3<Complex>::Random(g.size(), 3));
  const VectorField b(g, Field3<Complex>::Random(g.size(), 3));
  CHECK(std::abs(inner(leray_project(a), b) - inner(a, leray_project(b))) < 1e-12);
  CHECK(max_norm(div(leray_project(a))) < 1e-11);
  const VectorField pa = leray_project(a);
  CHECK(max_norm(leray_project(pa) - pa) < 1e-12);
}

TEST_CASE("Parseval and resolution covariance") {
  const Grid g = Grid::cell(Lattice::cubic(), {8, 8, 8});
  const VectorField a(g, Field3<Complex>::Random(g.size(), 3));
  double quad = 0.0;
  for (Eigen::Index i = 0; i < g.size(); ++i) quad += a.values.row(i).squaredNorm() * g.weight();
  CHECK(sobolev_norm(a, 0) == doctest::Approx(std::sqrt(quad)).epsilon(1e-10));
  // A band-limited field keeps its norms on a finer grid.
  const VectorField s(g, resample(Grid::cell(Lattice::cubic(), {4, 4, 4}),
                                  Field3<Complex>::Random(64, 3), {8, 8, 8}));
  const Grid fine = Grid::cell(Lattice::cubic(), {16, 16, 16});
  const VectorField sf(fine, resample(g, s.values, {16, 16, 16}));
  for (int order : {0, 1, 2})
    CHECK(sobolev_norm(sf, order) == doctest::Approx(sobolev_norm(s, order)).epsilon(1e-12));
}

TEST_CASE("weighted product is conjugate-symmetric and positive") {
  const Grid g = Grid::cell(Lattice::cubic(), {4, 4, 4});
  const MatrixField alpha(g, [&](Eigen::Index i) {
    const Vector3d y = g.node(i);
    Eigen::Matrix3d m = (2.0 + std::sin(2 * pi * y(0))) * Eigen::Matrix3d::Identity();
    m(0, 1) = m(1, 0) = 0.3 * std::cos(2 * pi * y(2));
    return m;
  });
  const MatrixField mu(g, [&](Eigen::Index i) {
    return Eigen::Matrix3d((1.5 + 0.5 * std::cos(2 * pi * g.node(i)(1))) * Eigen::Matrix3d::Identity());
  });
  const FieldPair p(VectorField(g, Field3<Complex>::Random(g.size(), 3)),
                    VectorField(g, Field3<Complex>::Random(g.size(), 3)));
  const FieldPair q(VectorField(g, Field3<Complex>::Random(g.size(), 3)),
                    VectorField(g, Field3<Complex>::Random(g.size(), 3)));
  CHECK(std::abs(weighted_inner(p, q, alpha, mu) - std::conj(weighted_inner(q, p, alpha, mu))) < 1e-12);
  const Complex pp = weighted_inner(p, p, alpha, mu);
  CHECK(pp.real() > 0.0);
  CHECK(std::abs(pp.imag()) < 1e-13);
  CHECK_THROWS_AS(weighted_inner(p, FieldPair::zeros(Grid::cell(Lattice::cubic(), {6, 4, 4})),
                                 alpha, mu),
                  GridMismatch);
}

TEST_CASE("binary dumps round trip") {
  Eigen::Matrix3d B;
  B << 1.0, 0.2, 0.0, 0.0, 1.1, 0.0, 0.1, 0.0, 0.9;
  const Grid g(GridKind::cell, Lattice(B), Vector3d(0.0, 0.5, -0.25), {4, 6, 4},
               DerivativeRule::central2);
  const VectorField a(g, Field3<Complex>::Random(g.size(), 3));
  const std::string path = "field_core_roundtrip.bin";
  write_field(path, a);
  const FieldDump d = read_field(path);
  CHECK(d.grid == g);
  CHECK(d.values.cols() == 3);
  CHECK((d.values - Eigen::MatrixXcd(a.values)).norm() == 0.0);
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  CHECK(std::size_t(f.tellg()) == 64 + 96 + std::size_t(g.size()) * 3 * 16);
  std::remove(path.c_str());
}
