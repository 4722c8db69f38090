#include <doctest.h>

#include "curlhom/cell_solver.hpp"
#include "curlhom/coefficients.hpp"

#include <cmath>
#include <numbers>

using namespace curlhom;
using Eigen::Vector3cd;
using Eigen::Vector3d;

namespace {
const double pi = std::numbers::pi;
const Complex I(0.0, 1.0);

MatrixField laminate_cell(std::array<int, 3> n) {
  const Grid g = Grid::cell(Lattice::cubic(), n);
  return MatrixField(g, [&](Eigen::Index i) {
    return Eigen::Matrix3d((2.0 + std::sin(2 * pi * g.node(i)(0))) * Eigen::Matrix3d::Identity());
  });
}

MatrixField inclusion_cell(int n, double contrast = 5.0) {
  BuiltinParams p;
  p.contrast = contrast;
  const auto m = builtin("inclusion", p);
  return sample_cell(m, Vector3d::Zero(), Grid::cell(m.lattice, {n, n, n}));
}

MatrixField anisotropic_cell(int n) {
  const Grid g = Grid::cell(Lattice::cubic(), {n, n, n});
  return MatrixField(g, [&](Eigen::Index i) {
    const Vector3d y = g.node(i);
    Eigen::Matrix3d m;
    const double a = 0.4 * std::sin(2 * pi * y(1)) * std::cos(2 * pi * y(2));
    m << 2.0 + std::cos(2 * pi * y(0)), a, 0.1, a, 1.5, 0.2 * std::sin(2 * pi * y(0)), 0.1,
        0.2 * std::sin(2 * pi * y(0)), 1.0 + 0.5 * std::sin(2 * pi * (y(0) + y(2)));
    return m;
  });
}
}  // namespace

TEST_CASE("identity coefficient has vanishing potentials") {
  const MatrixField id = MatrixField::identity(Grid::cell(Lattice::cubic(), {8, 8, 8}));
  for (int k = 0; k < 3; ++k) CHECK(solve_potential(id, k).values.cwiseAbs().maxCoeff() == 0.0);
  const CorrectorSet c = correctors(id);
  CHECK(c.trivial);
  CHECK(c.zeta(1, 5) == Vector3d::UnitY());
  CHECK((corrector_energy(id, c) - Eigen::Matrix3d::Identity()).norm() == 0.0);
}

TEST_CASE("laminate potential follows the harmonic-mean flux") {
  const MatrixField beta = laminate_cell({64, 4, 4});
  const Grid& g = beta.grid();
  const CorrectorSet c = correctors(beta);
  double err = 0.0, flux_min = 1e9, flux_max = -1e9;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const double a = 2.0 + std::sin(2 * pi * g.node(i)(0));
    // Harmonic mean of a over one period is sqrt(3).
    err = std::max(err, std::abs(c.zeta(0, i)(0) - std::sqrt(3.0) / a));
    const double flux = a * c.zeta(0, i)(0);
    flux_min = std::min(flux_min, flux);
    flux_max = std::max(flux_max, flux);
  }
  CHECK(err < 1e-10);
  CHECK((flux_max - flux_min) / flux_max < 1e-8);
  CHECK(c.phi[1].cwiseAbs().maxCoeff() < 1e-14);
  CHECK(c.phi[2].cwiseAbs().maxCoeff() < 1e-14);
  CHECK(std::abs(c.phi[0].mean()) < 1e-15);
}

TEST_CASE("corrector invariants on inclusion and anisotropic cells") {
  for (const MatrixField& beta : {inclusion_cell(16), anisotropic_cell(16)}) {
    const CorrectorSet c = correctors(beta);
    CHECK_FALSE(c.trivial);
    CHECK(c.residual <= 1e-11);
    const Calculus calc(beta.grid());
    for (int k = 0; k < 3; ++k) {
      const Field3<double> z = c.zeta_field(k);
      CHECK((z.colwise().mean().transpose() - Vector3d::Unit(k)).norm() < 1e-12);
      CHECK(calc.rot(z.cast<Complex>()).cwiseAbs().maxCoeff() < 1e-10);
      const Field1<Complex> d = calc.div(beta.apply(Field3<Complex>(z.cast<Complex>())));
      const Field3<Complex> e = Field3<Complex>::Zero(z.rows(), 3).rowwise() +
                                Vector3cd::Unit(k).transpose();
      CHECK(d.norm() <= 1e-10 * calc.div(beta.apply(e)).norm());
      CHECK(std::abs(c.phi[k].mean()) < 1e-14);
    }
    // Energy identity against an independent quadrature of the flux pairing.
    const Eigen::Matrix3d L = corrector_energy(beta, c);
    for (int k = 0; k < 3; ++k) {
      const Field3<double> z = c.zeta_field(k);
      double e = 0.0;
      for (Eigen::Index i = 0; i < z.rows(); ++i) {
        const Vector3d zi = z.row(i).transpose();
        e += zi.dot(beta.at(i) * zi) * beta.grid().weight();
      }
      CHECK(e == doctest::Approx(L(k, k)).epsilon(1e-9));
    }
    CHECK((L - L.transpose()).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("warm starts do not change the correctors") {
  const MatrixField a = inclusion_cell(12, 5.0);
  const MatrixField b = inclusion_cell(12, 5.02);
  const CorrectorSet ca = correctors(a);
  const CorrectorSet cold = correctors(b);
  const CorrectorSet warm = correctors(b, {}, &ca);
  CHECK(warm.iterations <= cold.iterations);
  const Eigen::Matrix3d d = corrector_energy(b, warm) - corrector_energy(b, cold);
  CHECK(d.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("effective tensor converges spectrally under refinement") {
  const auto energy = [](int n) {
    const MatrixField b = anisotropic_cell(n);
    return corrector_energy(b, correctors(b));
  };
  const Eigen::Matrix3d ref = energy(32);
  const double e8 = (energy(8) - ref).norm();
  const double e16 = (energy(16) - ref).norm();
  CHECK(e8 / e16 >= 10.0);
}

TEST_CASE("non-convergence is reported") {
  CellSolveConfig cfg;
  cfg.max_iterations = 1;
  CHECK_THROWS_AS(solve_potential(inclusion_cell(8), 0, cfg), NotConverged);
}

TEST_CASE("curl-div system: homogeneous data and constant-coefficient oracle") {
  const Grid g = Grid::cell(Lattice::cubic(), {8, 8, 8});
  const MatrixField id = MatrixField::identity(g);
  const CorrectorSet c = correctors(id);
  const CurlDivSolve zero = solve_curl_div(id, Field3<Complex>::Zero(g.size(), 3),
                                           Field1<Complex>::Zero(g.size()), c);
  CHECK(zero.w.cwiseAbs().maxCoeff() == 0.0);

  // m = (cos(2 pi y3), 0, i sin(2 pi y1)) + constant, divergence-free.
  const auto m = VectorField::from(g, [](const Vector3d& y) {
    return Vector3cd(std::cos(2 * pi * y(2)) + 0.5, 0.2, I * std::sin(2 * pi * y(0)));
  });
  const Field3<Complex> F = rot(m).values;
  const CurlDivSolve s = solve_curl_div(id, F, Field1<Complex>::Zero(g.size()), c);
  const Field3<Complex> expect = m.values.rowwise() - m.values.colwise().mean();
  CHECK((s.w - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("curl-div system with variable coefficients") {
  const MatrixField beta = anisotropic_cell(12);
  const Grid& g = beta.grid();
  const CorrectorSet c = correctors(beta);
  const Calculus calc(g);
  const auto h = VectorField::from(g, [](const Vector3d& y) {
    return Vector3cd(std::sin(2 * pi * (y(1) + y(2))), Complex(0.3, 1.0) * std::cos(2 * pi * y(0)),
                     std::exp(std::sin(2 * pi * y(1))));
  });
  const Field3<Complex> F = calc.rot(h.values);
  Field1<Complex> G = calc.div(h.values) + calc.partial(h.values.col(1), 2);
  const auto compat = compatibility_check(F, G, c);
  for (double r : compat) CHECK(r < 1e-12);
  const CurlDivSolve s = solve_curl_div(beta, F, G, c);
  CHECK(s.curl_residual < 1e-10);
  CHECK(s.div_residual < 1e-10);
  CHECK(s.orthogonality < 1e-9);

  Field3<Complex> bad = F;
  bad.col(0).array() += 1.0;
  CHECK_THROWS_AS(solve_curl_div(beta, bad, G, c), std::domain_error);
  Field1<Complex> badG = G.array() + 0.5;
  CHECK(compatibility_check(F, badG, c)[3] == doctest::Approx(0.5));
}
