#include <doctest.h>

#include "curlhom/maxwell.hpp"

#include <cmath>
#include <numbers>

using namespace curlhom;
using Eigen::Vector3cd;
using Eigen::Vector3d;

namespace {
const double pi = std::numbers::pi;
const Complex I(0.0, 1.0);

MaxwellOperator identity_op(int n) {
  const auto id = builtin("identity");
  return fine_operator(id, id, 8.0 / n, Grid::macro(1.0, {n, n, n}));
}
}  // namespace

TEST_CASE("Maxwell block action on a single mode") {
  const MaxwellOperator op = identity_op(16);
  const Grid& g = op.grid();
  CHECK(max_norm(apply(op, FieldPair::zeros(g)).u) == 0.0);
  const double k = 2 * pi;
  const auto u = VectorField::from(g, [&](const Vector3d& x) { return Vector3cd(std::cos(k * x(2)), 0.0, 0.0); });
  const FieldPair out = apply(op, FieldPair(u, VectorField::zeros(g)));
  CHECK(max_norm(out.u) < 1e-12);
  double err = 0.0;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const Vector3cd exact(0.0, I * k * std::sin(k * g.node(i)(2)), 0.0);
    err = std::max(err, (out.v.values.row(i).transpose() - exact).norm());
  }
  CHECK(err < 1e-11);
}

TEST_CASE("identity resolvent matches the per-mode inversion") {
  const MaxwellOperator op = identity_op(16);
  const Grid& g = op.grid();
  const double k = 2 * pi;
  const Complex E = I;
  const auto fu = VectorField::from(g, [&](const Vector3d& x) { return Vector3cd(std::cos(k * x(2)), 0.0, 0.0); });
  const FieldPair f(fu, VectorField::zeros(g));
  const ResolventSolution s = resolvent_solve(op, f, E);
  CHECK(s.residual <= 1e-10);
  CHECK(s.iterations <= 2);
  // ((k^2 - E^2) u = E f, v = -i rot u / E.
  const Complex amp = E / (k * k - E * E);
  double err = 0.0;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const double z = g.node(i)(2);
    const Vector3cd ue(amp * std::cos(k * z), 0.0, 0.0);
    const Vector3cd ve(0.0, -I * (-k * amp * std::sin(k * z)) / E, 0.0);
    err = std::max(err, (s.state.u.values.row(i).transpose() - ue).norm());
    err = std::max(err, (s.state.v.values.row(i).transpose() - ve).norm());
  }
  CHECK(err < 1e-12);
}

TEST_CASE("resolvent contracts on oscillating media") {
  BuiltinParams p;
  for (const char* family : {"laminate", "inclusion"}) {
    const auto m = builtin(family, p);
    const MaxwellOperator op = fine_operator(m, m, 0.25, Grid::macro(1.0, {32, 32, 32}));
    const Grid& g = op.grid();
    const FieldPair f = random_solenoidal_pair(g, 11);
    const Complex E = I;
    const ResolventSolution s = resolvent_solve(op, f, E);
    CHECK(s.residual <= 1e-10);
    CHECK(max_norm(div(s.state.u)) < 1e-9);
    CHECK(max_norm(div(s.state.v)) < 1e-9);
    CHECK(weighted_norm(op, s.state) <= weighted_norm(op, f) / E.imag() * (1 + 1e-12));
    CHECK(selfadjointness_defect(op, 3) <= 1e-9);

    // Manufactured solution.
    const FieldPair ref = random_solenoidal_pair(g, 5);
    FieldPair rhs = apply(op, ref);
    rhs -= E * ref;
    const ResolventSolution back = resolvent_solve(op, rhs, E, {1e-11});
    CHECK(l2_norm(back.state - ref) <= 1e-9 * l2_norm(ref));

    // First resolvent identity.
    const Complex E1(0.5, 1.0), E2(-0.3, 2.0);
    const FieldPair r1 = resolvent_solve(op, f, E1, {1e-11}).state;
    const FieldPair r2 = resolvent_solve(op, f, E2, {1e-11}).state;
    const FieldPair r12 = resolvent_solve(op, r2, E1, {1e-11, 5000, false}).state;
    CHECK(l2_norm((r1 - r2) - (E1 - E2) * r12) <= 1e-8 * l2_norm(f));
  }
}

TEST_CASE("resolvent input checks") {
  const MaxwellOperator op = identity_op(16);
  const FieldPair f = random_solenoidal_pair(op.grid(), 3);
  CHECK_THROWS_AS(resolvent_solve(op, f, Complex(1.0, 0.0)), std::invalid_argument);
  CHECK_THROWS_AS(resolvent_solve(op, f, Complex(0.0, -1.0)), std::invalid_argument);
  const auto m = builtin("laminate");
  CHECK_THROWS_AS(fine_operator(m, m, 0.125, Grid::macro(1.0, {32, 32, 32})), std::invalid_argument);
  CHECK(selfadjointness_defect(op, 2) <= 1e-11);
}

TEST_CASE("homogenized operator is self-adjoint") {
  BuiltinParams p;
  p.blend_radius = 0.3;
  const auto m = builtin("inclusion", p);
  const Grid macro = Grid::macro(1.0, {16, 16, 16}, DerivativeRule::central4);
  const EffectiveTensors t = effective_fields(m, m, macro, Grid::cell(m.lattice, {8, 8, 8}));
  const MaxwellOperator hom = homogenized_operator(t, macro);
  CHECK(selfadjointness_defect(hom, 3) <= 1e-9);
  const MaxwellOperator fine = homogenized_operator(t, Grid::macro(1.0, {32, 32, 32}));
  CHECK(selfadjointness_defect(fine, 2) <= 1e-9);
  const FieldPair f = random_solenoidal_pair(fine.grid(), 9);
  CHECK(resolvent_solve(fine, f, I).residual <= 1e-10);
}
