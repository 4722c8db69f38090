#include "curlhom/maxwell.hpp"

#include <cmath>
#include <random>

namespace curlhom {

namespace {

const Complex I(0.0, 1.0);

Complex bilinear(const Field3<Complex>& a, const Field3<Complex>& b) {
  return (a.array() * b.array()).sum();
}

double mean_trace(const MatrixField& m, bool inverse) {
  double t = 0.0;
  for (Eigen::Index i = 0; i < m.grid().size(); ++i) {
    const double* p = inverse ? m.packed_inverse(i) : m.packed(i);
    t += p[0] + p[1] + p[2];
  }
  return t / (3.0 * double(m.grid().size()));
}

}  // namespace

MaxwellOperator fine_operator(const CoefficientModel& alpha, const CoefficientModel& mu, double eps,
                              const Grid& grid) {
  const FineCellMap check(grid, eps);
  (void)check;
  MaxwellOperator op;
  op.kind = OperatorKind::fine;
  op.eps = eps;
  op.alpha = sample_fine(alpha, eps, grid);
  op.mu = sample_fine(mu, eps, grid);
  return op;
}

MaxwellOperator homogenized_operator(const EffectiveTensors& t, const Grid& grid) {
  MaxwellOperator op;
  op.kind = OperatorKind::homogenized;
  if (grid == t.macro) {
    op.alpha = t.lambda_u;
    op.mu = t.lambda_v;
    return op;
  }
  if (t.lambda_u.is_identity() && t.lambda_v.is_identity()) {
    op.alpha = MatrixField::identity(grid);
    op.mu = MatrixField::identity(grid);
    return op;
  }
  std::vector<Eigen::Matrix3d> lu(grid.size()), lv(grid.size());
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    const MacroStencil st = lagrange_stencil(t.macro, grid.node(i));
    Eigen::Matrix3d a = Eigen::Matrix3d::Zero(), b = Eigen::Matrix3d::Zero();
    for (int q = 0; q < 64; ++q) {
      if (st.weights[q] == 0.0) continue;
      a += st.weights[q] * t.lambda_u.at(st.nodes[q]);
      b += st.weights[q] * t.lambda_v.at(st.nodes[q]);
    }
    lu[i] = a;
    lv[i] = b;
  }
  op.alpha = MatrixField(grid, [&](Eigen::Index i) { return lu[i]; });
  op.mu = MatrixField(grid, [&](Eigen::Index i) { return lv[i]; });
  return op;
}

FieldPair apply(const MaxwellOperator& op, const FieldPair& s) {
  require_same_grid(op.grid(), s.grid(), "Maxwell apply");
  const Calculus calc(op.grid());
  return {VectorField(s.grid(), I * calc.rot(op.mu.apply_inverse(s.v.values))),
          VectorField(s.grid(), -I * calc.rot(op.alpha.apply_inverse(s.u.values)))};
}

ResolventSolution resolvent_solve(const MaxwellOperator& op, const FieldPair& f, Complex E,
                                  const ResolventConfig& cfg) {
  if (!(E.imag() > 0.0)) throw std::invalid_argument("spectral parameter must have Im E > 0");
  const Grid& grid = op.grid();
  require_same_grid(grid, f.grid(), "resolvent data");
  const Calculus calc(grid);
  ResolventSolution out;
  const double fnorm = l2_norm(f);
  if (fnorm == 0.0) {
    out.state = FieldPair::zeros(grid);
    return out;
  }
  const Complex E2 = E * E;
  const double a0 = mean_trace(op.alpha, false);
  const double m0 = mean_trace(op.mu, true);

  auto A = [&](const Field3<Complex>& w) -> Field3<Complex> {
    Field3<Complex> r = calc.rot(op.mu.apply_inverse(calc.rot(w)));
    r -= E2 * op.alpha.apply(w);
    return r;
  };
  // Constant-coefficient inverse, mode by mode.
  auto M = [&](const Field3<Complex>& r) -> Field3<Complex> {
    Field3<Complex> h = calc.forward(r);
    const Complex lon = 1.0 / (-E2 * a0);
    calc.for_each_mode([&](Eigen::Index i, const Eigen::Vector3d& k) {
      const double k2 = k.squaredNorm();
      const Eigen::Vector3cd x = h.row(i).transpose();
      if (k2 == 0.0) {
        h.row(i) = (lon * x).transpose();
        return;
      }
      const Eigen::Vector3cd xl = k.cast<Complex>() * (k.cast<Complex>().dot(x) / k2);
      const Complex tra = 1.0 / (m0 * k2 - E2 * a0);
      h.row(i) = (tra * (x - xl) + lon * xl).transpose();
    });
    return calc.backward(std::move(h));
  };

  const Field3<Complex> b = E * f.u.values + I * calc.rot(op.mu.apply_inverse(f.v.values));
  // Stop the reduced iteration well inside the requested first-order residual.
  const double target = 0.1 * cfg.tolerance * std::abs(E) * fnorm / std::sqrt(grid.weight());
  Field3<Complex> w = Field3<Complex>::Zero(grid.size(), 3);
  Field3<Complex> r = b;
  Field3<Complex> z = M(r);
  Field3<Complex> p = z;
  Complex rho = bilinear(r, z);
  double rnorm = r.norm();
  int it = 0;
  auto finish = [&]() {
    Field3<Complex> u = op.alpha.apply(w);
    Field3<Complex> v = -(f.v.values + I * calc.rot(w)) / E;
    if (cfg.project) {
      u = calc.leray(u);
      v = calc.leray(v);
    }
    out.state = FieldPair(VectorField(grid, std::move(u)), VectorField(grid, std::move(v)));
    FieldPair res = apply(op, out.state);
    res -= E * out.state;
    res -= f;
    out.residual = l2_norm(res) / fnorm;
    out.iterations = it;
  };
  while (rnorm > target && it < cfg.max_iterations) {
    ++it;
    const Field3<Complex> q = A(p);
    const Complex alpha = rho / bilinear(p, q);
    w += alpha * p;
    r -= alpha * q;
    rnorm = r.norm();
    out.history.push_back(rnorm * std::sqrt(grid.weight()) / (std::abs(E) * fnorm));
    if (rnorm <= target) break;
    z = M(r);
    const Complex rho_new = bilinear(r, z);
    p = z + (rho_new / rho) * p;
    rho = rho_new;
  }
  finish();
  if (out.residual > cfg.tolerance) throw NotConverged("resolvent solve", out.residual, it);
  return out;
}

FieldPair random_solenoidal_pair(const Grid& grid, std::uint64_t seed, int max_mode) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  const Calculus calc(grid);
  const auto& n = grid.resolution();
  auto one = [&]() {
    Field3<Complex> h = Field3<Complex>::Zero(grid.size(), 3);
    for (int i0 = 0; i0 < n[0]; ++i0)
      for (int i1 = 0; i1 < n[1]; ++i1)
        for (int i2 = 0; i2 < n[2]; ++i2) {
          const int m0 = Grid::frequency(i0, n[0]), m1 = Grid::frequency(i1, n[1]),
                    m2 = Grid::frequency(i2, n[2]);
          if (std::max({std::abs(m0), std::abs(m1), std::abs(m2)}) > max_mode) continue;
          for (int c = 0; c < 3; ++c) h(grid.index(i0, i1, i2), c) = Complex(nd(rng), nd(rng));
        }
    return calc.leray(calc.backward(std::move(h)));
  };
  Field3<Complex> u = one();
  Field3<Complex> v = one();
  FieldPair p(VectorField(grid, std::move(u)), VectorField(grid, std::move(v)));
  p *= 1.0 / l2_norm(p);
  return p;
}

double weighted_norm(const MaxwellOperator& op, const FieldPair& p) {
  return std::sqrt(std::max(0.0, weighted_inner(p, p, op.alpha, op.mu).real()));
}

double selfadjointness_defect(const MaxwellOperator& op, int trials, std::uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    const FieldPair p = random_solenoidal_pair(op.grid(), seed + 2 * std::uint64_t(t));
    const FieldPair q = random_solenoidal_pair(op.grid(), seed + 2 * std::uint64_t(t) + 1);
    const Complex a = weighted_inner(apply(op, p), q, op.alpha, op.mu);
    const Complex b = weighted_inner(p, apply(op, q), op.alpha, op.mu);
    worst = std::max(worst, std::abs(a - b) / (weighted_norm(op, p) * weighted_norm(op, q)));
  }
  return worst;
}

}  // namespace curlhom
