#include "curlhom/cell_solver.hpp"

#include <cmath>

namespace curlhom {

NotConverged::NotConverged(const std::string& what, double r, int it)
    : std::runtime_error(what + ": no convergence after " + std::to_string(it) +
                         " iterations, relative residual " + std::to_string(r)),
      residual(r),
      iterations(it) {}

namespace {

bool constant_in_space(const MatrixField& beta) {
  if (beta.is_identity()) return true;
  const Eigen::Index n = beta.grid().size();
  const double* p0 = beta.packed(0);
  for (Eigen::Index i = 1; i < n; ++i) {
    const double* p = beta.packed(i);
    for (int c = 0; c < 6; ++c)
      if (p[c] != p0[c]) return false;
  }
  return true;
}

double l2(const Field1<Complex>& x) { return x.norm(); }

Field1<Complex> remove_mean(Field1<Complex> x) {
  x.array() -= x.mean();
  return x;
}

// Drops every mode whose derivative symbol vanishes: the mean and, on even
// grids, the modes that are zero or Nyquist along each axis. None of them
// lies in the range of div.
Field1<Complex> remove_null_modes(const Calculus& calc, const Field1<Complex>& x) {
  Field1<Complex> h = calc.forward(x);
  calc.for_each_mode([&](Eigen::Index i, const Eigen::Vector3d& k) {
    if (k.squaredNorm() == 0.0) h(i) = 0.0;
  });
  return calc.backward(std::move(h));
}

// -div(beta grad phi)
Field1<Complex> apply_elliptic(const Calculus& calc, const MatrixField& beta, const Field1<Complex>& phi) {
  return -calc.div(beta.apply(calc.grad(phi)));
}

// Inverse of the symbol k^T A k (zero mode and null symbols set to zero).
Field1<Complex> apply_constant_inverse(const Calculus& calc, const Eigen::Matrix3d& A,
                                       const Field1<Complex>& r) {
  Field1<Complex> h = calc.forward(r);
  calc.for_each_mode([&](Eigen::Index i, const Eigen::Vector3d& k) {
    const double s = k.dot(A * k);
    h(i) = s > 0.0 ? h(i) / s : Complex(0.0);
  });
  return calc.backward(std::move(h));
}

}  // namespace

ScalarSolve solve_scalar(const MatrixField& beta, const Field1<Complex>& s_in, const CellSolveConfig& cfg,
                         const Field1<Complex>* initial) {
  const Grid& grid = beta.grid();
  if (s_in.size() != grid.size()) throw GridMismatch("scalar solve: source size differs from grid");
  const Calculus calc(grid);
  const Field1<Complex> s = remove_null_modes(calc, s_in);
  ScalarSolve out;
  const double snorm = l2(s);
  if (snorm == 0.0) {
    out.phi = Field1<Complex>::Zero(grid.size());
    return out;
  }
  if (constant_in_space(beta)) {
    out.phi = apply_constant_inverse(calc, beta.at(0), s);
    out.residual = l2(s - apply_elliptic(calc, beta, out.phi)) / snorm;
    out.iterations = 1;
    return out;
  }
  double lambda0 = cfg.reference_medium;
  if (lambda0 <= 0.0) {
    double tr = 0.0;
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
      const double* p = beta.packed(i);
      tr += p[0] + p[1] + p[2];
    }
    lambda0 = tr / (3.0 * double(grid.size()));
  }
  const Eigen::Matrix3d A0 = lambda0 * Eigen::Matrix3d::Identity();

  Field1<Complex> phi = Field1<Complex>::Zero(grid.size());
  Field1<Complex> r = s;
  double rnorm = snorm;
  if (initial) {
    // A start is only kept when it beats zero; otherwise its round-off would
    // set the attainable residual floor.
    Field1<Complex> phi0 = remove_mean(*initial);
    Field1<Complex> r0 = s - apply_elliptic(calc, beta, phi0);
    if (l2(r0) < 0.5 * snorm) {
      phi = std::move(phi0);
      r = std::move(r0);
      rnorm = l2(r);
    }
  }
  int it = 0;
  // Restarted when the recursively updated residual drifts from the true one.
  while (rnorm > cfg.tolerance * snorm && it < cfg.max_iterations) {
    Field1<Complex> z = apply_constant_inverse(calc, A0, r);
    Field1<Complex> p = z;
    Complex rz = r.dot(z);
    while (it < cfg.max_iterations) {
      ++it;
      const Field1<Complex> Ap = apply_elliptic(calc, beta, p);
      const Complex alpha = rz / p.dot(Ap);
      phi += alpha * p;
      r -= alpha * Ap;
      if (l2(r) <= 0.5 * cfg.tolerance * snorm) break;
      z = apply_constant_inverse(calc, A0, r);
      const Complex rz_new = r.dot(z);
      p = z + (rz_new / rz) * p;
      rz = rz_new;
    }
    r = s - apply_elliptic(calc, beta, phi);
    rnorm = l2(r);
  }
  if (rnorm > cfg.tolerance * snorm) throw NotConverged("potential solve", rnorm / snorm, it);
  out.phi = remove_mean(std::move(phi));
  out.iterations = it;
  out.residual = rnorm / snorm;
  return out;
}

ScalarField solve_potential(const MatrixField& beta, int k, const CellSolveConfig& cfg) {
  if (k < 0 || k > 2) throw std::invalid_argument("axis index must be 0, 1 or 2");
  const Calculus calc(beta.grid());
  Field3<Complex> e = Field3<Complex>::Zero(beta.grid().size(), 3);
  e.col(k).setOnes();
  // -div(beta grad phi) = div(beta e_k)
  const Field1<Complex> s = calc.div(beta.apply(e));
  return {beta.grid(), solve_scalar(beta, s, cfg).phi};
}

Field3<double> CorrectorSet::zeta_field(int k) const {
  Field3<double> z = trivial ? Field3<double>::Zero(grid.size(), 3) : grad_phi[k];
  z.col(k).array() += 1.0;
  return z;
}

CorrectorSet correctors(const MatrixField& beta, const CellSolveConfig& cfg, const CorrectorSet* warm) {
  CorrectorSet c;
  c.grid = beta.grid();
  if (constant_in_space(beta)) {
    c.trivial = true;
    return c;
  }
  c.trivial = false;
  const Calculus calc(c.grid);
  const bool use_warm = warm && !warm->trivial && warm->grid == c.grid;
  for (int k = 0; k < 3; ++k) {
    Field3<Complex> e = Field3<Complex>::Zero(c.grid.size(), 3);
    e.col(k).setOnes();
    const Field1<Complex> s = calc.div(beta.apply(e));
    Field1<Complex> init;
    if (use_warm) init = warm->phi[k].cast<Complex>();
    const ScalarSolve sol = solve_scalar(beta, s, cfg, use_warm ? &init : nullptr);
    c.phi[k] = sol.phi.real();
    c.grad_phi[k] = calc.grad(c.phi[k].cast<Complex>()).real();
    c.iterations += sol.iterations;
    c.residual = std::max(c.residual, sol.residual);
  }
  return c;
}

std::array<double, 4> compatibility_check(const Field3<Complex>& F, const Field1<Complex>& G,
                                          const CorrectorSet& c) {
  const double w = c.grid.weight();
  std::array<double, 4> r{};
  for (int k = 0; k < 3; ++k) {
    Complex acc = 0.0;
    for (Eigen::Index i = 0; i < F.rows(); ++i) {
      const Eigen::Vector3d z = c.zeta(k, i);
      acc += F(i, 0) * z(0) + F(i, 1) * z(1) + F(i, 2) * z(2);
    }
    r[k] = std::abs(acc * w);
  }
  r[3] = std::abs(G.sum() * w);
  return r;
}

CurlDivSolve solve_curl_div(const MatrixField& beta, const Field3<Complex>& F, const Field1<Complex>& G,
                            const CorrectorSet& c, const CellSolveConfig& cfg, double compat_tolerance) {
  const Grid& grid = beta.grid();
  require_same_grid(grid, c.grid, "curl-div correctors");
  if (F.rows() != grid.size() || G.size() != grid.size()) throw GridMismatch("curl-div data size");
  const double wq = grid.weight();
  const double scale = std::max(F.norm(), G.norm()) * std::sqrt(wq);
  CurlDivSolve out;
  if (scale == 0.0) {
    out.w = Field3<Complex>::Zero(grid.size(), 3);
    return out;
  }
  const auto compat = compatibility_check(F, G, c);
  for (int j = 0; j < 4; ++j) {
    if (compat[j] > compat_tolerance * std::max(scale, 1.0)) {
      throw std::domain_error("incompatible curl-div data: condition " + std::to_string(j + 1) +
                              " residual " + std::to_string(compat[j]));
    }
  }
  const Calculus calc(grid);
  const Field3<Complex> A = calc.inverse_rot(F);
  // div(beta (A + grad p)) = G
  const Field1<Complex> s = calc.div(beta.apply(A)) - G;
  const ScalarSolve p = solve_scalar(beta, s, cfg);
  Field3<Complex> w = beta.apply(Field3<Complex>(A + calc.grad(p.phi)));

  // Remove the components along the homogeneous solutions beta zeta_k.
  std::array<Field3<double>, 3> bz;
  for (int k = 0; k < 3; ++k) {
    const Field3<double> z = c.zeta_field(k);
    bz[k].resize(grid.size(), 3);
    for (Eigen::Index i = 0; i < grid.size(); ++i)
      bz[k].row(i) = apply_packed(beta.packed(i), Eigen::Vector3d(z.row(i).transpose())).transpose();
  }
  Eigen::Matrix3d gram;
  Eigen::Vector3cd rhs;
  for (int j = 0; j < 3; ++j) {
    for (int k = 0; k < 3; ++k) gram(j, k) = (bz[j].array() * bz[k].array()).sum();
    rhs(j) = (w.array() * bz[j].cast<Complex>().array()).sum();
  }
  const Eigen::Vector3cd coef = gram.cast<Complex>().ldlt().solve(rhs);
  for (int k = 0; k < 3; ++k) w -= coef(k) * bz[k].cast<Complex>();

  const Field3<Complex> curl = calc.rot(beta.apply_inverse(w));
  out.curl_residual = (curl - F).norm() * std::sqrt(wq) / scale;
  out.div_residual = (calc.div(w) - G).norm() * std::sqrt(wq) / scale;
  const double wn = w.norm();
  for (int k = 0; k < 3; ++k) {
    const double d = wn * bz[k].norm();
    if (d > 0.0)
      out.orthogonality = std::max(out.orthogonality,
                                   std::abs((w.array() * bz[k].cast<Complex>().array()).sum()) / d);
  }
  out.w = std::move(w);
  out.iterations = p.iterations;
  return out;
}

Eigen::Matrix3d corrector_energy(const MatrixField& beta, const CorrectorSet& c) {
  require_same_grid(beta.grid(), c.grid, "corrector energy");
  Eigen::Matrix3d L = Eigen::Matrix3d::Zero();
  const Eigen::Index n = c.grid.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Matrix3d Z;
    for (int k = 0; k < 3; ++k) Z.col(k) = c.zeta(k, i);
    L += Z.transpose() * beta.at(i) * Z;
  }
  return L / double(n);
}

}  // namespace curlhom
