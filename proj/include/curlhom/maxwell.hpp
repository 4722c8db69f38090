#pragma once

#include "curlhom/calculus.hpp"
#include "curlhom/coefficients.hpp"
#include "curlhom/effective.hpp"

#include <cstdint>
#include <vector>

namespace curlhom {

enum class OperatorKind { fine, homogenized };

/// M(u, v) = (i rot(mu^-1 v), -i rot(alpha^-1 u)) on a periodic grid. For
/// the homogenized operator alpha and mu hold Lambda^u and Lambda^v.
struct MaxwellOperator {
  OperatorKind kind = OperatorKind::fine;
  double eps = 0.0;
  MatrixField alpha;
  MatrixField mu;

  const Grid& grid() const { return alpha.grid(); }
};

/// alpha(x, x/eps), mu(x, x/eps) sampled on `grid`; refuses grids with fewer
/// than 8 nodes per eps-period.
MaxwellOperator fine_operator(const CoefficientModel& alpha, const CoefficientModel& mu, double eps,
                              const Grid& grid);
/// Lambda^u, Lambda^v on `grid`: nodal when it is the tensors' macro grid,
/// otherwise four-point Lagrange interpolation.
MaxwellOperator homogenized_operator(const EffectiveTensors& tensors, const Grid& grid);

FieldPair apply(const MaxwellOperator& op, const FieldPair& s);

struct ResolventConfig {
  /// Relative residual ||(M - E) s - f|| / ||f||.
  double tolerance = 1e-10;
  int max_iterations = 5000;
  /// Leray-project u and v of the result (for divergence-free data).
  bool project = true;
};

struct ResolventSolution {
  FieldPair state;
  double residual = 0.0;
  int iterations = 0;
  std::vector<double> history;  // relative residual estimate per iteration
};

/// Solves (M - E) s = f for Im E > 0. The magnetic part is eliminated,
/// leaving rot mu^-1 rot w - E^2 alpha w = E f^u + i rot(mu^-1 f^v) with
/// u = alpha w, which is solved by preconditioned conjugate orthogonal
/// conjugate gradients (the system is complex symmetric).
ResolventSolution resolvent_solve(const MaxwellOperator& op, const FieldPair& f, Complex E,
                                  const ResolventConfig& cfg = {});

/// Random divergence-free band-limited pair with unit L2 norm.
FieldPair random_solenoidal_pair(const Grid& grid, std::uint64_t seed, int max_mode = 3);

/// max |<M p, q>_w - <p, M q>_w| / (||p||_w ||q||_w) over random pairs.
double selfadjointness_defect(const MaxwellOperator& op, int trials, std::uint64_t seed = 1);

/// sqrt(<p, p>_w) with the operator's weights.
double weighted_norm(const MaxwellOperator& op, const FieldPair& p);

}  // namespace curlhom
