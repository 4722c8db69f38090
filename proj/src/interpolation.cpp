#include "curlhom/interpolation.hpp"

#include <cmath>

namespace curlhom {

namespace {

// Four-point Lagrange weights at offset t in [0, 1) from node 0 of nodes -1, 0, 1, 2.
std::array<double, 4> lagrange4(double t) {
  return {-t * (t - 1.0) * (t - 2.0) / 6.0, (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
          -(t + 1.0) * t * (t - 2.0) / 2.0, (t + 1.0) * t * (t - 1.0) / 6.0};
}

}  // namespace

MacroStencil lagrange_stencil(const Grid& macro, const Eigen::Vector3d& x) {
  const Eigen::Vector3d t = macro.lattice().fractional(x - macro.origin());
  std::array<int, 3> base;
  std::array<std::array<double, 4>, 3> w;
  for (int a = 0; a < 3; ++a) {
    const double s = t(a) * macro.resolution()[a];
    double f = std::floor(s);
    double r = s - f;
    // Snap to the node when the point coincides with it up to round-off.
    if (r > 1.0 - 1e-12) {
      f += 1.0;
      r = 0.0;
    } else if (r < 1e-12) {
      r = 0.0;
    }
    base[a] = int(f);
    w[a] = lagrange4(r);
  }
  MacroStencil st;
  int q = 0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 4; ++k, ++q) {
        st.nodes[q] = macro.wrapped_index(base[0] + i - 1, base[1] + j - 1, base[2] + k - 1);
        st.weights[q] = w[0][i] * w[1][j] * w[2][k];
      }
  return st;
}

int nodes_per_period(const Grid& fine, double eps) {
  const double p = eps * fine.resolution()[0] / fine.side();
  return int(std::lround(p));
}

FineCellMap::FineCellMap(const Grid& fine, double eps) : fine_(fine) {
  if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("epsilon must lie in (0, 1)");
  if (fine.kind() != GridKind::macro || !fine.lattice().is_cubic())
    throw std::invalid_argument("two-scale sampling needs a cubic macro grid");
  const double L = fine.side();
  for (int a = 0; a < 3; ++a) {
    const double p = eps * fine.resolution()[a] / L;
    const long pr = std::lround(p);
    if (std::abs(p - double(pr)) > 1e-9 * p)
      throw std::invalid_argument("epsilon is not commensurate with the fine grid");
    if (pr < 8)
      throw std::invalid_argument("fine grid resolves only " + std::to_string(pr) +
                                  " nodes per epsilon-period; at least 8 required (resolution >= " +
                                  std::to_string(int(std::ceil(8.0 * L / eps))) + ")");
    period_[a] = int(pr);
    const double o = fine.origin()(a) * pr / eps;
    const long orr = std::lround(o);
    if (std::abs(o - double(orr)) > 1e-9 * std::max(1.0, std::abs(o)))
      throw std::invalid_argument("fine grid origin is not aligned with the epsilon-lattice");
    offset_[a] = int(((orr % pr) + pr) % pr);
  }
}

Eigen::Index FineCellMap::cell_index(Eigen::Index fine_node) const {
  const auto m = fine_.multi_index(fine_node);
  const int i0 = (m[0] + offset_[0]) % period_[0];
  const int i1 = (m[1] + offset_[1]) % period_[1];
  const int i2 = (m[2] + offset_[2]) % period_[2];
  return (Eigen::Index(i0) * period_[1] + i1) * period_[2] + i2;
}

}  // namespace curlhom
