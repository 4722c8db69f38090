#include "curlhom/coefficients.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>

namespace curlhom {

namespace {

const double two_pi = 2.0 * std::numbers::pi;

double ramp(double s) { return s <= 0.0 ? 0.0 : std::exp(-1.0 / s); }

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("invalid coefficient parameter: " + what);
}

// I + chi(|x| / rb) (P(x, y) - I) with the scalar P of a builtin family.
CoefficientModel blended(std::string label, const BuiltinParams& p, double floor,
                         std::function<double(const Eigen::Vector3d&, const Eigen::Vector3d&)> scalar) {
  const double rb = p.blend_radius > 0.0 ? p.blend_radius : p.support_radius;
  const double plateau = p.plateau;
  CoefficientModel m;
  m.label = std::move(label);
  m.lattice = p.lattice;
  m.support_radius = p.support_radius;
  m.floor = floor;
  m.evaluator = [=](const Eigen::Vector3d& x, const Eigen::Vector3d& y) -> Eigen::Matrix3d {
    const double chi = radial_blend(x.norm() / rb, plateau);
    if (chi == 0.0) return Eigen::Matrix3d::Identity();
    return (1.0 + chi * (scalar(x, y) - 1.0)) * Eigen::Matrix3d::Identity();
  };
  m.y_constant = [=](const Eigen::Vector3d& x) { return x.norm() >= rb; };
  return m;
}

}  // namespace

double smooth_step(double s) {
  if (s <= 0.0) return 0.0;
  if (s >= 1.0) return 1.0;
  const double a = ramp(s);
  return a / (a + ramp(1.0 - s));
}

double radial_blend(double t, double plateau) {
  if (t >= 1.0) return 0.0;
  if (t <= plateau) return 1.0;
  return smooth_step((1.0 - t) / (1.0 - plateau));
}

CoefficientModel builtin(const std::string& family, const BuiltinParams& p) {
  require(p.support_radius > 0.0, "support_radius must be positive");
  require(p.blend_radius >= 0.0 && p.blend_radius <= p.support_radius,
          "blend_radius must lie in [0, support_radius]");
  require(p.plateau >= 0.0 && p.plateau < 1.0, "plateau must lie in [0, 1)");
  const Lattice lat = p.lattice;

  if (family == "identity") {
    CoefficientModel m;
    m.label = "identity";
    m.lattice = lat;
    m.support_radius = p.support_radius;
    m.floor = 1.0;
    m.evaluator = [](const Eigen::Vector3d&, const Eigen::Vector3d&) -> Eigen::Matrix3d {
      return Eigen::Matrix3d::Identity();
    };
    m.y_constant = [](const Eigen::Vector3d&) { return true; };
    return m;
  }
  if (family == "laminate") {
    require(p.direction >= 0 && p.direction < 3, "direction must be 1, 2 or 3");
    require(std::abs(p.amplitude) < p.midpoint, "laminate needs |amplitude| < midpoint");
    const int d = p.direction;
    const double mid = p.midpoint, amp = p.amplitude;
    return blended("laminate", p, std::min(1.0, mid - std::abs(amp)),
                   [=](const Eigen::Vector3d&, const Eigen::Vector3d& y) {
                     return mid + amp * std::sin(two_pi * lat.fractional(y)(d));
                   });
  }
  if (family == "inclusion") {
    require(p.contrast > 0.0, "contrast must be positive");
    require(p.inclusion_plateau >= 0.0 && p.inclusion_plateau < 1.0,
            "inclusion_plateau must lie in [0, 1)");
    const double shortest = lat.basis().colwise().norm().minCoeff();
    require(p.radius > 0.0 && p.radius < 0.5 * shortest,
            "inclusion radius must lie in (0, half the shortest lattice vector)");
    const double r = p.radius, c = p.contrast, ip = p.inclusion_plateau;
    return blended("inclusion", p, std::min(1.0, c),
                   [=](const Eigen::Vector3d&, const Eigen::Vector3d& y) {
                     Eigen::Vector3d t = lat.fractional(y).array() - 0.5;
                     t = t.array() - t.array().round();
                     const double dist = (lat.basis() * t).norm();
                     return 1.0 + (c - 1.0) * radial_blend(dist / r, ip);
                   });
  }
  if (family == "separable") {
    require(p.direction >= 0 && p.direction < 3, "direction must be 1, 2 or 3");
    require(std::abs(p.amplitude) < p.midpoint, "separable needs |amplitude| < midpoint");
    require(std::abs(p.x_amplitude) < 1.0, "separable needs |x_amplitude| < 1");
    const int d = p.direction, e = (p.direction + 1) % 3;
    const double mid = p.midpoint, amp = p.amplitude, xa = p.x_amplitude, xf = p.x_frequency;
    const double floor = std::min(1.0, (1.0 - std::abs(xa)) * (mid - std::abs(amp)));
    return blended("separable", p, floor, [=](const Eigen::Vector3d& x, const Eigen::Vector3d& y) {
      const Eigen::Vector3d th = lat.fractional(y);
      const double b = mid + amp * std::sin(two_pi * th(d)) * std::cos(two_pi * th(e));
      return (1.0 + xa * std::sin(xf * x(0))) * b;
    });
  }
  throw std::invalid_argument("unknown coefficient family: " + family);
}

MatrixField sample_cell(const CoefficientModel& model, const Eigen::Vector3d& x, const Grid& cell) {
  if (!(cell.lattice() == model.lattice)) throw GridMismatch("cell grid lattice differs from the model lattice");
  if (model.constant_in_y(x)) {
    const Eigen::Matrix3d m = model(x, cell.node(0));
    if (m == Eigen::Matrix3d::Identity()) return MatrixField::identity(cell);
    return MatrixField(cell, [&](Eigen::Index) { return m; });
  }
  return MatrixField(cell, [&](Eigen::Index i) { return model(x, cell.node(i)); });
}

MatrixField sample_fine(const CoefficientModel& model, double eps, const Grid& fine) {
  if (!(eps > 0.0)) throw std::invalid_argument("epsilon must be positive");
  return MatrixField(fine, [&](Eigen::Index i) {
    const Eigen::Vector3d x = fine.node(i);
    return model(x, x / eps);
  });
}

ValidationReport validate(const CoefficientModel& model, int x_count, int y_count, double tolerance) {
  if (x_count < 8 || y_count < 8) throw std::invalid_argument("validate needs at least 8 samples per axis");
  ValidationReport r;
  r.declared_floor = model.floor;
  r.min_eigenvalue = std::numeric_limits<double>::infinity();
  const double R = model.support_radius;
  const Eigen::Matrix3d& B = model.lattice.basis();
  for (int a = 0; a < x_count; ++a)
    for (int b = 0; b < x_count; ++b)
      for (int c = 0; c < x_count; ++c) {
        const Eigen::Vector3d x = -1.25 * R * Eigen::Vector3d::Ones() +
                                  (2.5 * R / (x_count - 1)) * Eigen::Vector3d(a, b, c);
        const bool outside = x.norm() >= R;
        for (int i = 0; i < y_count; ++i)
          for (int j = 0; j < y_count; ++j)
            for (int k = 0; k < y_count; ++k) {
              const Eigen::Vector3d y = B * (Eigen::Vector3d(i, j, k) / y_count);
              const Eigen::Matrix3d m = model(x, y);
              ++r.samples;
              r.max_asymmetry = std::max(r.max_asymmetry, (m - m.transpose()).cwiseAbs().maxCoeff());
              Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es;
              es.computeDirect(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
              r.min_eigenvalue = std::min(r.min_eigenvalue, es.eigenvalues()(0));
              for (int g = 0; g < 3; ++g) {
                const Eigen::Matrix3d shifted = model(x, y + B.col(g));
                r.max_periodicity_defect =
                    std::max(r.max_periodicity_defect, (shifted - m).cwiseAbs().maxCoeff());
              }
              if (outside) {
                r.max_identity_defect = std::max(
                    r.max_identity_defect, (m - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff());
              }
            }
      }
  r.passed = r.min_eigenvalue > 0.0 && r.min_eigenvalue >= model.floor - tolerance &&
             r.max_asymmetry <= tolerance && r.max_periodicity_defect <= tolerance &&
             r.max_identity_defect <= tolerance;
  r.note = "smoothness in (x, y) is not certified by sampling";
  return r;
}

}  // namespace curlhom
