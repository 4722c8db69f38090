#include "curlhom/expansion.hpp"

#include "curlhom/interpolation.hpp"
#include "curlhom/parallel.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <cstdio>

namespace curlhom {

namespace {

const Complex I(0.0, 1.0);
constexpr Eigen::Index kChunk = 64;

// One node of a two-scale result: a row when constant in y, else a block.
struct NodeOut {
  bool uniform = true;
  Eigen::RowVectorXcd row;
  Eigen::MatrixXcd block;
};

template <class Fn>
void for_chunks(Eigen::Index n, int workers, Fn&& fn) {
  const std::size_t chunks = std::size_t((n + kChunk - 1) / kChunk);
  parallel_for(chunks, workers, [&](std::size_t c) {
    const Eigen::Index lo = Eigen::Index(c) * kChunk, hi = std::min(n, lo + kChunk);
    for (Eigen::Index i = lo; i < hi; ++i) fn(i);
  });
}

template <class Fn>
TwoScaleField map_nodes(const Grid& macro, const Grid& cell, int comps, int workers, Fn&& fn) {
  const Eigen::Index n = macro.size();
  std::vector<NodeOut> out(n);
  for_chunks(n, workers, [&](Eigen::Index i) { out[i] = fn(i); });
  TwoScaleField t = TwoScaleField::zeros(macro, cell, comps);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (out[i].uniform)
      t.uniform.row(i) = out[i].row;
    else
      t.set(i, std::move(out[i].block));
  }
  return t;
}

CorrectorSet trivial_set(const Grid& cell, CorrectorSide side) {
  CorrectorSet c;
  c.grid = cell;
  c.side = side;
  c.trivial = true;
  return c;
}

const CorrectorSet& set_at(const CorrectorBank& bank, Eigen::Index i, const CorrectorSet& fallback) {
  return bank.trivial(i) ? fallback : bank.at(i);
}

enum class Part { full, reduced };

// full: t + beta Z c; reduced: beta^-1 t + Z c.
TwoScaleField assemble(const TwoScaleField& tilde, const VectorField* coef, const CoefficientModel& beta,
                       const CorrectorBank& bank, Part part, int workers) {
  const Grid& cell = tilde.cell;
  return map_nodes(tilde.macro, cell, 3, workers, [&](Eigen::Index i) {
    const Eigen::Vector3d x = tilde.macro.node(i);
    const Eigen::Vector3cd c = coef ? Eigen::Vector3cd(coef->values.row(i).transpose())
                                    : Eigen::Vector3cd::Zero();
    NodeOut o;
    if (tilde.y_constant(i) && bank.trivial(i)) {
      const Eigen::Matrix3d B = beta(x, cell.node(0));
      const Eigen::Vector3cd t = tilde.uniform.row(i).transpose();
      const Eigen::Vector3cd r = part == Part::full
                                     ? Eigen::Vector3cd(t + B.cast<Complex>() * c)
                                     : Eigen::Vector3cd(B.inverse().cast<Complex>() * t + c);
      o.row = r.transpose();
      return o;
    }
    const MatrixField b = sample_cell(beta, x, cell);
    const CorrectorSet* set = bank.trivial(i) ? nullptr : &bank.at(i);
    const Eigen::MatrixXcd t = tilde.at(i);
    o.uniform = false;
    o.block.resize(cell.size(), 3);
    for (Eigen::Index j = 0; j < cell.size(); ++j) {
      Eigen::Vector3cd zc = c;
      if (set)
        for (int k = 0; k < 3; ++k) zc += c(k) * set->grad_phi[k].row(j).transpose().cast<Complex>();
      const Eigen::Vector3cd tj = t.row(j).transpose();
      const Eigen::Vector3cd r = part == Part::full
                                     ? Eigen::Vector3cd(tj + apply_packed(b.packed(j), zc))
                                     : Eigen::Vector3cd(apply_packed(b.packed_inverse(j), tj) + zc);
      o.block.row(j) = r.transpose();
    }
    return o;
  });
}

// Bilinear cell pairing |Omega|^-1 int (w, zeta_k) dy.
Eigen::Vector3cd pairing(const Eigen::MatrixXcd& w, const CorrectorSet& c) {
  Eigen::Vector3cd p;
  const double n = double(w.rows());
  for (int k = 0; k < 3; ++k) {
    Complex acc = w.col(k).sum();
    if (!c.trivial) acc += (w.array() * c.grad_phi[k].cast<Complex>().array()).sum();
    p(k) = acc / n;
  }
  return p;
}

// Data of the order-n cell systems, built from the order n-1 term.
struct OrderData {
  TwoScaleField U, V, rotP, rotQ, divU, divV;
};

OrderData order_data(const ExpansionTerm& prev, const ExpansionSetup& s) {
  const EffectiveTensors& T = *s.tensors;
  const VectorField* a = prev.truncated ? nullptr : &prev.a;
  const VectorField* b = prev.truncated ? nullptr : &prev.b;
  OrderData d;
  d.U = assemble(prev.tilde_u, a, *s.alpha, T.zeta, Part::full, s.workers);
  d.V = assemble(prev.tilde_v, b, *s.mu, T.xi, Part::full, s.workers);
  d.divU = div_x(d.U);
  d.divV = div_x(d.V);
  d.rotQ = rot_x(assemble(prev.tilde_u, a, *s.alpha, T.zeta, Part::reduced, s.workers));
  d.rotP = rot_x(assemble(prev.tilde_v, b, *s.mu, T.xi, Part::reduced, s.workers));
  return d;
}

// Right-hand sides of
//   rot_y(mu^-1 v_n) = F^V, div_y v_n = G^V,  rot_y(alpha^-1 u_n) = F^U, div_y u_n = G^U
// at one macro node. Uniform data are stored as single rows.
struct NodeSystems {
  bool uniform = true;
  Eigen::MatrixXcd FV, FU;
  Eigen::VectorXcd GV, GU;
};

NodeSystems node_systems(const OrderData& d, int n, const ExpansionSetup& s, Eigen::Index i) {
  NodeSystems ns;
  const Complex E = s.E;
  ns.uniform = d.U.y_constant(i) && d.V.y_constant(i) && d.rotP.y_constant(i) && d.rotQ.y_constant(i) &&
               d.divU.y_constant(i) && d.divV.y_constant(i);
  auto get = [&](const TwoScaleField& f) -> Eigen::MatrixXcd {
    return ns.uniform ? Eigen::MatrixXcd(f.uniform.row(i)) : f.at(i);
  };
  ns.FV = -I * E * get(d.U) - get(d.rotP);
  ns.FU = I * E * get(d.V) - get(d.rotQ);
  if (n == 1) {
    ns.FV.rowwise() -= I * s.f.u.values.row(i);
    ns.FU.rowwise() += I * s.f.v.values.row(i);
  }
  ns.GV = -get(d.divV).col(0);
  ns.GU = -get(d.divU).col(0);
  return ns;
}

std::array<double, 4> node_compat(const Eigen::MatrixXcd& F, const Eigen::VectorXcd& G, const CorrectorSet& c,
                                  bool uniform) {
  std::array<double, 4> r{};
  if (uniform) {
    for (int k = 0; k < 3; ++k) r[k] = std::abs(F(0, k));
    r[3] = std::abs(G(0));
    return r;
  }
  const Eigen::Vector3cd p = pairing(F, c);
  for (int k = 0; k < 3; ++k) r[k] = std::abs(p(k));
  r[3] = std::abs(G.mean());
  return r;
}

void require_setup(const ExpansionSetup& s) {
  if (!s.alpha || !s.mu || !s.tensors) throw std::invalid_argument("expansion setup is incomplete");
  require_same_grid(s.f.grid(), s.tensors->macro, "expansion source");
  if (!(s.E.imag() > 0.0)) throw std::invalid_argument("expansion needs Im E > 0");
}

double source_norm(const ExpansionSetup& s) {
  const double n = l2_norm(s.f);
  return n > 0.0 ? n : 1.0;
}

void maximize(std::array<double, 4>& acc, const std::array<double, 4>& r) {
  for (int j = 0; j < 4; ++j) acc[j] = std::max(acc[j], r[j]);
}

void scale(std::array<double, 4>& acc, double s) {
  for (double& x : acc) x *= s;
}

// Solves (M_hat - E) hat = F on the macro grid and fills hats and coefficients.
void close_hats(ExpansionTerm& t, const FieldPair& F, const ExpansionSetup& s) {
  const EffectiveTensors& T = *s.tensors;
  if (F.u.values.isZero(0.0) && F.v.values.isZero(0.0)) {
    t.hat_u = t.hat_v = VectorField::zeros(T.macro);
  } else {
    const ResolventSolution sol = resolvent_solve(homogenized_operator(T, T.macro), F, s.E, s.hat);
    t.hat_u = sol.state.u;
    t.hat_v = sol.state.v;
    t.hat_residual = sol.residual;
    t.hat_iterations = sol.iterations;
  }
  t.a = T.lambda_u.apply_inverse(t.hat_u);
  t.b = T.lambda_v.apply_inverse(t.hat_v);
}

}  // namespace

TwoScaleField TwoScaleField::zeros(const Grid& macro, const Grid& cell, int components) {
  TwoScaleField t;
  t.macro = macro;
  t.cell = cell;
  t.components = components;
  t.uniform = Eigen::MatrixXcd::Zero(macro.size(), components);
  t.slot.assign(macro.size(), -1);
  return t;
}

TwoScaleField TwoScaleField::from_macro(const Grid& cell, const VectorField& u) {
  TwoScaleField t = zeros(u.grid, cell, 3);
  t.uniform = u.values;
  return t;
}

Eigen::MatrixXcd TwoScaleField::at(Eigen::Index node) const {
  if (y_constant(node)) return uniform.row(node).replicate(cell.size(), 1);
  return blocks[slot[node]];
}

Eigen::RowVectorXcd TwoScaleField::cell_mean(Eigen::Index node) const {
  if (y_constant(node)) return uniform.row(node);
  return blocks[slot[node]].colwise().mean();
}

void TwoScaleField::set(Eigen::Index node, Eigen::MatrixXcd block) {
  if (block.rows() != cell.size() || block.cols() != components)
    throw std::invalid_argument("two-scale block has the wrong shape");
  if (slot[node] < 0) {
    slot[node] = int(blocks.size());
    blocks.push_back(std::move(block));
  } else {
    blocks[slot[node]] = std::move(block);
  }
}

void TwoScaleField::set(Eigen::Index node, const Eigen::RowVectorXcd& row) {
  if (slot[node] < 0)
    uniform.row(node) = row;
  else
    blocks[slot[node]].rowwise() = row;
}

double TwoScaleField::max_outside(double radius) const {
  double m = 0.0;
  for (Eigen::Index i = 0; i < macro.size(); ++i) {
    if (macro.node(i).norm() < radius) continue;
    const double v = y_constant(i) ? uniform.row(i).cwiseAbs().maxCoeff()
                                   : blocks[slot[i]].cwiseAbs().maxCoeff();
    m = std::max(m, v);
  }
  return m;
}

double TwoScaleField::max_abs() const {
  double m = uniform.size() ? uniform.cwiseAbs().maxCoeff() : 0.0;
  for (const auto& b : blocks) m = std::max(m, b.cwiseAbs().maxCoeff());
  return m;
}

TwoScaleField partial_x(const TwoScaleField& u, int axis) {
  const auto a = central_coefficients(u.macro.rule());
  if (a.empty()) throw std::invalid_argument("two-scale x-derivatives need a central macro rule");
  const double h = u.macro.side() / u.macro.resolution()[axis];
  return map_nodes(u.macro, u.cell, u.components, 1, [&](Eigen::Index i) {
    const auto m = u.macro.multi_index(i);
    std::vector<std::pair<Eigen::Index, double>> terms;
    bool uniform = true;
    for (std::size_t j = 0; j < a.size(); ++j) {
      for (int sgn : {1, -1}) {
        auto q = m;
        q[axis] += sgn * int(j + 1);
        const Eigen::Index nb = u.macro.wrapped_index(q[0], q[1], q[2]);
        terms.emplace_back(nb, sgn * a[j] / h);
        uniform = uniform && u.y_constant(nb);
      }
    }
    NodeOut o;
    o.row = Eigen::RowVectorXcd::Zero(u.components);
    for (const auto& [nb, w] : terms)
      if (u.y_constant(nb)) o.row += w * u.uniform.row(nb);
    if (!uniform) {
      o.uniform = false;
      o.block.resize(u.cell.size(), u.components);
      o.block.rowwise() = o.row;
      for (const auto& [nb, w] : terms)
        if (!u.y_constant(nb)) o.block += w * u.blocks[u.slot[nb]];
    }
    return o;
  });
}

TwoScaleField rot_x(const TwoScaleField& u) {
  if (u.components != 3) throw std::invalid_argument("rot_x needs a vector field");
  const TwoScaleField D[3] = {partial_x(u, 0), partial_x(u, 1), partial_x(u, 2)};
  return map_nodes(u.macro, u.cell, 3, 1, [&](Eigen::Index i) {
    NodeOut o;
    o.uniform = D[0].y_constant(i) && D[1].y_constant(i) && D[2].y_constant(i);
    auto get = [&](int a) -> Eigen::MatrixXcd {
      return o.uniform ? Eigen::MatrixXcd(D[a].uniform.row(i)) : D[a].at(i);
    };
    const Eigen::MatrixXcd d0 = get(0), d1 = get(1), d2 = get(2);
    Eigen::MatrixXcd r(d0.rows(), 3);
    r.col(0) = d1.col(2) - d2.col(1);
    r.col(1) = d2.col(0) - d0.col(2);
    r.col(2) = d0.col(1) - d1.col(0);
    if (o.uniform)
      o.row = r.row(0);
    else
      o.block = std::move(r);
    return o;
  });
}

TwoScaleField div_x(const TwoScaleField& u) {
  if (u.components != 3) throw std::invalid_argument("div_x needs a vector field");
  const TwoScaleField D[3] = {partial_x(u, 0), partial_x(u, 1), partial_x(u, 2)};
  return map_nodes(u.macro, u.cell, 1, 1, [&](Eigen::Index i) {
    NodeOut o;
    o.uniform = D[0].y_constant(i) && D[1].y_constant(i) && D[2].y_constant(i);
    if (o.uniform) {
      o.row = Eigen::RowVectorXcd::Constant(1, D[0].uniform(i, 0) + D[1].uniform(i, 1) + D[2].uniform(i, 2));
    } else {
      o.block = D[0].at(i).col(0) + D[1].at(i).col(1) + D[2].at(i).col(2);
    }
    return o;
  });
}

double Compatibility::max() const {
  double m = 0.0;
  for (int j = 0; j < 4; ++j) m = std::max({m, v[j], u[j]});
  return m;
}

TwoScaleField full_u(const ExpansionTerm& t, const ExpansionSetup& s) {
  return assemble(t.tilde_u, t.truncated ? nullptr : &t.a, *s.alpha, s.tensors->zeta, Part::full, s.workers);
}

TwoScaleField full_v(const ExpansionTerm& t, const ExpansionSetup& s) {
  return assemble(t.tilde_v, t.truncated ? nullptr : &t.b, *s.mu, s.tensors->xi, Part::full, s.workers);
}

ExpansionTerm leading_term(const ExpansionSetup& s) {
  require_setup(s);
  const EffectiveTensors& T = *s.tensors;
  ExpansionTerm t;
  t.n = 0;
  t.tilde_u = TwoScaleField::zeros(T.macro, T.cell);
  t.tilde_v = TwoScaleField::zeros(T.macro, T.cell);
  close_hats(t, s.f, s);
  return t;
}

Compatibility next_compatibility(const std::vector<ExpansionTerm>& terms, const ExpansionSetup& s) {
  require_setup(s);
  if (terms.empty()) throw std::invalid_argument("compatibility needs the lower-order terms");
  const int n = int(terms.size());
  const EffectiveTensors& T = *s.tensors;
  const OrderData d = order_data(terms.back(), s);
  const CorrectorSet tz = trivial_set(T.cell, CorrectorSide::alpha), tx = trivial_set(T.cell, CorrectorSide::mu);
  std::vector<std::array<double, 4>> rv(T.macro.size()), ru(T.macro.size());
  for_chunks(T.macro.size(), s.workers, [&](Eigen::Index i) {
    const NodeSystems ns = node_systems(d, n, s, i);
    rv[i] = node_compat(ns.FV, ns.GV, set_at(T.xi, i, tx), ns.uniform);
    ru[i] = node_compat(ns.FU, ns.GU, set_at(T.zeta, i, tz), ns.uniform);
  });
  Compatibility c;
  for (Eigen::Index i = 0; i < T.macro.size(); ++i) {
    maximize(c.v, rv[i]);
    maximize(c.u, ru[i]);
  }
  scale(c.v, 1.0 / source_norm(s));
  scale(c.u, 1.0 / source_norm(s));
  return c;
}

ExpansionTerm recurrence_step(const std::vector<ExpansionTerm>& terms, const ExpansionSetup& s, bool truncate) {
  require_setup(s);
  if (terms.empty()) throw std::invalid_argument("recurrence needs the lower-order terms");
  const int n = int(terms.size());
  const EffectiveTensors& T = *s.tensors;
  const Grid& macro = T.macro;
  const Grid& cell = T.cell;
  ExpansionTerm t;
  t.n = n;
  t.truncated = truncate;

  struct NodeResult {
    std::array<double, 4> rv{}, ru{};
    Eigen::MatrixXcd u, v;  // empty when the tildes vanish
    double curl = 0.0, div = 0.0, orth = 0.0;
  };
  std::vector<NodeResult> res(macro.size());
  {
    const OrderData d = order_data(terms.back(), s);
    const CorrectorSet tz = trivial_set(cell, CorrectorSide::alpha), tx = trivial_set(cell, CorrectorSide::mu);
    const double fn = source_norm(s);
    for_chunks(macro.size(), s.workers, [&](Eigen::Index i) {
      const NodeSystems ns = node_systems(d, n, s, i);
      const CorrectorSet& cv = set_at(T.xi, i, tx);
      const CorrectorSet& cu = set_at(T.zeta, i, tz);
      NodeResult& r = res[i];
      r.rv = node_compat(ns.FV, ns.GV, cv, ns.uniform);
      r.ru = node_compat(ns.FU, ns.GU, cu, ns.uniform);
      // Uniform data have zero-mean solutions only in the homogeneous space,
      // which the tildes are orthogonal to.
      if (ns.uniform) return;
      const Eigen::Vector3d x = macro.node(i);
      auto solve = [&](const CoefficientModel& model, const Eigen::MatrixXcd& F, const Eigen::VectorXcd& G,
                       const CorrectorSet& c, const char* which) {
        try {
          return solve_curl_div(sample_cell(model, x, cell), Field3<Complex>(F), Field1<Complex>(G), c, s.cell,
                                1e-8 * fn);
        } catch (const std::domain_error& e) {
          throw std::domain_error(std::string("order ") + std::to_string(n) + " " + which + " system at (" +
                                  std::to_string(x(0)) + ", " + std::to_string(x(1)) + ", " +
                                  std::to_string(x(2)) + "): " + e.what());
        }
      };
      const CurlDivSolve sv = solve(*s.mu, ns.FV, ns.GV, cv, "v");
      const CurlDivSolve su = solve(*s.alpha, ns.FU, ns.GU, cu, "u");
      r.v = sv.w;
      r.u = su.w;
      // Residuals relative to ||f||: nodes with round-off data would
      // otherwise report O(1) relative residuals.
      const double w = std::sqrt(cell.weight()) / fn;
      const double sv_scale = std::max(ns.FV.norm(), ns.GV.norm()) * w;
      const double su_scale = std::max(ns.FU.norm(), ns.GU.norm()) * w;
      r.curl = std::max(sv.curl_residual * sv_scale, su.curl_residual * su_scale);
      r.div = std::max(sv.div_residual * sv_scale, su.div_residual * su_scale);
      r.orth = std::max(sv.orthogonality, su.orthogonality);
    });
  }
  t.tilde_u = TwoScaleField::zeros(macro, cell);
  t.tilde_v = TwoScaleField::zeros(macro, cell);
  for (Eigen::Index i = 0; i < macro.size(); ++i) {
    NodeResult& r = res[i];
    maximize(t.compatibility.v, r.rv);
    maximize(t.compatibility.u, r.ru);
    t.curl_residual = std::max(t.curl_residual, r.curl);
    t.div_residual = std::max(t.div_residual, r.div);
    t.orthogonality = std::max(t.orthogonality, r.orth);
    if (r.u.size()) t.tilde_u.set(i, std::move(r.u));
    if (r.v.size()) t.tilde_v.set(i, std::move(r.v));
  }
  res.clear();
  const double fn = source_norm(s);
  scale(t.compatibility.v, 1.0 / fn);
  scale(t.compatibility.u, 1.0 / fn);
  t.support_defect = std::max(t.tilde_u.max_outside(s.radius), t.tilde_v.max_outside(s.radius)) / fn;
  t.support_flag = t.support_defect <= 1e-10;

  if (truncate) {
    t.hat_u = t.hat_v = t.a = t.b = VectorField::zeros(macro);
    return t;
  }
  // F^u_n = (E u~ - i rot_x(mu^-1 v~), xi_k), F^v_n = (E v~ + i rot_x(alpha^-1 u~), zeta_k)
  const TwoScaleField rp = rot_x(assemble(t.tilde_v, nullptr, *s.mu, T.xi, Part::reduced, s.workers));
  const TwoScaleField rq = rot_x(assemble(t.tilde_u, nullptr, *s.alpha, T.zeta, Part::reduced, s.workers));
  FieldPair F = FieldPair::zeros(macro);
  const CorrectorSet tz = trivial_set(cell, CorrectorSide::alpha), tx = trivial_set(cell, CorrectorSide::mu);
  for_chunks(macro.size(), s.workers, [&](Eigen::Index i) {
    if (t.tilde_u.y_constant(i) && t.tilde_v.y_constant(i) && rp.y_constant(i) && rq.y_constant(i)) {
      F.u.values.row(i) = s.E * t.tilde_u.uniform.row(i) - I * rp.uniform.row(i);
      F.v.values.row(i) = s.E * t.tilde_v.uniform.row(i) + I * rq.uniform.row(i);
      return;
    }
    const Eigen::MatrixXcd wu = s.E * t.tilde_u.at(i) - I * rp.at(i);
    const Eigen::MatrixXcd wv = s.E * t.tilde_v.at(i) + I * rq.at(i);
    F.u.values.row(i) = pairing(wu, set_at(T.xi, i, tx)).transpose();
    F.v.values.row(i) = pairing(wv, set_at(T.zeta, i, tz)).transpose();
  });
  close_hats(t, F, s);
  return t;
}

double DeltaCorrector::bound() const {
  const double r = std::max(radius, support_radius);
  return std::sqrt(2.0 * r * r + 6.0);
}

namespace {

// delta(x) = x * ray(x, tmax), ray(x, tmax) = int_0^tmax g(t x) t^2 dt.
using RayIntegral = std::function<Complex(const Eigen::Vector3d&, double)>;

DeltaCorrector fix_divergence(ScalarField g, double radius, bool check_support, int workers,
                              const RayIntegral& ray) {
  if (!(radius > 0.0)) throw std::invalid_argument("divergence fixer needs R > 0");
  const Grid grid = g.grid;
  DeltaCorrector d;
  d.radius = radius;
  d.g = std::move(g);
  double gmax = 0.0;
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    const double a = std::abs(d.g.values(i));
    gmax = std::max(gmax, a);
    if (grid.node(i).norm() >= radius) d.support_defect = std::max(d.support_defect, a);
  }
  for (Eigen::Index i = 0; i < grid.size(); ++i)
    if (std::abs(d.g.values(i)) > 1e-12 * gmax) d.support_radius = std::max(d.support_radius, grid.node(i).norm());
  if (check_support && d.support_defect > 1e-10 * std::max(1.0, gmax)) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", d.support_defect);
    throw std::domain_error(std::string("divergence fixer: g is not supported in B_R (max |g| outside is ") + buf + ")");
  }
  Field3<Complex> delta = Field3<Complex>::Zero(grid.size(), 3);
  if (gmax > 0.0) {
    for_chunks(grid.size(), workers, [&](Eigen::Index i) {
      const Eigen::Vector3d x = grid.node(i);
      const double r = x.norm();
      if (r == 0.0) return;
      const double tmax = check_support && r > radius ? radius / r : 1.0;
      delta.row(i) = (x.cast<Complex>() * ray(x, tmax)).transpose();
    });
  }
  d.delta = VectorField(grid, std::move(delta));
  const double gn = l2_norm(d.g);
  if (gn > 0.0) d.divergence_defect = l2_norm(ScalarField(grid, div(d.delta).values - d.g.values)) / gn;
  d.h1_delta = sobolev_norm(d.delta, 1);
  d.h1_g = sobolev_norm(d.g, 1);
  return d;
}

std::array<double, 4> lagrange4(double t) {
  return {-t * (t - 1.0) * (t - 2.0) / 6.0, (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
          -(t + 1.0) * t * (t - 2.0) / 2.0, (t + 1.0) * t * (t - 1.0) / 6.0};
}

}  // namespace

DeltaCorrector divergence_fixer(const ScalarFunction& g, const Grid& grid, double radius, bool check_support,
                                int workers) {
  using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
  return fix_divergence(ScalarField::from(grid, g), radius, check_support, workers,
                        [&](const Eigen::Vector3d& x, double tmax) {
                          return GK::integrate([&](double t) { return g(t * x) * (t * t); }, 0.0, tmax, 15, 1e-10);
                        });
}

DeltaCorrector divergence_fixer(const ScalarField& g, double radius, bool check_support, int workers) {
  const Grid& grid = g.grid;
  // Along a ray the four-point interpolant is a polynomial of degree <= 9 in t
  // between crossings of grid planes, so six Gauss points per piece are exact.
  using GL = boost::math::quadrature::gauss<double, 6>;
  const Eigen::Vector3d s0 = grid.lattice().fractional(-grid.origin());
  auto ray = [&](const Eigen::Vector3d& x, double tmax) {
    // Grid coordinates s(t) = s0 + t * ds.
    const Eigen::Vector3d ds = grid.lattice().fractional(x) - grid.lattice().fractional(Eigen::Vector3d::Zero());
    Eigen::Vector3d a, b;
    for (int k = 0; k < 3; ++k) {
      a(k) = s0(k) * grid.resolution()[k];
      b(k) = ds(k) * grid.resolution()[k];
    }
    std::vector<double> cuts{0.0, tmax};
    for (int k = 0; k < 3; ++k) {
      if (b(k) == 0.0) continue;
      const double lo = std::min(a(k), a(k) + b(k) * tmax), hi = std::max(a(k), a(k) + b(k) * tmax);
      for (double m = std::ceil(lo); m <= hi; m += 1.0) {
        const double t = (m - a(k)) / b(k);
        if (t > 0.0 && t < tmax) cuts.push_back(t);
      }
    }
    std::sort(cuts.begin(), cuts.end());
    Complex total = 0.0;
    std::array<Complex, 64> vals;
    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
      const double t0 = cuts[c], t1 = cuts[c + 1];
      if (t1 - t0 <= 1e-14) continue;
      const Eigen::Vector3d mid = a + b * (0.5 * (t0 + t1));
      std::array<int, 3> base;
      for (int k = 0; k < 3; ++k) base[k] = int(std::floor(mid(k)));
      bool any = false;
      for (int i = 0, q = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
          for (int k = 0; k < 4; ++k, ++q) {
            vals[q] = g.values(grid.wrapped_index(base[0] + i - 1, base[1] + j - 1, base[2] + k - 1));
            any = any || vals[q] != 0.0;
          }
      if (!any) continue;
      total += GL::integrate(
          [&](double t) {
            const Eigen::Vector3d s = a + b * t;
            std::array<std::array<double, 4>, 3> w;
            for (int k = 0; k < 3; ++k) w[k] = lagrange4(s(k) - base[k]);
            Complex acc = 0.0;
            for (int i = 0, q = 0; i < 4; ++i)
              for (int j = 0; j < 4; ++j) {
                const double wij = w[0][i] * w[1][j];
                for (int k = 0; k < 4; ++k, ++q) acc += (wij * w[2][k]) * vals[q];
              }
            return acc * (t * t);
          },
          t0, t1);
    }
    return total;
  };
  return fix_divergence(g, radius, check_support, workers, ray);
}

namespace {

// u(x, x / eps) on the fine grid, x-interpolated from the macro nodes.
Eigen::MatrixXcd evaluate_on_fine(const TwoScaleField& u, const FineCellMap& map, const Grid& fine, int workers) {
  const TwoScaleField* src = &u;
  TwoScaleField resampled;
  if (map.period() != u.cell.resolution()) {
    resampled = u;
    resampled.cell = Grid::cell(u.cell.lattice(), map.period());
    for (auto& b : resampled.blocks) {
      Field3<Complex> pad = Field3<Complex>::Zero(b.rows(), 3);
      pad.leftCols(u.components) = b;
      b = resample(u.cell, pad, map.period()).leftCols(u.components);
    }
    src = &resampled;
  }
  Eigen::MatrixXcd out(fine.size(), u.components);
  for_chunks(fine.size(), workers, [&](Eigen::Index i) {
    const MacroStencil st = lagrange_stencil(u.macro, fine.node(i));
    const Eigen::Index c = map.cell_index(i);
    Eigen::RowVectorXcd acc = Eigen::RowVectorXcd::Zero(u.components);
    for (int q = 0; q < 64; ++q) {
      const double w = st.weights[q];
      if (w == 0.0) continue;
      const Eigen::Index nq = st.nodes[q];
      if (src->y_constant(nq))
        acc += w * src->uniform.row(nq);
      else
        acc += w * src->blocks[src->slot[nq]].row(c);
    }
    out.row(i) = acc;
  });
  return out;
}

}  // namespace

PartialSum partial_sum(const std::vector<ExpansionTerm>& terms, const ExpansionSetup& s, double eps,
                       const Grid& fine, bool with_delta, const FieldPair* fine_leading) {
  require_setup(s);
  if (terms.empty()) throw std::invalid_argument("partial sum needs at least one term");
  const FineCellMap map(fine, eps);
  PartialSum ps;
  ps.N = int(terms.size()) - 1;
  ps.eps = eps;
  ps.sum = FieldPair::zeros(fine);
  for (const ExpansionTerm& t : terms) {
    FieldPair p;
    if (t.n == 0 && fine_leading) {
      require_same_grid(fine_leading->grid(), fine, "fine leading term");
      p = *fine_leading;
    } else {
      p = FieldPair(VectorField(fine, evaluate_on_fine(full_u(t, s), map, fine, s.workers)),
                    VectorField(fine, evaluate_on_fine(full_v(t, s), map, fine, s.workers)));
    }
    p *= std::pow(eps, t.n);
    ps.sum += p;
    ps.orders.push_back(std::move(p));
  }
  ps.divergence_before = l2_norm(div(ps.sum.u)) + l2_norm(div(ps.sum.v));
  ps.divergence_after = ps.divergence_before;
  if (with_delta) {
    const ExpansionTerm& last = terms.back();
    const double scale_N = std::pow(eps, last.n);
    auto source = [&](const TwoScaleField& uN) {
      const Eigen::MatrixXcd g = -evaluate_on_fine(div_x(uN), map, fine, s.workers);
      return ScalarField(fine, g.col(0));
    };
    // The Lagrange-interpolated source is not compactly supported at the
    // discrete level, so every ray runs to t = 1.
    ps.delta_u = divergence_fixer(source(full_u(last, s)), s.radius, false, s.workers);
    ps.delta_v = divergence_fixer(source(full_v(last, s)), s.radius, false, s.workers);
    ps.sum.u += Complex(scale_N) * ps.delta_u.delta;
    ps.sum.v += Complex(scale_N) * ps.delta_v.delta;
    ps.has_delta = true;
    ps.divergence_after = l2_norm(div(ps.sum.u)) + l2_norm(div(ps.sum.v));
  }
  return ps;
}

FieldPair leading_on_fine(const ExpansionSetup& s, const FieldPair& f_fine, double eps, const Grid& fine,
                          ResolventSolution* hom, const ResolventConfig& cfg) {
  require_setup(s);
  require_same_grid(f_fine.grid(), fine, "fine source");
  ResolventSolution sol = resolvent_solve(homogenized_operator(*s.tensors, fine), f_fine, s.E, cfg);
  const ThetaMultiplier th = theta_multiplier(*s.alpha, *s.mu, *s.tensors, eps, fine);
  FieldPair out = sol.state;
  for (Eigen::Index i = 0; i < fine.size(); ++i) {
    out.u.values.row(i) = (th.u_at(i).cast<Complex>() * sol.state.u.values.row(i).transpose()).transpose();
    out.v.values.row(i) = (th.v_at(i).cast<Complex>() * sol.state.v.values.row(i).transpose()).transpose();
  }
  if (hom) *hom = std::move(sol);
  return out;
}

double estimate_error(const FieldPair& fine_solution, const PartialSum& sum, int through_order) {
  require_same_grid(fine_solution.grid(), sum.sum.grid(), "estimate_error");
  if (through_order < 0 || through_order >= int(sum.orders.size()))
    throw std::invalid_argument("through_order outside the computed terms");
  FieldPair d = fine_solution;
  for (int n = 0; n <= through_order; ++n) d -= sum.orders[n];
  return l2_norm(d);
}

std::vector<TermNorms> term_norm_diagnostics(const std::vector<ExpansionTerm>& terms, int s) {
  std::vector<TermNorms> out;
  for (const ExpansionTerm& t : terms) {
    TermNorms r;
    r.n = t.n;
    r.order = std::max(0, s - t.n + 1);
    r.hat_u = sobolev_norm(t.hat_u, r.order);
    r.hat_v = sobolev_norm(t.hat_v, r.order);
    r.a = sobolev_norm(t.a, r.order);
    r.b = sobolev_norm(t.b, r.order);
    auto l2 = [](const TwoScaleField& f) {
      double acc = f.uniform.squaredNorm() * f.cell.volume();
      for (const auto& b : f.blocks) acc += b.squaredNorm() * f.cell.weight();
      return std::sqrt(acc * f.macro.weight());
    };
    r.tilde_u = l2(t.tilde_u);
    r.tilde_v = l2(t.tilde_v);
    out.push_back(r);
  }
  return out;
}

}  // namespace curlhom
