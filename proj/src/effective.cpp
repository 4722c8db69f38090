#include "curlhom/effective.hpp"

#include "curlhom/parallel.hpp"

#include <Eigen/Eigenvalues>

namespace curlhom {

namespace {

constexpr std::size_t kChunk = 8;

double min_eig(const Eigen::Matrix3d& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es;
  es.computeDirect(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

}  // namespace

EffectiveAt effective_at(const CoefficientModel& model, const Eigen::Vector3d& x, const Grid& cell,
                         const CellSolveConfig& cfg, const CorrectorSet* warm) {
  const MatrixField beta = sample_cell(model, x, cell);
  EffectiveAt e;
  e.correctors = correctors(beta, cfg, warm);
  e.correctors.x = x;
  const Eigen::Matrix3d L = corrector_energy(beta, e.correctors);
  e.asymmetry = (L - L.transpose()).cwiseAbs().maxCoeff();
  e.lambda = 0.5 * (L + L.transpose());
  Eigen::Matrix3d inv_mean = Eigen::Matrix3d::Zero();
  e.arithmetic.setZero();
  for (Eigen::Index i = 0; i < cell.size(); ++i) {
    e.arithmetic += beta.at(i);
    inv_mean += beta.inverse_at(i);
  }
  e.arithmetic /= double(cell.size());
  e.harmonic = (inv_mean / double(cell.size())).inverse();
  return e;
}

std::array<double, 2> bound_margins(const EffectiveAt& e) {
  const double s = e.lambda.norm();
  return {min_eig(e.lambda - e.harmonic) / s, min_eig(e.arithmetic - e.lambda) / s};
}

EffectiveTensors effective_fields(const CoefficientModel& alpha, const CoefficientModel& mu,
                                  const Grid& macro, const Grid& cell, const CellSolveConfig& cfg,
                                  int workers) {
  if (!(cell.lattice() == alpha.lattice) || !(cell.lattice() == mu.lattice))
    throw GridMismatch("cell grid lattice differs from the coefficient lattice");
  EffectiveTensors t;
  t.macro = macro;
  t.cell = cell;
  const Eigen::Index n = macro.size();
  std::vector<Eigen::Index> active;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Vector3d x = macro.node(i);
    if (!alpha.constant_in_y(x) || !mu.constant_in_y(x)) active.push_back(i);
  }
  std::vector<EffectiveAt> eu(active.size()), ev(active.size());
  const std::size_t chunks = (active.size() + kChunk - 1) / kChunk;
  parallel_for(chunks, workers, [&](std::size_t c) {
    const std::size_t lo = c * kChunk, hi = std::min(active.size(), lo + kChunk);
    for (std::size_t j = lo; j < hi; ++j) {
      const Eigen::Vector3d x = macro.node(active[j]);
      try {
        eu[j] = effective_at(alpha, x, cell, cfg, j > lo ? &eu[j - 1].correctors : nullptr);
        ev[j] = effective_at(mu, x, cell, cfg, j > lo ? &ev[j - 1].correctors : nullptr);
        ev[j].correctors.side = CorrectorSide::mu;
      } catch (const std::exception& err) {
        throw std::runtime_error("cell solve failed at macro node (" + std::to_string(x(0)) + ", " +
                                 std::to_string(x(1)) + ", " + std::to_string(x(2)) + "): " + err.what());
      }
    }
  });

  std::vector<Eigen::Matrix3d> lu(n), lv(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Vector3d x = macro.node(i);
    lu[i] = alpha(x, cell.node(0));
    lv[i] = mu(x, cell.node(0));
  }
  for (CorrectorBank* b : {&t.zeta, &t.xi}) {
    b->macro = macro;
    b->cell = cell;
    b->slot.assign(n, -1);
  }
  t.zeta.side = CorrectorSide::alpha;
  t.xi.side = CorrectorSide::mu;
  t.min_lower_margin = t.min_upper_margin = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < active.size(); ++j) {
    const Eigen::Index i = active[j];
    lu[i] = eu[j].lambda;
    lv[i] = ev[j].lambda;
    NodeProvenance p;
    p.node = i;
    p.iterations_u = eu[j].correctors.iterations;
    p.iterations_v = ev[j].correctors.iterations;
    p.residual_u = eu[j].correctors.residual;
    p.residual_v = ev[j].correctors.residual;
    p.asymmetry_u = eu[j].asymmetry;
    p.asymmetry_v = ev[j].asymmetry;
    const auto mu_ = bound_margins(eu[j]);
    const auto mv_ = bound_margins(ev[j]);
    p.lower_margin = std::min(mu_[0], mv_[0]);
    p.upper_margin = std::min(mu_[1], mv_[1]);
    t.max_asymmetry = std::max({t.max_asymmetry, p.asymmetry_u, p.asymmetry_v});
    t.min_lower_margin = std::min(t.min_lower_margin, p.lower_margin);
    t.min_upper_margin = std::min(t.min_upper_margin, p.upper_margin);
    t.provenance.push_back(p);
    if (!eu[j].correctors.trivial) {
      t.zeta.slot[i] = int(t.zeta.sets.size());
      t.zeta.sets.push_back(std::move(eu[j].correctors));
    }
    if (!ev[j].correctors.trivial) {
      t.xi.slot[i] = int(t.xi.sets.size());
      t.xi.sets.push_back(std::move(ev[j].correctors));
    }
  }
  if (active.empty()) t.min_lower_margin = t.min_upper_margin = 0.0;
  t.lambda_u = MatrixField(macro, [&](Eigen::Index i) { return lu[i]; });
  t.lambda_v = MatrixField(macro, [&](Eigen::Index i) { return lv[i]; });
  return t;
}

Eigen::Matrix3d interpolate(const MatrixField& field, const Eigen::Vector3d& x) {
  const MacroStencil st = lagrange_stencil(field.grid(), x);
  Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
  for (int q = 0; q < 64; ++q)
    if (st.weights[q] != 0.0) m += st.weights[q] * field.at(st.nodes[q]);
  return m;
}

CorrectorSampler::CorrectorSampler(const CorrectorBank& bank, std::array<int, 3> period) : bank_(&bank) {
  if (bank.cell.resolution() == period) return;
  resampled_.resize(bank.sets.size());
  for (std::size_t s = 0; s < bank.sets.size(); ++s)
    for (int k = 0; k < 3; ++k)
      resampled_[s][k] = resample(bank.cell, bank.sets[s].grad_phi[k].cast<Complex>(), period).real();
}

bool CorrectorSampler::trivial(const MacroStencil& st) const {
  for (int q = 0; q < 64; ++q)
    if (st.weights[q] != 0.0 && !bank_->trivial(st.nodes[q])) return false;
  return true;
}

Eigen::Matrix3d CorrectorSampler::Z(const MacroStencil& st, Eigen::Index cell_node) const {
  Eigen::Matrix3d z = Eigen::Matrix3d::Zero();
  double wsum = 0.0;
  for (int q = 0; q < 64; ++q) {
    const double w = st.weights[q];
    if (w == 0.0) continue;
    wsum += w;
    const int s = bank_->slot[st.nodes[q]];
    if (s < 0) continue;
    const auto& g = resampled_.empty() ? bank_->sets[s].grad_phi : resampled_[s];
    for (int k = 0; k < 3; ++k) z.col(k) += w * g[k].row(cell_node).transpose();
  }
  z.diagonal().array() += wsum;
  return z;
}

Eigen::Matrix3d ThetaMultiplier::u_at(Eigen::Index i) const {
  return Eigen::Map<const Eigen::Matrix<double, 3, 3, Eigen::RowMajor>>(block_u.data() + 9 * i);
}

Eigen::Matrix3d ThetaMultiplier::v_at(Eigen::Index i) const {
  return Eigen::Map<const Eigen::Matrix<double, 3, 3, Eigen::RowMajor>>(block_v.data() + 9 * i);
}

double ThetaMultiplier::identity_defect() const {
  double d = 0.0;
  for (Eigen::Index i = 0; i < fine.size(); ++i) {
    d = std::max(d, (u_at(i) - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff());
    d = std::max(d, (v_at(i) - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff());
  }
  return d;
}

ThetaMultiplier theta_multiplier(const CoefficientModel& alpha, const CoefficientModel& mu,
                                 const EffectiveTensors& tensors, double eps, const Grid& fine) {
  const FineCellMap map(fine, eps);
  ThetaMultiplier th;
  th.fine = fine;
  th.eps = eps;
  th.block_u.resize(fine.size(), 9);
  th.block_v.resize(fine.size(), 9);
  const CorrectorSampler su(tensors.zeta, map.period());
  const CorrectorSampler sv(tensors.xi, map.period());
  for (Eigen::Index i = 0; i < fine.size(); ++i) {
    const Eigen::Vector3d x = fine.node(i);
    const MacroStencil st = lagrange_stencil(tensors.macro, x);
    const Eigen::Index c = map.cell_index(i);
    Eigen::Matrix3d lu = Eigen::Matrix3d::Zero(), lv = Eigen::Matrix3d::Zero();
    for (int q = 0; q < 64; ++q) {
      if (st.weights[q] == 0.0) continue;
      lu += st.weights[q] * tensors.lambda_u.at(st.nodes[q]);
      lv += st.weights[q] * tensors.lambda_v.at(st.nodes[q]);
    }
    const Eigen::Matrix3d bu = alpha(x, x / eps) * su.Z(st, c) * lu.inverse();
    const Eigen::Matrix3d bv = mu(x, x / eps) * sv.Z(st, c) * lv.inverse();
    Eigen::Map<Eigen::Matrix<double, 3, 3, Eigen::RowMajor>>(th.block_u.data() + 9 * i) = bu;
    Eigen::Map<Eigen::Matrix<double, 3, 3, Eigen::RowMajor>>(th.block_v.data() + 9 * i) = bv;
  }
  return th;
}

}  // namespace curlhom
