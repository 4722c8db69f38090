#include "curlhom/harness.hpp"

#include "curlhom/parallel.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>

namespace curlhom {

namespace {

std::string fmt17(double x) {
  if (std::isnan(x)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw ConfigError("key '" + key + "': not a number: '" + v + "'");
  return x;
}

long long to_int(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  long long x = 0;
  try {
    x = std::stoll(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw ConfigError("key '" + key + "': not an integer: '" + v + "'");
  return x;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError("key '" + key + "': expected true or false, got '" + v + "'");
}

std::string rule_name(DerivativeRule r) {
  switch (r) {
    case DerivativeRule::spectral: return "spectral";
    case DerivativeRule::central2: return "central2";
    case DerivativeRule::central4: return "central4";
    case DerivativeRule::central6: return "central6";
    case DerivativeRule::central8: return "central8";
  }
  return "spectral";
}

DerivativeRule parse_rule(const std::string& v) {
  if (v == "spectral") return DerivativeRule::spectral;
  if (v == "central2") return DerivativeRule::central2;
  if (v == "central4") return DerivativeRule::central4;
  if (v == "central6") return DerivativeRule::central6;
  if (v == "central8") return DerivativeRule::central8;
  throw ConfigError("grids.macro_rule: unknown rule '" + v + "'");
}

// "1/4" or a decimal number.
double parse_eps(const std::string& tok) {
  const auto slash = tok.find('/');
  if (slash == std::string::npos) return to_double("sweep.eps", tok);
  const double num = to_double("sweep.eps", tok.substr(0, slash));
  const double den = to_double("sweep.eps", tok.substr(slash + 1));
  if (den == 0.0) throw ConfigError("sweep.eps: zero denominator");
  return num / den;
}

struct Entry {
  const char* section;
  const char* key;
  std::function<std::string(const ScenarioConfig&)> get;
  std::function<void(ScenarioConfig&, const std::string&)> set;
};

std::vector<Entry> medium_entries(const char* sec, MediumConfig ScenarioConfig::*m) {
  auto num = [&](const char* key, double BuiltinParams::*f) {
    const std::string name = std::string(sec) + "." + key;
    return Entry{sec, key, [=](const ScenarioConfig& c) { return fmt17((c.*m).params.*f); },
                 [=](ScenarioConfig& c, const std::string& v) { (c.*m).params.*f = to_double(name, v); }};
  };
  const std::string dname = std::string(sec) + ".direction";
  return {
      {sec, "family", [=](const ScenarioConfig& c) { return (c.*m).family; },
       [=](ScenarioConfig& c, const std::string& v) { (c.*m).family = v; }},
      num("plateau", &BuiltinParams::plateau),
      num("midpoint", &BuiltinParams::midpoint),
      num("amplitude", &BuiltinParams::amplitude),
      {sec, "direction", [=](const ScenarioConfig& c) { return std::to_string((c.*m).params.direction); },
       [=](ScenarioConfig& c, const std::string& v) { (c.*m).params.direction = int(to_int(dname, v)); }},
      num("radius", &BuiltinParams::radius),
      num("contrast", &BuiltinParams::contrast),
      num("inclusion_plateau", &BuiltinParams::inclusion_plateau),
      num("x_amplitude", &BuiltinParams::x_amplitude),
      num("x_frequency", &BuiltinParams::x_frequency),
  };
}

const std::vector<Entry>& schema() {
  static const std::vector<Entry> entries = [] {
    using C = ScenarioConfig;
    auto dbl = [](const char* sec, const char* key, double C::*f) {
      const std::string name = std::string(sec) + "." + key;
      return Entry{sec, key, [=](const C& c) { return fmt17(c.*f); },
                   [=](C& c, const std::string& v) { c.*f = to_double(name, v); }};
    };
    auto integer = [](const char* sec, const char* key, int C::*f) {
      const std::string name = std::string(sec) + "." + key;
      return Entry{sec, key, [=](const C& c) { return std::to_string(c.*f); },
                   [=](C& c, const std::string& v) { c.*f = int(to_int(name, v)); }};
    };
    auto str = [](const char* sec, const char* key, std::string C::*f) {
      return Entry{sec, key, [=](const C& c) { return c.*f; }, [=](C& c, const std::string& v) { c.*f = v; }};
    };
    std::vector<Entry> e{
        str("scenario", "name", &C::name),
        str("scenario", "label", &C::label),
    };
    for (auto& x : medium_entries("alpha", &C::alpha)) e.push_back(x);
    for (auto& x : medium_entries("mu", &C::mu)) e.push_back(x);
    e.push_back({"geometry", "lattice", [](const C&) { return std::string("cubic"); },
                 [](C&, const std::string& v) {
                   if (v != "cubic") throw ConfigError("geometry.lattice: only 'cubic' (unit cell) is supported");
                 }});
    e.push_back(dbl("geometry", "side", &C::side));
    e.push_back(dbl("geometry", "support_radius", &C::support_radius));
    e.push_back(dbl("geometry", "blend_radius", &C::blend_radius));
    e.push_back(integer("grids", "cell", &C::cell));
    e.push_back(integer("grids", "macro", &C::macro));
    e.push_back({"grids", "macro_rule", [](const C& c) { return rule_name(c.macro_rule); },
                 [](C& c, const std::string& v) { c.macro_rule = parse_rule(v); }});
    e.push_back(integer("grids", "nodes_per_period", &C::nodes_per_period));
    e.push_back({"solver", "E_real", [](const C& c) { return fmt17(c.E.real()); },
                 [](C& c, const std::string& v) { c.E.real(to_double("solver.E_real", v)); }});
    e.push_back({"solver", "E_imag", [](const C& c) { return fmt17(c.E.imag()); },
                 [](C& c, const std::string& v) { c.E.imag(to_double("solver.E_imag", v)); }});
    e.push_back(dbl("solver", "fine_tolerance", &C::fine_tolerance));
    e.push_back(dbl("solver", "hat_tolerance", &C::hat_tolerance));
    e.push_back(dbl("solver", "cell_tolerance", &C::cell_tolerance));
    e.push_back(integer("solver", "max_iterations", &C::max_iterations));
    e.push_back({"source", "kind", [](const C& c) { return c.source.kind; },
                 [](C& c, const std::string& v) { c.source.kind = v; }});
    e.push_back({"source", "seed", [](const C& c) { return std::to_string(c.source.seed); },
                 [](C& c, const std::string& v) {
                   const long long s = to_int("source.seed", v);
                   if (s < 0) throw ConfigError("source.seed must be >= 0");
                   c.source.seed = std::uint64_t(s);
                 }});
    e.push_back({"source", "max_mode", [](const C& c) { return std::to_string(c.source.max_mode); },
                 [](C& c, const std::string& v) { c.source.max_mode = int(to_int("source.max_mode", v)); }});
    e.push_back({"sweep", "eps",
                 [](const C& c) {
                   std::string s;
                   for (double x : c.eps) s += (s.empty() ? "" : " ") + fmt17(x);
                   return s;
                 },
                 [](C& c, const std::string& v) {
                   c.eps.clear();
                   std::istringstream in(v);
                   for (std::string tok; in >> tok;) c.eps.push_back(parse_eps(tok));
                 }});
    e.push_back(integer("sweep", "order", &C::order));
    e.push_back(integer("sweep", "through_order", &C::through_order));
    e.push_back({"sweep", "delta", [](const C& c) { return std::string(c.delta ? "true" : "false"); },
                 [](C& c, const std::string& v) { c.delta = to_bool("sweep.delta", v); }});
    e.push_back(str("output", "dir", &C::output));
    return e;
  }();
  return entries;
}

}  // namespace

bool ScenarioConfig::operator==(const ScenarioConfig& o) const {
  // Serialized form holds every field at full precision.
  return serialize_config(*this) == serialize_config(o);
}

void validate(const ScenarioConfig& c) {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (c.name.empty()) fail("scenario.name is empty");
  if (!(c.E.imag() > 0.0)) fail("solver: Im E must be > 0");
  if (!(c.side > 0.0)) fail("geometry.side must be > 0");
  if (!(c.support_radius > 0.0) || !(c.side > 2.0 * c.support_radius)) fail("geometry: need L > 2R > 0");
  if (c.blend_radius < 0.0 || c.blend_radius > c.support_radius) fail("geometry.blend_radius must lie in [0, R]");
  if (c.cell < 4 || c.cell % 2) fail("grids.cell must be even and >= 4");
  if (c.macro < 4 || c.macro % 2) fail("grids.macro must be even and >= 4");
  if (c.nodes_per_period < 8 || c.nodes_per_period % 2) fail("grids.nodes_per_period must be even and >= 8");
  if (c.source.kind != "two_mode" && c.source.kind != "random") fail("source.kind must be two_mode or random");
  if (c.source.max_mode < 1) fail("source.max_mode must be >= 1");
  if (c.eps.empty()) fail("sweep.eps is empty");
  for (double e : c.eps) {
    if (!(e > 0.0 && e < 1.0)) fail("sweep.eps: " + fmt17(e) + " is outside (0, 1)");
    const double periods = c.side / e;
    if (std::abs(periods - std::round(periods)) > 1e-9 * periods)
      fail("sweep.eps: L / eps = " + fmt17(periods) + " is not an integer");
  }
  std::set<double> seen(c.eps.begin(), c.eps.end());
  if (seen.size() != c.eps.size()) fail("sweep.eps has repeated values");
  if (c.order < 0 || c.order > 4) fail("sweep.order must lie in [0, 4]");
  if (c.through_order < 0 || c.through_order > c.order) fail("sweep.through_order must lie in [0, order]");
  if (!(c.fine_tolerance > 0.0) || !(c.hat_tolerance > 0.0) || !(c.cell_tolerance > 0.0))
    fail("solver tolerances must be > 0");
  if (c.max_iterations < 1) fail("solver.max_iterations must be >= 1");
  for (const MediumConfig* m : {&c.alpha, &c.mu}) {
    try {
      build_medium(c, *m);
    } catch (const std::invalid_argument& e) {
      fail(std::string("medium: ") + e.what());
    }
  }
}

ScenarioConfig parse_config(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax: ") + e.what());
  }
  std::map<std::string, std::map<std::string, const Entry*>> known;
  for (const Entry& e : schema()) known[e.section][e.key] = &e;
  ScenarioConfig c;
  for (const auto& [sec, body] : tree) {
    const auto s = known.find(sec);
    if (s == known.end()) throw ConfigError("unknown section [" + sec + "]");
    if (body.empty() && !body.data().empty()) throw ConfigError("key '" + sec + "' outside any section");
    for (const auto& [key, val] : body) {
      const auto k = s->second.find(key);
      if (k == s->second.end()) throw ConfigError("unknown key '" + key + "' in [" + sec + "]");
      k->second->set(c, val.data());
    }
  }
  return c;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const ScenarioConfig& c) {
  std::string out, section;
  for (const Entry& e : schema()) {
    if (section != e.section) {
      out += (out.empty() ? "[" : "\n[") + std::string(e.section) + "]\n";
      section = e.section;
    }
    out += std::string(e.key) + " = " + e.get(c) + "\n";
  }
  return out;
}

std::vector<std::string> scenario_names() { return {"identity", "laminate", "inclusion"}; }

ScenarioConfig builtin_scenario(const std::string& name) {
  ScenarioConfig c;
  c.name = name;
  c.output = "out/" + name;
  if (name == "identity") {
    c.label = "artifact scenario: identity media";
    c.order = 1;
    c.delta = true;
  } else if (name == "laminate") {
    c.label = "artifact scenario: blended laminates, alpha layered along y0, mu along y1";
    c.alpha.family = c.mu.family = "laminate";
    c.mu.params.direction = 1;
  } else if (name == "inclusion") {
    c.label = "artifact scenario: blended smooth spherical inclusion, radius 0.45, contrast 3";
    c.alpha.family = c.mu.family = "inclusion";
    for (MediumConfig* m : {&c.alpha, &c.mu}) {
      m->params.radius = 0.45;
      m->params.contrast = 3.0;
      m->params.inclusion_plateau = 0.0;
    }
  } else {
    throw ConfigError("unknown scenario '" + name + "'");
  }
  return c;
}

CoefficientModel build_medium(const ScenarioConfig& c, const MediumConfig& m) {
  BuiltinParams p = m.params;
  p.lattice = Lattice();
  p.support_radius = c.support_radius;
  p.blend_radius = c.blend_radius;
  return builtin(m.family, p);
}

FieldPair build_source(const ScenarioConfig& c, const Grid& grid) {
  if (c.source.kind == "random") return random_solenoidal_pair(grid, c.source.seed, c.source.max_mode);
  const double k = 2.0 * std::numbers::pi / c.side;
  FieldPair f(VectorField::from(grid,
                                [&](const Eigen::Vector3d& x) {
                                  return Eigen::Vector3cd(0.0, std::sin(k * x(0)), std::cos(k * x(0)));
                                }),
              VectorField::from(grid, [&](const Eigen::Vector3d& x) {
                return Eigen::Vector3cd(std::cos(k * x(1)), 0.0, std::sin(k * x(1)));
              }));
  f = FieldPair(leray_project(f.u), leray_project(f.v));
  f *= 1.0 / l2_norm(f);
  return f;
}

Grid macro_grid(const ScenarioConfig& c) { return Grid::macro(c.side, {c.macro, c.macro, c.macro}, c.macro_rule); }

Grid cell_grid(const ScenarioConfig& c) { return Grid::cell(Lattice(), {c.cell, c.cell, c.cell}); }

Grid fine_grid(const ScenarioConfig& c, double eps) {
  const int n = int(std::lround(c.nodes_per_period * c.side / eps));
  return Grid::macro(c.side, {n, n, n});
}

RateFit fit_rate(const std::vector<double>& eps, const std::vector<double>& errors) {
  RateFit f;
  f.points = int(eps.size());
  if (eps.size() != errors.size()) throw std::invalid_argument("fit_rate: eps and errors differ in length");
  if (eps.size() < 3) {
    f.reason = "fewer than 3 points";
    return f;
  }
  for (std::size_t i = 0; i < eps.size(); ++i) {
    if (!std::isfinite(errors[i]) || !(errors[i] > 0.0)) {
      f.reason = "non-positive or non-finite error";
      return f;
    }
    if (!(eps[i] > 0.0)) {
      f.reason = "non-positive eps";
      return f;
    }
  }
  const auto [emin, emax] = std::minmax_element(errors.begin(), errors.end());
  if (*emax - *emin <= 1e-12 * *emax) {
    f.reason = "identical errors";
    return f;
  }
  const std::size_t n = eps.size();
  Eigen::VectorXd x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x(i) = std::log(eps[i]);
    y(i) = std::log(errors[i]);
  }
  const double xm = x.mean(), ym = y.mean();
  const double sxx = (x.array() - xm).square().sum();
  if (!(sxx > 0.0)) {
    f.reason = "identical eps";
    return f;
  }
  f.slope = ((x.array() - xm) * (y.array() - ym)).sum() / sxx;
  f.intercept = ym - f.slope * xm;
  const double ssr = (y.array() - f.intercept - f.slope * x.array()).square().sum();
  const double se = std::sqrt(ssr / double(n - 2) / sxx);
  // 95% two-sided Student t interval.
  const boost::math::students_t t(double(n - 2));
  f.half_width = boost::math::quantile(boost::math::complement(t, 0.025)) * se;
  f.ok = true;
  return f;
}

bool ReportRow::operator==(const ReportRow& o) const {
  auto same = [](double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); };
  return eps == o.eps && fine_resolution == o.fine_resolution && ok == o.ok && failed_stage == o.failed_stage &&
         message == o.message && same(fine_residual, o.fine_residual) && fine_iterations == o.fine_iterations &&
         same(hom_residual, o.hom_residual) && hom_iterations == o.hom_iterations && same(error, o.error) &&
         same(relative_error, o.relative_error) && same(divergence_before, o.divergence_before) &&
         same(divergence_after, o.divergence_after) && same(delta_ratio, o.delta_ratio) &&
         same(delta_bound, o.delta_bound) && same(delta_defect, o.delta_defect);
}

bool RateFit::operator==(const RateFit& o) const {
  auto same = [](double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); };
  return ok == o.ok && reason == o.reason && points == o.points && same(slope, o.slope) &&
         same(intercept, o.intercept) && same(half_width, o.half_width);
}

bool ConvergenceReport::passed() const {
  return std::all_of(flags.begin(), flags.end(), [](const auto& f) { return f.second; });
}

bool ConvergenceReport::operator==(const ConvergenceReport& o) const {
  // Timings are excluded on purpose.
  return report_json(*this) == report_json(o);
}

namespace {

using Clock = std::chrono::steady_clock;

// Runs fn; on failure records the stage and returns false.
template <class Fn>
bool run_stage(const std::string& stage, std::vector<StageTiming>& timings, std::string& failed,
               std::string& message, Fn&& fn) {
  const auto t0 = Clock::now();
  bool ok = true;
  try {
    fn();
  } catch (const std::exception& e) {
    failed = stage;
    message = e.what();
    ok = false;
  }
  timings.push_back({stage, std::chrono::duration<double>(Clock::now() - t0).count()});
  return ok;
}

std::pair<double, double> eigen_range(const MatrixField& m) {
  double lo = INFINITY, hi = -INFINITY;
  for (Eigen::Index i = 0; i < m.grid().size(); ++i) {
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(m.at(i), Eigen::EigenvaluesOnly);
    lo = std::min(lo, es.eigenvalues()(0));
    hi = std::max(hi, es.eigenvalues()(2));
  }
  return {lo, hi};
}

TermSummary summarize(const ExpansionTerm& t) {
  TermSummary s;
  s.n = t.n;
  s.compatibility = t.compatibility.max();
  s.curl_residual = t.curl_residual;
  s.div_residual = t.div_residual;
  s.orthogonality = t.orthogonality;
  s.support_defect = t.support_defect;
  s.hat_residual = t.hat_residual;
  s.hat_iterations = t.hat_iterations;
  s.truncated = t.truncated;
  return s;
}

}  // namespace

ConvergenceReport run_scenario(const ScenarioConfig& c, int workers) {
  ConvergenceReport r;
  r.config = c;
  workers = std::max(1, workers);
  bool shared = run_stage("config", r.timings, r.failed_stage, r.message, [&] { validate(c); });

  CoefficientModel alpha, mu;
  EffectiveTensors tensors;
  ExpansionSetup setup;
  std::vector<ExpansionTerm> terms;
  shared = shared && run_stage("media", r.timings, r.failed_stage, r.message, [&] {
             alpha = build_medium(c, c.alpha);
             mu = build_medium(c, c.mu);
           });
  CellSolveConfig cell_cfg;
  cell_cfg.tolerance = c.cell_tolerance;
  shared = shared && run_stage("tensors", r.timings, r.failed_stage, r.message, [&] {
             tensors = effective_fields(alpha, mu, macro_grid(c), cell_grid(c), cell_cfg, workers);
             std::tie(r.lambda_u_min, r.lambda_u_max) = eigen_range(tensors.lambda_u);
             std::tie(r.lambda_v_min, r.lambda_v_max) = eigen_range(tensors.lambda_v);
             r.cell_nodes = tensors.provenance.size();
           });
  shared = shared && run_stage("expansion", r.timings, r.failed_stage, r.message, [&] {
             setup.alpha = &alpha;
             setup.mu = &mu;
             setup.tensors = &tensors;
             setup.f = build_source(c, tensors.macro);
             setup.E = c.E;
             setup.radius = c.support_radius;
             setup.cell = cell_cfg;
             setup.hat = ResolventConfig{c.hat_tolerance, c.max_iterations, false};
             setup.workers = workers;
             terms.push_back(leading_term(setup));
             for (int n = 1; n <= c.order; ++n) terms.push_back(recurrence_step(terms, setup));
             r.next_compatibility = next_compatibility(terms, setup).max();
             // Partial sums use u_hat_N = v_hat_N = 0.
             if (c.order >= 1) {
               ExpansionTerm& last = terms.back();
               for (VectorField* v : {&last.a, &last.b, &last.hat_u, &last.hat_v}) v->values.setZero();
               last.truncated = true;
             }
             for (const ExpansionTerm& t : terms) r.terms.push_back(summarize(t));
           });

  std::vector<double> eps = c.eps;
  std::sort(eps.begin(), eps.end(), std::greater<>());
  r.rows.resize(eps.size());
  std::vector<std::vector<StageTiming>> row_timings(eps.size());
  const int row_workers = std::max(1, workers / std::max<int>(1, int(eps.size())));
  parallel_for(eps.size(), workers, [&](std::size_t i) {
    ReportRow& row = r.rows[i];
    row.eps = eps[i];
    if (!shared) {
      row.failed_stage = r.failed_stage;
      row.message = "not run: shared stage failed";
      return;
    }
    std::vector<StageTiming>& tm = row_timings[i];
    ExpansionSetup s = setup;
    s.workers = row_workers;
    Grid fine;
    FieldPair f;
    ResolventSolution exact, hom;
    FieldPair lead;
    PartialSum ps;
    const ResolventConfig cfg{c.fine_tolerance, c.max_iterations, true};
    bool ok = run_stage("source", tm, row.failed_stage, row.message, [&] {
      fine = fine_grid(c, row.eps);
      row.fine_resolution = fine.resolution()[0];
      f = build_source(c, fine);
    });
    ok = ok && run_stage("fine_solve", tm, row.failed_stage, row.message, [&] {
           exact = resolvent_solve(fine_operator(alpha, mu, row.eps, fine), f, c.E, cfg);
           row.fine_residual = exact.residual;
           row.fine_iterations = exact.iterations;
         });
    ok = ok && run_stage("homogenized_solve", tm, row.failed_stage, row.message, [&] {
           lead = leading_on_fine(s, f, row.eps, fine, &hom, cfg);
           row.hom_residual = hom.residual;
           row.hom_iterations = hom.iterations;
         });
    ok = ok && run_stage("partial_sum", tm, row.failed_stage, row.message, [&] {
           ps = partial_sum(terms, s, row.eps, fine, c.delta && c.order >= 1, &lead);
           row.divergence_before = ps.divergence_before;
           row.divergence_after = ps.divergence_after;
           if (ps.has_delta) {
             const DeltaCorrector* d[2] = {&ps.delta_u, &ps.delta_v};
             row.delta_ratio = std::max(d[0]->ratio(), d[1]->ratio());
             row.delta_bound = std::min(d[0]->bound(), d[1]->bound());
             row.delta_defect = std::max(d[0]->divergence_defect, d[1]->divergence_defect);
           }
         });
    ok = ok && run_stage("error", tm, row.failed_stage, row.message, [&] {
           row.error = estimate_error(exact.state, ps, c.through_order);
           row.relative_error = row.error / l2_norm(exact.state);
         });
    row.ok = ok;
  });
  for (std::size_t i = 0; i < eps.size(); ++i)
    for (const StageTiming& t : row_timings[i]) r.timings.push_back({"eps=" + fmt17(eps[i]) + "/" + t.stage, t.seconds});

  const bool rows_ok = shared && std::all_of(r.rows.begin(), r.rows.end(), [](const ReportRow& w) { return w.ok; });
  r.flags["rows"] = rows_ok;
  bool closure = shared && r.next_compatibility <= 1e-9;
  for (const TermSummary& t : r.terms)
    closure = closure && t.compatibility <= 1e-9 && t.support_defect <= 1e-10;
  r.flags["closure"] = closure;
  bool delta_ok = true;
  for (const ReportRow& w : r.rows)
    if (!std::isnan(w.delta_ratio)) delta_ok = delta_ok && w.delta_ratio <= w.delta_bound;
  r.flags["delta"] = rows_ok && delta_ok;
  if (rows_ok) {
    std::vector<double> errs;
    for (const ReportRow& w : r.rows) errs.push_back(w.error);
    const double worst = *std::max_element(errs.begin(), errs.end());
    if (worst <= 10.0 * c.fine_tolerance) {
      r.fit.points = int(errs.size());
      r.fit.reason = "degenerate: errors at solver tolerance";
      r.flags["rate"] = true;
    } else {
      r.fit = fit_rate(eps, errs);
      r.flags["rate"] = r.fit.ok && r.fit.slope >= 0.7 && r.fit.slope <= 1.3;
    }
  } else {
    r.fit.reason = "rows failed";
    r.flags["rate"] = false;
  }
  return r;
}

namespace {

using Json = nlohmann::ordered_json;

Json num(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }
double num(const Json& j) { return j.is_null() ? NAN : j.get<double>(); }

const char* const csv_columns =
    "eps,fine_resolution,ok,failed_stage,fine_residual,fine_iterations,hom_residual,hom_iterations,error,"
    "relative_error,divergence_before,divergence_after,delta_ratio,delta_bound,delta_defect\n";

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << text;
  out.close();
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::string prepare_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create directory " + dir + ": " + ec.message());
  return dir;
}

}  // namespace

std::string report_json(const ConvergenceReport& r) {
  Json j;
  j["format"] = "curlhom-report/1";
  j["scenario"] = r.config.name;
  j["label"] = r.config.label;
  j["config"] = serialize_config(r.config);
  j["failed_stage"] = r.failed_stage;
  j["message"] = r.message;
  j["lambda_u"] = {num(r.lambda_u_min), num(r.lambda_u_max)};
  j["lambda_v"] = {num(r.lambda_v_min), num(r.lambda_v_max)};
  j["cell_nodes"] = r.cell_nodes;
  Json terms = Json::array();
  for (const TermSummary& t : r.terms)
    terms.push_back({{"n", t.n},
                     {"compatibility", num(t.compatibility)},
                     {"curl_residual", num(t.curl_residual)},
                     {"div_residual", num(t.div_residual)},
                     {"orthogonality", num(t.orthogonality)},
                     {"support_defect", num(t.support_defect)},
                     {"hat_residual", num(t.hat_residual)},
                     {"hat_iterations", t.hat_iterations},
                     {"truncated", t.truncated}});
  j["terms"] = terms;
  j["next_compatibility"] = num(r.next_compatibility);
  Json rows = Json::array();
  for (const ReportRow& w : r.rows)
    rows.push_back({{"eps", w.eps},
                    {"fine_resolution", w.fine_resolution},
                    {"ok", w.ok},
                    {"failed_stage", w.failed_stage},
                    {"message", w.message},
                    {"fine_residual", num(w.fine_residual)},
                    {"fine_iterations", w.fine_iterations},
                    {"hom_residual", num(w.hom_residual)},
                    {"hom_iterations", w.hom_iterations},
                    {"error", num(w.error)},
                    {"relative_error", num(w.relative_error)},
                    {"divergence_before", num(w.divergence_before)},
                    {"divergence_after", num(w.divergence_after)},
                    {"delta_ratio", num(w.delta_ratio)},
                    {"delta_bound", num(w.delta_bound)},
                    {"delta_defect", num(w.delta_defect)}});
  j["rows"] = rows;
  j["fit"] = {{"ok", r.fit.ok},
              {"reason", r.fit.reason},
              {"points", r.fit.points},
              {"slope", num(r.fit.slope)},
              {"intercept", num(r.fit.intercept)},
              {"half_width", num(r.fit.half_width)}};
  Json flags = Json::object();
  for (const auto& [k, v] : r.flags) flags[k] = v;
  j["flags"] = flags;
  j["passed"] = r.passed();
  return j.dump(2) + "\n";
}

ConvergenceReport parse_report_json(const std::string& text) {
  ConvergenceReport r;
  try {
    const Json j = Json::parse(text);
    if (j.at("format") != "curlhom-report/1") throw std::runtime_error("unknown report format");
    r.config = parse_config(j.at("config").get<std::string>());
    r.failed_stage = j.at("failed_stage").get<std::string>();
    r.message = j.at("message").get<std::string>();
    r.lambda_u_min = num(j.at("lambda_u").at(0));
    r.lambda_u_max = num(j.at("lambda_u").at(1));
    r.lambda_v_min = num(j.at("lambda_v").at(0));
    r.lambda_v_max = num(j.at("lambda_v").at(1));
    r.cell_nodes = j.at("cell_nodes").get<std::size_t>();
    for (const Json& t : j.at("terms")) {
      TermSummary s;
      s.n = t.at("n").get<int>();
      s.compatibility = num(t.at("compatibility"));
      s.curl_residual = num(t.at("curl_residual"));
      s.div_residual = num(t.at("div_residual"));
      s.orthogonality = num(t.at("orthogonality"));
      s.support_defect = num(t.at("support_defect"));
      s.hat_residual = num(t.at("hat_residual"));
      s.hat_iterations = t.at("hat_iterations").get<int>();
      s.truncated = t.at("truncated").get<bool>();
      r.terms.push_back(s);
    }
    r.next_compatibility = num(j.at("next_compatibility"));
    for (const Json& w : j.at("rows")) {
      ReportRow row;
      row.eps = w.at("eps").get<double>();
      row.fine_resolution = w.at("fine_resolution").get<int>();
      row.ok = w.at("ok").get<bool>();
      row.failed_stage = w.at("failed_stage").get<std::string>();
      row.message = w.at("message").get<std::string>();
      row.fine_residual = num(w.at("fine_residual"));
      row.fine_iterations = w.at("fine_iterations").get<int>();
      row.hom_residual = num(w.at("hom_residual"));
      row.hom_iterations = w.at("hom_iterations").get<int>();
      row.error = num(w.at("error"));
      row.relative_error = num(w.at("relative_error"));
      row.divergence_before = num(w.at("divergence_before"));
      row.divergence_after = num(w.at("divergence_after"));
      row.delta_ratio = num(w.at("delta_ratio"));
      row.delta_bound = num(w.at("delta_bound"));
      row.delta_defect = num(w.at("delta_defect"));
      r.rows.push_back(row);
    }
    const Json& f = j.at("fit");
    r.fit.ok = f.at("ok").get<bool>();
    r.fit.reason = f.at("reason").get<std::string>();
    r.fit.points = f.at("points").get<int>();
    r.fit.slope = num(f.at("slope"));
    r.fit.intercept = num(f.at("intercept"));
    r.fit.half_width = num(f.at("half_width"));
    for (const auto& [k, v] : j.at("flags").items()) r.flags[k] = v.get<bool>();
  } catch (const Json::exception& e) {
    throw std::runtime_error(std::string("malformed report: ") + e.what());
  }
  return r;
}

std::string report_csv(const ConvergenceReport& r) {
  std::string out = csv_columns;
  for (const ReportRow& w : r.rows) {
    const std::string cells[] = {fmt17(w.eps),
                                 std::to_string(w.fine_resolution),
                                 w.ok ? "1" : "0",
                                 w.failed_stage,
                                 fmt17(w.fine_residual),
                                 std::to_string(w.fine_iterations),
                                 fmt17(w.hom_residual),
                                 std::to_string(w.hom_iterations),
                                 fmt17(w.error),
                                 fmt17(w.relative_error),
                                 fmt17(w.divergence_before),
                                 fmt17(w.divergence_after),
                                 fmt17(w.delta_ratio),
                                 fmt17(w.delta_bound),
                                 fmt17(w.delta_defect)};
    std::string line;
    for (const std::string& c : cells) line += (line.empty() ? "" : ",") + c;
    out += line + "\n";
  }
  return out;
}

std::string timings_json(const ConvergenceReport& r) {
  Json j = Json::array();
  for (const StageTiming& t : r.timings) j.push_back({{"stage", t.stage}, {"seconds", t.seconds}});
  return j.dump(2) + "\n";
}

std::string export_report(const ConvergenceReport& r, ReportFormat format, const std::string& dir) {
  prepare_dir(dir);
  const std::string path = (std::filesystem::path(dir) / (format == ReportFormat::json ? "report.json" : "report.csv")).string();
  write_file(path, format == ReportFormat::json ? report_json(r) : report_csv(r));
  return path;
}

void write_artifacts(const ConvergenceReport& r, const std::string& dir) {
  export_report(r, ReportFormat::json, dir);
  export_report(r, ReportFormat::csv, dir);
  write_file((std::filesystem::path(dir) / "timings.json").string(), timings_json(r));
  write_file((std::filesystem::path(dir) / "scenario.ini").string(), serialize_config(r.config));
}
}  // namespace curlhom
