// homcli: command line front end of the harness.
// Exit codes: 0 all flags pass, 2 numerical acceptance failure, 1 execution error.

#include "curlhom/field_io.hpp"
#include "curlhom/harness.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace curlhom;

namespace {

struct Options {
  std::string config, scenario = "laminate", out, eps;
  int workers = 1;
  int order = -1;
  long long seed = -1;
};

ScenarioConfig load(const Options& o) {
  ScenarioConfig c = o.config.empty() ? builtin_scenario(o.scenario) : load_config(o.config);
  if (o.order >= 0) {
    c.order = o.order;
    c.through_order = std::min(c.through_order, c.order);
  }
  if (!o.eps.empty()) {
    std::string list = o.eps;
    std::replace(list.begin(), list.end(), ',', ' ');
    ScenarioConfig tmp = parse_config("[sweep]\neps = " + list + "\n");
    c.eps = tmp.eps;
  }
  if (o.seed >= 0) c.source.seed = std::uint64_t(o.seed);
  validate(c);
  return c;
}

// --out only chooses where files go; it is not recorded in the scenario.
std::string out_dir(const Options& o, const ScenarioConfig& c) { return o.out.empty() ? c.output : o.out; }

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!(out << text)) throw std::runtime_error("cannot write " + path);
}

void print_report(const ConvergenceReport& r) {
  std::printf("scenario %s (%s)\n", r.config.name.c_str(), r.config.label.c_str());
  if (!r.failed_stage.empty()) std::printf("  failed stage %s: %s\n", r.failed_stage.c_str(), r.message.c_str());
  for (const ReportRow& w : r.rows) {
    if (w.ok)
      std::printf("  eps %-8.5g fine %4d  error %.6e  rel %.4e  fine it %d\n", w.eps, w.fine_resolution, w.error,
                  w.relative_error, w.fine_iterations);
    else
      std::printf("  eps %-8.5g failed at %s: %s\n", w.eps, w.failed_stage.c_str(), w.message.c_str());
  }
  if (r.fit.ok)
    std::printf("  slope %.4f +- %.4f over %d points\n", r.fit.slope, r.fit.half_width, r.fit.points);
  else
    std::printf("  no fit: %s\n", r.fit.reason.c_str());
  for (const auto& [k, v] : r.flags) std::printf("  %-8s %s\n", k.c_str(), v ? "pass" : "FAIL");
}

int cmd_validate(const Options& o) {
  const ScenarioConfig c = load(o);
  bool ok = true;
  for (const auto& [name, m] : {std::pair{"alpha", &c.alpha}, std::pair{"mu", &c.mu}}) {
    const ValidationReport v = validate(build_medium(c, *m));
    std::printf("%-5s %-10s min eig %.6g  asym %.3g  periodicity %.3g  outside-R %.3g  %s%s%s\n", name,
                m->family.c_str(), v.min_eigenvalue, v.max_asymmetry, v.max_periodicity_defect,
                v.max_identity_defect, v.passed ? "pass" : "FAIL", v.note.empty() ? "" : ": ", v.note.c_str());
    ok = ok && v.passed;
  }
  return ok ? 0 : 2;
}

int cmd_tensors(const Options& o) {
  const ScenarioConfig c = load(o);
  CellSolveConfig cfg;
  cfg.tolerance = c.cell_tolerance;
  const EffectiveTensors t =
      effective_fields(build_medium(c, c.alpha), build_medium(c, c.mu), macro_grid(c), cell_grid(c), cfg, o.workers);
  const std::filesystem::path dir(out_dir(o, c));
  std::filesystem::create_directories(dir);
  write_field((dir / "lambda_u.bin").string(), t.lambda_u);
  write_field((dir / "lambda_v.bin").string(), t.lambda_v);
  nlohmann::ordered_json j;
  j["scenario"] = c.name;
  j["cell_nodes"] = t.provenance.size();
  j["max_asymmetry"] = t.max_asymmetry;
  j["min_lower_margin"] = t.min_lower_margin;
  j["min_upper_margin"] = t.min_upper_margin;
  write_text((dir / "tensors.json").string(), j.dump(2) + "\n");
  const bool ok = t.max_asymmetry <= 1e-8 && t.min_lower_margin >= -1e-8 && t.min_upper_margin >= -1e-8;
  std::printf("%zu cell problems, asymmetry %.3g, Voigt-Reuss margins %.3g / %.3g: %s\n", t.provenance.size(),
              t.max_asymmetry, t.min_lower_margin, t.min_upper_margin, ok ? "pass" : "FAIL");
  return ok ? 0 : 2;
}

int cmd_solve(const Options& o) {
  const ScenarioConfig c = load(o);
  const double eps = *std::max_element(c.eps.begin(), c.eps.end());
  const Grid fine = fine_grid(c, eps);
  const FieldPair f = build_source(c, fine);
  const MaxwellOperator op = fine_operator(build_medium(c, c.alpha), build_medium(c, c.mu), eps, fine);
  const ResolventSolution s = resolvent_solve(op, f, c.E, {c.fine_tolerance, c.max_iterations, true});
  const std::filesystem::path dir(out_dir(o, c));
  std::filesystem::create_directories(dir);
  write_field((dir / "solution_u.bin").string(), s.state.u);
  write_field((dir / "solution_v.bin").string(), s.state.v);
  nlohmann::ordered_json j;
  j["scenario"] = c.name;
  j["eps"] = eps;
  j["fine_resolution"] = fine.resolution()[0];
  j["residual"] = s.residual;
  j["iterations"] = s.iterations;
  write_text((dir / "solve.json").string(), j.dump(2) + "\n");
  std::printf("eps %g, fine %d^3: residual %.3e after %d iterations\n", eps, fine.resolution()[0], s.residual,
              s.iterations);
  return s.residual <= c.fine_tolerance ? 0 : 2;
}

int cmd_sweep(const Options& o) {
  const ScenarioConfig c = load(o);
  const ConvergenceReport r = run_scenario(c, o.workers);
  write_artifacts(r, out_dir(o, c));
  print_report(r);
  return r.passed() ? 0 : 2;
}

int cmd_report(const Options& o) {
  std::string dir = o.out;
  if (dir.empty()) dir = o.config.empty() ? builtin_scenario(o.scenario).output : load_config(o.config).output;
  const ConvergenceReport r = parse_report_json(read_text((std::filesystem::path(dir) / "report.json").string()));
  export_report(r, ReportFormat::json, dir);
  export_report(r, ReportFormat::csv, dir);
  print_report(r);
  return r.passed() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"two-scale Maxwell homogenization toolkit"};
  app.require_subcommand(1);
  Options o;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "scenario INI file")->check(CLI::ExistingFile);
    sub->add_option("--scenario", o.scenario, "builtin scenario when no --config is given")
        ->check(CLI::IsMember(scenario_names()));
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--workers", o.workers, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--order", o.order, "expansion order N")->check(CLI::NonNegativeNumber);
    sub->add_option("--eps", o.eps, "eps list, e.g. 1/4,1/8,1/16");
    sub->add_option("--seed", o.seed, "seed of the random source")->check(CLI::NonNegativeNumber);
  };
  struct Verb {
    const char* name;
    const char* help;
    int (*run)(const Options&);
  };
  const Verb verbs[] = {{"validate", "check the coefficient assumptions", cmd_validate},
                        {"tensors", "effective tensors only", cmd_tensors},
                        {"solve", "one fine-scale resolvent solve", cmd_solve},
                        {"sweep", "full convergence study", cmd_sweep},
                        {"report", "re-render report files from report.json", cmd_report}};
  int code = 1;
  for (const Verb& v : verbs) {
    CLI::App* sub = app.add_subcommand(v.name, v.help);
    common(sub);
    sub->callback([&, run = v.run] {
      try {
        code = run(o);
      } catch (const std::exception& e) {
        std::fprintf(stderr, "homcli %s: %s\n", v.name, e.what());
        code = 1;
      }
    });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int r = app.exit(e);
    return r == 0 ? 0 : 1;
  }
  return code;
}
