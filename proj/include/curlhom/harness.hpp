#pragma once

#include "curlhom/expansion.hpp"

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace curlhom {

/// Thrown for malformed or out-of-range configuration.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct MediumConfig {
  std::string family = "identity";
  BuiltinParams params;
};

struct SourceConfig {
  /// two_mode: (0, sin 2pi x0, cos 2pi x0) and (cos 2pi x1, 0, sin 2pi x1);
  /// random: random_solenoidal_pair(seed, max_mode). Both are Leray-projected
  /// and scaled to unit L2 norm on each grid.
  std::string kind = "two_mode";
  std::uint64_t seed = 1;
  int max_mode = 3;
};

struct ScenarioConfig {
  std::string name = "identity";
  std::string label = "artifact scenario";
  MediumConfig alpha, mu;
  /// Box side L, support radius R and blend radius of both media. Only the
  /// unit cubic lattice is accepted.
  double side = 1.0;
  double support_radius = 0.45;
  double blend_radius = 0.3;
  int cell = 8;
  int macro = 32;
  DerivativeRule macro_rule = DerivativeRule::central4;
  /// Fine grid resolution is nodes_per_period * L / eps.
  int nodes_per_period = 8;
  Complex E{0.0, 1.0};
  SourceConfig source;
  std::vector<double> eps{0.25, 0.125, 0.0625};
  int order = 0;          // expansion order N
  int through_order = 0;  // orders kept in the error functional
  bool delta = false;     // build the divergence corrector for N >= 1
  double fine_tolerance = 1e-10;
  double hat_tolerance = 1e-12;
  double cell_tolerance = 1e-11;
  int max_iterations = 5000;
  std::string output = "out";

  bool operator==(const ScenarioConfig&) const;
};

/// Throws ConfigError when an invariant fails: Im E > 0, eps in (0, 1) with
/// integer 1/eps, L > 2R, integer periods per box, and so on.
void validate(const ScenarioConfig& c);

/// INI text with sections [scenario] [alpha] [mu] [geometry] [grids]
/// [solver] [source] [sweep] [output]. Unknown sections or keys throw.
ScenarioConfig parse_config(const std::string& text);
ScenarioConfig load_config(const std::string& path);
/// Every key, fixed order, 17 significant digits.
std::string serialize_config(const ScenarioConfig& c);

/// The shipped scenarios: identity, laminate, inclusion. They are this
/// artifact's own test media, not taken from the literature.
std::vector<std::string> scenario_names();
ScenarioConfig builtin_scenario(const std::string& name);

CoefficientModel build_medium(const ScenarioConfig& c, const MediumConfig& m);
/// Source on any grid of the scenario box.
FieldPair build_source(const ScenarioConfig& c, const Grid& grid);
Grid macro_grid(const ScenarioConfig& c);
Grid cell_grid(const ScenarioConfig& c);
Grid fine_grid(const ScenarioConfig& c, double eps);

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct TermSummary {
  int n = 0;
  double compatibility = 0.0;
  double curl_residual = 0.0, div_residual = 0.0, orthogonality = 0.0;
  double support_defect = 0.0;
  double hat_residual = 0.0;
  int hat_iterations = 0;
  bool truncated = false;
  bool operator==(const TermSummary&) const = default;
};

/// Missing numbers (stage not reached) are NaN.
struct ReportRow {
  double eps = 0.0;
  int fine_resolution = 0;
  bool ok = false;
  std::string failed_stage, message;
  double fine_residual = NAN;
  int fine_iterations = 0;
  double hom_residual = NAN;
  int hom_iterations = 0;
  double error = NAN;               // estimate_error through through_order
  double relative_error = NAN;      // error / ||fine solution||
  double divergence_before = NAN;   // partial sum, before delta
  double divergence_after = NAN;
  double delta_ratio = NAN;         // worst of the u and v correctors
  double delta_bound = NAN;
  double delta_defect = NAN;
  bool operator==(const ReportRow&) const;
};

struct RateFit {
  bool ok = false;
  std::string reason;  // why no fit was made
  int points = 0;
  double slope = NAN, intercept = NAN, half_width = NAN;
  bool operator==(const RateFit&) const;
};

struct ConvergenceReport {
  ScenarioConfig config;
  std::string failed_stage, message;  // shared stages (media, tensors, expansion)
  double lambda_u_min = NAN, lambda_u_max = NAN;  // eigenvalue range over macro nodes
  double lambda_v_min = NAN, lambda_v_max = NAN;
  std::size_t cell_nodes = 0;  // macro nodes with a nontrivial cell problem
  std::vector<TermSummary> terms;
  double next_compatibility = NAN;  // order N + 1 conditions
  std::vector<ReportRow> rows;      // eps descending
  RateFit fit;
  /// Pass flags by name: rows, rate, closure, delta.
  std::map<std::string, bool> flags;
  /// Wall-clock per stage; exported separately and never compared.
  std::vector<StageTiming> timings;

  bool passed() const;
  bool operator==(const ConvergenceReport&) const;
};

/// Least squares of log error against log eps. Needs >= 3 rows with
/// positive, not all equal errors; otherwise ok = false with a reason.
RateFit fit_rate(const std::vector<double>& eps, const std::vector<double>& errors);

/// Runs the whole study. Stage failures are recorded, never thrown; rows
/// are computed concurrently on up to `workers` threads and do not depend
/// on it.
ConvergenceReport run_scenario(const ScenarioConfig& config, int workers = 1);

/// JSON document of the report (without timings).
std::string report_json(const ConvergenceReport& r);
ConvergenceReport parse_report_json(const std::string& text);
/// One line per eps row; the header is always written.
std::string report_csv(const ConvergenceReport& r);
std::string timings_json(const ConvergenceReport& r);

enum class ReportFormat { json, csv };
/// Writes report.json or report.csv into `dir` (created when missing) and
/// returns the path. I/O failures throw std::runtime_error naming the path.
std::string export_report(const ConvergenceReport& r, ReportFormat format, const std::string& dir);
/// report.json, report.csv, timings.json and scenario.ini.
void write_artifacts(const ConvergenceReport& r, const std::string& dir);

}  // namespace curlhom
