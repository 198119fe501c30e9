#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "otlab/testproblems.hpp"

namespace otlab {

enum class SchemeKind { Semi, Fully };
enum class LpSolver { Exact, Entropic };
enum class Placement { Grid, Random };
enum class RegScaling { Fixed, HSquared };

struct StudyConfig {
  /// Problem string accepted by parse_problem.
  std::string problem = "tp1d-affine";
  SchemeKind scheme = SchemeKind::Fully;
  /// Site counts of μ_h, strictly increasing, at least three.
  std::vector<int> levels;
  LpSolver solver = LpSolver::Exact;
  /// Entropic regularization; with HSquared scaling the level uses
  /// regularization · h².
  double regularization = 1e-3;
  RegScaling reg_scaling = RegScaling::Fixed;
  double semi_tol = 1e-10;
  Placement placement = Placement::Grid;
  std::uint64_t seed = 0;
  /// Random placement runs this many seeds and keeps the median record.
  int repeats = 5;
  /// When positive, overrides the Gauss order of both densities.
  int quadrature_order = 0;
  /// Zero means one worker per hardware thread.
  int threads = 0;
  std::string csv_path;
  std::string json_path;

  /// Throws InvalidInput on a malformed or inconsistent document.
  static StudyConfig from_json(const std::string& text);
  std::string to_json() const;
  void validate() const;
};

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// One refinement level. Fields that do not apply to a scheme are NaN: the
/// Laguerre terms for fully-discrete runs, w2_plans for semi-discrete runs.
struct StudyRecord {
  std::string problem;
  int level = 0;
  long N = 0;
  /// Atoms of ν_h; for semi-discrete runs the number of Laguerre cells.
  long M = 0;
  double h = kNaN;
  double w2_mu_muh = kNaN;
  double w2_nu_nuh = kNaN;
  double eps_h = kNaN;
  double plan_error_sq = kNaN;
  double proj_error_sq = kNaN;
  double bary_term = kNaN;
  double moment_term = kNaN;
  double diam_term = kNaN;
  double eh_bound = kNaN;
  /// For entropic plans: the distance to the plan without entries below
  /// 1e-12, cut to the largest entries the LP size cap admits, plus the
  /// truncation allowance, so it stays an upper estimate.
  double w2_plans = kNaN;
  double wall_ms = kNaN;
};

struct StudyResult {
  StudyConfig config;
  std::vector<StudyRecord> records;
  /// √(1 + λ²) W₂(μ, μ_h') for the fine surrogate μ_h' of the plan
  /// comparison; NaN for semi-discrete runs.
  double surrogate_allowance = kNaN;
  /// Non-fatal notes, e.g. a plan too large for the plan distance.
  std::vector<std::string> warnings;
  /// Levels that failed, with the reason. Their records hold NaN values.
  std::vector<std::string> failures;
};

StudyResult run_study(const StudyConfig& config);

/// Record fields by CSV column name.
const std::vector<std::string>& record_columns();
double record_value(const StudyRecord& r, const std::string& field);

struct RateFit {
  double slope = kNaN;
  double intercept = kNaN;
  /// Root mean square of the log-log residuals.
  double residual = kNaN;
  double r_squared = kNaN;
  /// Set when r² < 0.9.
  bool flagged = false;
  int used = 0;
  std::vector<std::string> warnings;
};

/// Least-squares fit of log √field against log h. Rows with nonpositive or
/// NaN values are skipped with a warning; fewer than three usable rows
/// throw InvalidInput.
RateFit fit_rate(const std::vector<StudyRecord>& records, const std::string& field);

std::string records_to_csv(const std::vector<StudyRecord>& records);
std::vector<StudyRecord> records_from_csv(const std::string& text);
std::string result_to_json(const StudyResult& result);
StudyResult result_from_json(const std::string& text);

/// Writes CSV and/or JSON to the configured paths.
void emit(const StudyResult& result);

struct BoundCheck {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

/// Row-wise checks: plan_error_sq <= eh_bound², proj_error_sq <= plan_error_sq
/// (1e-12), and for fully-discrete runs w2_plans <= plan_distance_bound + allowance.
BoundCheck check_bounds(const StudyResult& result);

}  // namespace otlab
