#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "otlab/io.hpp"
#include "otlab/lp_transport.hpp"
#include "otlab/semidiscrete.hpp"
#include "otlab/study.hpp"
#include "otlab/testproblems.hpp"

using namespace otlab;

namespace {

constexpr int kBoundViolation = 2;

int discretize(const std::string& problem, const std::string& side, int count,
               const std::string& placement, std::uint64_t seed, const std::string& out) {
  const TestProblem p = parse_problem(problem);
  const DensityMeasure& m = side == "nu" ? p.nu : p.mu;
  const PointSet sites =
      placement == "random" ? random_sites(m.support(), count, seed) : grid_sites(m.support(), count);
  const auto d = voronoi_discretize(m, sites);
  write_measure(d.measure, out);
  std::printf("atoms %ld  covering_radius %.17g  w2 %.17g\n", static_cast<long>(d.measure.size()),
              d.covering_radius_h, d.w2_exact);
  return 0;
}

int solve_lp(const std::string& mu_path, const std::string& nu_path, const std::string& solver,
             double reg, const std::string& out) {
  const auto mu = read_measure(mu_path), nu = read_measure(nu_path);
  SolveReport r;
  if (solver == "exact") {
    r = solve_exact(mu, nu);
  } else {
    EntropicOptions opts;
    opts.regularization = reg;
    r = solve_entropic(mu, nu, opts);
  }
  if (!out.empty()) write_plan(r.plan, out);
  std::printf("cost %.17g  iterations %ld  wall_ms %.3f", r.cost, r.iterations, r.wall_ms);
  if (r.eps_h) std::printf("  eps_h %.17g", *r.eps_h);
  std::printf("%s\n", r.converged ? "" : "  (not converged)");
  return 0;
}

int solve_semi(const std::string& mu_path, const std::string& problem, double tol,
               const std::string& out) {
  const auto mu = read_measure(mu_path);
  const TestProblem p = parse_problem(problem);
  SemiDiscreteOptions opts;
  opts.tol_mass = tol;
  const auto r = solve_semidiscrete(mu, p.nu, opts);
  const std::string text = semidiscrete_to_json(r);
  if (out.empty())
    std::cout << text;
  else
    write_text(text, out);
  std::fprintf(stderr, "iterations %ld  residual %.3g  wall_ms %.3f\n", r.iterations, r.residual,
               r.wall_ms);
  return 0;
}

void print_fit(const std::vector<StudyRecord>& records, const std::string& field) {
  const auto fit = fit_rate(records, field);
  for (const auto& w : fit.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  std::printf("%s: slope %.4f  intercept %.4f  residual %.3g  r2 %.4f  points %d%s\n",
              field.c_str(), fit.slope, fit.intercept, fit.residual, fit.r_squared, fit.used,
              fit.flagged ? "  (poor fit)" : "");
}

int study(const std::string& config_path) {
  const auto config = StudyConfig::from_json(read_text(config_path));
  const auto result = run_study(config);
  emit(result);
  std::cout << records_to_csv(result.records);
  for (const auto& w : result.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  for (const auto& f : result.failures) std::fprintf(stderr, "failed %s\n", f.c_str());
  const bool fully = config.scheme == SchemeKind::Fully;
  for (const char* field : {"plan_error_sq", "proj_error_sq"}) {
    try {
      print_fit(result.records, field);
    } catch (const InvalidInput& e) {
      std::fprintf(stderr, "%s\n", e.what());
    }
  }
  if (fully) std::printf("surrogate allowance %.6g\n", result.surrogate_allowance);
  const auto check = check_bounds(result);
  for (const auto& v : check.violations) std::fprintf(stderr, "bound violation: %s\n", v.c_str());
  if (!check.ok()) return kBoundViolation;
  return result.failures.empty() ? 0 : 1;
}

int rates(const std::string& path, const std::vector<std::string>& fields) {
  const auto records = records_from_csv(read_text(path));
  for (const auto& f : fields) print_fit(records, f);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal transport discretization and convergence laboratory"};
  app.require_subcommand(1);

  std::string problem = "tp1d-affine", side = "mu", placement = "grid", out;
  int count = 16;
  std::uint64_t seed = 0;
  auto* disc = app.add_subcommand("discretize", "Voronoi-discretize a test-problem density");
  disc->add_option("--problem", problem, "problem string, e.g. tp1d-sine:eps=0.5");
  disc->add_option("--side", side, "mu or nu")->check(CLI::IsMember({"mu", "nu"}));
  disc->add_option("-n,--sites", count, "number of sites")->check(CLI::PositiveNumber);
  disc->add_option("--placement", placement, "grid or random")->check(CLI::IsMember({"grid", "random"}));
  disc->add_option("--seed", seed, "seed for random placement");
  disc->add_option("--out", out, "output measure JSON")->required();

  std::string mu_path, nu_path, solver = "exact";
  double reg = 1e-3, tol = 1e-10;
  auto* lp = app.add_subcommand("solve-lp", "Solve a discrete transport problem");
  lp->add_option("--mu", mu_path, "source measure JSON")->required()->check(CLI::ExistingFile);
  lp->add_option("--nu", nu_path, "target measure JSON")->required()->check(CLI::ExistingFile);
  lp->add_option("--solver", solver, "exact or entropic")->check(CLI::IsMember({"exact", "entropic"}));
  lp->add_option("--reg", reg, "entropic regularization")->check(CLI::PositiveNumber);
  lp->add_option("--out", out, "output plan file");

  auto* semi = app.add_subcommand("solve-semi", "Solve a semi-discrete problem against a test density");
  semi->add_option("--mu", mu_path, "discrete source measure JSON")->required()->check(CLI::ExistingFile);
  semi->add_option("--problem", problem, "problem whose nu is the target");
  semi->add_option("--tol", tol, "cell mass tolerance")->check(CLI::PositiveNumber);
  semi->add_option("--out", out, "output JSON (default stdout)");

  std::string config_path;
  auto* st = app.add_subcommand("study", "Run a convergence study");
  st->add_option("--config", config_path, "study config JSON")->required()->check(CLI::ExistingFile);

  std::string in_path;
  std::vector<std::string> fields{"plan_error_sq"};
  auto* rt = app.add_subcommand("rates", "Fit convergence rates from a study CSV");
  rt->add_option("--in", in_path, "study CSV")->required()->check(CLI::ExistingFile);
  rt->add_option("--field", fields, "record field(s) to fit");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*disc) return discretize(problem, side, count, placement, seed, out);
    if (*lp) return solve_lp(mu_path, nu_path, solver, reg, out);
    if (*semi) return solve_semi(mu_path, problem, tol, out);
    if (*st) return study(config_path);
    if (*rt) return rates(in_path, fields);
  } catch (const SolverError& e) {
    std::fprintf(stderr, "solver error: %s (best residual %.3g)\n", e.what(), e.best_residual());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
