#include "otlab/study.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "otlab/io.hpp"
#include "otlab/plans.hpp"
#include "otlab/semidiscrete.hpp"

namespace otlab {

namespace {

using nlohmann::json;

const char* scheme_name(SchemeKind k) { return k == SchemeKind::Semi ? "semi" : "fully"; }
const char* solver_name(LpSolver s) { return s == LpSolver::Exact ? "exact" : "entropic"; }
const char* placement_name(Placement p) { return p == Placement::Grid ? "grid" : "random"; }

template <typename E>
E parse_enum(const std::string& text, const char* a, E ea, const char* b, E eb, const char* what) {
  if (text == a) return ea;
  if (text == b) return eb;
  throw InvalidInput(std::string("unknown ") + what + ": " + text);
}

double box_volume(const Region& r) {
  const auto [lo, hi] = r.bounds();
  return (hi - lo).prod();
}

TestProblem load_problem(const StudyConfig& c) {
  TestProblem p = parse_problem(c.problem);
  if (c.quadrature_order > 0) {
    p.mu = DensityMeasure(p.mu.support(), p.mu.density_fn(), c.quadrature_order, p.mu.refinement(),
                          p.mu.bounds());
    p.nu = DensityMeasure(p.nu.support(), p.nu.density_fn(), c.quadrature_order, p.nu.refinement(),
                          p.nu.bounds());
  }
  return p;
}

PointSet place(const StudyConfig& c, const Region& support, int count, std::uint64_t seed) {
  return c.placement == Placement::Grid ? grid_sites(support, count)
                                        : random_sites(support, count, seed);
}

struct Surrogate {
  DiscreteMeasure graph;
  double allowance = kNaN;
};

StudyRecord semi_level(const StudyConfig& c, const TestProblem& p, int n, std::uint64_t seed) {
  const auto disc = voronoi_discretize(p.mu, place(c, p.mu.support(), n, seed));
  SemiDiscreteOptions opts;
  opts.tol_mass = c.semi_tol;
  const auto sol = solve_semidiscrete(disc.measure, p.nu, opts);
  const auto terms = decomposed_error(p.T, sol.decomposition);
  StudyRecord r;
  r.N = r.M = static_cast<long>(disc.measure.size());
  r.h = disc.covering_radius_h;
  r.w2_mu_muh = disc.w2_exact;
  r.w2_nu_nuh = 0;
  r.eps_h = 0;
  r.plan_error_sq = semidiscrete_plan_error(p.T, sol.decomposition, p.nu);
  // The barycentric map of a Laguerre decomposition sends x_i to m_i.
  r.proj_error_sq = terms.bary_term;
  r.bary_term = terms.bary_term;
  r.moment_term = terms.moment_term;
  r.diam_term = terms.diam_term;
  r.eh_bound = eh_semi_bound(p.lambda, p.w2_reference, r.w2_mu_muh);
  return r;
}

StudyRecord fully_level(const StudyConfig& c, const TestProblem& p, int n, std::uint64_t seed,
                        const Surrogate& surrogate, std::string& warning) {
  const auto dmu = voronoi_discretize(p.mu, place(c, p.mu.support(), n, seed));
  // ν_h uses the same site density as μ_h.
  PointSet ys;
  if (c.placement == Placement::Grid) {
    ys = grid_sites_with_spacing(p.nu.support(), std::pow(box_volume(p.mu.support()) / n, 1.0 / p.dim));
  } else {
    const int m = std::max(1, static_cast<int>(std::lround(n * p.nu.support().measure() /
                                                           p.mu.support().measure())));
    ys = random_sites(p.nu.support(), m, seed ^ 0x9e3779b97f4a7c15ULL);
  }
  const auto dnu = voronoi_discretize(p.nu, ys);
  const PointSet& xs = dmu.measure.points();
  const PointSet& yk = dnu.measure.points();

  SolveReport sol;
  double eps = 0;
  if (c.solver == LpSolver::Exact) {
    sol = solve_exact(dmu.measure, dnu.measure);
  } else {
    EntropicOptions opts;
    const double h = std::max(dmu.covering_radius_h, dnu.covering_radius_h);
    opts.regularization = c.reg_scaling == RegScaling::HSquared ? c.regularization * h * h
                                                                : c.regularization;
    sol = solve_entropic(dmu.measure, dnu.measure, opts);
    eps = std::max(0.0, sol.eps_h.value_or(0.0));
  }

  StudyRecord r;
  r.N = static_cast<long>(dmu.measure.size());
  r.M = static_cast<long>(dnu.measure.size());
  r.h = std::max(dmu.covering_radius_h, dnu.covering_radius_h);
  r.w2_mu_muh = dmu.w2_exact;
  r.w2_nu_nuh = dnu.w2_exact;
  r.eps_h = eps;
  r.plan_error_sq = plan_map_error(p.T, sol.plan, xs, yk);
  r.proj_error_sq =
      projection_error(sample_map(p.T, dmu.measure), barycentric_projection(sol.plan, xs, yk));
  r.eh_bound = c.solver == LpSolver::Exact
                   ? thm34_bound(p.lambda, r.w2_mu_muh, r.w2_nu_nuh, p.w2_reference)
                   : entropic_plan_error_bound(p.lambda, r.w2_mu_muh, r.w2_nu_nuh, p.w2_reference, eps);
  try {
    if (c.solver == LpSolver::Exact) {
      r.w2_plans = w2_plans_estimate(surrogate.graph, plan_as_measure(sol.plan, xs, yk));
    } else {
      const ExactOptions lp;
      const auto budget = static_cast<Eigen::Index>(lp.max_product / static_cast<double>(surrogate.graph.size()));
      const auto t = truncated_plan_measure(sol.plan, xs, yk, 1e-12, budget);
      r.w2_plans = w2_plans_estimate(surrogate.graph, t.measure) + t.distance_allowance;
    }
  } catch (const InvalidInput& e) {
    warning = std::string("w2_plans skipped: ") + e.what();
  }
  return r;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_number(const std::string& s) {
  if (s == "nan") return kNaN;
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw InvalidInput("not a number: " + s);
  }
  if (used != s.size()) throw InvalidInput("not a number: " + s);
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char ch = line[k];
    if (quoted) {
      if (ch == '"' && k + 1 < line.size() && line[k + 1] == '"') {
        out.back() += '"';
        ++k;
      } else if (ch == '"') {
        quoted = false;
      } else {
        out.back() += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.emplace_back();
    } else if (ch != '\r') {
      out.back() += ch;
    }
  }
  if (quoted) throw InvalidInput("unterminated quote in CSV line");
  return out;
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

void set_record_value(StudyRecord& r, const std::string& field, double v) {
  if (field == "level") r.level = static_cast<int>(v);
  else if (field == "N") r.N = static_cast<long>(v);
  else if (field == "M") r.M = static_cast<long>(v);
  else if (field == "h") r.h = v;
  else if (field == "w2_mu_muh") r.w2_mu_muh = v;
  else if (field == "w2_nu_nuh") r.w2_nu_nuh = v;
  else if (field == "eps_h") r.eps_h = v;
  else if (field == "plan_error_sq") r.plan_error_sq = v;
  else if (field == "proj_error_sq") r.proj_error_sq = v;
  else if (field == "bary_term") r.bary_term = v;
  else if (field == "moment_term") r.moment_term = v;
  else if (field == "diam_term") r.diam_term = v;
  else if (field == "eh_bound") r.eh_bound = v;
  else if (field == "w2_plans") r.w2_plans = v;
  else if (field == "wall_ms") r.wall_ms = v;
  else throw InvalidInput("unknown record field: " + field);
}

json record_json(const StudyRecord& r) {
  json j{{"problem", r.problem}};
  for (const auto& c : record_columns())
    if (c != "problem") j[c] = record_value(r, c);
  return j;
}

StudyRecord record_from(const json& j) {
  StudyRecord r;
  r.problem = j.at("problem").get<std::string>();
  for (const auto& c : record_columns()) {
    if (c == "problem") continue;
    const auto& v = j.at(c);
    set_record_value(r, c, v.is_null() ? kNaN : v.get<double>());
  }
  return r;
}

json config_json(const StudyConfig& c) {
  json out{{"problem", c.problem},
           {"scheme", scheme_name(c.scheme)},
           {"levels", c.levels},
           {"solver", solver_name(c.solver)},
           {"regularization", c.regularization},
           {"regularization_scaling", c.reg_scaling == RegScaling::Fixed ? "fixed" : "h2"},
           {"semi_tol", c.semi_tol},
           {"placement", placement_name(c.placement)},
           {"seed", c.seed},
           {"repeats", c.repeats},
           {"quadrature_order", c.quadrature_order},
           {"threads", c.threads}};
  json output = json::object();
  if (!c.csv_path.empty()) output["csv"] = c.csv_path;
  if (!c.json_path.empty()) output["json"] = c.json_path;
  out["output"] = output;
  return out;
}

StudyConfig config_from(const json& j) {
  static const std::vector<std::string> keys = {
      "problem", "scheme",  "levels",           "solver",  "regularization", "regularization_scaling", "semi_tol",
      "placement", "seed", "repeats", "quadrature_order", "threads", "output"};
  if (!j.is_object()) throw InvalidInput("study config must be a JSON object");
  for (const auto& [k, v] : j.items())
    if (std::find(keys.begin(), keys.end(), k) == keys.end())
      throw InvalidInput("unknown study config key: " + k);
  StudyConfig c;
  c.problem = j.at("problem").get<std::string>();
  c.levels = j.at("levels").get<std::vector<int>>();
  if (j.contains("scheme"))
    c.scheme = parse_enum(j["scheme"].get<std::string>(), "semi", SchemeKind::Semi, "fully",
                          SchemeKind::Fully, "scheme");
  if (j.contains("solver"))
    c.solver = parse_enum(j["solver"].get<std::string>(), "exact", LpSolver::Exact, "entropic",
                          LpSolver::Entropic, "solver");
  if (j.contains("placement"))
    c.placement = parse_enum(j["placement"].get<std::string>(), "grid", Placement::Grid, "random",
                             Placement::Random, "placement");
  c.regularization = j.value("regularization", c.regularization);
  if (j.contains("regularization_scaling"))
    c.reg_scaling = parse_enum(j["regularization_scaling"].get<std::string>(), "fixed",
                               RegScaling::Fixed, "h2", RegScaling::HSquared, "regularization scaling");
  c.semi_tol = j.value("semi_tol", c.semi_tol);
  c.seed = j.value("seed", c.seed);
  c.repeats = j.value("repeats", c.repeats);
  c.quadrature_order = j.value("quadrature_order", c.quadrature_order);
  c.threads = j.value("threads", c.threads);
  if (j.contains("output")) {
    const auto& o = j["output"];
    c.csv_path = o.value("csv", std::string());
    c.json_path = o.value("json", std::string());
  }
  c.validate();
  return c;
}

}  // namespace

void StudyConfig::validate() const {
  if (levels.size() < 3) throw InvalidInput("a study needs at least three levels");
  for (std::size_t k = 0; k < levels.size(); ++k) {
    if (levels[k] < 1) throw InvalidInput("levels must be positive");
    if (k > 0 && levels[k] <= levels[k - 1]) throw InvalidInput("levels must be strictly increasing");
  }
  if (!(regularization > 0)) throw InvalidInput("regularization must be positive");
  if (!(semi_tol > 0)) throw InvalidInput("semi_tol must be positive");
  if (repeats < 1 || repeats % 2 == 0) throw InvalidInput("repeats must be a positive odd number");
  if (quadrature_order < 0 || threads < 0) throw InvalidInput("negative quadrature order or threads");
  parse_problem(problem);
}

StudyConfig StudyConfig::from_json(const std::string& text) {
  try {
    return config_from(json::parse(text));
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("malformed study config: ") + e.what());
  }
}

std::string StudyConfig::to_json() const { return config_json(*this).dump(2) + "\n"; }

StudyResult run_study(const StudyConfig& config) {
  config.validate();
  const TestProblem p = load_problem(config);
  StudyResult result;
  result.config = config;

  Surrogate surrogate;
  if (config.scheme == SchemeKind::Fully) {
    const auto fine = voronoi_discretize(p.mu, grid_sites(p.mu.support(), 4 * config.levels.back()));
    surrogate.graph = graph_measure(p.T, fine.measure);
    surrogate.allowance = std::sqrt(1 + p.lambda * p.lambda) * fine.w2_exact;
    result.surrogate_allowance = surrogate.allowance;
  }

  const int repeats = config.placement == Placement::Random ? config.repeats : 1;
  const std::size_t n_jobs = config.levels.size() * static_cast<std::size_t>(repeats);
  std::vector<StudyRecord> runs(n_jobs);
  std::vector<std::string> errors(n_jobs), warnings(n_jobs);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t job; (job = next.fetch_add(1)) < n_jobs;) {
      const std::size_t level = job / static_cast<std::size_t>(repeats);
      const std::uint64_t seed = config.seed + job % static_cast<std::size_t>(repeats);
      const int n = config.levels[level];
      const auto start = std::chrono::steady_clock::now();
      try {
        runs[job] = config.scheme == SchemeKind::Semi ? semi_level(config, p, n, seed)
                                                      : fully_level(config, p, n, seed, surrogate, warnings[job]);
      } catch (const std::exception& e) {
        errors[job] = e.what();
        runs[job] = StudyRecord{};
        runs[job].N = n;
      }
      runs[job].problem = p.id;
      runs[job].level = static_cast<int>(level);
      runs[job].wall_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    }
  };
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t n_threads =
      std::min<std::size_t>(n_jobs, config.threads > 0 ? static_cast<std::size_t>(config.threads) : hw);
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  for (std::size_t level = 0; level < config.levels.size(); ++level) {
    std::vector<std::size_t> ok;
    for (int k = 0; k < repeats; ++k) {
      const std::size_t job = level * static_cast<std::size_t>(repeats) + static_cast<std::size_t>(k);
      if (!warnings[job].empty())
        result.warnings.push_back("level " + std::to_string(level) + " (N = " +
                                  std::to_string(config.levels[level]) + "): " + warnings[job]);
      if (errors[job].empty())
        ok.push_back(job);
      else
        result.failures.push_back("level " + std::to_string(level) + " (N = " +
                                  std::to_string(config.levels[level]) + "): " + errors[job]);
    }
    if (ok.empty()) {
      result.records.push_back(runs[level * static_cast<std::size_t>(repeats)]);
      continue;
    }
    std::sort(ok.begin(), ok.end(), [&](std::size_t a, std::size_t b) {
      return runs[a].plan_error_sq < runs[b].plan_error_sq;
    });
    result.records.push_back(runs[ok[ok.size() / 2]]);
  }
  return result;
}

const std::vector<std::string>& record_columns() {
  static const std::vector<std::string> cols = {
      "problem",       "level",         "N",         "M",           "h",
      "w2_mu_muh",     "w2_nu_nuh",     "eps_h",     "plan_error_sq", "proj_error_sq",
      "bary_term",     "moment_term",   "diam_term", "eh_bound",    "w2_plans",
      "wall_ms"};
  return cols;
}

double record_value(const StudyRecord& r, const std::string& field) {
  if (field == "level") return r.level;
  if (field == "N") return static_cast<double>(r.N);
  if (field == "M") return static_cast<double>(r.M);
  if (field == "h") return r.h;
  if (field == "w2_mu_muh") return r.w2_mu_muh;
  if (field == "w2_nu_nuh") return r.w2_nu_nuh;
  if (field == "eps_h") return r.eps_h;
  if (field == "plan_error_sq") return r.plan_error_sq;
  if (field == "proj_error_sq") return r.proj_error_sq;
  if (field == "bary_term") return r.bary_term;
  if (field == "moment_term") return r.moment_term;
  if (field == "diam_term") return r.diam_term;
  if (field == "eh_bound") return r.eh_bound;
  if (field == "w2_plans") return r.w2_plans;
  if (field == "wall_ms") return r.wall_ms;
  throw InvalidInput("unknown record field: " + field);
}

RateFit fit_rate(const std::vector<StudyRecord>& records, const std::string& field) {
  RateFit fit;
  std::vector<double> xs, ys;
  for (const auto& r : records) {
    const double v = record_value(r, field);
    if (!(v > 0) || !(r.h > 0)) {
      fit.warnings.push_back("level " + std::to_string(r.level) + ": " + field + " = " +
                             format_number(v) + " excluded");
      continue;
    }
    xs.push_back(std::log(r.h));
    ys.push_back(0.5 * std::log(v));
  }
  fit.used = static_cast<int>(xs.size());
  if (fit.used < 3) throw InvalidInput("fit_rate needs at least three positive values of " + field);

  const double n = fit.used;
  double mx = 0, my = 0;
  for (int k = 0; k < fit.used; ++k) {
    mx += xs[static_cast<std::size_t>(k)] / n;
    my += ys[static_cast<std::size_t>(k)] / n;
  }
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sxx += (xs[k] - mx) * (xs[k] - mx);
    sxy += (xs[k] - mx) * (ys[k] - my);
    syy += (ys[k] - my) * (ys[k] - my);
  }
  if (!(sxx > 0)) throw InvalidInput("fit_rate needs at least two distinct h values");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const double e = ys[k] - (fit.intercept + fit.slope * xs[k]);
    ss_res += e * e;
  }
  fit.residual = std::sqrt(ss_res / n);
  // A constant field has no explained variance.
  fit.r_squared = syy > 0 ? 1 - ss_res / syy : 0;
  fit.flagged = fit.r_squared < 0.9;
  return fit;
}

std::string records_to_csv(const std::vector<StudyRecord>& records) {
  std::ostringstream os;
  const auto& cols = record_columns();
  for (std::size_t k = 0; k < cols.size(); ++k) os << (k ? "," : "") << cols[k];
  os << '\n';
  for (const auto& r : records) {
    os << csv_quote(r.problem) << ',' << r.level << ',' << r.N << ',' << r.M;
    for (std::size_t k = 4; k < cols.size(); ++k) os << ',' << format_number(record_value(r, cols[k]));
    os << '\n';
  }
  return os.str();
}

std::vector<StudyRecord> records_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput("empty CSV");
  const auto header = split_csv_line(line);
  if (header != record_columns()) throw InvalidInput("unexpected CSV header");
  std::vector<StudyRecord> out;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) throw InvalidInput("CSV row has the wrong number of fields");
    StudyRecord r;
    r.problem = fields[0];
    for (std::size_t k = 1; k < fields.size(); ++k) set_record_value(r, header[k], parse_number(fields[k]));
    out.push_back(std::move(r));
  }
  return out;
}

std::string result_to_json(const StudyResult& result) {
  json records = json::array();
  for (const auto& r : result.records) records.push_back(record_json(r));
  json out{{"config", config_json(result.config)},
           {"records", records},
           {"surrogate_allowance", result.surrogate_allowance},
           {"warnings", result.warnings},
           {"failures", result.failures}};
  return out.dump(2) + "\n";
}

StudyResult result_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    StudyResult r;
    r.config = config_from(j.at("config"));
    for (const auto& rec : j.at("records")) r.records.push_back(record_from(rec));
    const auto& a = j.at("surrogate_allowance");
    r.surrogate_allowance = a.is_null() ? kNaN : a.get<double>();
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    r.failures = j.at("failures").get<std::vector<std::string>>();
    return r;
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("malformed study result: ") + e.what());
  }
}

void emit(const StudyResult& result) {
  if (!result.config.csv_path.empty()) write_text(records_to_csv(result.records), result.config.csv_path);
  if (!result.config.json_path.empty()) write_text(result_to_json(result), result.config.json_path);
}

BoundCheck check_bounds(const StudyResult& result) {
  const TestProblem p = parse_problem(result.config.problem);
  BoundCheck out;
  auto fail = [&](const StudyRecord& r, const std::string& what) {
    out.violations.push_back("level " + std::to_string(r.level) + " (N = " + std::to_string(r.N) +
                             "): " + what);
  };
  for (const auto& r : result.records) {
    if (std::isnan(r.plan_error_sq)) continue;
    // Relative slack for quadrature roundoff in cases where the bound is attained.
    if (!(r.plan_error_sq <= r.eh_bound * r.eh_bound * (1 + 1e-12)))
      fail(r, "plan_error_sq " + format_number(r.plan_error_sq) + " > eh_bound² " +
                  format_number(r.eh_bound * r.eh_bound));
    if (!(r.proj_error_sq >= 0 && r.proj_error_sq <= r.plan_error_sq + 1e-12))
      fail(r, "proj_error_sq " + format_number(r.proj_error_sq) + " outside [0, plan_error_sq]");
    if (result.config.scheme == SchemeKind::Fully) {
      const double b = plan_distance_bound(p.lambda, r.w2_mu_muh, r.w2_nu_nuh, p.w2_reference, r.eps_h) +
                       result.surrogate_allowance;
      if (!(r.w2_plans <= b))
        fail(r, "w2_plans " + format_number(r.w2_plans) + " > plan_distance_bound + allowance " + format_number(b));
    }
  }
  return out;
}

}  // namespace otlab
