#include "otlab/plans.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>

namespace otlab {

namespace {

void check_plan_points(const DiscretePlan& plan, const PointSet& xs, const PointSet& ys) {
  if (xs.cols() != plan.n_rows() || ys.cols() != plan.n_cols())
    throw InvalidInput("plan shape does not match the atom counts");
}

void check_nonnegative(std::initializer_list<double> values) {
  for (double v : values)
    if (!(v >= 0) || !std::isfinite(v)) throw InvalidInput("bound inputs must be finite and nonnegative");
}

// Conditional masses p(k | j) = β_jk / (Σ_k β_jk) grouped by j.
std::vector<std::vector<std::pair<Eigen::Index, double>>> conditionals(const DiscretePlan& beta) {
  std::vector<std::vector<std::pair<Eigen::Index, double>>> out(
      static_cast<std::size_t>(beta.n_rows()));
  const Eigen::VectorXd rows = beta.row_sums();
  for (const auto& e : beta.entries())
    if (e.mass > 0) out[static_cast<std::size_t>(e.row)].emplace_back(e.col, e.mass / rows(e.row));
  return out;
}

void check_shared_marginal(const Eigen::VectorXd& left, const Eigen::VectorXd& right) {
  if (left.size() != right.size() || (left - right).cwiseAbs().maxCoeff() > 1e-10)
    throw InvalidInput("plans do not share the glued marginal");
}

}  // namespace

MapOnAtoms sample_map(const MapFn& T, const DiscreteMeasure& mu) {
  MapOnAtoms out{mu.points(), PointSet(mu.dim(), mu.size()), mu.weights()};
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    const Point y = T(mu.point(i));
    if (out.values.rows() != y.size()) out.values.resize(y.size(), mu.size());
    out.values.col(i) = y;
  }
  return out;
}

MapOnAtoms barycentric_projection(const DiscretePlan& plan, const PointSet& xs,
                                  const PointSet& ys) {
  check_plan_points(plan, xs, ys);
  const Eigen::VectorXd f = plan.row_sums();
  if (f.size() > 0 && !(f.minCoeff() > 0)) throw InvalidInput("plan has a zero row marginal");
  PointSet values = PointSet::Zero(ys.rows(), xs.cols());
  for (const auto& e : plan.entries()) values.col(e.row) += e.mass * ys.col(e.col);
  for (Eigen::Index i = 0; i < values.cols(); ++i) values.col(i) /= f(i);
  return {xs, std::move(values), f};
}

double plan_map_error(const MapFn& T, const DiscretePlan& plan, const PointSet& xs,
                      const PointSet& ys) {
  check_plan_points(plan, xs, ys);
  PointSet tx(ys.rows(), xs.cols());
  for (Eigen::Index i = 0; i < xs.cols(); ++i) tx.col(i) = T(xs.col(i));
  double total = 0;
  for (const auto& e : plan.entries()) total += e.mass * (tx.col(e.row) - ys.col(e.col)).squaredNorm();
  return total;
}

double projection_error(const MapOnAtoms& T_atoms, const MapOnAtoms& Th_atoms) {
  if (T_atoms.sites.rows() != Th_atoms.sites.rows() ||
      T_atoms.sites.cols() != Th_atoms.sites.cols() ||
      T_atoms.values.rows() != Th_atoms.values.rows() ||
      (T_atoms.sites - Th_atoms.sites).cwiseAbs().maxCoeff() > 0 ||
      (T_atoms.weights - Th_atoms.weights).cwiseAbs().maxCoeff() > 1e-12)
    throw InvalidInput("maps are sampled on different atoms");
  return (T_atoms.values - Th_atoms.values).colwise().squaredNorm().dot(T_atoms.weights);
}

double GluedMeasure::total_mass() const {
  double s = 0;
  for (const auto& a : atoms) s += a.mass;
  return s;
}

DiscretePlan GluedMeasure::projection(int a, int b) const {
  if (a < 0 || b <= a || b >= arity()) throw InvalidInput("invalid projection factors");
  std::map<std::pair<Eigen::Index, Eigen::Index>, double> acc;
  Eigen::VectorXd rows = Eigen::VectorXd::Zero(extents[static_cast<std::size_t>(a)]);
  Eigen::VectorXd cols = Eigen::VectorXd::Zero(extents[static_cast<std::size_t>(b)]);
  for (const auto& atom : atoms) {
    const auto i = atom.index[static_cast<std::size_t>(a)];
    const auto j = atom.index[static_cast<std::size_t>(b)];
    acc[{i, j}] += atom.mass;
    rows(i) += atom.mass;
    cols(j) += atom.mass;
  }
  std::vector<PlanEntry> entries;
  entries.reserve(acc.size());
  for (const auto& [key, mass] : acc) entries.push_back({key.first, key.second, mass});
  return DiscretePlan(std::move(rows), std::move(cols), std::move(entries));
}

GluedMeasure glue(const DiscretePlan& alpha, const DiscretePlan& gamma) {
  check_shared_marginal(alpha.col_sums(), gamma.row_sums());
  const auto cond = conditionals(gamma);
  GluedMeasure out;
  out.extents = {alpha.n_rows(), alpha.n_cols(), gamma.n_cols()};
  for (const auto& e : alpha.entries()) {
    if (e.mass <= 0) continue;
    for (const auto& [k, p] : cond[static_cast<std::size_t>(e.col)])
      out.atoms.push_back({{e.row, e.col, k, 0}, e.mass * p});
  }
  return out;
}

GluedMeasure glue(const GluedMeasure& glued, const DiscretePlan& beta) {
  if (glued.arity() != 3) throw InvalidInput("only a three-factor measure can be extended");
  Eigen::VectorXd last = Eigen::VectorXd::Zero(glued.extents[2]);
  for (const auto& a : glued.atoms) last(a.index[2]) += a.mass;
  check_shared_marginal(last, beta.row_sums());
  const auto cond = conditionals(beta);
  GluedMeasure out;
  out.extents = glued.extents;
  out.extents.push_back(beta.n_cols());
  for (const auto& a : glued.atoms)
    for (const auto& [l, p] : cond[static_cast<std::size_t>(a.index[2])])
      out.atoms.push_back({{a.index[0], a.index[1], a.index[2], l}, a.mass * p});
  return out;
}

StabilityCheck stability_check(const MapFn& T, const MapFn& S, const DensityMeasure& mu,
                               double lambda, const std::vector<double>& breakpoints) {
  std::vector<Region> pieces;
  if (breakpoints.size() < 2) {
    pieces.push_back(mu.support());
  } else {
    if (mu.dim() != 1) throw InvalidInput("breakpoints require a 1D measure");
    for (std::size_t k = 0; k + 1 < breakpoints.size(); ++k)
      pieces.push_back(Region::interval(breakpoints[k], breakpoints[k + 1]));
  }
  double st = 0, sx = 0, tx = 0;
  for (const auto& piece : pieces) {
    st += mu.integrate(piece, [&](const Point& x) { return (S(x) - T(x)).squaredNorm(); });
    sx += mu.integrate(piece, [&](const Point& x) { return (S(x) - x).squaredNorm(); });
    tx += mu.integrate(piece, [&](const Point& x) { return (T(x) - x).squaredNorm(); });
  }
  return {st, lambda * (sx - tx)};
}

double thm34_bound(double lambda, double e_alpha, double e_beta, double w2_mu_nu) {
  return entropic_plan_error_bound(lambda, e_alpha, e_beta, w2_mu_nu, 0);
}

double entropic_plan_error_bound(double lambda, double e_alpha, double e_beta, double w2_mu_nu, double eps_h) {
  check_nonnegative({lambda, e_alpha, e_beta, w2_mu_nu, eps_h});
  const double e = e_alpha + e_beta + eps_h / 2;
  return 2 * std::sqrt(lambda) * std::sqrt(e) * std::sqrt(w2_mu_nu + e) + lambda * e_alpha + e_beta;
}

double plan_distance_bound(double lambda, double e_alpha, double e_beta, double w2_mu_nu, double eps_h) {
  check_nonnegative({lambda, e_alpha, e_beta, w2_mu_nu, eps_h});
  const double e = e_alpha + e_beta + eps_h / 2;
  return 2 * std::sqrt(lambda) * std::sqrt(e) * std::sqrt(w2_mu_nu + e) + e_alpha + e_beta;
}

DiscreteMeasure plan_as_measure(const DiscretePlan& plan, const PointSet& xs, const PointSet& ys) {
  check_plan_points(plan, xs, ys);
  const auto n = static_cast<Eigen::Index>(plan.entries().size());
  PointSet pts(xs.rows() + ys.rows(), n);
  Eigen::VectorXd w(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto& e = plan.entries()[static_cast<std::size_t>(k)];
    pts.col(k) << xs.col(e.row), ys.col(e.col);
    w(k) = e.mass;
  }
  return DiscreteMeasure::normalized(std::move(pts), std::move(w));
}

TruncatedPlanMeasure truncated_plan_measure(const DiscretePlan& plan, const PointSet& xs,
                                            const PointSet& ys, double threshold,
                                            Eigen::Index max_atoms) {
  check_plan_points(plan, xs, ys);
  const DiscreteMeasure full = plan_as_measure(plan, xs, ys);
  std::vector<Eigen::Index> keep;
  double dropped = 0;
  for (Eigen::Index k = 0; k < full.size(); ++k) {
    if (full.weights()(k) >= threshold)
      keep.push_back(k);
    else
      dropped += full.weights()(k);
  }
  if (keep.empty() || max_atoms == 0) throw InvalidInput("truncation removes every entry");
  if (max_atoms > 0 && static_cast<Eigen::Index>(keep.size()) > max_atoms) {
    const auto heavier = [&](Eigen::Index a, Eigen::Index b) {
      return full.weights()(a) > full.weights()(b);
    };
    std::nth_element(keep.begin(), keep.begin() + max_atoms, keep.end(), heavier);
    for (auto it = keep.begin() + max_atoms; it != keep.end(); ++it) dropped += full.weights()(*it);
    keep.resize(static_cast<std::size_t>(max_atoms));
    std::sort(keep.begin(), keep.end());
  }
  PointSet pts(full.dim(), static_cast<Eigen::Index>(keep.size()));
  Eigen::VectorXd w(pts.cols());
  for (Eigen::Index k = 0; k < pts.cols(); ++k) {
    pts.col(k) = full.point(keep[static_cast<std::size_t>(k)]);
    w(k) = full.weights()(keep[static_cast<std::size_t>(k)]);
  }
  const double diam = (full.points().rowwise().maxCoeff() - full.points().rowwise().minCoeff()).norm();
  return {DiscreteMeasure::normalized(std::move(pts), std::move(w)), dropped,
          std::sqrt(dropped) * diam};
}

DiscreteMeasure graph_measure(const MapFn& T, const DiscreteMeasure& mu_h) {
  const MapOnAtoms m = sample_map(T, mu_h);
  PointSet pts(m.sites.rows() + m.values.rows(), m.sites.cols());
  pts << m.sites, m.values;
  return DiscreteMeasure(std::move(pts), m.weights);
}

double w2_plans_estimate(const DiscreteMeasure& gamma_ref, const DiscreteMeasure& gamma_h,
                         const ExactOptions& options) {
  if (gamma_ref.dim() != gamma_h.dim()) throw InvalidInput("plans live in different dimensions");
  const auto r = solve_exact(gamma_ref.weights(), gamma_h.weights(),
                             cost_matrix(gamma_ref.points(), gamma_h.points()), options);
  return std::sqrt(std::max(0.0, r.cost));
}

}  // namespace otlab
