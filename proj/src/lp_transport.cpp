#include "otlab/lp_transport.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace otlab {

DiscretePlan::DiscretePlan(Eigen::VectorXd row_marginal, Eigen::VectorXd col_marginal,
                           std::vector<PlanEntry> entries)
    : row_marginal_(std::move(row_marginal)),
      col_marginal_(std::move(col_marginal)),
      entries_(std::move(entries)) {
  for (const auto& e : entries_) {
    if (e.row < 0 || e.row >= n_rows() || e.col < 0 || e.col >= n_cols())
      throw InvalidInput("plan entry index out of range");
    if (!std::isfinite(e.mass)) throw InvalidInput("plan entry mass is not finite");
  }
}

DiscretePlan DiscretePlan::from_dense(const Eigen::MatrixXd& masses, Eigen::VectorXd row_marginal,
                                      Eigen::VectorXd col_marginal) {
  if (masses.rows() != row_marginal.size() || masses.cols() != col_marginal.size())
    throw InvalidInput("dense plan shape does not match marginals");
  std::vector<PlanEntry> entries;
  for (Eigen::Index i = 0; i < masses.rows(); ++i)
    for (Eigen::Index j = 0; j < masses.cols(); ++j)
      if (masses(i, j) != 0) entries.push_back({i, j, masses(i, j)});
  return DiscretePlan(std::move(row_marginal), std::move(col_marginal), std::move(entries));
}

Eigen::VectorXd DiscretePlan::row_sums() const {
  Eigen::VectorXd s = Eigen::VectorXd::Zero(n_rows());
  for (const auto& e : entries_) s(e.row) += e.mass;
  return s;
}

Eigen::VectorXd DiscretePlan::col_sums() const {
  Eigen::VectorXd s = Eigen::VectorXd::Zero(n_cols());
  for (const auto& e : entries_) s(e.col) += e.mass;
  return s;
}

Eigen::MatrixXd DiscretePlan::to_dense() const {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n_rows(), n_cols());
  for (const auto& e : entries_) d(e.row, e.col) += e.mass;
  return d;
}

double DiscretePlan::total_mass() const {
  double t = 0;
  for (const auto& e : entries_) t += e.mass;
  return t;
}

double DiscretePlan::marginal_violation() const {
  return std::max((row_sums() - row_marginal_).cwiseAbs().maxCoeff(),
                  (col_sums() - col_marginal_).cwiseAbs().maxCoeff());
}

Eigen::MatrixXd cost_matrix(const PointSet& xs, const PointSet& ys) {
  if (xs.rows() != ys.rows()) throw InvalidInput("point dimensions differ");
  Eigen::MatrixXd c(xs.cols(), ys.cols());
  for (Eigen::Index j = 0; j < ys.cols(); ++j)
    for (Eigen::Index i = 0; i < xs.cols(); ++i) c(i, j) = (xs.col(i) - ys.col(j)).squaredNorm();
  return c;
}

double plan_cost(const DiscretePlan& plan, const Eigen::MatrixXd& costs) {
  double c = 0;
  for (const auto& e : plan.entries()) c += e.mass * costs(e.row, e.col);
  return c;
}

namespace {

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
      .count();
}

void check_balanced(const Eigen::VectorXd& f, const Eigen::VectorXd& g) {
  if (f.size() == 0 || g.size() == 0) throw InvalidInput("transport problem has no atoms");
  if (std::abs(f.sum() - g.sum()) > 1e-10 || std::abs(f.sum() - 1.0) > 1e-10)
    throw InvalidInput("marginals are not balanced probability vectors");
  if (f.minCoeff() < 0 || g.minCoeff() < 0) throw InvalidInput("marginals must be nonnegative");
}

// Primal network simplex on the complete bipartite graph sources -> sinks.
//
// Nodes 0..N-1 are sources, N..N+M-1 sinks, N+M the artificial root. Arc
// e < N*M joins source e / M to sink N + e % M; arc N*M + u is the
// artificial arc between u and the root. The spanning tree is kept strongly
// feasible (every zero-flow tree arc points away from the root) and the
// leaving arc is the last blocking arc met along the cycle orientation,
// which rules out cycling under degeneracy.
class NetworkSimplex {
 public:
  NetworkSimplex(const Eigen::VectorXd& f, const Eigen::VectorXd& g, const Eigen::MatrixXd& c)
      : f_(f), g_(g), c_(c), N_(f.size()), M_(g.size()), n_(N_ + M_), root_(n_) {
    real_arcs_ = N_ * M_;
    const double max_cost = c.size() ? c.maxCoeff() : 0.0;
    art_cost_ = (std::max(max_cost, 0.0) + 1.0) * static_cast<double>(n_);
    eps_ = 1e-13 * (max_cost + 1.0) + 4 * std::numeric_limits<double>::epsilon() * art_cost_;

    const Eigen::Index arcs = real_arcs_ + n_;
    flow_.assign(static_cast<std::size_t>(arcs), 0.0);
    in_tree_.assign(static_cast<std::size_t>(arcs), 0);
    art_up_.assign(static_cast<std::size_t>(n_), 0);

    const auto nodes = static_cast<std::size_t>(n_ + 1);
    parent_.assign(nodes, -1);
    pred_.assign(nodes, -1);
    up_.assign(nodes, 0);
    pi_.assign(nodes, 0.0);
    first_child_.assign(nodes, -1);
    next_sib_.assign(nodes, -1);
    prev_sib_.assign(nodes, -1);
    mark_.assign(nodes, 0);

    for (Eigen::Index u = 0; u < n_; ++u) {
      const double supply = u < N_ ? f(u) : -g(u - N_);
      const Eigen::Index a = real_arcs_ + u;
      art_up_[u] = supply > 0;
      flow_[a] = std::abs(supply);
      in_tree_[a] = 1;
      parent_[u] = root_;
      pred_[u] = a;
      up_[u] = art_up_[u];
      pi_[u] = art_up_[u] ? -art_cost_ : art_cost_;
      attach(u, root_);
    }
    block_ = std::max<Eigen::Index>(10, static_cast<Eigen::Index>(std::sqrt(double(arcs))));
  }

  long run() {
    long pivots = 0;
    for (;;) {
      Eigen::Index e;
      while ((e = find_entering()) >= 0) {
        pivot(e);
        ++pivots;
      }
      // Rebuild potentials from the tree to shed accumulated rounding and
      // confirm optimality with fresh reduced costs.
      recompute_potentials();
      if (find_entering() < 0) break;
    }
    for (Eigen::Index u = 0; u < n_; ++u)
      if (flow_[real_arcs_ + u] > 1e-12)
        throw std::runtime_error("network simplex ended with flow on an artificial arc");
    return pivots;
  }

  std::vector<PlanEntry> entries() const {
    std::vector<PlanEntry> out;
    for (Eigen::Index e = 0; e < real_arcs_; ++e)
      if (in_tree_[e] && flow_[e] > 0) out.push_back({e / M_, e % M_, flow_[e]});
    return out;
  }

  Eigen::VectorXd u() const {
    Eigen::VectorXd out(N_);
    for (Eigen::Index i = 0; i < N_; ++i) out(i) = -pi_[i];
    return out;
  }

  Eigen::VectorXd v() const {
    Eigen::VectorXd out(M_);
    for (Eigen::Index j = 0; j < M_; ++j) out(j) = pi_[N_ + j];
    return out;
  }

 private:
  Eigen::Index source(Eigen::Index e) const {
    if (e < real_arcs_) return e / M_;
    const Eigen::Index u = e - real_arcs_;
    return art_up_[u] ? u : root_;
  }

  Eigen::Index target(Eigen::Index e) const {
    if (e < real_arcs_) return N_ + e % M_;
    const Eigen::Index u = e - real_arcs_;
    return art_up_[u] ? root_ : u;
  }

  double cost(Eigen::Index e) const { return e < real_arcs_ ? c_(e / M_, e % M_) : art_cost_; }

  double reduced_cost(Eigen::Index e) const {
    return cost(e) + pi_[source(e)] - pi_[target(e)];
  }

  Eigen::Index find_entering() {
    const Eigen::Index arcs = real_arcs_ + n_;
    double best = -eps_;
    Eigen::Index best_arc = -1;
    Eigen::Index scanned_in_block = 0;
    for (Eigen::Index k = 0; k < arcs; ++k) {
      const Eigen::Index e = next_arc_;
      next_arc_ = next_arc_ + 1 == arcs ? 0 : next_arc_ + 1;
      if (!in_tree_[e]) {
        const double rc = reduced_cost(e);
        if (rc < best) {
          best = rc;
          best_arc = e;
        }
      }
      if (++scanned_in_block == block_) {
        if (best_arc >= 0) return best_arc;
        scanned_in_block = 0;
      }
    }
    return best_arc;
  }

  void attach(Eigen::Index child, Eigen::Index parent) {
    prev_sib_[child] = -1;
    next_sib_[child] = first_child_[parent];
    if (first_child_[parent] >= 0) prev_sib_[first_child_[parent]] = child;
    first_child_[parent] = child;
  }

  void detach(Eigen::Index child) {
    const Eigen::Index p = parent_[child];
    if (prev_sib_[child] >= 0)
      next_sib_[prev_sib_[child]] = next_sib_[child];
    else
      first_child_[p] = next_sib_[child];
    if (next_sib_[child] >= 0) prev_sib_[next_sib_[child]] = prev_sib_[child];
    prev_sib_[child] = next_sib_[child] = -1;
  }

  void pivot(Eigen::Index e_in) {
    const Eigen::Index s = source(e_in);
    const Eigen::Index t = target(e_in);

    // Join node of the cycle.
    ++stamp_;
    for (Eigen::Index u = s; u != root_; u = parent_[u]) mark_[u] = stamp_;
    mark_[root_] = stamp_;
    Eigen::Index join = t;
    while (mark_[join] != stamp_) join = parent_[join];

    // Flow runs s -> t -> ... -> join -> ... -> s. Ties keep the last
    // blocking arc in that orientation.
    const double inf = std::numeric_limits<double>::infinity();
    double delta = inf;
    Eigen::Index u_out = -1;
    int side = 0;
    for (Eigen::Index u = s; u != join; u = parent_[u]) {
      const double d = up_[u] ? flow_[pred_[u]] : inf;
      if (d < delta) {
        delta = d;
        u_out = u;
        side = 1;
      }
    }
    for (Eigen::Index u = t; u != join; u = parent_[u]) {
      const double d = up_[u] ? inf : flow_[pred_[u]];
      if (d <= delta) {
        delta = d;
        u_out = u;
        side = 2;
      }
    }
    if (u_out < 0) throw std::runtime_error("network simplex found an unbounded cycle");

    if (delta > 0) {
      flow_[e_in] += delta;
      for (Eigen::Index u = s; u != join; u = parent_[u]) flow_[pred_[u]] += up_[u] ? -delta : delta;
      for (Eigen::Index u = t; u != join; u = parent_[u]) flow_[pred_[u]] += up_[u] ? delta : -delta;
      flow_[pred_[u_out]] = 0.0;
    }

    const Eigen::Index new_child = side == 1 ? s : t;
    const Eigen::Index new_parent = side == 1 ? t : s;
    const double shift = side == 1 ? -reduced_cost(e_in) : reduced_cost(e_in);

    in_tree_[pred_[u_out]] = 0;
    in_tree_[e_in] = 1;

    // Reverse the path new_child -> ... -> u_out and hang it below new_parent.
    path_.clear();
    for (Eigen::Index u = new_child;; u = parent_[u]) {
      path_.push_back(u);
      if (u == u_out) break;
    }
    old_pred_.resize(path_.size());
    old_up_.resize(path_.size());
    for (std::size_t k = 0; k < path_.size(); ++k) {
      old_pred_[k] = pred_[path_[k]];
      old_up_[k] = up_[path_[k]];
      detach(path_[k]);
    }
    parent_[path_[0]] = new_parent;
    pred_[path_[0]] = e_in;
    up_[path_[0]] = source(e_in) == path_[0];
    attach(path_[0], new_parent);
    for (std::size_t k = 1; k < path_.size(); ++k) {
      parent_[path_[k]] = path_[k - 1];
      pred_[path_[k]] = old_pred_[k - 1];
      up_[path_[k]] = !old_up_[k - 1];
      attach(path_[k], path_[k - 1]);
    }

    // The re-hung subtree moves rigidly in potential.
    stack_.clear();
    stack_.push_back(new_child);
    while (!stack_.empty()) {
      const Eigen::Index u = stack_.back();
      stack_.pop_back();
      pi_[u] += shift;
      for (Eigen::Index c = first_child_[u]; c >= 0; c = next_sib_[c]) stack_.push_back(c);
    }
  }

  void recompute_potentials() {
    pi_[root_] = 0;
    stack_.clear();
    stack_.push_back(root_);
    while (!stack_.empty()) {
      const Eigen::Index u = stack_.back();
      stack_.pop_back();
      for (Eigen::Index c = first_child_[u]; c >= 0; c = next_sib_[c]) {
        const Eigen::Index e = pred_[c];
        pi_[c] = up_[c] ? pi_[u] - cost(e) : pi_[u] + cost(e);
        stack_.push_back(c);
      }
    }
  }

  const Eigen::VectorXd& f_;
  const Eigen::VectorXd& g_;
  const Eigen::MatrixXd& c_;
  Eigen::Index N_, M_, n_, root_;
  Eigen::Index real_arcs_ = 0;
  double art_cost_ = 0;
  double eps_ = 0;
  Eigen::Index block_ = 10;
  Eigen::Index next_arc_ = 0;
  long stamp_ = 0;

  std::vector<double> flow_;
  std::vector<char> in_tree_;
  std::vector<char> art_up_;
  std::vector<Eigen::Index> parent_, pred_;
  std::vector<char> up_;
  std::vector<double> pi_;
  std::vector<Eigen::Index> first_child_, next_sib_, prev_sib_;
  std::vector<long> mark_;
  std::vector<Eigen::Index> path_, old_pred_, stack_;
  std::vector<char> old_up_;
};

}  // namespace

SolveReport solve_exact(const Eigen::VectorXd& f, const Eigen::VectorXd& g,
                        const Eigen::MatrixXd& costs, const ExactOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  check_balanced(f, g);
  if (costs.rows() != f.size() || costs.cols() != g.size())
    throw InvalidInput("cost matrix shape does not match marginals");
  if (static_cast<double>(f.size()) * static_cast<double>(g.size()) > options.max_product) {
    std::ostringstream os;
    os << "transport problem " << f.size() << "x" << g.size() << " exceeds the size cap";
    throw InvalidInput(os.str());
  }
  NetworkSimplex ns(f, g, costs);
  SolveReport r;
  r.iterations = ns.run();
  r.plan = DiscretePlan(f, g, ns.entries());
  r.cost = plan_cost(r.plan, costs);
  r.optimal_cost = r.cost;
  r.eps_h = 0.0;
  r.u = ns.u();
  r.v = ns.v();
  r.wall_ms = elapsed_ms(start);
  return r;
}

SolveReport solve_exact(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                        const ExactOptions& options) {
  return solve_exact(mu.weights(), nu.weights(), cost_matrix(mu.points(), nu.points()), options);
}

DiscretePlan round_to_feasible(const DiscretePlan& plan, const Eigen::VectorXd& f,
                               const Eigen::VectorXd& g) {
  if (plan.n_rows() != f.size() || plan.n_cols() != g.size())
    throw InvalidInput("plan shape does not match marginals");
  for (const auto& e : plan.entries())
    if (e.mass < 0) throw InvalidInput("plan has negative entries");

  Eigen::MatrixXd p = plan.to_dense();
  const Eigen::VectorXd rows = p.rowwise().sum();
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    if (rows(i) > f(i)) p.row(i) *= f(i) / rows(i);
  const Eigen::VectorXd cols = p.colwise().sum().transpose();
  for (Eigen::Index j = 0; j < p.cols(); ++j)
    if (cols(j) > g(j)) p.col(j) *= g(j) / cols(j);
  const Eigen::VectorXd err_r = (f - p.rowwise().sum()).cwiseMax(0.0);
  const Eigen::VectorXd err_c = (g - p.colwise().sum().transpose()).cwiseMax(0.0);
  const double total = err_r.sum();
  if (total > 0) p.noalias() += err_r * err_c.transpose() / total;
  return DiscretePlan::from_dense(p, f, g);
}

namespace {

// Sinkhorn scaling with absorption: the plan is
//   P_ij = u_i · exp((a_i + b_j - c_ij) / reg) · v_j,
// and u, v are folded back into the log potentials a, b whenever they leave
// [1/kAbsorb, kAbsorb], so the kernel never underflows on the support.
class StabilizedSinkhorn {
 public:
  StabilizedSinkhorn(const Eigen::VectorXd& f, const Eigen::VectorXd& g, const Eigen::MatrixXd& c)
      : f_(f), g_(g), c_(c), a_(Eigen::VectorXd::Zero(f.size())), b_(Eigen::VectorXd::Zero(g.size())) {}

  void set_regularization(double reg) {
    reg_ = reg;
    absorb();
  }

  // One row update followed by one column update. Returns the L1 row error
  // measured before the row update.
  double iterate() {
    Kv_.noalias() = K_ * v_;
    double err = (u_.cwiseProduct(Kv_) - f_).lpNorm<1>();
    if (Kv_.minCoeff() <= 0) {
      log_row_update();
      Kv_.noalias() = K_ * v_;
    }
    u_ = f_.cwiseQuotient(Kv_);
    Ktu_.noalias() = K_.transpose() * u_;
    if (Ktu_.minCoeff() <= 0) {
      log_col_update();
      Ktu_.noalias() = K_.transpose() * u_;
    }
    v_ = g_.cwiseQuotient(Ktu_);
    if (!std::isfinite(err)) err = std::numeric_limits<double>::infinity();
    const double lo = std::min(u_.minCoeff(), v_.minCoeff());
    const double hi = std::max(u_.maxCoeff(), v_.maxCoeff());
    if (hi > kAbsorb || lo < 1.0 / kAbsorb) absorb();
    return err;
  }

  Eigen::MatrixXd plan() {
    absorb();
    return K_;
  }

 private:
  static constexpr double kAbsorb = 1e50;

  void rebuild_kernel() {
    K_ = ((((-c_).colwise() + a_).rowwise() + b_.transpose()) / reg_).array().exp().matrix();
  }

  void absorb() {
    if (u_.size()) {
      a_ += reg_ * u_.array().log().matrix();
      b_ += reg_ * v_.array().log().matrix();
    }
    u_ = Eigen::VectorXd::Ones(f_.size());
    v_ = Eigen::VectorXd::Ones(g_.size());
    rebuild_kernel();
  }

  // Exact log-domain updates, used when a kernel row or column underflows.
  void log_row_update() {
    absorb();
    for (Eigen::Index i = 0; i < f_.size(); ++i) {
      const Eigen::ArrayXd s = (b_.transpose() - c_.row(i)).array().transpose() / reg_;
      const double m = s.maxCoeff();
      a_(i) = reg_ * (std::log(f_(i)) - m - std::log((s - m).exp().sum()));
    }
    rebuild_kernel();
  }

  void log_col_update() {
    absorb();
    for (Eigen::Index j = 0; j < g_.size(); ++j) {
      const Eigen::ArrayXd s = (a_ - c_.col(j)).array() / reg_;
      const double m = s.maxCoeff();
      b_(j) = reg_ * (std::log(g_(j)) - m - std::log((s - m).exp().sum()));
    }
    rebuild_kernel();
  }

  const Eigen::VectorXd& f_;
  const Eigen::VectorXd& g_;
  const Eigen::MatrixXd& c_;
  Eigen::VectorXd a_, b_, u_, v_, Kv_, Ktu_;
  Eigen::MatrixXd K_;
  double reg_ = 1;
};

}  // namespace

SolveReport solve_entropic(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                           const EntropicOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  if (!(options.regularization > 0)) throw InvalidInput("regularization must be positive");
  const Eigen::VectorXd& f = mu.weights();
  const Eigen::VectorXd& g = nu.weights();
  check_balanced(f, g);
  const Eigen::MatrixXd c = cost_matrix(mu.points(), nu.points());

  std::vector<double> schedule;
  {
    double reg = options.regularization;
    const double top = std::max(c.maxCoeff(), options.regularization);
    schedule.push_back(reg);
    if (options.eps_scaling)
      while (reg < top) schedule.push_back(reg *= 2);
    std::reverse(schedule.begin(), schedule.end());
  }

  StabilizedSinkhorn sk(f, g, c);
  long iters = 0;
  double err = std::numeric_limits<double>::infinity();
  for (std::size_t stage = 0; stage < schedule.size() && iters < options.max_iters; ++stage) {
    const bool last = stage + 1 == schedule.size();
    const double stage_tol = last ? options.tol : std::max(options.tol, 1e-3);
    sk.set_regularization(schedule[stage]);
    while (iters < options.max_iters) {
      err = sk.iterate();
      ++iters;
      if (err <= stage_tol) break;
    }
  }

  SolveReport r;
  r.iterations = iters;
  r.converged = err <= options.tol;
  r.plan = round_to_feasible(DiscretePlan::from_dense(sk.plan(), f, g), f, g);
  r.cost = plan_cost(r.plan, c);
  if (options.compute_gap) {
    const auto exact = solve_exact(f, g, c);
    r.optimal_cost = exact.cost;
    r.eps_h = std::sqrt(std::max(0.0, r.cost)) - std::sqrt(std::max(0.0, exact.cost));
  }
  r.wall_ms = elapsed_ms(start);
  return r;
}

double w2_discrete(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  return std::sqrt(std::max(0.0, solve_exact(mu, nu).cost));
}

double brute_force_small(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  const Eigen::Index n = mu.size();
  if (nu.size() != n) throw InvalidInput("brute force needs equal atom counts");
  if (n > 8) throw InvalidInput("brute force is limited to 8 atoms");
  const double w = 1.0 / static_cast<double>(n);
  if ((mu.weights().array() - w).abs().maxCoeff() > 1e-12 ||
      (nu.weights().array() - w).abs().maxCoeff() > 1e-12)
    throw InvalidInput("brute force needs uniform weights");
  const Eigen::MatrixXd c = cost_matrix(mu.points(), nu.points());
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0;
    for (Eigen::Index i = 0; i < n; ++i) s += c(i, perm[static_cast<std::size_t>(i)]);
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best * w;
}

}  // namespace otlab
