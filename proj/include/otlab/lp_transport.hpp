#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "otlab/measures.hpp"

namespace otlab {

struct PlanEntry {
  Eigen::Index row = 0;
  Eigen::Index col = 0;
  double mass = 0;
};

/// Sparse nonnegative coupling between two discrete measures, together with
/// the marginals it is meant to reproduce.
class DiscretePlan {
 public:
  DiscretePlan() = default;
  DiscretePlan(Eigen::VectorXd row_marginal, Eigen::VectorXd col_marginal,
               std::vector<PlanEntry> entries);

  static DiscretePlan from_dense(const Eigen::MatrixXd& masses, Eigen::VectorXd row_marginal,
                                 Eigen::VectorXd col_marginal);

  Eigen::Index n_rows() const { return row_marginal_.size(); }
  Eigen::Index n_cols() const { return col_marginal_.size(); }
  const std::vector<PlanEntry>& entries() const { return entries_; }
  const Eigen::VectorXd& row_marginal() const { return row_marginal_; }
  const Eigen::VectorXd& col_marginal() const { return col_marginal_; }

  Eigen::VectorXd row_sums() const;
  Eigen::VectorXd col_sums() const;
  Eigen::MatrixXd to_dense() const;
  double total_mass() const;

  /// max over both marginals of |Σ γ - prescribed|.
  double marginal_violation() const;

 private:
  Eigen::VectorXd row_marginal_;
  Eigen::VectorXd col_marginal_;
  std::vector<PlanEntry> entries_;
};

struct SolveReport {
  DiscretePlan plan;
  double cost = 0;
  std::optional<double> optimal_cost;
  /// √cost - √optimal_cost, when the optimum is known.
  std::optional<double> eps_h;
  long iterations = 0;
  double wall_ms = 0;
  bool converged = true;
  /// Dual potentials with c_ij - u_i - v_j >= 0 (exact solver only).
  Eigen::VectorXd u, v;
};

/// c_ij = |x_i - y_j|² for point sets stored column-wise.
Eigen::MatrixXd cost_matrix(const PointSet& xs, const PointSet& ys);

double plan_cost(const DiscretePlan& plan, const Eigen::MatrixXd& costs);

struct ExactOptions {
  /// Refuse problems with more than this many cost entries.
  double max_product = 4e6;
};

/// Exact optimal vertex of the transportation LP by the primal network
/// simplex method on the bipartite graph.
SolveReport solve_exact(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                        const ExactOptions& options = {});

/// Same, for explicit marginals and costs.
SolveReport solve_exact(const Eigen::VectorXd& f, const Eigen::VectorXd& g,
                        const Eigen::MatrixXd& costs, const ExactOptions& options = {});

struct EntropicOptions {
  double regularization = 1e-2;
  long max_iters = 10000;
  /// L1 row-marginal error at which the scaling iterations stop.
  double tol = 1e-9;
  /// Start from a large regularization and halve it down to the target.
  bool eps_scaling = true;
  /// Solve the exact LP as well to report eps_h.
  bool compute_gap = true;
};

/// Log-domain Sinkhorn scaling followed by round_to_feasible. Always
/// returns a feasible plan; `converged` is false when max_iters ran out.
SolveReport solve_entropic(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                           const EntropicOptions& options = {});

/// Projects a nonnegative near-feasible plan onto the transport polytope:
/// rows and columns are scaled down to their marginals, then the deficit is
/// restored with a rank-one correction.
DiscretePlan round_to_feasible(const DiscretePlan& plan, const Eigen::VectorXd& f,
                               const Eigen::VectorXd& g);

/// W₂ = √(optimal cost).
double w2_discrete(const DiscreteMeasure& mu, const DiscreteMeasure& nu);

/// Optimal cost by enumerating all N! matchings. Uniform weights, N = M <= 8.
double brute_force_small(const DiscreteMeasure& mu, const DiscreteMeasure& nu);

}  // namespace otlab
