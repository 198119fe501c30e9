#pragma once

#include <vector>

#include <Eigen/Core>

#include "otlab/measures.hpp"

namespace otlab {

/// Nodal values φ_h(x_i) of the discrete Brenier potential, pinned so that
/// values(0) = 0.
struct SemiDiscretePotentials {
  PointSet sites;
  Eigen::VectorXd values;
};

/// Power-diagram weights w_i = |x_i|² - 2 φ_i, shifted so that w_0 = 0.
/// F_i = {y ∈ Y : |y - x_i|² - w_i <= |y - x_j|² - w_j for all j}.
Eigen::VectorXd power_weights(const SemiDiscretePotentials& potentials);
SemiDiscretePotentials potentials_from_power_weights(const PointSet& sites,
                                                     const Eigen::VectorXd& weights);

/// Laguerre cells F_i = Y ∩ {y : (x_j - x_i)·y <= φ_j - φ_i for all j} and
/// their ν-moments.
struct LaguerreDecomposition {
  PointSet sites;
  std::vector<Region> cells;
  Eigen::VectorXd masses;
  /// m_i = ν(F_i)⁻¹ ∫_{F_i} y g(y) dy, stored column-wise.
  PointSet barycenters;
  /// ∫_{F_i} |m_i - y|² g(y) dy.
  Eigen::VectorXd second_moments;
  Eigen::VectorXd diameters;
};

LaguerreDecomposition laguerre_decomposition(const SemiDiscretePotentials& potentials,
                                             const DensityMeasure& nu);

enum class SemiDiscreteMethod { Newton, Gradient };

struct SemiDiscreteOptions {
  /// Target for max_i |ν(F_i) - f_i|.
  double tol_mass = 1e-10;
  long max_iters = 200;
  SemiDiscreteMethod method = SemiDiscreteMethod::Newton;
  /// When positive, tol_mass is tightened until
  /// diam(Y) · √(Σ_i |ν(F_i) - f_i|) <= h_budget.
  double h_budget = 0;
};

struct SemiDiscreteResult {
  SemiDiscretePotentials potentials;
  LaguerreDecomposition decomposition;
  long iterations = 0;
  /// max_i |ν(F_i) - f_i| at the returned potentials.
  double residual = 0;
  double wall_ms = 0;
};

/// Solves ν(F_i) = f_i for the nodal potentials. The default method is a
/// damped Newton iteration on the concave dual; the gradient method is plain
/// ascent with Armijo backtracking. Throws SolverError carrying the best
/// residual when max_iters is exhausted.
SemiDiscreteResult solve_semidiscrete(const DiscreteMeasure& mu_h, const DensityMeasure& nu,
                                      const SemiDiscreteOptions& options = {});

/// Σ_i ∫_{F_i} |T(x_i) - y|² g(y) dy.
double semidiscrete_plan_error(const MapFn& T, const LaguerreDecomposition& dec,
                               const DensityMeasure& nu);

struct DecomposedError {
  /// Σ_i ν(F_i) |T(x_i) - m_i|²
  double bary_term = 0;
  /// Σ_i ∫_{F_i} |m_i - y|² g(y) dy
  double moment_term = 0;
  /// Σ_i ν(F_i) diam(F_i)²
  double diam_term = 0;
};

/// bary_term + moment_term equals semidiscrete_plan_error.
DecomposedError decomposed_error(const MapFn& T, const LaguerreDecomposition& dec);

/// E_h = 2√λ √w √(W + w) + λ w with W = W₂(μ,ν) and w = W₂(μ,μ_h).
double eh_semi_bound(double lambda, double w2_mu_nu, double w2_mu_muh);

/// C with moment_i >= C f_i diam(F_i)² for convex cells and c1 <= g <= c2.
/// d = 1: c1 / (12 c2). d = 2: c1 / (1024 c2), from the ellipse ratio 1/16
/// and the John shrink factor 2^{-3/2}.
double cell_moment_constant(int dim, double c1, double c2);

}  // namespace otlab
