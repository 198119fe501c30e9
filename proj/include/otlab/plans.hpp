#pragma once

#include <array>
#include <vector>

#include <Eigen/Core>

#include "otlab/lp_transport.hpp"

namespace otlab {

/// Values of a map at the atoms of a discrete measure.
struct MapOnAtoms {
  PointSet sites;
  PointSet values;
  Eigen::VectorXd weights;
};

MapOnAtoms sample_map(const MapFn& T, const DiscreteMeasure& mu);

/// T_h(x_i) = f_i⁻¹ Σ_j γ_ij y_j with f the row sums of the plan.
MapOnAtoms barycentric_projection(const DiscretePlan& plan, const PointSet& xs,
                                  const PointSet& ys);

/// Σ_ij γ_ij |T(x_i) - y_j|².
double plan_map_error(const MapFn& T, const DiscretePlan& plan, const PointSet& xs,
                      const PointSet& ys);

/// Σ_i f_i |T(x_i) - T_h(x_i)|². Sites and weights must agree.
double projection_error(const MapOnAtoms& T_atoms, const MapOnAtoms& Th_atoms);

/// A measure on a product of three or four finite sets, built by gluing
/// plans along shared marginals. Atom indices refer to the atoms of the
/// factors; unused trailing slots are zero.
struct GluedAtom {
  std::array<Eigen::Index, 4> index{};
  double mass = 0;
};

struct GluedMeasure {
  std::vector<Eigen::Index> extents;
  std::vector<GluedAtom> atoms;

  int arity() const { return static_cast<int>(extents.size()); }
  double total_mass() const;
  /// Push-forward onto factors (a, b) with a < b as a plan whose prescribed
  /// marginals are its own sums.
  DiscretePlan projection(int a, int b) const;
};

/// Atoms (i, j, k) with mass α_ij γ_jk / f_j where f is the shared marginal.
/// Throws when α's column sums and γ's row sums differ by more than 1e-10.
GluedMeasure glue(const DiscretePlan& alpha, const DiscretePlan& gamma);

/// Appends a fourth factor through β, conditioned on the last factor.
GluedMeasure glue(const GluedMeasure& glued, const DiscretePlan& beta);

struct StabilityCheck {
  double lhs = 0;
  double rhs = 0;
};

/// lhs = ∫|S - T|² dμ and rhs = λ (∫|S - x|² dμ - ∫|T - x|² dμ). The
/// integrals are split at `breakpoints` (1D), where S may jump.
StabilityCheck stability_check(const MapFn& T, const MapFn& S, const DensityMeasure& mu,
                               double lambda, const std::vector<double>& breakpoints = {});

/// 2√λ √e (W + e)^{1/2} + λ e_α + e_β with e = e_α + e_β.
double thm34_bound(double lambda, double e_alpha, double e_beta, double w2_mu_nu);

/// As thm34_bound with e replaced by e + ε_h / 2 in the first term.
double entropic_plan_error_bound(double lambda, double e_alpha, double e_beta, double w2_mu_nu, double eps_h);

/// 2√λ √ẽ (W + ẽ)^{1/2} + e_α + e_β with ẽ = e_α + e_β + ε_h / 2.
double plan_distance_bound(double lambda, double e_alpha, double e_beta, double w2_mu_nu, double eps_h);

/// Atoms (x_i, y_j) ∈ R^{2d} with masses γ_ij.
DiscreteMeasure plan_as_measure(const DiscretePlan& plan, const PointSet& xs, const PointSet& ys);

/// Entries of mass below `threshold` removed, then only the `max_atoms`
/// largest kept, and the rest renormalized.
/// W₂ between the full and the truncated measure is at most
/// distance_allowance = √δ D, with δ the dropped mass and D the diameter of
/// the bounding box of all atoms.
struct TruncatedPlanMeasure {
  DiscreteMeasure measure;
  double dropped_mass = 0;
  double distance_allowance = 0;
};

TruncatedPlanMeasure truncated_plan_measure(const DiscretePlan& plan, const PointSet& xs,
                                            const PointSet& ys, double threshold,
                                            Eigen::Index max_atoms = -1);

/// (id, T)#μ_h as a measure on R^{2d}.
DiscreteMeasure graph_measure(const MapFn& T, const DiscreteMeasure& mu_h);

/// W₂ between two measures on the product space by the exact LP.
double w2_plans_estimate(const DiscreteMeasure& gamma_ref, const DiscreteMeasure& gamma_h,
                         const ExactOptions& options = {});

}  // namespace otlab
