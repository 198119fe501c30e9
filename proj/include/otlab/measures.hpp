#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "otlab/geometry.hpp"
#include "otlab/types.hpp"

namespace otlab {

/// Finitely supported probability measure Σ w_i δ_{x_i}.
///
/// Atoms with zero weight are dropped on construction; the remaining weights
/// must be positive and sum to one within 1e-12.
class DiscreteMeasure {
 public:
  DiscreteMeasure() = default;
  DiscreteMeasure(PointSet points, Eigen::VectorXd weights);

  /// Rescales the weights to sum to one (after dropping zeros) before
  /// validating. Fails if the total is not positive.
  static DiscreteMeasure normalized(PointSet points, Eigen::VectorXd weights);

  int dim() const { return static_cast<int>(points_.rows()); }
  Eigen::Index size() const { return weights_.size(); }
  const PointSet& points() const { return points_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  Point point(Eigen::Index i) const { return points_.col(i); }

  /// Indices (into the constructor input) of the atoms that were kept.
  const std::vector<Eigen::Index>& kept() const { return kept_; }

 private:
  PointSet points_;
  Eigen::VectorXd weights_;
  std::vector<Eigen::Index> kept_;
};

struct DensityBounds {
  double lower = 0;
  double upper = 0;
};

/// Absolutely continuous probability measure on a convex support.
///
/// Integrals over the support use the stored rule after `refinement` levels
/// of uniform subdivision. Sub-regions drop one level per halving of the
/// diameter, so node spacing stays comparable. The constructor checks that
/// the density integrates to one (1e-8), is nonnegative at every node, and
/// respects the declared bounds.
class DensityMeasure {
 public:
  DensityMeasure() = default;
  DensityMeasure(Region support, DensityFn density, int order = 8, int refinement = 0,
                 std::optional<DensityBounds> bounds = std::nullopt);

  int dim() const { return support_.dim(); }
  const Region& support() const { return support_; }
  const Rule& rule() const { return rule_; }
  int refinement() const { return refinement_; }
  const std::optional<DensityBounds>& bounds() const { return bounds_; }
  double density(const Point& y) const { return density_(y); }
  const DensityFn& density_fn() const { return density_; }

  /// ∫_region f(y) g(y) dy.
  template <typename F>
  double integrate(const Region& region, F&& f) const {
    double acc = 0;
    for_each_node(region, rule_, refinement_for(region),
                  [&](const Point& y, double w) { acc += w * density_(y) * f(y); });
    return acc;
  }

  template <typename F>
  double integrate(F&& f) const {
    return integrate(support_, std::forward<F>(f));
  }

  Moments<double> moments(const Region& region) const {
    return polygon_moments(region, density_, rule_, refinement_for(region));
  }

  int refinement_for(const Region& region) const;

  /// Cumulative distribution and its inverse; 1D supports only.
  double cdf(double y) const;
  double quantile(double p) const;

 private:
  Region support_;
  DensityFn density_;
  Rule rule_;
  int refinement_ = 0;
  double support_diameter_ = 0;
  std::optional<DensityBounds> bounds_;
};

struct DiscretizationResult {
  DiscreteMeasure measure;
  double covering_radius_h = 0;
  double w2_exact = 0;
  /// Voronoi cells of the kept sites, aligned with `measure`.
  std::vector<Region> cells;
};

/// Cells Y ∩ {y : (x_j - x_i)·y <= φ_j - φ_i for all j}. With φ = |x|²/2
/// these are Voronoi cells. Edges (or endpoints) created by site j are
/// labeled j.
std::vector<Region> laguerre_cells(const PointSet& sites, const Eigen::VectorXd& phi,
                                   const Region& domain);

std::vector<Region> voronoi_cells(const PointSet& sites, const Region& domain);

/// Weights f_i = m(V_i), exact W₂(m, m_h) through the Voronoi map, and the
/// covering radius. Zero-mass sites are dropped.
DiscretizationResult voronoi_discretize(const DensityMeasure& m, const PointSet& sites);

/// sup over the support of the distance to the nearest site. Computed from
/// the vertices of the Voronoi cells, where the supremum is attained.
double covering_radius(const PointSet& sites, const Region& support);

double second_moment(const DiscreteMeasure& m);
double second_moment(const DensityMeasure& m);

/// Cell-midpoint grid with about `count` sites over the bounding box of the
/// support (1D: exactly `count` midpoints).
PointSet grid_sites(const Region& support, int count);

/// Midpoint grid over the bounding box with the given spacing per axis.
PointSet grid_sites_with_spacing(const Region& support, double spacing);

/// `count` independent uniform samples in the support.
PointSet random_sites(const Region& support, int count, std::uint64_t seed);

}  // namespace otlab
