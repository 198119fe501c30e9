#include "otlab/measures.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace otlab {

namespace {

constexpr double kWeightSumTol = 1e-12;
constexpr double kDensityMassTol = 1e-8;
constexpr double kDiscretizationDeficitTol = 1e-6;

void drop_zero_atoms(PointSet& points, Eigen::VectorXd& weights,
                     std::vector<Eigen::Index>& kept) {
  if (points.cols() != weights.size())
    throw InvalidInput("point count does not match weight count");
  kept.clear();
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    if (!std::isfinite(weights(i)) || weights(i) < 0)
      throw InvalidInput("atom weights must be finite and nonnegative");
    if (weights(i) > 0) kept.push_back(i);
  }
  if (kept.size() == static_cast<std::size_t>(weights.size())) return;
  PointSet p(points.rows(), static_cast<Eigen::Index>(kept.size()));
  Eigen::VectorXd w(static_cast<Eigen::Index>(kept.size()));
  for (std::size_t k = 0; k < kept.size(); ++k) {
    p.col(static_cast<Eigen::Index>(k)) = points.col(kept[k]);
    w(static_cast<Eigen::Index>(k)) = weights(kept[k]);
  }
  points = std::move(p);
  weights = std::move(w);
}

}  // namespace

DiscreteMeasure::DiscreteMeasure(PointSet points, Eigen::VectorXd weights)
    : points_(std::move(points)), weights_(std::move(weights)) {
  drop_zero_atoms(points_, weights_, kept_);
  if (weights_.size() == 0) throw InvalidInput("discrete measure has no atoms");
  if (points_.rows() < 1 || points_.rows() > 4)
    throw InvalidInput("point dimension must be between 1 and 4");
  const double total = weights_.sum();
  if (std::abs(total - 1.0) > kWeightSumTol) {
    std::ostringstream os;
    os << "weights sum to " << total << ", expected 1";
    throw InvalidInput(os.str());
  }
}

DiscreteMeasure DiscreteMeasure::normalized(PointSet points, Eigen::VectorXd weights) {
  std::vector<Eigen::Index> kept;
  drop_zero_atoms(points, weights, kept);
  const double total = weights.sum();
  if (!(total > 0)) throw InvalidInput("total weight must be positive");
  weights /= total;
  DiscreteMeasure m(std::move(points), std::move(weights));
  m.kept_ = std::move(kept);
  return m;
}

DensityMeasure::DensityMeasure(Region support, DensityFn density, int order, int refinement,
                               std::optional<DensityBounds> bounds)
    : support_(std::move(support)),
      density_(std::move(density)),
      rule_(Rule::for_dim(support_.dim(), order)),
      refinement_(refinement),
      bounds_(bounds) {
  if (support_.is_empty()) throw InvalidInput("density support is empty");
  support_diameter_ = diameter(support_);
  double total = 0;
  for_each_node(support_, rule_, refinement_, [&](const Point& y, double w) {
    const double g = density_(y);
    if (!std::isfinite(g) || g < 0) throw InvalidInput("density is negative or not finite");
    if (bounds_ && (g < bounds_->lower - 1e-12 || g > bounds_->upper + 1e-12))
      throw InvalidInput("density violates its declared bounds");
    total += w * g;
  });
  if (std::abs(total - 1.0) > kDensityMassTol) {
    std::ostringstream os;
    os << "density integrates to " << total << ", expected 1";
    throw InvalidInput(os.str());
  }
}

int DensityMeasure::refinement_for(const Region& region) const {
  if (refinement_ == 0 || region.is_empty()) return 0;
  const double ratio = support_diameter_ / diameter(region);
  if (!(ratio > 1)) return refinement_;
  return std::max(0, refinement_ - static_cast<int>(std::floor(std::log2(ratio))));
}

double DensityMeasure::cdf(double y) const {
  if (dim() != 1) throw InvalidInput("cdf requires a 1D measure");
  if (y <= support_.lower()) return 0;
  if (y >= support_.upper()) return 1;
  return integrate(Region::interval(support_.lower(), y), [](const Point&) { return 1.0; });
}

double DensityMeasure::quantile(double p) const {
  if (dim() != 1) throw InvalidInput("quantile requires a 1D measure");
  double lo = support_.lower(), hi = support_.upper();
  if (p <= 0) return lo;
  if (p >= 1) return hi;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    (cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

std::vector<Region> laguerre_cells(const PointSet& sites, const Eigen::VectorXd& phi,
                                   const Region& domain) {
  const Eigen::Index n = sites.cols();
  if (phi.size() != n) throw InvalidInput("one potential value per site is required");
  if (sites.rows() != domain.dim()) throw InvalidInput("site dimension does not match domain");
  std::vector<Region> cells(static_cast<std::size_t>(n));
  Point normal(sites.rows());
  for (Eigen::Index i = 0; i < n; ++i) {
    Region cell = domain;
    for (Eigen::Index j = 0; j < n && !cell.is_empty(); ++j) {
      if (j == i) continue;
      normal = sites.col(j) - sites.col(i);
      const double offset = phi(j) - phi(i);
      // Skip planes that cannot cut the current cell.
      bool binding = false;
      const double tol = kGeomTol * normal.norm();
      if (cell.dim() == 1) {
        binding = normal(0) * cell.lower() - offset > tol || normal(0) * cell.upper() - offset > tol;
      } else {
        for (const auto& v : cell.vertices())
          if (normal(0) * v.x() + normal(1) * v.y() - offset > tol) {
            binding = true;
            break;
          }
      }
      if (binding) cell = clip_halfplane(cell, normal, offset, static_cast<int>(j));
    }
    cells[static_cast<std::size_t>(i)] = std::move(cell);
  }
  return cells;
}

std::vector<Region> voronoi_cells(const PointSet& sites, const Region& domain) {
  const Eigen::VectorXd phi = 0.5 * sites.colwise().squaredNorm().transpose();
  return laguerre_cells(sites, phi, domain);
}

namespace {

void check_distinct(const PointSet& sites) {
  for (Eigen::Index i = 0; i < sites.cols(); ++i)
    for (Eigen::Index j = i + 1; j < sites.cols(); ++j)
      if ((sites.col(i) - sites.col(j)).norm() <= 1e-14)
        throw InvalidInput("sites must be pairwise distinct");
}

double max_corner_distance(const Region& cell, const Point& site) {
  double r = 0;
  for (const auto& c : cell.corners()) r = std::max(r, (c - site).norm());
  return r;
}

}  // namespace

DiscretizationResult voronoi_discretize(const DensityMeasure& m, const PointSet& sites) {
  if (sites.cols() == 0) throw InvalidInput("at least one site is required");
  check_distinct(sites);
  const auto cells = voronoi_cells(sites, m.support());

  Eigen::VectorXd mass(sites.cols());
  double w2_sq = 0;
  double h = 0;
  for (Eigen::Index i = 0; i < sites.cols(); ++i) {
    const auto& cell = cells[static_cast<std::size_t>(i)];
    const auto mom = m.moments(cell);
    mass(i) = mom.mass;
    if (mom.mass <= 0) continue;
    const Point x = sites.col(i);
    w2_sq += mom.second_moment_about(x);
    h = std::max(h, max_corner_distance(cell, x));
  }
  const double total = mass.sum();
  if (std::abs(total - 1.0) > kDiscretizationDeficitTol) {
    std::ostringstream os;
    os << "Voronoi cells carry mass " << total << ", expected 1";
    throw InvalidInput(os.str());
  }

  DiscretizationResult out;
  out.measure = DiscreteMeasure::normalized(sites, mass);
  out.covering_radius_h = h;
  out.w2_exact = std::sqrt(std::max(0.0, w2_sq));
  for (const auto k : out.measure.kept()) out.cells.push_back(cells[static_cast<std::size_t>(k)]);
  return out;
}

double covering_radius(const PointSet& sites, const Region& support) {
  if (sites.cols() == 0) throw InvalidInput("at least one site is required");
  const auto cells = voronoi_cells(sites, support);
  double h = 0;
  for (Eigen::Index i = 0; i < sites.cols(); ++i)
    h = std::max(h, max_corner_distance(cells[static_cast<std::size_t>(i)], sites.col(i)));
  return h;
}

double second_moment(const DiscreteMeasure& m) {
  return m.points().colwise().squaredNorm().dot(m.weights());
}

double second_moment(const DensityMeasure& m) {
  return m.integrate([](const Point& y) { return y.squaredNorm(); });
}

namespace {

PointSet midpoint_grid(const Point& lo, const Point& hi, int nx, int ny) {
  if (lo.size() == 1) {
    PointSet s(1, nx);
    for (int k = 0; k < nx; ++k) s(0, k) = lo(0) + (k + 0.5) * (hi(0) - lo(0)) / nx;
    return s;
  }
  PointSet s(2, nx * ny);
  for (int b = 0; b < ny; ++b)
    for (int a = 0; a < nx; ++a) {
      s(0, b * nx + a) = lo(0) + (a + 0.5) * (hi(0) - lo(0)) / nx;
      s(1, b * nx + a) = lo(1) + (b + 0.5) * (hi(1) - lo(1)) / ny;
    }
  return s;
}

}  // namespace

PointSet grid_sites(const Region& support, int count) {
  if (count < 1) throw InvalidInput("site count must be positive");
  const auto [lo, hi] = support.bounds();
  if (support.dim() == 1) return midpoint_grid(lo, hi, count, 1);
  const double w = hi(0) - lo(0), h = hi(1) - lo(1);
  const int nx = std::max(1, static_cast<int>(std::lround(std::sqrt(count * w / h))));
  const int ny = std::max(1, static_cast<int>(std::lround(static_cast<double>(count) / nx)));
  return midpoint_grid(lo, hi, nx, ny);
}

PointSet grid_sites_with_spacing(const Region& support, double spacing) {
  if (!(spacing > 0)) throw InvalidInput("spacing must be positive");
  const auto [lo, hi] = support.bounds();
  const int nx = std::max(1, static_cast<int>(std::lround((hi(0) - lo(0)) / spacing)));
  const int ny =
      support.dim() == 1 ? 1 : std::max(1, static_cast<int>(std::lround((hi(1) - lo(1)) / spacing)));
  return midpoint_grid(lo, hi, nx, ny);
}

PointSet random_sites(const Region& support, int count, std::uint64_t seed) {
  if (count < 1) throw InvalidInput("site count must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto [lo, hi] = support.bounds();
  PointSet s(support.dim(), count);
  Point p(support.dim());
  for (int k = 0; k < count;) {
    for (int c = 0; c < support.dim(); ++c) p(c) = lo(c) + unit(rng) * (hi(c) - lo(c));
    if (!support.contains(p, 0.0)) continue;
    s.col(k++) = p;
  }
  return s;
}

}  // namespace otlab
