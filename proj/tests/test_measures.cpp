#include <cmath>

#include "doctest.h"
#include "otlab/measures.hpp"

using namespace otlab;

namespace {

DensityMeasure uniform_unit_interval() {
  return DensityMeasure(Region::interval(0, 1), [](const Point&) { return 1.0; });
}

DensityMeasure uniform_unit_square() {
  return DensityMeasure(Region::box(0, 0, 1, 1), [](const Point&) { return 1.0; });
}

PointSet row(std::initializer_list<double> xs) {
  PointSet p(1, static_cast<Eigen::Index>(xs.size()));
  Eigen::Index k = 0;
  for (double x : xs) p(0, k++) = x;
  return p;
}

}  // namespace

TEST_CASE("DiscreteMeasure validates and drops zero atoms") {
  PointSet p(1, 3);
  p << 0.0, 1.0, 2.0;
  const DiscreteMeasure m(p, Eigen::Vector3d(0.5, 0.0, 0.5));
  CHECK(m.size() == 2);
  CHECK(m.point(1)(0) == 2.0);
  CHECK(m.kept() == std::vector<Eigen::Index>{0, 2});

  CHECK_THROWS_AS(DiscreteMeasure(p, Eigen::Vector3d(0.5, 0.2, 0.5)), InvalidInput);
  CHECK_THROWS_AS(DiscreteMeasure(p, Eigen::Vector3d(1.5, -0.5, 0.0)), InvalidInput);
  CHECK_THROWS_AS(DiscreteMeasure(p, Eigen::Vector2d(0.5, 0.5)), InvalidInput);

  const auto n = DiscreteMeasure::normalized(p, Eigen::Vector3d(1.0, 1.0, 2.0));
  CHECK(n.weights().sum() == doctest::Approx(1.0));
  CHECK(n.weights()(2) == doctest::Approx(0.5));
}

TEST_CASE("dropping zero atoms does not change integrals of test functions") {
  PointSet p(2, 4);
  p << 0.1, 0.4, 0.7, 0.9,
       0.3, 0.2, 0.8, 0.5;
  const Eigen::Vector4d w(0.25, 0.0, 0.5, 0.25);
  const DiscreteMeasure m(p, w);
  auto integrand = [](const Point& x) { return std::sin(3 * x(0)) + x(1) * x(1); };
  double full = 0, kept = 0;
  for (int i = 0; i < 4; ++i) full += w(i) * integrand(p.col(i));
  for (Eigen::Index i = 0; i < m.size(); ++i) kept += m.weights()(i) * integrand(m.point(i));
  CHECK(full == doctest::Approx(kept).epsilon(1e-15));
}

TEST_CASE("DensityMeasure rejects unnormalized densities and bound violations") {
  CHECK_THROWS_AS(DensityMeasure(Region::interval(0, 1), [](const Point&) { return 2.0; }),
                  InvalidInput);
  CHECK_THROWS_AS(DensityMeasure(Region::interval(0, 1), [](const Point& y) { return 2 * y(0); }, 8,
                                 0, DensityBounds{0.5, 2.0}),
                  InvalidInput);
  CHECK_NOTHROW(DensityMeasure(Region::interval(0, 1), [](const Point& y) { return 2 * y(0); }));
}

TEST_CASE("cdf and quantile of a 1D density") {
  const DensityMeasure m(Region::interval(0, 1), [](const Point& y) { return 2 * y(0); });
  CHECK(m.cdf(0.5) == doctest::Approx(0.25));
  CHECK(m.quantile(0.25) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(m.quantile(0.0) == 0.0);
  CHECK(m.quantile(1.0) == 1.0);
}

TEST_CASE("voronoi_discretize: two sites on U[0,1]") {
  const auto r = voronoi_discretize(uniform_unit_interval(), row({0.25, 0.75}));
  CHECK(r.measure.weights()(0) == doctest::Approx(0.5));
  CHECK(r.measure.weights()(1) == doctest::Approx(0.5));
  CHECK(r.cells[0].upper() == doctest::Approx(0.5));
  CHECK(r.cells[1].lower() == doctest::Approx(0.5));
  // 2 · ∫₀^{1/2} (x - 1/4)² dx
  CHECK(r.w2_exact * r.w2_exact == doctest::Approx(1.0 / 48).epsilon(1e-13));
  CHECK(r.covering_radius_h == doctest::Approx(0.25));
}

TEST_CASE("voronoi_discretize: equispaced midpoints reproduce the closed form") {
  for (int n : {1, 2, 3, 8, 16, 50}) {
    const auto r = voronoi_discretize(uniform_unit_interval(), grid_sites(Region::interval(0, 1), n));
    CHECK(r.w2_exact * r.w2_exact == doctest::Approx(1.0 / (12.0 * n * n)).epsilon(1e-10));
    CHECK(r.covering_radius_h == doctest::Approx(0.5 / n).epsilon(1e-12));
    CHECK(r.measure.weights().sum() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("voronoi_discretize: single site takes all mass") {
  const auto m = uniform_unit_square();
  PointSet z(2, 1);
  z << 0.2, 0.7;
  const auto r = voronoi_discretize(m, z);
  CHECK(r.measure.size() == 1);
  CHECK(r.measure.weights()(0) == doctest::Approx(1.0));
  const double expected = m.integrate([&](const Point& y) { return (y - z.col(0)).squaredNorm(); });
  CHECK(r.w2_exact * r.w2_exact == doctest::Approx(expected).epsilon(1e-13));
}

TEST_CASE("voronoi_discretize: errors and zero-mass sites") {
  CHECK_THROWS_AS(voronoi_discretize(uniform_unit_interval(), row({0.3, 0.3})), InvalidInput);
  CHECK_THROWS_AS(voronoi_discretize(uniform_unit_interval(), PointSet(1, 0)), InvalidInput);
  // The site at 5 is never the nearest one inside [0, 1].
  const auto r = voronoi_discretize(uniform_unit_interval(), row({0.2, 0.6, 5.0}));
  CHECK(r.measure.size() == 2);
  CHECK(r.measure.kept() == std::vector<Eigen::Index>{0, 1});
}

TEST_CASE("voronoi_discretize: w2_exact never exceeds the covering radius") {
  const auto sq = uniform_unit_square();
  const DensityMeasure tilted(Region::box(0, 0, 1, 1),
                              [](const Point& y) { return 0.5 + y(0); });
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto sites = random_sites(sq.support(), 5 + static_cast<int>(seed) * 7, seed);
    for (const auto* m : {&sq, &tilted}) {
      const auto r = voronoi_discretize(*m, sites);
      CHECK(r.w2_exact <= r.covering_radius_h);
      CHECK(r.measure.weights().sum() == doctest::Approx(1.0).epsilon(1e-10));
    }
  }
}

TEST_CASE("voronoi_discretize: refinement halves w2_exact") {
  double prev = 0;
  for (int n = 4; n <= 128; n *= 2) {
    const auto r = voronoi_discretize(uniform_unit_interval(), grid_sites(Region::interval(0, 1), n));
    if (prev > 0) CHECK(std::abs(prev / r.w2_exact - 2.0) <= 0.1);
    prev = r.w2_exact;
  }
}

TEST_CASE("covering_radius") {
  CHECK(covering_radius(grid_sites(Region::interval(0, 1), 10), Region::interval(0, 1)) ==
        doctest::Approx(0.05));
  PointSet center(2, 1);
  center << 0.5, 0.5;
  CHECK(covering_radius(center, Region::box(0, 0, 1, 1)) == doctest::Approx(std::sqrt(0.5)));
  PointSet corners(2, 4);
  corners << 0, 1, 1, 0,
             0, 0, 1, 1;
  CHECK(covering_radius(corners, Region::box(0, 0, 1, 1)) == doctest::Approx(std::sqrt(0.5)));
}

TEST_CASE("second_moment") {
  CHECK(second_moment(uniform_unit_interval()) == doctest::Approx(1.0 / 3));
  CHECK(second_moment(DiscreteMeasure(row({0.0}), Eigen::VectorXd::Ones(1))) == 0.0);
  PointSet p(2, 2);
  p << 1, 0,
       0, 1;
  CHECK(second_moment(DiscreteMeasure(p, Eigen::Vector2d(0.5, 0.5))) == doctest::Approx(1.0));
}

TEST_CASE("site placement") {
  const auto g = grid_sites(Region::box(0, 0, 2, 1), 32);
  CHECK(g.cols() == 32);
  const auto s = grid_sites_with_spacing(Region::box(0, 0, 2, 1), 0.25);
  CHECK(s.cols() == 32);
  const auto a = random_sites(Region::box(0, 0, 1, 1), 50, 9);
  const auto b = random_sites(Region::box(0, 0, 1, 1), 50, 9);
  CHECK((a - b).norm() == 0);
  for (Eigen::Index i = 0; i < a.cols(); ++i) CHECK(Region::box(0, 0, 1, 1).contains(a.col(i)));
}
