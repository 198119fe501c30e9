#include <cmath>
#include <random>

#include "doctest.h"
#include "otlab/semidiscrete.hpp"
#include "otlab/testproblems.hpp"

using namespace otlab;

namespace {

PointSet row(std::initializer_list<double> xs) {
  PointSet p(1, static_cast<Eigen::Index>(xs.size()));
  Eigen::Index k = 0;
  for (double x : xs) p(0, k++) = x;
  return p;
}

DensityMeasure unit_interval() {
  return DensityMeasure(Region::interval(0, 1), [](const Point&) { return 1.0; });
}

// Two sites at 1/4 and 3/4 with equal power weights.
SemiDiscretePotentials symmetric_pair() {
  return potentials_from_power_weights(row({0.25, 0.75}), Eigen::Vector2d::Zero());
}

MapFn identity() {
  return [](const Point& x) { return x; };
}

DiscreteMeasure random_weights(const PointSet& sites, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.5, 1.5);
  Eigen::VectorXd w(sites.cols());
  for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = u(rng);
  return DiscreteMeasure::normalized(sites, w);
}

}  // namespace

TEST_CASE("laguerre_decomposition: symmetric pair") {
  const auto d = laguerre_decomposition(symmetric_pair(), unit_interval());
  CHECK(d.cells[0].lower() == 0);
  CHECK(d.cells[0].upper() == doctest::Approx(0.5));
  CHECK(d.cells[1].lower() == doctest::Approx(0.5));
  CHECK(d.masses(0) == doctest::Approx(0.5));
  CHECK(d.masses(1) == doctest::Approx(0.5));
  CHECK(d.barycenters(0, 0) == doctest::Approx(0.25));
  CHECK(d.barycenters(0, 1) == doctest::Approx(0.75));
  CHECK(d.second_moments(0) == doctest::Approx(1.0 / 96));
  CHECK(d.diameters(1) == doctest::Approx(0.5));
}

TEST_CASE("laguerre_decomposition: potential convention") {
  // Equal nodal values put the bisector at y = 0 for sites on the positive axis.
  SemiDiscretePotentials flat{row({0.25, 0.75}), Eigen::Vector2d::Zero()};
  const auto d = laguerre_decomposition(flat, unit_interval());
  CHECK(d.masses(0) == doctest::Approx(0.0));
  CHECK(d.masses(1) == doctest::Approx(1.0));
  const auto w = power_weights(symmetric_pair());
  CHECK(w.norm() <= 1e-15);
}

TEST_CASE("laguerre_decomposition: single site and shift invariance") {
  const auto p = make_tp2d_affine(Eigen::Vector2d(2, 1).asDiagonal(), Eigen::Vector2d::Zero());
  PointSet one(2, 1);
  one << 0.3, 0.6;
  const auto d = laguerre_decomposition({one, Eigen::VectorXd::Zero(1)}, p.nu);
  CHECK(d.masses(0) == doctest::Approx(1.0));
  CHECK(d.barycenters(0, 0) == doctest::Approx(1.0));
  CHECK(d.barycenters(1, 0) == doctest::Approx(0.5));

  std::mt19937_64 rng(5);
  const PointSet sites = random_sites(Region::box(0, 0, 1, 1), 12, 5);
  std::normal_distribution<double> gauss(0.0, 0.1);
  Eigen::VectorXd phi(12);
  for (Eigen::Index i = 0; i < 12; ++i) phi(i) = gauss(rng);
  const auto a = laguerre_decomposition({sites, phi}, p.nu);
  const auto b = laguerre_decomposition({sites, (phi.array() + 3.7).matrix()}, p.nu);
  CHECK((a.masses - b.masses).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((a.barycenters - b.barycenters).cwiseAbs().maxCoeff() <= 1e-12);

  CHECK_THROWS_AS(laguerre_decomposition({row({0.2, 0.2}), Eigen::Vector2d::Zero()}, unit_interval()),
                  InvalidInput);
}

TEST_CASE("laguerre_decomposition: cells tile the support for any potentials") {
  const auto p = make_tp2d_affine(Eigen::Vector2d(2, 1).asDiagonal(), Eigen::Vector2d::Zero());
  std::mt19937_64 rng(8);
  std::normal_distribution<double> gauss(0.0, 0.2);
  for (int trial = 0; trial < 20; ++trial) {
    const PointSet sites = random_sites(Region::box(0, 0, 1, 1), 5 + trial, 100 + trial);
    Eigen::VectorXd phi(sites.cols());
    for (Eigen::Index i = 0; i < phi.size(); ++i) phi(i) = gauss(rng);
    const auto d = laguerre_decomposition({sites, phi}, p.nu);
    CHECK(std::abs(d.masses.sum() - 1) <= 1e-8);
    double area = 0;
    for (std::size_t i = 0; i < d.cells.size(); ++i) {
      area += d.cells[i].measure();
      if (d.masses(static_cast<Eigen::Index>(i)) > 0)
        CHECK(d.cells[i].contains(d.barycenters.col(static_cast<Eigen::Index>(i)), 1e-12));
    }
    CHECK(area == doctest::Approx(2.0).epsilon(1e-12));
  }
}

TEST_CASE("raising one potential never increases its cell mass") {
  const auto p = make_tp1d_sine(0.5);
  std::mt19937_64 rng(2);
  const PointSet sites = random_sites(Region::interval(0, 1), 10, 2);
  const Eigen::VectorXd phi = 0.5 * sites.colwise().squaredNorm().transpose();
  const auto base = laguerre_decomposition({sites, phi}, p.nu);
  for (Eigen::Index i = 0; i < 10; ++i) {
    Eigen::VectorXd up = phi;
    up(i) += 0.01;
    CHECK(laguerre_decomposition({sites, up}, p.nu).masses(i) <= base.masses(i) + 1e-14);
  }
}

TEST_CASE("solve_semidiscrete: symmetric pair and a single site") {
  const DiscreteMeasure mu(row({0.25, 0.75}), Eigen::Vector2d(0.5, 0.5));
  const auto r = solve_semidiscrete(mu, unit_interval());
  CHECK(r.residual <= 1e-10);
  CHECK(power_weights(r.potentials).norm() <= 1e-10);
  CHECK(r.potentials.values(0) == 0);

  const DiscreteMeasure one(row({0.4}), Eigen::VectorXd::Ones(1));
  const auto s = solve_semidiscrete(one, unit_interval());
  CHECK(s.decomposition.masses(0) == doctest::Approx(1.0));
  CHECK(s.decomposition.cells[0].lower() == 0);
  CHECK(s.decomposition.cells[0].upper() == 1);
}

TEST_CASE("solve_semidiscrete: 1D cells are the quantile intervals of nu") {
  const auto p = make_tp1d_sine(0.5);
  std::mt19937_64 rng(17);
  for (int n : {3, 10, 40}) {
    PointSet sites = random_sites(Region::interval(0, 1), n, 40 + n);
    std::sort(sites.data(), sites.data() + n);
    const auto mu = random_weights(sites, rng);
    SemiDiscreteOptions opts;
    opts.tol_mass = 1e-12;
    const auto r = solve_semidiscrete(mu, p.nu, opts);
    double cum = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& cell = r.decomposition.cells[static_cast<std::size_t>(i)];
      // ν([0, T(t)]) = t, so the ν-quantile of level t is T(t).
      CHECK(std::abs(cell.lower() - p.T(Point::Constant(1, cum))(0)) <= 1e-9);
      cum += mu.weights()(i);
      CHECK(std::abs(cell.upper() - p.T(Point::Constant(1, cum))(0)) <= 1e-9);
    }
  }
}

TEST_CASE("solve_semidiscrete: 2D masses, sites outside the support, gradient agreement") {
  const auto p = make_tp2d_affine(Eigen::Vector2d(2, 1).asDiagonal(), Eigen::Vector2d::Zero());
  std::mt19937_64 rng(3);
  const PointSet sites = random_sites(Region::box(-0.5, -0.5, 1.5, 1.5), 30, 3);
  const auto mu = random_weights(sites, rng);
  const auto newton = solve_semidiscrete(mu, p.nu);
  CHECK(newton.residual <= 1e-10);
  CHECK((newton.decomposition.masses - mu.weights()).cwiseAbs().maxCoeff() <= 1e-10);

  const PointSet small = random_sites(Region::box(0, 0, 1, 1), 6, 4);
  const auto mu6 = random_weights(small, rng);
  SemiDiscreteOptions g;
  g.method = SemiDiscreteMethod::Gradient;
  g.tol_mass = 1e-9;
  g.max_iters = 20000;
  const auto ga = solve_semidiscrete(mu6, p.nu, g);
  const auto nw = solve_semidiscrete(mu6, p.nu);
  CHECK(ga.residual <= 1e-9);
  CHECK((ga.potentials.values - nw.potentials.values).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("solve_semidiscrete: iteration cap raises with the best residual") {
  const auto p = make_tp1d_sine(0.5);
  const PointSet sites = grid_sites(Region::interval(0, 1), 50);
  std::mt19937_64 rng(1);
  const auto mu = random_weights(sites, rng);
  SemiDiscreteOptions opts;
  opts.max_iters = 1;
  opts.tol_mass = 1e-14;
  try {
    solve_semidiscrete(mu, p.nu, opts);
    FAIL("expected SolverError");
  } catch (const SolverError& e) {
    CHECK(e.best_residual() > 0);
    CHECK(std::isfinite(e.best_residual()));
  }
}

TEST_CASE("h budget tightens the mass tolerance") {
  const auto p = make_tp1d_sine(0.5);
  const PointSet sites = grid_sites(Region::interval(0, 1), 20);
  std::mt19937_64 rng(6);
  const auto mu = random_weights(sites, rng);
  SemiDiscreteOptions opts;
  opts.tol_mass = 1e-3;
  opts.h_budget = 1e-4;
  const auto r = solve_semidiscrete(mu, p.nu, opts);
  const double spread = (r.decomposition.masses - mu.weights()).lpNorm<1>();
  CHECK(diameter(p.nu.support()) * std::sqrt(spread) <= 1e-4);
}

TEST_CASE("plan error and its decomposition") {
  const auto d = laguerre_decomposition(symmetric_pair(), unit_interval());
  CHECK(semidiscrete_plan_error(identity(), d, unit_interval()) == doctest::Approx(1.0 / 48));
  const auto e = decomposed_error(identity(), d);
  CHECK(std::abs(e.bary_term) <= 1e-15);
  CHECK(e.moment_term == doctest::Approx(1.0 / 48));
  CHECK(e.diam_term == doctest::Approx(0.25));

  // T(x_i) = m_i + v moves only the barycentric term.
  const Point v = Point::Constant(1, 0.1);
  const MapFn shifted = [&](const Point& x) -> Point {
    return x(0) < 0.5 ? Point(d.barycenters.col(0) + v) : Point(d.barycenters.col(1) + v);
  };
  CHECK(decomposed_error(shifted, d).bary_term == doctest::Approx(0.01));

  for (const char* id : {"tp1d-sine:eps=0.5", "tp2d-affine", "tp2d-separable"}) {
    const auto p = parse_problem(id);
    const auto disc = voronoi_discretize(p.mu, grid_sites(p.mu.support(), 16));
    const auto r = solve_semidiscrete(disc.measure, p.nu);
    const double total = semidiscrete_plan_error(p.T, r.decomposition, p.nu);
    const auto parts = decomposed_error(p.T, r.decomposition);
    CHECK(std::abs(parts.bary_term + parts.moment_term - total) <= 1e-10 * total);
  }
}

TEST_CASE("eh_semi_bound") {
  CHECK(eh_semi_bound(1, 1, 0) == 0);
  CHECK(eh_semi_bound(1, 1, 0.01) == doctest::Approx(2 * 0.1 * std::sqrt(1.01) + 0.01));
  CHECK(eh_semi_bound(1, 1, 0.01) == doctest::Approx(0.210997).epsilon(1e-6));
  CHECK(eh_semi_bound(4, 0, 0.03) == doctest::Approx(8 * 0.03));
  CHECK_THROWS_AS(eh_semi_bound(-1, 1, 1), InvalidInput);
  CHECK_THROWS_AS(eh_semi_bound(1, -1, 1), InvalidInput);
}

TEST_CASE("plan error stays below E_h² and the cell bound holds") {
  for (const char* id : {"tp1d-sine:eps=0.5", "tp1d-affine:a=2,b=0", "tp2d-affine",
                         "tp2d-separable:eps1=0.5,eps2=0.3"}) {
    CAPTURE(id);
    const auto p = parse_problem(id);
    for (int n : {8, 32}) {
      const auto disc = voronoi_discretize(p.mu, grid_sites(p.mu.support(), n));
      const auto r = solve_semidiscrete(disc.measure, p.nu);
      const double eh = eh_semi_bound(p.lambda, p.w2_reference, disc.w2_exact);
      const double err = semidiscrete_plan_error(p.T, r.decomposition, p.nu);
      CHECK(err <= eh * eh);
      const auto parts = decomposed_error(p.T, r.decomposition);
      const double C = cell_moment_constant(p.dim, p.nu.bounds()->lower, p.nu.bounds()->upper);
      CHECK(parts.bary_term + C * parts.diam_term <= eh * eh);
      for (Eigen::Index i = 0; i < r.decomposition.masses.size(); ++i) {
        const double di = r.decomposition.diameters(i);
        // Tight for uniform densities in 1D, hence the roundoff margin.
        CHECK(r.decomposition.second_moments(i) >= (1 - 1e-12) * C * r.decomposition.masses(i) * di * di);
      }
    }
  }
}

TEST_CASE("cell_moment_constant") {
  CHECK(cell_moment_constant(2, 1, 1) == doctest::Approx(1.0 / 1024));
  CHECK(cell_moment_constant(1, 0.5, 2) == doctest::Approx(0.5 / 24));
  CHECK_THROWS_AS(cell_moment_constant(3, 1, 1), InvalidInput);
  CHECK_THROWS_AS(cell_moment_constant(2, 2, 1), InvalidInput);
}
