#include <cmath>
#include <random>

#include "doctest.h"
#include "otlab/plans.hpp"
#include "otlab/testproblems.hpp"

using namespace otlab;

namespace {

PointSet row(std::initializer_list<double> xs) {
  PointSet p(1, static_cast<Eigen::Index>(xs.size()));
  Eigen::Index k = 0;
  for (double x : xs) p(0, k++) = x;
  return p;
}

DiscretePlan plan_from(const Eigen::MatrixXd& m) {
  return DiscretePlan::from_dense(m, m.rowwise().sum(), m.colwise().sum().transpose());
}

// Random sparse coupling with a prescribed row marginal: each row spreads
// its mass over a random subset of the columns.
Eigen::MatrixXd random_coupling(const Eigen::VectorXd& rows, Eigen::Index n_cols,
                                std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0, 1);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(rows.size(), n_cols);
  for (Eigen::Index i = 0; i < rows.size(); ++i) {
    for (Eigen::Index j = 0; j < n_cols; ++j)
      if (u(rng) < 0.4) m(i, j) = u(rng);
    m(i, static_cast<Eigen::Index>(u(rng) * n_cols) % n_cols) += 0.1;
    m.row(i) *= rows(i) / m.row(i).sum();
  }
  return m;
}

Eigen::VectorXd random_probability(Eigen::Index n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.1, 1);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = u(rng);
  return v / v.sum();
}

double max_abs_diff(const DiscretePlan& a, const Eigen::MatrixXd& b) {
  return (a.to_dense() - b).cwiseAbs().maxCoeff();
}

MapFn identity() {
  return [](const Point& x) { return x; };
}

}  // namespace

TEST_CASE("barycentric_projection") {
  const PointSet xs = row({0.1, 0.5, 0.9});
  Eigen::MatrixXd diag = Eigen::MatrixXd::Zero(3, 3);
  diag.diagonal() << 0.2, 0.3, 0.5;
  const auto id = barycentric_projection(plan_from(diag), xs, xs);
  CHECK((id.values - xs).cwiseAbs().maxCoeff() <= 1e-15);

  Eigen::MatrixXd m(2, 2);
  m << 0.5, 0, 0.25, 0.25;
  const auto th = barycentric_projection(plan_from(m), row({0, 1}), row({0, 2}));
  CHECK(th.values(0, 0) == 0);
  CHECK(th.values(0, 1) == doctest::Approx(1.0));
  CHECK(th.weights(1) == 0.5);

  const Eigen::Vector3d f(0.2, 0.3, 0.5), g(0.6, 0.3, 0.1);
  const PointSet ys = row({-1, 0.5, 4});
  const auto prod = barycentric_projection(plan_from(f * g.transpose()), xs, ys);
  const double mean = ys.row(0).dot(g);
  for (Eigen::Index i = 0; i < 3; ++i) CHECK(prod.values(0, i) == doctest::Approx(mean));

  Eigen::MatrixXd hole = Eigen::MatrixXd::Zero(2, 2);
  hole(0, 0) = 1;
  CHECK_THROWS_AS(barycentric_projection(
                      DiscretePlan::from_dense(hole, Eigen::Vector2d(1, 0), Eigen::Vector2d(1, 0)),
                      row({0, 1}), row({0, 1})),
                  InvalidInput);
}

TEST_CASE("plan_map_error") {
  const PointSet xs = row({0.1, 0.5, 0.9});
  Eigen::MatrixXd diag = Eigen::MatrixXd::Zero(3, 3);
  diag.diagonal() << 0.2, 0.3, 0.5;
  CHECK(plan_map_error(identity(), plan_from(diag), xs, xs) == 0);

  // T swaps the horizontal atoms onto the vertical ones; the anti-diagonal
  // plan sends each atom to the image of the other.
  PointSet a(2, 2), b(2, 2);
  a << 1, -1, 0, 0;
  b << 0, 0, 1, -1;
  const MapFn T = [](const Point& x) {
    Point y(2);
    y << 0, x(0);
    return y;
  };
  Eigen::MatrixXd anti(2, 2);
  anti << 0, 0.5, 0.5, 0;
  CHECK(plan_map_error(T, plan_from(anti), a, b) == doctest::Approx(4.0));
  CHECK(plan_map_error(T, plan_from(anti.rowwise().reverse()), a, b) == 0);

  std::mt19937_64 rng(4);
  const Eigen::MatrixXd m = random_coupling(random_probability(4, rng), 5, rng);
  const PointSet ys = row({-1, 0, 0.3, 2, 5});
  const MapFn c = [](const Point&) { return Point::Constant(1, 0.7); };
  const Eigen::VectorXd g = m.colwise().sum().transpose();
  double expected = 0;
  for (Eigen::Index j = 0; j < 5; ++j) expected += g(j) * std::pow(0.7 - ys(0, j), 2);
  CHECK(plan_map_error(c, plan_from(m), row({0, 1, 2, 3}), ys) == doctest::Approx(expected));
}

TEST_CASE("projection_error") {
  const DiscreteMeasure mu(row({0, 1}), Eigen::Vector2d(0.5, 0.5));
  const auto t = sample_map(identity(), mu);
  CHECK(projection_error(t, t) == 0);
  auto shifted = t;
  shifted.values.array() += 0.3;
  CHECK(projection_error(t, shifted) == doctest::Approx(0.09));

  Eigen::MatrixXd m(2, 2);
  m << 0.5, 0, 0.25, 0.25;
  const auto th = barycentric_projection(plan_from(m), row({0, 1}), row({0, 2}));
  CHECK(projection_error(t, th) == doctest::Approx(0.0));
  CHECK(plan_map_error(identity(), plan_from(m), row({0, 1}), row({0, 2})) ==
        doctest::Approx(0.5));

  auto moved = t;
  moved.sites(0, 1) = 2;
  CHECK_THROWS_AS(projection_error(t, moved), InvalidInput);
}

TEST_CASE("projection error never exceeds the plan error") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> gauss(0, 1);
  const auto p = make_tp2d_separable(0.5, -0.3);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index n = 1 + trial % 7, k = 1 + trial % 5;
    PointSet xs(2, n), ys(2, k);
    for (Eigen::Index i = 0; i < xs.size(); ++i) xs.data()[i] = gauss(rng);
    for (Eigen::Index i = 0; i < ys.size(); ++i) ys.data()[i] = gauss(rng);
    const auto plan = plan_from(random_coupling(random_probability(n, rng), k, rng));
    const auto th = barycentric_projection(plan, xs, ys);
    const auto t = sample_map(p.T, DiscreteMeasure(xs, th.weights));
    const double proj = projection_error(t, th), full = plan_map_error(p.T, plan, xs, ys);
    CHECK(proj <= full + 1e-12);
    // The gap is the within-row variance of the plan.
    double var = 0;
    for (const auto& e : plan.entries()) var += e.mass * (ys.col(e.col) - th.values.col(e.row)).squaredNorm();
    CHECK(full - proj == doctest::Approx(var).epsilon(1e-10));
  }
}

TEST_CASE("glue: hand-computed examples") {
  Eigen::MatrixXd one(1, 1);
  one << 1;
  const auto single = glue(glue(plan_from(one), plan_from(one)), plan_from(one));
  REQUIRE(single.atoms.size() == 1);
  CHECK(single.atoms[0].mass == 1);

  Eigen::MatrixXd alpha(2, 2), gamma(2, 2);
  alpha << 0.4, 0.1, 0.1, 0.4;
  gamma << 0.5, 0, 0.2, 0.3;
  const auto g = glue(plan_from(alpha), plan_from(gamma));
  CHECK(g.arity() == 3);
  CHECK(g.atoms.size() == 6);
  // Mass of (i, j, k) is α_ij γ_jk / ½.
  for (const auto& a : g.atoms)
    CHECK(a.mass == doctest::Approx(alpha(a.index[0], a.index[1]) * gamma(a.index[1], a.index[2]) / 0.5));
  CHECK(max_abs_diff(g.projection(0, 1), alpha) <= 1e-15);
  CHECK(max_abs_diff(g.projection(1, 2), gamma) <= 1e-15);

  Eigen::MatrixXd ident = Eigen::MatrixXd::Zero(2, 2);
  ident.diagonal() << 0.5, 0.5;
  const auto lifted = glue(plan_from(ident), plan_from(gamma));
  for (const auto& a : lifted.atoms) CHECK(a.index[0] == a.index[1]);
  CHECK(max_abs_diff(lifted.projection(0, 2), gamma) <= 1e-15);

  Eigen::MatrixXd off(2, 2);
  off << 0.9, 0, 0, 0.1;
  CHECK_THROWS_AS(glue(plan_from(alpha), plan_from(off)), InvalidInput);
  CHECK_THROWS_AS(g.projection(1, 1), InvalidInput);
}

TEST_CASE("glue: pairwise projections reproduce random chains") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> size(1, 20);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index n1 = size(rng), n2 = size(rng), n3 = size(rng), n4 = size(rng);
    const Eigen::MatrixXd a = random_coupling(random_probability(n1, rng), n2, rng);
    const Eigen::MatrixXd c = random_coupling(a.colwise().sum().transpose(), n3, rng);
    const Eigen::MatrixXd b = random_coupling(c.colwise().sum().transpose(), n4, rng);
    const auto g = glue(glue(plan_from(a), plan_from(c)), plan_from(b));
    CHECK(g.arity() == 4);
    CHECK(std::abs(g.total_mass() - 1) <= 1e-12);
    CHECK(max_abs_diff(g.projection(0, 1), a) <= 1e-10);
    CHECK(max_abs_diff(g.projection(1, 2), c) <= 1e-10);
    CHECK(max_abs_diff(g.projection(2, 3), b) <= 1e-10);
    for (const auto& atom : g.atoms) CHECK(atom.mass >= 0);
  }
}

TEST_CASE("stability_check examples") {
  const auto id = make_tp1d_affine(1, 0);
  const auto same = stability_check(id.T, id.T, id.mu, id.lambda);
  CHECK(same.lhs == 0);
  CHECK(same.rhs == 0);

  const auto swap = rearrangement_map(id, std::vector<int>{1, 0});
  const auto s = stability_check(id.T, swap.S, id.mu, 1, swap.breakpoints);
  CHECK(std::abs(s.lhs - 0.25) <= 1e-10);
  CHECK(std::abs(s.rhs - 0.25) <= 1e-10);

  // For an affine map in 1D, λ|x|²/2 - φ is constant and both sides agree.
  const auto a = make_tp1d_affine(2, 0);
  const auto sa = rearrangement_map(a, std::vector<int>{1, 0});
  const auto r = stability_check(a.T, sa.S, a.mu, a.lambda, sa.breakpoints);
  CHECK(r.lhs == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.rhs == doctest::Approx(1.0).epsilon(1e-12));

  const auto sine = make_tp1d_sine(0.5);
  const auto ss = rearrangement_map(sine, std::vector<int>{1, 0});
  const auto q = stability_check(sine.T, ss.S, sine.mu, sine.lambda, ss.breakpoints);
  CHECK(q.lhs < q.rhs - 1e-3);
}

TEST_CASE("stability inequality on random rearrangements") {
  for (const auto& p : {make_tp1d_affine(2, 0), make_tp1d_affine(0.5, 0.25), make_tp1d_sine(0.5),
                        make_tp1d_sine(-0.3)}) {
    CAPTURE(p.id);
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const auto r = rearrangement_map(p, 2 + static_cast<int>(seed % 9), seed);
      const auto c = stability_check(p.T, r.S, p.mu, p.lambda, r.breakpoints);
      CHECK(c.lhs <= c.rhs + 1e-8);
    }
  }
}

TEST_CASE("bound formulas") {
  CHECK(thm34_bound(1.7, 0, 0, 0.4) == 0);
  CHECK(thm34_bound(1, 0.01, 0, 1) == doctest::Approx(2 * 0.1 * std::sqrt(1.01) + 0.01).epsilon(1e-15));
  CHECK(thm34_bound(1, 0.01, 0, 1) == doctest::Approx(0.210997).epsilon(1e-6));
  CHECK(entropic_plan_error_bound(2, 0.03, 0.02, 0.5, 0) == thm34_bound(2, 0.03, 0.02, 0.5));
  CHECK(entropic_plan_error_bound(2, 0.03, 0.02, 0.5, 0.1) > thm34_bound(2, 0.03, 0.02, 0.5));
  // λ = 4, e_α = e_β = 1/8, ε = 1/2: ẽ = 1/2, W + ẽ = 2.
  CHECK(entropic_plan_error_bound(4, 0.125, 0.125, 1.5, 0.5) == doctest::Approx(4 + 0.5 + 0.125));
  CHECK(plan_distance_bound(4, 0.125, 0.125, 1.5, 0.5) == doctest::Approx(4 + 0.25));
  CHECK_THROWS_AS(thm34_bound(1, -0.1, 0, 1), InvalidInput);
  CHECK_THROWS_AS(plan_distance_bound(1, 0, 0, 1, -1), InvalidInput);
}

TEST_CASE("w2_plans_estimate") {
  PointSet a(2, 1), b(2, 1);
  a << 0, 0;
  b << 1, 0;
  const DiscreteMeasure da(a, Eigen::VectorXd::Ones(1)), db(b, Eigen::VectorXd::Ones(1));
  CHECK(w2_plans_estimate(da, db) == doctest::Approx(1.0));

  const auto p = make_tp1d_affine(2, 0);
  const DiscreteMeasure mu(row({0.25, 0.75}), Eigen::Vector2d(0.5, 0.5));
  const auto graph = graph_measure(p.T, mu);
  CHECK(graph.dim() == 2);
  CHECK(graph.point(1)(1) == 1.5);
  CHECK(w2_plans_estimate(graph, graph) <= 1e-12);

  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2, 2);
  m.diagonal() << 0.5, 0.5;
  const auto as_plan = plan_as_measure(plan_from(m), mu.points(), row({0.5, 1.5}));
  CHECK(w2_plans_estimate(graph, as_plan) <= 1e-12);

  ExactOptions tiny;
  tiny.max_product = 1;
  CHECK_THROWS_AS(w2_plans_estimate(graph, as_plan, tiny), InvalidInput);
}
