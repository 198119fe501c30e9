#include "otlab/testproblems.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace otlab {

namespace {

constexpr double kTwoPi = 2 * std::numbers::pi;

DensityFn uniform_density(double value) {
  return [value](const Point&) { return value; };
}

// The 1D sine map and its inverse on [0, 1].
struct SineMap {
  double eps;

  double T(double x) const { return x + eps * std::sin(kTwoPi * x) / kTwoPi; }
  double dT(double x) const { return 1 + eps * std::cos(kTwoPi * x); }
  double phi(double x) const { return 0.5 * x * x - eps * std::cos(kTwoPi * x) / (kTwoPi * kTwoPi); }

  // Newton on the monotone T, falling back to bisection whenever the step
  // leaves the bracket.
  double inverse(double y) const {
    if (y <= 0) return 0;
    if (y >= 1) return 1;
    double lo = 0, hi = 1, x = y;
    for (int it = 0; it < 100; ++it) {
      const double r = T(x) - y;
      if (std::abs(r) <= 1e-15) break;
      (r < 0 ? lo : hi) = x;
      double next = x - r / dT(x);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      const bool done = std::abs(next - x) <= 1e-16;
      x = next;
      if (done) break;
    }
    return x;
  }

  double density(double y) const { return 1 / dT(inverse(y)); }
  double w2_sq() const { return eps * eps / (8 * std::numbers::pi * std::numbers::pi); }
};

void check_sine_eps(double eps) {
  if (!std::isfinite(eps) || std::abs(eps) >= 1)
    throw InvalidInput("sine problem needs |eps| < 1 for a monotone map");
}

Point point1(double x) { return Point::Constant(1, x); }

Point point2(double x, double y) {
  Point p(2);
  p << x, y;
  return p;
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

TestProblem make_tp1d_affine(double a, double b) {
  if (!(a > 0) || !std::isfinite(a) || !std::isfinite(b))
    throw InvalidInput("affine problem needs a > 0");
  TestProblem p;
  p.id = "tp1d-affine:a=" + format_double(a) + ",b=" + format_double(b);
  p.dim = 1;
  p.mu = DensityMeasure(Region::interval(0, 1), uniform_density(1.0), 8, 0, DensityBounds{1, 1});
  p.nu = DensityMeasure(Region::interval(b, a + b), uniform_density(1 / a), 8, 0,
                        DensityBounds{1 / a, 1 / a});
  p.T = [a, b](const Point& x) { return point1(a * x(0) + b); };
  p.T_inverse = [a, b](const Point& y) { return point1((y(0) - b) / a); };
  p.potential = [a, b](const Point& x) { return 0.5 * a * x(0) * x(0) + b * x(0); };
  p.jacobian = [a](const Point&) { return Eigen::MatrixXd::Constant(1, 1, a); };
  p.lambda = a;
  // ∫₀¹ ((a-1)x + b)² dx
  p.w2_reference = std::sqrt((a - 1) * (a - 1) / 3 + (a - 1) * b + b * b);
  return p;
}

TestProblem make_tp1d_sine(double eps) {
  check_sine_eps(eps);
  const SineMap m{eps};
  const double e = std::abs(eps);
  TestProblem p;
  p.id = "tp1d-sine:eps=" + format_double(eps);
  p.dim = 1;
  // Integrands composed with T are far from polynomial, so μ gets the same
  // refined rule as ν.
  p.mu = DensityMeasure(Region::interval(0, 1), uniform_density(1.0), 16, 4, DensityBounds{1, 1});
  p.nu = DensityMeasure(Region::interval(0, 1), [m](const Point& y) { return m.density(y(0)); }, 16,
                        4, DensityBounds{1 / (1 + e), 1 / (1 - e)});
  p.T = [m](const Point& x) { return point1(m.T(x(0))); };
  p.T_inverse = [m](const Point& y) { return point1(m.inverse(y(0))); };
  p.potential = [m](const Point& x) { return m.phi(x(0)); };
  p.jacobian = [m](const Point& x) { return Eigen::MatrixXd::Constant(1, 1, m.dT(x(0))); };
  p.lambda = 1 + e;
  p.w2_reference = std::sqrt(m.w2_sq());
  return p;
}

TestProblem make_tp2d_affine(const Eigen::Matrix2d& A, const Eigen::Vector2d& b) {
  if (!A.allFinite() || !b.allFinite() || std::abs(A(0, 1) - A(1, 0)) > 1e-14 * A.norm())
    throw InvalidInput("affine problem needs a symmetric matrix");
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(A);
  if (!(eig.eigenvalues().minCoeff() > 0))
    throw InvalidInput("affine problem needs a positive definite matrix");
  const double det = A.determinant();
  TestProblem p;
  p.id = "tp2d-affine:a11=" + format_double(A(0, 0)) + ",a12=" + format_double(A(0, 1)) +
         ",a22=" + format_double(A(1, 1)) + ",b1=" + format_double(b(0)) +
         ",b2=" + format_double(b(1));
  p.dim = 2;
  p.mu = DensityMeasure(Region::box(0, 0, 1, 1), uniform_density(1.0), 8, 0, DensityBounds{1, 1});
  // det A > 0, so the image of the counter-clockwise unit square stays
  // counter-clockwise.
  std::vector<Region::Vec2> verts{b, b + A.col(0), b + A.col(0) + A.col(1), b + A.col(1)};
  p.nu = DensityMeasure(Region::polygon(verts), uniform_density(1 / det), 8, 0,
                        DensityBounds{1 / det, 1 / det});
  const Eigen::Matrix2d Ainv = A.inverse();
  p.T = [A, b](const Point& x) -> Point { return A * x.head<2>() + b; };
  p.T_inverse = [Ainv, b](const Point& y) -> Point { return Ainv * (y.head<2>() - b); };
  p.potential = [A, b](const Point& x) {
    const Eigen::Vector2d v = x.head<2>();
    return 0.5 * v.dot(A * v) + b.dot(v);
  };
  p.jacobian = [A](const Point&) -> Eigen::MatrixXd { return A; };
  p.lambda = eig.eigenvalues().maxCoeff();
  // E|(A - I)x + b|² with E[x] = (1/2, 1/2), E[xxᵀ] = [[1/3, 1/4], [1/4, 1/3]].
  Eigen::Matrix2d second;
  second << 1.0 / 3, 0.25, 0.25, 1.0 / 3;
  const Eigen::Matrix2d B = A - Eigen::Matrix2d::Identity();
  const double w2_sq =
      (B.transpose() * B * second).trace() + 2 * b.dot(B * Eigen::Vector2d(0.5, 0.5)) + b.squaredNorm();
  p.w2_reference = std::sqrt(std::max(0.0, w2_sq));
  return p;
}

TestProblem make_tp2d_separable(double eps1, double eps2) {
  check_sine_eps(eps1);
  check_sine_eps(eps2);
  const SineMap m1{eps1}, m2{eps2};
  const double e1 = std::abs(eps1), e2 = std::abs(eps2);
  TestProblem p;
  p.id = "tp2d-separable:eps1=" + format_double(eps1) + ",eps2=" + format_double(eps2);
  p.dim = 2;
  p.mu = DensityMeasure(Region::box(0, 0, 1, 1), uniform_density(1.0), 16, 3, DensityBounds{1, 1});
  p.nu = DensityMeasure(
      Region::box(0, 0, 1, 1),
      [m1, m2](const Point& y) { return m1.density(y(0)) * m2.density(y(1)); }, 16, 3,
      DensityBounds{1 / ((1 + e1) * (1 + e2)), 1 / ((1 - e1) * (1 - e2))});
  p.T = [m1, m2](const Point& x) { return point2(m1.T(x(0)), m2.T(x(1))); };
  p.T_inverse = [m1, m2](const Point& y) { return point2(m1.inverse(y(0)), m2.inverse(y(1))); };
  p.potential = [m1, m2](const Point& x) { return m1.phi(x(0)) + m2.phi(x(1)); };
  p.jacobian = [m1, m2](const Point& x) -> Eigen::MatrixXd {
    return Eigen::Vector2d(m1.dT(x(0)), m2.dT(x(1))).asDiagonal();
  };
  p.lambda = 1 + std::max(e1, e2);
  p.w2_reference = std::sqrt(m1.w2_sq() + m2.w2_sq());
  return p;
}

TestProblem make_problem(const std::string& id, const std::map<std::string, double>& params) {
  std::string key;
  for (char c : id) key += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  auto get = [&](const char* name, double fallback) {
    const auto it = params.find(name);
    return it == params.end() ? fallback : it->second;
  };
  auto allow = [&](std::initializer_list<const char*> names) {
    for (const auto& [k, v] : params)
      if (std::none_of(names.begin(), names.end(), [&](const char* n) { return k == n; }))
        throw InvalidInput("unknown parameter '" + k + "' for problem " + key);
  };
  if (key == "tp1d-affine") {
    allow({"a", "b"});
    return make_tp1d_affine(get("a", 2.0), get("b", 0.0));
  }
  if (key == "tp1d-sine") {
    allow({"eps"});
    return make_tp1d_sine(get("eps", 0.5));
  }
  if (key == "tp2d-affine") {
    allow({"a11", "a12", "a22", "b1", "b2"});
    Eigen::Matrix2d A;
    A << get("a11", 2.0), get("a12", 0.0), get("a12", 0.0), get("a22", 1.0);
    return make_tp2d_affine(A, Eigen::Vector2d(get("b1", 0.0), get("b2", 0.0)));
  }
  if (key == "tp2d-separable") {
    allow({"eps1", "eps2"});
    return make_tp2d_separable(get("eps1", 0.5), get("eps2", 0.5));
  }
  throw InvalidInput("unknown problem id '" + id + "'");
}

TestProblem parse_problem(const std::string& spec) {
  const auto colon = spec.find(':');
  const std::string id = spec.substr(0, colon);
  std::map<std::string, double> params;
  if (colon != std::string::npos) {
    std::stringstream rest(spec.substr(colon + 1));
    std::string item;
    while (std::getline(rest, item, ',')) {
      if (item.empty()) continue;
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw InvalidInput("expected key=value in '" + item + "'");
      const std::string value = item.substr(eq + 1);
      std::size_t used = 0;
      double v = 0;
      try {
        v = std::stod(value, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != value.size())
        throw InvalidInput("parameter '" + item.substr(0, eq) + "' is not a number");
      params[item.substr(0, eq)] = v;
    }
  }
  return make_problem(id, params);
}

double lipschitz_estimate(const MapFn& T, const Region& support, int n_samples) {
  if (n_samples < 2) throw InvalidInput("need at least two samples");
  const auto [lo, hi] = support.bounds();
  std::vector<Point> xs;
  if (support.dim() == 1) {
    for (int k = 0; k < n_samples; ++k)
      xs.push_back(point1(lo(0) + (hi(0) - lo(0)) * k / (n_samples - 1)));
  } else {
    const int n = std::max(2, static_cast<int>(std::ceil(std::sqrt(double(n_samples)))));
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        const Point x = point2(lo(0) + (hi(0) - lo(0)) * a / (n - 1),
                               lo(1) + (hi(1) - lo(1)) * b / (n - 1));
        if (support.contains(x, 1e-12)) xs.push_back(x);
      }
  }
  std::vector<Point> ys;
  ys.reserve(xs.size());
  for (const auto& x : xs) ys.push_back(T(x));
  double best = 0;
  for (std::size_t i = 0; i < xs.size(); ++i)
    for (std::size_t j = i + 1; j < xs.size(); ++j) {
      const double dx = (xs[i] - xs[j]).norm();
      if (dx > 0) best = std::max(best, (ys[i] - ys[j]).norm() / dx);
    }
  return best;
}

Eigen::VectorXd legendre_1d(const Eigen::VectorXd& grid, const Eigen::VectorXd& values,
                            const Eigen::VectorXd& dual_grid) {
  if (grid.size() != values.size() || grid.size() == 0)
    throw InvalidInput("grid and values must be nonempty and of equal length");
  if (!std::is_sorted(grid.data(), grid.data() + grid.size()))
    throw InvalidInput("grid must be sorted");
  Eigen::VectorXd out(dual_grid.size());
  for (Eigen::Index k = 0; k < dual_grid.size(); ++k)
    out(k) = (dual_grid(k) * grid - values).maxCoeff();
  return out;
}

Eigen::VectorXd legendre_1d(const Eigen::VectorXd& grid, const Eigen::VectorXd& values) {
  return legendre_1d(grid, values, grid);
}

Rearrangement rearrangement_map(const TestProblem& problem, const std::vector<int>& perm) {
  if (problem.dim != 1) throw InvalidInput("rearrangements are defined for 1D problems");
  const int n = static_cast<int>(perm.size());
  if (n < 1) throw InvalidInput("need at least one block");
  std::vector<int> sorted = perm;
  std::sort(sorted.begin(), sorted.end());
  for (int k = 0; k < n; ++k)
    if (sorted[k] != k) throw InvalidInput("block order is not a permutation");

  Rearrangement r;
  r.perm = perm;
  for (int k = 0; k <= n; ++k) r.breakpoints.push_back(problem.mu.quantile(double(k) / n));
  r.breakpoints.front() = problem.mu.support().lower();
  r.breakpoints.back() = problem.mu.support().upper();
  const DensityMeasure mu = problem.mu;
  const MapFn T = problem.T;
  const std::vector<double> cuts = r.breakpoints;
  r.S = [mu, T, perm, cuts, n](const Point& x) {
    const auto it = std::upper_bound(cuts.begin() + 1, cuts.end() - 1, x(0));
    const int k = static_cast<int>(it - cuts.begin()) - 1;
    const double p = mu.cdf(x(0)) + double(perm[k] - k) / n;
    return T(point1(mu.quantile(std::clamp(p, 0.0, 1.0))));
  };
  // Uniform μ has affine cdf and quantile; skip the numerical inversion.
  if (mu.bounds() && mu.bounds()->lower == mu.bounds()->upper) {
    const double a = mu.support().lower(), len = mu.support().upper() - a;
    for (int k = 0; k <= n; ++k) r.breakpoints[k] = k == n ? a + len : a + len * k / n;
    const std::vector<double> cuts = r.breakpoints;
    r.S = [T, perm, cuts, n, a, len](const Point& x) {
      const auto it = std::upper_bound(cuts.begin() + 1, cuts.end() - 1, x(0));
      const int k = static_cast<int>(it - cuts.begin()) - 1;
      return T(point1(x(0) + len * double(perm[k] - k) / n));
    };
  }
  return r;
}

Rearrangement rearrangement_map(const TestProblem& problem, int n_blocks, std::uint64_t seed) {
  if (n_blocks < 1) throw InvalidInput("need at least one block");
  std::vector<int> perm(n_blocks);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  return rearrangement_map(problem, perm);
}

double pushforward_residual(const TestProblem& problem) {
  std::vector<std::function<double(const Point&)>> tests;
  if (problem.dim == 1) {
    for (int k = 1; k <= 10; ++k) tests.push_back([k](const Point& y) { return std::pow(y(0), k); });
  } else {
    for (int deg = 1; deg <= 4 && tests.size() < 10; ++deg)
      for (int a = deg; a >= 0 && tests.size() < 10; --a)
        tests.push_back([a, b = deg - a](const Point& y) { return std::pow(y(0), a) * std::pow(y(1), b); });
  }
  double worst = 0;
  for (const auto& p : tests) {
    const double lhs = problem.mu.integrate([&](const Point& x) { return p(problem.T(x)); });
    const double rhs = problem.nu.integrate(p);
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  return worst;
}

double monge_ampere_residual(const TestProblem& problem) {
  double worst = 0;
  for_each_node(problem.mu.support(), problem.mu.rule(), problem.mu.refinement(),
                [&](const Point& x, double) {
                  const double lhs =
                      problem.nu.density(problem.T(x)) * problem.jacobian(x).determinant();
                  worst = std::max(worst, std::abs(lhs - problem.mu.density(x)));
                });
  return worst;
}

double max_hessian_eigenvalue(const TestProblem& problem, int n_samples, std::uint64_t seed) {
  const auto& support = problem.mu.support();
  const double step = 1e-4;
  const auto& phi = problem.potential;
  const PointSet xs = random_sites(support, n_samples, seed);
  double best = -std::numeric_limits<double>::infinity();
  for (Eigen::Index s = 0; s < xs.cols(); ++s) {
    const Point x = xs.col(s);
    const int d = problem.dim;
    Eigen::MatrixXd H(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        Point ei = Point::Zero(d), ej = Point::Zero(d);
        ei(i) = step;
        ej(j) = step;
        H(i, j) = (phi(x + ei + ej) - phi(x + ei - ej) - phi(x - ei + ej) + phi(x - ei - ej)) /
                  (4 * step * step);
      }
    const Eigen::MatrixXd Hs = 0.5 * (H + H.transpose());
    best = std::max(best, Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(Hs).eigenvalues().maxCoeff());
  }
  return best;
}

}  // namespace otlab
