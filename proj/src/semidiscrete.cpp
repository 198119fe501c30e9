#include "otlab/semidiscrete.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

namespace otlab {

namespace {

constexpr int kEdgeOrder = 16;

void check_distinct_sites(const PointSet& sites) {
  for (Eigen::Index i = 0; i < sites.cols(); ++i)
    for (Eigen::Index j = i + 1; j < sites.cols(); ++j)
      if ((sites.col(i) - sites.col(j)).norm() <= 1e-14)
        throw InvalidInput("sites must be pairwise distinct");
}

// Power weights w and potentials φ are related by φ_i = (|x_i|² - w_i) / 2.
Eigen::VectorXd potentials_from_weights(const PointSet& sites, const Eigen::VectorXd& w) {
  Eigen::VectorXd phi = 0.5 * (sites.colwise().squaredNorm().transpose() - w);
  return phi.array() - phi(0);
}

struct CellState {
  std::vector<Region> cells;
  Eigen::VectorXd masses;
  // Σ_i ∫_{F_i} (|x_i - y|² - w_i) g(y) dy, the transport part of the dual.
  double transport = 0;
};

CellState evaluate(const PointSet& sites, const Eigen::VectorXd& w, const DensityMeasure& nu,
                   bool with_transport) {
  CellState s;
  s.cells = laguerre_cells(sites, potentials_from_weights(sites, w), nu.support());
  s.masses.resize(sites.cols());
  for (Eigen::Index i = 0; i < sites.cols(); ++i) {
    const auto& cell = s.cells[static_cast<std::size_t>(i)];
    if (!with_transport) {
      s.masses(i) = nu.integrate(cell, [](const Point&) { return 1.0; });
      continue;
    }
    const auto m = nu.moments(cell);
    s.masses(i) = m.mass;
    s.transport += m.second_moment_about(sites.col(i)) - w(i) * m.mass;
  }
  return s;
}

// Jacobian of the mass map, ∂ν(F_i)/∂w_j: a weighted graph Laplacian with
// edge weights ∫_{Γ_ij} g ds / (2 |x_i - x_j|).
Eigen::SparseMatrix<double> mass_jacobian(const PointSet& sites, const CellState& s,
                                          const DensityMeasure& nu) {
  const Eigen::Index n = sites.cols();
  std::vector<Eigen::Triplet<double>> t;
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (const auto& [j, flux] : boundary_integrals(s.cells[static_cast<std::size_t>(i)],
                                                    nu.density_fn(), kEdgeOrder)) {
      if (j < 0 || j == i || !(flux > 0)) continue;
      const double a = flux / (2 * (sites.col(i) - sites.col(j)).norm());
      // Each interface is seen from both sides; average the two estimates.
      t.emplace_back(i, j, -0.5 * a);
      t.emplace_back(j, i, -0.5 * a);
      diag(i) += 0.5 * a;
      diag(j) += 0.5 * a;
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) t.emplace_back(i, i, diag(i));
  Eigen::SparseMatrix<double> J(n, n);
  J.setFromTriplets(t.begin(), t.end());
  return J;
}

// Solves J δ = r with δ_0 = 0. J is a connected graph Laplacian whenever
// every cell has positive mass.
bool newton_direction(const Eigen::SparseMatrix<double>& J, const Eigen::VectorXd& r,
                      Eigen::VectorXd& delta) {
  const Eigen::Index n = J.rows();
  delta = Eigen::VectorXd::Zero(n);
  if (n == 1) return true;
  const Eigen::SparseMatrix<double> R = J.bottomRightCorner(n - 1, n - 1);
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(R);
  if (ldlt.info() != Eigen::Success) return false;
  delta.tail(n - 1) = ldlt.solve(r.tail(n - 1));
  return ldlt.info() == Eigen::Success && delta.allFinite();
}

// Weights whose power diagram is the Voronoi diagram of the sites shrunk by
// s toward the centroid c of Y, z_i = c + s (x_i - c): the planes of both
// diagrams coincide when w_i = |x_i|² - |z_i|² / s. With every z_i in Y,
// every cell contains its z_i and is nonempty. s = 1 gives w = 0.
Eigen::VectorXd initial_weights(const PointSet& sites, const Region& Y) {
  Point c = Point::Zero(sites.rows());
  const auto corners = Y.corners();
  for (const auto& v : corners) c += v;
  c /= static_cast<double>(corners.size());
  double s = 1;
  auto inside = [&](double scale) {
    for (Eigen::Index i = 0; i < sites.cols(); ++i)
      if (!Y.contains(c + scale * (sites.col(i) - c), 0.0)) return false;
    return true;
  };
  for (int k = 0; k < 60 && !inside(s); ++k) s *= 0.5;
  if (s == 1) return Eigen::VectorXd::Zero(sites.cols());
  Eigen::VectorXd w(sites.cols());
  for (Eigen::Index i = 0; i < sites.cols(); ++i) {
    const Point z = c + s * (sites.col(i) - c);
    w(i) = sites.col(i).squaredNorm() - z.squaredNorm() / s;
  }
  return w;
}

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
      .count();
}

}  // namespace

Eigen::VectorXd power_weights(const SemiDiscretePotentials& potentials) {
  Eigen::VectorXd w = potentials.sites.colwise().squaredNorm().transpose() - 2 * potentials.values;
  return w.array() - w(0);
}

SemiDiscretePotentials potentials_from_power_weights(const PointSet& sites,
                                                     const Eigen::VectorXd& weights) {
  if (weights.size() != sites.cols()) throw InvalidInput("one weight per site is required");
  return {sites, potentials_from_weights(sites, weights)};
}

LaguerreDecomposition laguerre_decomposition(const SemiDiscretePotentials& potentials,
                                             const DensityMeasure& nu) {
  const PointSet& sites = potentials.sites;
  if (sites.cols() == 0) throw InvalidInput("at least one site is required");
  if (potentials.values.size() != sites.cols())
    throw InvalidInput("one potential value per site is required");
  if (!potentials.values.allFinite()) throw InvalidInput("potentials must be finite");
  check_distinct_sites(sites);

  LaguerreDecomposition d;
  d.sites = sites;
  d.cells = laguerre_cells(sites, potentials.values, nu.support());
  const Eigen::Index n = sites.cols();
  d.masses.resize(n);
  d.barycenters.resize(sites.rows(), n);
  d.second_moments.resize(n);
  d.diameters.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& cell = d.cells[static_cast<std::size_t>(i)];
    const auto m = nu.moments(cell);
    d.masses(i) = m.mass;
    d.barycenters.col(i) = m.barycenter();
    d.second_moments(i) = m.central_second_moment();
    d.diameters(i) = diameter(cell);
  }
  return d;
}

SemiDiscreteResult solve_semidiscrete(const DiscreteMeasure& mu_h, const DensityMeasure& nu,
                                      const SemiDiscreteOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  const PointSet& sites = mu_h.points();
  const Eigen::VectorXd& f = mu_h.weights();
  const Eigen::Index n = sites.cols();
  if (sites.rows() != nu.dim()) throw InvalidInput("site dimension does not match the density");
  if (!(options.tol_mass > 0)) throw InvalidInput("tol_mass must be positive");
  check_distinct_sites(sites);

  double tol = options.tol_mass;
  if (options.h_budget > 0) {
    const double r = options.h_budget / diameter(nu.support());
    tol = std::min(tol, r * r / static_cast<double>(n));
  }

  const bool gradient = options.method == SemiDiscreteMethod::Gradient;
  Eigen::VectorXd w = initial_weights(sites, nu.support());
  CellState s = evaluate(sites, w, nu, gradient);

  // Quadrature can still report zero mass for slivers; push those cells.
  const double scale = std::pow(diameter(nu.support()), 2);
  for (int round = 0; round < 60 && s.masses.minCoeff() <= 0; ++round) {
    for (Eigen::Index i = 0; i < n; ++i)
      if (s.masses(i) <= 0) w(i) += scale * std::ldexp(1e-12, round);
    s = evaluate(sites, w, nu, gradient);
  }
  if (s.masses.minCoeff() <= 0) throw SolverError("could not make every Laguerre cell nonempty", 1.0);

  const double eps0 = 0.5 * std::min(f.minCoeff(), s.masses.minCoeff());
  Eigen::VectorXd residual = f - s.masses;
  double best = residual.cwiseAbs().maxCoeff();
  Eigen::VectorXd best_w = w;
  double step = 1.0;
  long it = 0;

  for (; it < options.max_iters && residual.cwiseAbs().maxCoeff() > tol; ++it) {
    if (!gradient) {
      Eigen::VectorXd delta;
      if (!newton_direction(mass_jacobian(sites, s, nu), residual, delta)) break;
      const double r0 = residual.cwiseAbs().maxCoeff();
      double tau = 1.0;
      CellState trial;
      for (int k = 0; k < 60; ++k, tau *= 0.5) {
        trial = evaluate(sites, w + tau * delta, nu, false);
        if (trial.masses.minCoeff() >= eps0 &&
            (f - trial.masses).cwiseAbs().maxCoeff() <= (1 - tau / 2) * r0)
          break;
      }
      w += tau * delta;
      s = std::move(trial);
    } else {
      // Ascent on G(w) = Σ f_i w_i + transport(w); ∇G = f - ν(F).
      const double g0 = f.dot(w) + s.transport;
      const double slope = residual.squaredNorm();
      CellState trial;
      for (int k = 0; k < 60; ++k, step *= 0.5) {
        trial = evaluate(sites, w + step * residual, nu, true);
        if (f.dot(w + step * residual) + trial.transport >= g0 + 1e-4 * step * slope) break;
        // Near the optimum the ascent is below the roundoff of G; a smaller
        // gradient is accepted instead.
        if ((f - trial.masses).squaredNorm() < slope && trial.masses.minCoeff() > 0) break;
      }
      w += step * residual;
      s = std::move(trial);
      step *= 2;
    }
    residual = f - s.masses;
    const double r = residual.cwiseAbs().maxCoeff();
    if (r < best) {
      best = r;
      best_w = w;
    }
  }

  if (best > tol) {
    std::ostringstream os;
    os << "semi-discrete solver stopped after " << it << " iterations with mass residual " << best;
    throw SolverError(os.str(), best);
  }

  SemiDiscreteResult out;
  out.potentials.sites = sites;
  out.potentials.values = potentials_from_weights(sites, best_w);
  out.decomposition = laguerre_decomposition(out.potentials, nu);
  out.iterations = it;
  out.residual = (f - out.decomposition.masses).cwiseAbs().maxCoeff();
  out.wall_ms = elapsed_ms(start);
  return out;
}

double semidiscrete_plan_error(const MapFn& T, const LaguerreDecomposition& dec,
                               const DensityMeasure& nu) {
  double total = 0;
  for (Eigen::Index i = 0; i < dec.sites.cols(); ++i) {
    const Point t = T(dec.sites.col(i));
    total += nu.integrate(dec.cells[static_cast<std::size_t>(i)],
                          [&](const Point& y) { return (t - y).squaredNorm(); });
  }
  return total;
}

DecomposedError decomposed_error(const MapFn& T, const LaguerreDecomposition& dec) {
  DecomposedError e;
  for (Eigen::Index i = 0; i < dec.sites.cols(); ++i) {
    const Point t = T(dec.sites.col(i));
    e.bary_term += dec.masses(i) * (t - dec.barycenters.col(i)).squaredNorm();
    e.moment_term += dec.second_moments(i);
    e.diam_term += dec.masses(i) * dec.diameters(i) * dec.diameters(i);
  }
  return e;
}

double eh_semi_bound(double lambda, double w2_mu_nu, double w2_mu_muh) {
  if (!(lambda >= 0) || !(w2_mu_nu >= 0) || !(w2_mu_muh >= 0))
    throw InvalidInput("bound arguments must be nonnegative");
  return 2 * std::sqrt(lambda) * std::sqrt(w2_mu_muh) * std::sqrt(w2_mu_nu + w2_mu_muh) +
         lambda * w2_mu_muh;
}

double cell_moment_constant(int dim, double c1, double c2) {
  if (!(c1 > 0) || !(c2 >= c1)) throw InvalidInput("density bounds need 0 < c1 <= c2");
  if (dim == 1) return c1 / (12 * c2);
  if (dim == 2) return c1 / (1024 * c2);
  throw InvalidInput("cell moment constant is only available for d <= 2");
}

}  // namespace otlab
