#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "otlab/measures.hpp"

namespace otlab {

/// A λ-regular triple (μ, ν, φ) with T = ∇φ known in closed form.
///
/// T pushes mu to nu, T is lambda-Lipschitz and λ|x|²/2 - φ is convex on the
/// support of mu.
struct TestProblem {
  std::string id;
  int dim = 1;
  DensityMeasure mu;
  DensityMeasure nu;
  MapFn T;
  MapFn T_inverse;
  std::function<double(const Point&)> potential;
  /// DT, a dim x dim matrix.
  std::function<Eigen::MatrixXd(const Point&)> jacobian;
  double lambda = 1;
  double w2_reference = 0;
};

/// μ = U[0,1], T(x) = a x + b. Requires a > 0.
TestProblem make_tp1d_affine(double a, double b);

/// μ = U[0,1], T(x) = x + ε sin(2πx)/(2π). Requires |ε| < 1.
TestProblem make_tp1d_sine(double eps);

/// μ = U([0,1]²), T(x) = A x + b with A symmetric positive definite.
TestProblem make_tp2d_affine(const Eigen::Matrix2d& A, const Eigen::Vector2d& b);

/// μ = U([0,1]²), T(x) = (T_ε₁(x₁), T_ε₂(x₂)) with the 1D sine maps.
TestProblem make_tp2d_separable(double eps1, double eps2);

/// Builds a problem from an id and named parameters; missing parameters take
/// their defaults. Ids: tp1d-affine (a, b), tp1d-sine (eps),
/// tp2d-affine (a11, a12, a22, b1, b2), tp2d-separable (eps1, eps2).
TestProblem make_problem(const std::string& id, const std::map<std::string, double>& params = {});

/// Parses "id" or "id:key=value,key=value", e.g. "tp1d-sine:eps=0.5".
TestProblem parse_problem(const std::string& spec);

/// max |T(x₁) - T(x₂)| / |x₁ - x₂| over all pairs of a grid of about
/// `n_samples` points covering the support of mu, boundary included.
/// A lower bound on the Lipschitz constant.
double lipschitz_estimate(const MapFn& T, const Region& support, int n_samples);

/// Discrete Legendre transform φ*(y_k) = max_i (y_k x_i - φ(x_i)).
Eigen::VectorXd legendre_1d(const Eigen::VectorXd& grid, const Eigen::VectorXd& values,
                            const Eigen::VectorXd& dual_grid);
Eigen::VectorXd legendre_1d(const Eigen::VectorXd& grid, const Eigen::VectorXd& values);

/// S = T ∘ R where R moves the k-th of n equal-μ-mass blocks of a 1D support
/// onto block perm[k], preserving μ inside each block. S pushes μ to T#μ.
struct Rearrangement {
  MapFn S;
  std::vector<int> perm;
  /// Block boundaries in the source, including both ends of the support.
  std::vector<double> breakpoints;
};

Rearrangement rearrangement_map(const TestProblem& problem, const std::vector<int>& perm);

/// Uniformly random permutation of n_blocks blocks.
Rearrangement rearrangement_map(const TestProblem& problem, int n_blocks, std::uint64_t seed);

/// max over ten polynomial test functions p of |∫ p∘T dμ - ∫ p dν|.
double pushforward_residual(const TestProblem& problem);

/// max over the quadrature nodes of mu of |g(T(x)) det DT(x) - f(x)|.
double monge_ampere_residual(const TestProblem& problem);

/// Largest eigenvalue of a central-difference Hessian of φ over `n_samples`
/// random interior points of the support of mu.
double max_hessian_eigenvalue(const TestProblem& problem, int n_samples, std::uint64_t seed);

}  // namespace otlab
