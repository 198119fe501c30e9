#pragma once

#include <functional>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace otlab {

/// A point in R^d for d <= 4 without heap allocation.
using Point = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, 4, 1>;

/// Point sets are stored column-wise: `points.col(i)` is the i-th atom.
using PointSet = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic>;

using DensityFn = std::function<double(const Point&)>;
using MapFn = std::function<Point(const Point&)>;

/// Raised when inputs violate an operation's preconditions.
class InvalidInput : public std::invalid_argument {
 public:
  explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

/// Raised when an iterative solver fails to reach its tolerance.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double best_residual)
      : std::runtime_error(what), best_residual_(best_residual) {}
  double best_residual() const { return best_residual_; }

 private:
  double best_residual_;
};

}  // namespace otlab
