#pragma once

// Convex regions in 1D and 2D, half-plane clipping, and Gauss quadrature
// over intervals and triangulated polygons. Everything here is templated on
// the scalar type; the rest of the library instantiates it with double.

#include <algorithm>
#include <array>
#include <limits>
#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Core>

#include "otlab/types.hpp"

namespace otlab {

/// Absolute tolerance for geometric predicates on O(1) coordinates.
inline constexpr double kGeomTol = 1e-12;

template <typename Scalar>
using PointT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1, Eigen::ColMajor, 4, 1>;

/// Label of an edge (2D) or endpoint (1D) that belongs to the original
/// region rather than to a clipping half-plane.
inline constexpr int kBoundaryLabel = -1;

/// A closed convex interval or polygon, possibly empty.
///
/// Polygons store their vertices counterclockwise. Every edge carries an
/// integer label naming the half-plane that produced it, so that callers can
/// recover cell adjacency after a sequence of clips. Edge k runs from
/// vertex k to vertex k+1.
template <typename Scalar>
class ConvexRegion {
 public:
  using Vec2 = Eigen::Matrix<Scalar, 2, 1>;

  ConvexRegion() = default;

  static ConvexRegion interval(Scalar a, Scalar b) {
    if (!(a <= b)) throw InvalidInput("interval requires a <= b");
    ConvexRegion r;
    r.dim_ = 1;
    r.empty_ = false;
    r.lo_ = a;
    r.hi_ = b;
    return r;
  }

  /// Validating constructor: counterclockwise, convex, at least 3 vertices.
  static ConvexRegion polygon(std::vector<Vec2> vertices) {
    if (vertices.size() < 3) throw InvalidInput("polygon needs at least 3 vertices");
    ConvexRegion r = from_vertices(std::move(vertices),
                                   std::vector<int>{}, /*validate=*/false);
    if (!r.is_convex()) throw InvalidInput("polygon is not convex and counterclockwise");
    if (!(r.measure() > 0)) throw InvalidInput("polygon has zero area");
    return r;
  }

  static ConvexRegion box(Scalar x0, Scalar y0, Scalar x1, Scalar y1) {
    return polygon({Vec2(x0, y0), Vec2(x1, y0), Vec2(x1, y1), Vec2(x0, y1)});
  }

  /// Interval with explicit endpoint labels; empty when a > b.
  static ConvexRegion labeled_interval(Scalar a, int a_label, Scalar b, int b_label) {
    if (a > b) return empty(1);
    ConvexRegion r = interval(a, b);
    r.lo_label_ = a_label;
    r.hi_label_ = b_label;
    return r;
  }

  static ConvexRegion empty(int dim) {
    ConvexRegion r;
    r.dim_ = dim;
    r.empty_ = true;
    return r;
  }

  /// Unvalidated construction used by clipping; drops repeated vertices and
  /// collapses to empty when fewer than 3 distinct vertices remain.
  static ConvexRegion from_vertices(std::vector<Vec2> vertices, std::vector<int> labels,
                                    bool validate = false) {
    if (labels.empty()) labels.assign(vertices.size(), kBoundaryLabel);
    std::vector<Vec2> v;
    std::vector<int> l;
    v.reserve(vertices.size());
    l.reserve(vertices.size());
    const Scalar dup = Scalar(1e-15);
    for (std::size_t k = 0; k < vertices.size(); ++k) {
      if (!v.empty() && (vertices[k] - v.back()).cwiseAbs().maxCoeff() <= dup) {
        l.back() = labels[k];
        continue;
      }
      v.push_back(vertices[k]);
      l.push_back(labels[k]);
    }
    while (v.size() > 1 && (v.back() - v.front()).cwiseAbs().maxCoeff() <= dup) {
      v.pop_back();
      l.pop_back();
    }
    ConvexRegion r;
    r.dim_ = 2;
    if (v.size() < 3) {
      r.empty_ = true;
      return r;
    }
    r.empty_ = false;
    r.vertices_ = std::move(v);
    r.labels_ = std::move(l);
    if (!(r.measure() > 0)) {
      r.empty_ = true;
      r.vertices_.clear();
      r.labels_.clear();
    }
    if (validate && !r.is_convex()) throw InvalidInput("polygon is not convex");
    return r;
  }

  int dim() const { return dim_; }
  bool is_empty() const { return empty_; }

  Scalar lower() const { return lo_; }
  Scalar upper() const { return hi_; }
  int lower_label() const { return lo_label_; }
  int upper_label() const { return hi_label_; }

  const std::vector<Vec2>& vertices() const { return vertices_; }
  const std::vector<int>& edge_labels() const { return labels_; }

  /// Length (1D) or area (2D).
  Scalar measure() const {
    if (empty_) return Scalar(0);
    if (dim_ == 1) return hi_ - lo_;
    Scalar a(0);
    const std::size_t n = vertices_.size();
    for (std::size_t k = 0; k < n; ++k) {
      const Vec2& p = vertices_[k];
      const Vec2& q = vertices_[(k + 1) % n];
      a += p.x() * q.y() - p.y() * q.x();
    }
    return a / Scalar(2);
  }

  bool is_convex(Scalar tol = Scalar(kGeomTol)) const {
    if (empty_ || dim_ == 1) return true;
    const std::size_t n = vertices_.size();
    for (std::size_t k = 0; k < n; ++k) {
      const Vec2 e0 = vertices_[(k + 1) % n] - vertices_[k];
      const Vec2 e1 = vertices_[(k + 2) % n] - vertices_[(k + 1) % n];
      if (e0.x() * e1.y() - e0.y() * e1.x() < -tol) return false;
    }
    return true;
  }

  template <typename Derived>
  bool contains(const Eigen::MatrixBase<Derived>& p, Scalar tol = Scalar(kGeomTol)) const {
    if (empty_) return false;
    if (dim_ == 1) return p(0) >= lo_ - tol && p(0) <= hi_ + tol;
    const std::size_t n = vertices_.size();
    for (std::size_t k = 0; k < n; ++k) {
      const Vec2 e = vertices_[(k + 1) % n] - vertices_[k];
      const Scalar cross = e.x() * (p(1) - vertices_[k].y()) - e.y() * (p(0) - vertices_[k].x());
      if (cross < -tol * std::max(Scalar(1), e.norm())) return false;
    }
    return true;
  }

  /// Axis-aligned bounding box as (min corner, max corner).
  std::pair<PointT<Scalar>, PointT<Scalar>> bounds() const {
    PointT<Scalar> lo(dim_), hi(dim_);
    if (dim_ == 1) {
      lo(0) = lo_;
      hi(0) = hi_;
      return {lo, hi};
    }
    lo.setConstant(std::numeric_limits<Scalar>::infinity());
    hi.setConstant(-std::numeric_limits<Scalar>::infinity());
    for (const Vec2& v : vertices_) {
      lo = lo.cwiseMin(v);
      hi = hi.cwiseMax(v);
    }
    return {lo, hi};
  }

  /// Corner points: the two endpoints (1D) or the polygon vertices (2D).
  std::vector<PointT<Scalar>> corners() const {
    std::vector<PointT<Scalar>> out;
    if (empty_) return out;
    if (dim_ == 1) {
      out.emplace_back(PointT<Scalar>::Constant(1, lo_));
      out.emplace_back(PointT<Scalar>::Constant(1, hi_));
    } else {
      for (const Vec2& v : vertices_) out.emplace_back(v);
    }
    return out;
  }

 private:
  int dim_ = 2;
  bool empty_ = true;
  Scalar lo_{0}, hi_{0};
  int lo_label_ = kBoundaryLabel, hi_label_ = kBoundaryLabel;
  std::vector<Vec2> vertices_;
  std::vector<int> labels_;
};

/// Returns region ∩ {y : normal·y <= offset}. New edges get `label`.
template <typename Scalar, typename Derived>
ConvexRegion<Scalar> clip_halfplane(const ConvexRegion<Scalar>& region,
                                    const Eigen::MatrixBase<Derived>& normal, Scalar offset,
                                    int label = kBoundaryLabel) {
  using Vec2 = typename ConvexRegion<Scalar>::Vec2;
  if (region.is_empty()) return region;
  const Scalar nn = normal.norm();
  // Distance tolerance of kGeomTol, expressed in units of normal·y.
  const Scalar tol = Scalar(kGeomTol) * nn;

  if (region.dim() == 1) {
    const Scalar n = normal(0);
    if (n == Scalar(0)) {
      if (offset < 0) return ConvexRegion<Scalar>::empty(1);
      return region;
    }
    Scalar lo = region.lower(), hi = region.upper();
    int lo_label = region.lower_label(), hi_label = region.upper_label();
    const Scalar cut = offset / n;
    if (n > 0) {
      if (cut < hi) {
        hi = cut;
        hi_label = label;
      }
    } else if (cut > lo) {
      lo = cut;
      lo_label = label;
    }
    return ConvexRegion<Scalar>::labeled_interval(lo, lo_label, hi, hi_label);
  }

  const auto& v = region.vertices();
  const auto& l = region.edge_labels();
  const std::size_t n = v.size();
  std::vector<Scalar> dist(n);
  bool all_in = true, all_out = true;
  for (std::size_t k = 0; k < n; ++k) {
    dist[k] = normal(0) * v[k].x() + normal(1) * v[k].y() - offset;
    if (dist[k] > tol) all_in = false;
    if (dist[k] <= tol) all_out = false;
  }
  if (all_in) return region;
  if (all_out) return ConvexRegion<Scalar>::empty(2);

  std::vector<Vec2> out;
  std::vector<int> out_labels;
  out.reserve(n + 1);
  out_labels.reserve(n + 1);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t k1 = (k + 1) % n;
    const bool in0 = dist[k] <= tol;
    const bool in1 = dist[k1] <= tol;
    if (in0) {
      out.push_back(v[k]);
      out_labels.push_back(l[k]);
      if (!in1) {
        const Scalar t = dist[k] / (dist[k] - dist[k1]);
        out.push_back(v[k] + std::clamp(t, Scalar(0), Scalar(1)) * (v[k1] - v[k]));
        out_labels.push_back(label);
      }
    } else if (in1) {
      const Scalar t = dist[k] / (dist[k] - dist[k1]);
      out.push_back(v[k] + std::clamp(t, Scalar(0), Scalar(1)) * (v[k1] - v[k]));
      out_labels.push_back(l[k]);
    }
  }
  return ConvexRegion<Scalar>::from_vertices(std::move(out), std::move(out_labels));
}

/// Largest vertex-to-vertex distance; exact for convex regions.
template <typename Scalar>
Scalar diameter(const ConvexRegion<Scalar>& region) {
  if (region.is_empty()) return Scalar(0);
  if (region.dim() == 1) return region.upper() - region.lower();
  const auto& v = region.vertices();
  Scalar best(0);
  for (std::size_t i = 0; i < v.size(); ++i)
    for (std::size_t j = i + 1; j < v.size(); ++j) best = std::max(best, (v[i] - v[j]).norm());
  return best;
}

/// Gauss-Legendre nodes and weights on [0, 1].
template <typename Scalar>
void gauss_legendre(int n, std::vector<Scalar>& nodes, std::vector<Scalar>& weights) {
  nodes.assign(n, Scalar(0));
  weights.assign(n, Scalar(0));
  for (int i = 0; i < n; ++i) {
    // Newton on P_n starting from the Chebyshev-like guess.
    Scalar x = std::cos(std::numbers::pi_v<Scalar> * (i + Scalar(0.75)) / (n + Scalar(0.5)));
    Scalar dp(0);
    for (int it = 0; it < 100; ++it) {
      Scalar p0(1), p1 = x;
      for (int k = 2; k <= n; ++k) {
        const Scalar p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1);
      const Scalar dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < Scalar(1e-16)) break;
    }
    {
      Scalar p0(1), p1 = x;
      for (int k = 2; k <= n; ++k) {
        const Scalar p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1);
    }
    nodes[i] = (Scalar(1) - x) / 2;
    weights[i] = Scalar(1) / ((1 - x * x) * dp * dp);
  }
}

/// Node/weight pairs on the reference simplex: [0,1] in 1D or the triangle
/// {u, v >= 0, u + v <= 1} in 2D. The triangle rule is a collapsed
/// Gauss-Legendre product (Duffy transform), exact for total degree `order`.
template <typename Scalar>
struct QuadratureRule {
  int order = 0;
  int dim = 0;
  std::vector<Eigen::Matrix<Scalar, 2, 1>> nodes;
  std::vector<Scalar> weights;

  static QuadratureRule interval(int order) {
    if (order < 1) throw InvalidInput("quadrature order must be positive");
    QuadratureRule q;
    q.order = order;
    q.dim = 1;
    std::vector<Scalar> x, w;
    gauss_legendre<Scalar>((order + 2) / 2, x, w);
    for (std::size_t i = 0; i < x.size(); ++i) {
      q.nodes.emplace_back(x[i], Scalar(0));
      q.weights.push_back(w[i]);
    }
    return q;
  }

  static QuadratureRule triangle(int order) {
    if (order < 1) throw InvalidInput("quadrature order must be positive");
    QuadratureRule q;
    q.order = order;
    q.dim = 2;
    // The Jacobian (1 - s) raises the degree in s by one.
    const int n = (order + 3) / 2;
    std::vector<Scalar> x, w;
    gauss_legendre<Scalar>(n, x, w);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        const Scalar s = x[a];
        const Scalar t = x[b];
        q.nodes.emplace_back(s, t * (1 - s));
        q.weights.push_back(w[a] * w[b] * (1 - s));
      }
    return q;
  }

  static QuadratureRule for_dim(int dim, int order) {
    return dim == 1 ? interval(order) : triangle(order);
  }
};

/// Visits every quadrature node of `region` as f(point, weight), after
/// splitting intervals into 2^refinement pieces and each fan triangle into
/// 4^refinement sub-triangles.
template <typename Scalar, typename F>
void for_each_node(const ConvexRegion<Scalar>& region, const QuadratureRule<Scalar>& rule,
                   int refinement, F&& f) {
  if (region.is_empty()) return;
  const int m = 1 << std::max(0, refinement);
  PointT<Scalar> p(region.dim());
  if (region.dim() == 1) {
    const Scalar a = region.lower();
    const Scalar len = (region.upper() - a) / m;
    if (!(len > 0)) return;
    for (int s = 0; s < m; ++s) {
      const Scalar x0 = a + s * len;
      for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
        p(0) = x0 + rule.nodes[k].x() * len;
        f(p, rule.weights[k] * len);
      }
    }
    return;
  }
  using Vec2 = Eigen::Matrix<Scalar, 2, 1>;
  // Sub-triangles of the reference triangle, in reference coordinates.
  std::vector<std::array<Vec2, 3>> subs;
  const Scalar inv = Scalar(1) / m;
  for (int i = 0; i < m; ++i)
    for (int j = 0; i + j < m; ++j) {
      subs.push_back({Vec2(i * inv, j * inv), Vec2((i + 1) * inv, j * inv),
                      Vec2(i * inv, (j + 1) * inv)});
      if (i + j < m - 1)
        subs.push_back({Vec2((i + 1) * inv, j * inv), Vec2((i + 1) * inv, (j + 1) * inv),
                        Vec2(i * inv, (j + 1) * inv)});
    }
  const auto& v = region.vertices();
  for (std::size_t t = 1; t + 1 < v.size(); ++t) {
    const Vec2 o = v[0];
    const Vec2 e1 = v[t] - o;
    const Vec2 e2 = v[t + 1] - o;
    const Scalar jac = std::abs(e1.x() * e2.y() - e1.y() * e2.x());
    if (!(jac > 0)) continue;
    for (const auto& sub : subs) {
      const Vec2 s1 = sub[1] - sub[0];
      const Vec2 s2 = sub[2] - sub[0];
      const Scalar sub_jac = std::abs(s1.x() * s2.y() - s1.y() * s2.x());
      for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
        const Vec2 ref = sub[0] + rule.nodes[k].x() * s1 + rule.nodes[k].y() * s2;
        p = o + ref.x() * e1 + ref.y() * e2;
        f(p, rule.weights[k] * sub_jac * jac);
      }
    }
  }
}

/// Zeroth, first and second moments of a density over a region. The second
/// moments are accumulated about a local reference point to limit
/// cancellation on small cells far from the origin.
template <typename Scalar>
struct Moments {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, 4, 4>;

  Scalar mass{0};
  PointT<Scalar> reference;
  PointT<Scalar> first_about_ref;  // ∫ (y - r) g
  Mat second_about_ref;            // ∫ (y - r)(y - r)^T g
  bool degenerate = true;

  /// ∫ y g(y) dy.
  PointT<Scalar> first_moment() const { return mass * reference + first_about_ref; }

  PointT<Scalar> barycenter() const {
    if (!(mass > 0)) return reference;
    return reference + first_about_ref / mass;
  }

  /// ∫ |y - c|² g(y) dy.
  template <typename Derived>
  Scalar second_moment_about(const Eigen::MatrixBase<Derived>& c) const {
    if (degenerate) return Scalar(0);
    const PointT<Scalar> d = c - reference;
    return second_about_ref.trace() - 2 * d.dot(first_about_ref) + d.squaredNorm() * mass;
  }

  /// ∫ |y - m|² g(y) dy about the barycenter m.
  Scalar central_second_moment() const {
    if (degenerate || !(mass > 0)) return Scalar(0);
    return std::max(Scalar(0), second_about_ref.trace() - first_about_ref.squaredNorm() / mass);
  }
};

template <typename Scalar, typename Density>
Moments<Scalar> polygon_moments(const ConvexRegion<Scalar>& region, Density&& g,
                                const QuadratureRule<Scalar>& rule, int refinement = 0) {
  Moments<Scalar> m;
  const int d = region.dim();
  m.reference = PointT<Scalar>::Zero(d);
  m.first_about_ref = PointT<Scalar>::Zero(d);
  m.second_about_ref = Moments<Scalar>::Mat::Zero(d, d);
  if (region.is_empty() || !(region.measure() > 0)) return m;
  const auto corners = region.corners();
  for (const auto& c : corners) m.reference += c;
  m.reference /= Scalar(corners.size());
  m.degenerate = false;
  for_each_node(region, rule, refinement, [&](const PointT<Scalar>& y, Scalar w) {
    const Scalar gw = w * g(y);
    const PointT<Scalar> dy = y - m.reference;
    m.mass += gw;
    m.first_about_ref += gw * dy;
    m.second_about_ref.noalias() += gw * dy * dy.transpose();
  });
  return m;
}

/// Integral of g over each labeled piece of the boundary: over edges in 2D
/// (Gauss-Legendre along the segment) and point values at endpoints in 1D.
/// Returns (label, integral) pairs; zero-length edges are skipped.
template <typename Scalar, typename Density>
std::vector<std::pair<int, Scalar>> boundary_integrals(const ConvexRegion<Scalar>& region,
                                                       Density&& g, int order) {
  std::vector<std::pair<int, Scalar>> out;
  if (region.is_empty()) return out;
  PointT<Scalar> p(region.dim());
  if (region.dim() == 1) {
    p(0) = region.lower();
    out.emplace_back(region.lower_label(), g(p));
    p(0) = region.upper();
    out.emplace_back(region.upper_label(), g(p));
    return out;
  }
  std::vector<Scalar> x, w;
  gauss_legendre<Scalar>((order + 2) / 2, x, w);
  const auto& v = region.vertices();
  const auto& l = region.edge_labels();
  for (std::size_t k = 0; k < v.size(); ++k) {
    const auto a = v[k];
    const auto b = v[(k + 1) % v.size()];
    const Scalar len = (b - a).norm();
    if (!(len > 0)) continue;
    Scalar acc(0);
    for (std::size_t q = 0; q < x.size(); ++q) {
      p = a + x[q] * (b - a);
      acc += w[q] * g(p);
    }
    out.emplace_back(l[k], acc * len);
  }
  return out;
}

/// ∫_E |y - z|² dy / (|E| diam(E)²) for the ellipse with semi-axes a1 >= a2
/// centered at z. Equals (a1² + a2²) / (16 a1²) and is never below 1/16.
template <typename Scalar>
Scalar ellipse_moment_ratio(Scalar a1, Scalar a2) {
  if (!(a1 > 0) || !(a2 > 0)) throw InvalidInput("ellipse semi-axes must be positive");
  if (a2 > a1) std::swap(a1, a2);
  return (a1 * a1 + a2 * a2) / (16 * a1 * a1);
}

using Region = ConvexRegion<double>;
using Rule = QuadratureRule<double>;

}  // namespace otlab
