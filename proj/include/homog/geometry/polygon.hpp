#pragma once

#include "homog/core.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>

namespace homog {

/// Continued-fraction convergent p/q of a slope.
struct Rational {
  std::int64_t p = 0;
  std::int64_t q = 1;
  Real value() const { return Real(p) / Real(q); }
  friend bool operator==(const Rational&, const Rational&) = default;
};

enum class SlopeKind { Rational, DiophantineCertified, Undetermined };

inline std::string_view to_string(SlopeKind k) {
  switch (k) {
    case SlopeKind::Rational: return "rational";
    case SlopeKind::DiophantineCertified: return "diophantine";
    case SlopeKind::Undetermined: return "undetermined";
  }
  return "?";
}

/// Classification of an edge normal n. For Rational, n is a positive multiple
/// of (p, q); the diophantine fields describe the finite scan over ξ ∈ ℤ².
struct SlopeClass {
  SlopeKind kind = SlopeKind::Undetermined;
  std::int64_t p = 0, q = 0;
  Real C = 0.0, l = 0.0;
  int scan_radius = 0;
  Real worst_divisor = std::numeric_limits<Real>::infinity();
  std::array<int, 2> worst_xi{0, 0};
};

struct DiophantineParams {
  Real C = 0.2;
  Real l = 1.0;
  int scan_radius = 100;
};

namespace geometry {

inline constexpr std::int64_t max_rational_denominator = 1'000'000;

/// Continued-fraction convergents of `slope`, stopping when the expansion
/// terminates or after `depth` terms.
inline std::vector<Rational> convergents(Real slope, int depth = 20) {
  if (!std::isfinite(slope)) throw Error("geometry", ErrorCode::SlopeInfinite, "slope is not finite");
  if (depth < 1 || depth > 20) throw Error("geometry", ErrorCode::InvalidArgument, cat("depth ", depth, " outside [1,20]"));
  std::vector<Rational> out;
  std::int64_t p0 = 0, q0 = 1, p1 = 1, q1 = 0;  // p_{j-2}/q_{j-2}, p_{j-1}/q_{j-1}
  Real x = slope;
  for (int j = 0; j < depth; ++j) {
    // snap to an integer within rounding so [.., a] does not come out as [.., a−1, 1]
    const Real near = std::round(x);
    const Real a = std::abs(x - near) <= 1e-9 * std::max(1.0, std::abs(x)) ? near : std::floor(x);
    if (std::abs(a) > 1e15) break;
    const auto ai = static_cast<std::int64_t>(a);
    const std::int64_t p = ai * p1 + p0, q = ai * q1 + q0;
    out.push_back({p, q});
    p0 = p1;
    q0 = q1;
    p1 = p;
    q1 = q;
    const Real frac = x - a;
    if (frac <= 0.0) break;
    if (std::abs(Real(p) / Real(q) - slope) <= 1e-15 * std::max(1.0, std::abs(slope))) break;
    x = 1.0 / frac;
  }
  return out;
}

/// Convergents of the slope n₁/n₂ of a unit normal.
inline std::vector<Rational> rational_approximation(const Vec2& n, int depth = 20) {
  if (n.y() == 0.0) throw Error("geometry", ErrorCode::SlopeInfinite, "normal has n2 = 0; swap axes first");
  return convergents(n.x() / n.y(), depth);
}

/// Exact rational direction (p, q) with q·n₁ = p·n₂, if one with max(|p|,|q|) ≤ 10⁶ exists.
inline std::optional<std::array<std::int64_t, 2>> rational_direction(const Vec2& n) {
  const bool swap = std::abs(n.y()) < std::abs(n.x());
  const Real a = swap ? n.y() : n.x();
  const Real b = swap ? n.x() : n.y();
  // |a/b| ≤ 1, so the convergents stay bounded by their denominators.
  for (const auto& r : convergents(a / b, 20)) {
    if (std::abs(r.q) > max_rational_denominator) break;
    std::int64_t p = r.p, q = r.q;
    if (std::abs(a / b - Real(p) / Real(q)) <= 1e-14) {
      // orient (p, q) along (a, b)
      if (Real(p) * a + Real(q) * b < 0) {
        p = -p;
        q = -q;
      }
      if (swap) std::swap(p, q);
      return std::array<std::int64_t, 2>{p, q};
    }
  }
  return std::nullopt;
}

/// min over 0 < |ξ| ≤ R of |n·ξ|·|ξ|^l, with the minimizing ξ.
inline std::pair<Real, std::array<int, 2>> worst_small_divisor(const Vec2& n, Real l, int radius) {
  Real worst = std::numeric_limits<Real>::infinity();
  std::array<int, 2> arg{0, 0};
  const long r2 = static_cast<long>(radius) * radius;
  for (int x1 = -radius; x1 <= radius; ++x1)
    for (int x2 = -radius; x2 <= radius; ++x2) {
      const long s = static_cast<long>(x1) * x1 + static_cast<long>(x2) * x2;
      if (s == 0 || s > r2) continue;
      const Real v = std::abs(n.x() * x1 + n.y() * x2) * std::pow(std::sqrt(Real(s)), l);
      if (v < worst) {
        worst = v;
        arg = {x1, x2};
      }
    }
  return {worst, arg};
}

inline SlopeClass classify_normal(const Vec2& n, const DiophantineParams& dp = {}) {
  if (std::abs(n.norm() - 1.0) > 1e-12)
    throw Error("geometry", ErrorCode::InvalidArgument, cat("normal is not unit: |n| = ", n.norm()));
  if (!(dp.C > 0) || !(dp.l > 0) || dp.scan_radius < 10)
    throw Error("geometry", ErrorCode::InvalidArgument, "need C > 0, l > 0, scan_radius >= 10");
  SlopeClass sc;
  sc.C = dp.C;
  sc.l = dp.l;
  sc.scan_radius = dp.scan_radius;
  if (auto pq = rational_direction(n)) {
    sc.kind = SlopeKind::Rational;
    sc.p = (*pq)[0];
    sc.q = (*pq)[1];
    return sc;
  }
  std::tie(sc.worst_divisor, sc.worst_xi) = worst_small_divisor(n, dp.l, dp.scan_radius);
  sc.kind = sc.worst_divisor >= dp.C ? SlopeKind::DiophantineCertified : SlopeKind::Undetermined;
  return sc;
}

/// Rational class from a user-supplied integer direction; n must be parallel to (p, q).
inline SlopeClass classify_exact(const Vec2& n, std::int64_t p, std::int64_t q) {
  if (p == 0 && q == 0) throw Error("geometry", ErrorCode::InvalidArgument, "exact normal (0,0)");
  const std::int64_t g = std::gcd(p, q);
  p /= g;
  q /= g;
  Vec2 d(static_cast<Real>(p), static_cast<Real>(q));
  d.normalize();
  if ((d - n).norm() > 1e-9) {
    if ((d + n).norm() > 1e-9)
      throw Error("geometry", ErrorCode::InvalidArgument,
                  cat("exact normal (", p, ",", q, ") is not parallel to edge normal (", n.x(), ",", n.y(), ")"));
    p = -p;
    q = -q;
  }
  SlopeClass sc;
  sc.kind = SlopeKind::Rational;
  sc.p = p;
  sc.q = q;
  return sc;
}

/// Orthogonal M with det M = +1 and M e₂ = n; columns are (n₂, −n₁) and n.
inline Mat2 rotation_to_halfspace(const Vec2& n) {
  if (std::abs(n.norm() - 1.0) > 1e-12)
    throw Error("geometry", ErrorCode::InvalidArgument, cat("normal is not unit: |n| = ", n.norm()));
  Mat2 m;
  m << n.y(), n.x(), -n.x(), n.y();
  return m;
}

}  // namespace geometry

struct Edge {
  Vec2 normal;   // unit inward normal
  Real offset;   // Ω lies in {x : normal·x > offset}
  Vec2 a, b;     // endpoints, counter-clockwise
  Real length() const { return (b - a).norm(); }
  Vec2 tangent() const { return (b - a) / length(); }
  Real signed_distance(const Vec2& x) const { return normal.dot(x) - offset; }
};

class PolygonDomain {
 public:
  const std::vector<Vec2>& vertices() const noexcept { return vertices_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const std::vector<SlopeClass>& classification() const noexcept { return classes_; }
  int size() const noexcept { return static_cast<int>(vertices_.size()); }

  Real area() const {
    Real s = 0;
    for (int k = 0; k < size(); ++k) {
      const auto& p = vertices_[k];
      const auto& q = vertices_[(k + 1) % size()];
      s += p.x() * q.y() - q.x() * p.y();
    }
    return 0.5 * s;
  }

  Real perimeter() const {
    Real s = 0;
    for (const auto& e : edges_) s += e.length();
    return s;
  }

  Real diameter() const {
    Real d = 0;
    for (const auto& p : vertices_)
      for (const auto& q : vertices_) d = std::max(d, (p - q).norm());
    return d;
  }

  /// Sum of exterior turning angles (2π for a convex polygon).
  Real exterior_angle_sum() const {
    Real s = 0;
    for (int k = 0; k < size(); ++k) {
      const Vec2 t0 = edges_[k].tangent(), t1 = edges_[(k + 1) % size()].tangent();
      s += std::atan2(t0.x() * t1.y() - t0.y() * t1.x(), t0.dot(t1));
    }
    return s;
  }

  /// Distance to the boundary (nonnegative inside).
  Real distance_to_boundary(const Vec2& x) const {
    Real d = std::numeric_limits<Real>::infinity();
    for (const auto& e : edges_) d = std::min(d, e.signed_distance(x));
    return d;
  }

  bool contains(const Vec2& x, Real tol = 1e-12) const { return distance_to_boundary(x) >= -tol; }

  /// Reclassify every edge with new diophantine parameters (exact normals are kept).
  void classify(const DiophantineParams& dp) {
    for (std::size_t k = 0; k < edges_.size(); ++k)
      if (!exact_[k]) classes_[k] = geometry::classify_normal(edges_[k].normal, dp);
  }

  /// Builds edges with inward normals; clockwise input is reversed first.
  /// `exact_normals[k]`, if given, is an integer direction for edge k.
  static PolygonDomain build(std::vector<Vec2> vertices,
                             const std::vector<std::optional<std::array<std::int64_t, 2>>>& exact_normals = {},
                             const DiophantineParams& dp = {}) {
    const int m = static_cast<int>(vertices.size());
    if (m < 3) throw Error("geometry", ErrorCode::InvalidArgument, cat("polygon needs at least 3 vertices, got ", m));
    if (!exact_normals.empty() && static_cast<int>(exact_normals.size()) != m)
      throw Error("geometry", ErrorCode::InvalidArgument, "exact normal list must have one entry per edge");
    Real s = 0;
    for (int k = 0; k < m; ++k) {
      const auto& p = vertices[k];
      const auto& q = vertices[(k + 1) % m];
      s += p.x() * q.y() - q.x() * p.y();
    }
    auto exact = exact_normals;
    if (s < 0) {
      // reverse, keeping edge k = (v_k, v_{k+1}) aligned with its exact normal
      std::reverse(vertices.begin(), vertices.end());
      if (!exact.empty()) {
        std::reverse(exact.begin(), exact.end());
        std::rotate(exact.begin(), exact.begin() + 1, exact.end());
      }
    }
    PolygonDomain d;
    d.vertices_ = vertices;
    for (int k = 0; k < m; ++k) {
      const Vec2 a = vertices[k], b = vertices[(k + 1) % m];
      const Real len = (b - a).norm();
      if (len < 1e-12)
        throw Error("geometry", ErrorCode::DegenerateEdge, cat("edge ", k, " has length ", len));
      const Vec2 t = (b - a) / len;
      Edge e;
      e.normal = Vec2(-t.y(), t.x());
      e.offset = e.normal.dot(a);
      e.a = a;
      e.b = b;
      d.edges_.push_back(e);
    }
    for (int k = 0; k < m; ++k) {
      const Vec2 t0 = d.edges_[(k + m - 1) % m].tangent(), t1 = d.edges_[k].tangent();
      const Real turn = t0.x() * t1.y() - t0.y() * t1.x();
      if (turn <= 1e-12)
        throw Error("geometry", ErrorCode::NonConvex,
                    cat("vertex ", k, " (", vertices[k].x(), ", ", vertices[k].y(), ") ",
                        turn < -1e-12 ? "is a reflex corner" : "is collinear with its neighbours"));
    }
    for (int k = 0; k < m; ++k) {
      for (int j = 0; j < m; ++j)
        if (d.edges_[j].signed_distance(vertices[k]) < -1e-12)
          throw Error("geometry", ErrorCode::NonConvex,
                      cat("vertex ", k, " (", vertices[k].x(), ", ", vertices[k].y(), ") lies outside edge ", j));
    }
    d.exact_.assign(m, false);
    d.classes_.resize(m);
    for (int k = 0; k < m; ++k) {
      if (!exact.empty() && exact[k]) {
        d.classes_[k] = geometry::classify_exact(d.edges_[k].normal, (*exact[k])[0], (*exact[k])[1]);
        d.exact_[k] = true;
      } else {
        d.classes_[k] = geometry::classify_normal(d.edges_[k].normal, dp);
      }
    }
    return d;
  }

 private:
  std::vector<Vec2> vertices_;
  std::vector<Edge> edges_;
  std::vector<SlopeClass> classes_;
  std::vector<bool> exact_;
};

inline PolygonDomain build_polygon(std::vector<Vec2> vertices) { return PolygonDomain::build(std::move(vertices)); }

namespace domains {

inline PolygonDomain unit_square() { return build_polygon({{0, 0}, {1, 0}, {1, 1}, {0, 1}}); }
inline PolygonDomain unit_triangle() { return build_polygon({{0, 0}, {1, 0}, {0, 1}}); }

}  // namespace domains

}  // namespace homog
