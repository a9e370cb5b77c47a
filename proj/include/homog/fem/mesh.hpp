#pragma once

#include "homog/geometry/polygon.hpp"

#include <array>
#include <map>

namespace homog {

/// Conforming triangulation. Triangles are counter-clockwise.
struct Mesh {
  std::vector<Vec2> nodes;
  std::vector<std::array<int, 3>> triangles;
  /// Up to two owning domain edges per node (-1 = none); corners own two.
  std::vector<std::array<int, 2>> node_edges;
  /// Nominal size: grid step for structured meshes, else max element diameter.
  Real h = 0.0;
  /// Largest element diameter (longest triangle side).
  Real diameter = 0.0;
  /// Structured lattice meshes record their grid (nx × ny cells); 0 otherwise.
  int nx = 0, ny = 0;

  int num_nodes() const noexcept { return static_cast<int>(nodes.size()); }
  int num_triangles() const noexcept { return static_cast<int>(triangles.size()); }
  bool on_boundary(int v) const noexcept { return node_edges[v][0] >= 0; }

  std::vector<int> boundary_nodes() const {
    std::vector<int> out;
    for (int v = 0; v < num_nodes(); ++v)
      if (on_boundary(v)) out.push_back(v);
    return out;
  }

  Real area(int t) const {
    const auto& tr = triangles[t];
    const Vec2 a = nodes[tr[1]] - nodes[tr[0]], b = nodes[tr[2]] - nodes[tr[0]];
    return 0.5 * (a.x() * b.y() - a.y() * b.x());
  }

  Real element_diameter(int t) const {
    const auto& tr = triangles[t];
    return std::max({(nodes[tr[0]] - nodes[tr[1]]).norm(), (nodes[tr[1]] - nodes[tr[2]]).norm(),
                     (nodes[tr[2]] - nodes[tr[0]]).norm()});
  }

  /// Gradients of the three barycentric functions (rows), constant on the element.
  Eigen::Matrix<Real, 3, 2> gradients(int t) const {
    const auto& tr = triangles[t];
    const Vec2 &p0 = nodes[tr[0]], &p1 = nodes[tr[1]], &p2 = nodes[tr[2]];
    const Real det = (p1.x() - p0.x()) * (p2.y() - p0.y()) - (p2.x() - p0.x()) * (p1.y() - p0.y());
    Eigen::Matrix<Real, 3, 2> g;
    g << p1.y() - p2.y(), p2.x() - p1.x(), p2.y() - p0.y(), p0.x() - p2.x(), p0.y() - p1.y(), p1.x() - p0.x();
    return g / det;
  }

  Real min_angle() const {
    Real m = pi;
    for (const auto& tr : triangles)
      for (int k = 0; k < 3; ++k) {
        const Vec2 a = nodes[tr[(k + 1) % 3]] - nodes[tr[k]], b = nodes[tr[(k + 2) % 3]] - nodes[tr[k]];
        m = std::min(m, std::acos(std::clamp(a.dot(b) / (a.norm() * b.norm()), -1.0, 1.0)));
      }
    return m;
  }
};

struct MeshOptions {
  long node_budget = 4'000'000;
  Real min_angle_deg = 20.0;
};

namespace fem {

inline void finalize(Mesh& m, const PolygonDomain& d) {
  m.diameter = 0.0;
  for (int t = 0; t < m.num_triangles(); ++t) m.diameter = std::max(m.diameter, m.element_diameter(t));
  // boundary = sides belonging to exactly one triangle
  std::map<std::pair<int, int>, int> count;
  for (const auto& tr : m.triangles)
    for (int k = 0; k < 3; ++k) {
      const int a = tr[k], b = tr[(k + 1) % 3];
      ++count[{std::min(a, b), std::max(a, b)}];
    }
  std::vector<char> bnd(m.num_nodes(), 0);
  for (const auto& [e, c] : count)
    if (c == 1) bnd[e.first] = bnd[e.second] = 1;
  const Real tol = 1e-12 * std::max(1.0, d.diameter());
  m.node_edges.assign(m.num_nodes(), {-1, -1});
  for (int v = 0; v < m.num_nodes(); ++v) {
    if (!bnd[v]) continue;
    int slot = 0;
    for (int k = 0; k < d.size() && slot < 2; ++k)
      if (std::abs(d.edges()[k].signed_distance(m.nodes[v])) <= tol) {
        m.node_edges[v][slot++] = k;
      }
    if (slot == 0) throw Error("fem", ErrorCode::MeshQuality, cat("boundary node ", v, " lies on no domain edge"));
    // snap onto the edge line(s) so the boundary invariant holds exactly
    if (slot == 1) {
      const auto& e = d.edges()[m.node_edges[v][0]];
      m.nodes[v] -= e.signed_distance(m.nodes[v]) * e.normal;
    }
  }
}

/// Union-jack pattern: cell (i, j) is split along its (0,0)-(1,1) diagonal when
/// i + j is even and along (1,0)-(0,1) otherwise. With an even cell count the
/// mesh of a square keeps all its symmetries, so symmetric eigenvalues stay degenerate.
inline bool main_diagonal(int i, int j) { return ((i + j) % 2 + 2) % 2 == 0; }

/// The two triangles of cell (i, j) as corner offsets (di, dj), counterclockwise.
inline std::array<std::array<std::array<int, 2>, 3>, 2> cell_split(int i, int j) {
  if (main_diagonal(i, j)) return {{{{{0, 0}, {1, 0}, {1, 1}}}, {{{0, 0}, {1, 1}, {0, 1}}}}};
  return {{{{{0, 0}, {1, 0}, {0, 1}}}, {{{1, 0}, {1, 1}, {0, 1}}}}};
}

/// Union-jack lattice mesh of [x0,x0+nx·sx] × [y0,y0+ny·sy]; node (i,j) has index i·(ny+1)+j.
inline Mesh structured_rectangle(Vec2 origin, Real sx, Real sy, int nx, int ny) {
  Mesh m;
  m.nx = nx;
  m.ny = ny;
  m.nodes.reserve(static_cast<std::size_t>(nx + 1) * (ny + 1));
  for (int i = 0; i <= nx; ++i)
    for (int j = 0; j <= ny; ++j) m.nodes.emplace_back(origin.x() + i * sx, origin.y() + j * sy);
  auto id = [ny](int i, int j) { return i * (ny + 1) + j; };
  m.triangles.reserve(2 * static_cast<std::size_t>(nx) * ny);
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j) {
      for (const auto& t : cell_split(i, j))
        m.triangles.push_back({id(i + t[0][0], j + t[0][1]), id(i + t[1][0], j + t[1][1]), id(i + t[2][0], j + t[2][1])});
    }
  m.h = std::max(sx, sy);
  return m;
}

inline bool is_axis_rectangle(const PolygonDomain& d) {
  if (d.size() != 4) return false;
  for (const auto& e : d.edges())
    if (std::abs(e.normal.x() * e.normal.y()) > 1e-15) return false;
  return true;
}

/// Uniform red refinement: every triangle into four similar ones.
inline Mesh red_refine(const Mesh& in) {
  Mesh m;
  m.nodes = in.nodes;
  std::map<std::pair<int, int>, int> mid;
  auto midpoint = [&](int a, int b) {
    const auto key = std::make_pair(std::min(a, b), std::max(a, b));
    auto it = mid.find(key);
    if (it != mid.end()) return it->second;
    const int id = static_cast<int>(m.nodes.size());
    m.nodes.push_back(0.5 * (in.nodes[a] + in.nodes[b]));
    mid.emplace(key, id);
    return id;
  };
  m.triangles.reserve(4 * in.triangles.size());
  for (const auto& t : in.triangles) {
    const int a = midpoint(t[0], t[1]), b = midpoint(t[1], t[2]), c = midpoint(t[2], t[0]);
    m.triangles.push_back({t[0], a, c});
    m.triangles.push_back({a, t[1], b});
    m.triangles.push_back({c, b, t[2]});
    m.triangles.push_back({a, b, c});
  }
  return m;
}

inline Real min_angle_of(const std::vector<Vec2>& pts, const std::vector<std::array<int, 3>>& tris) {
  Mesh m;
  m.nodes = pts;
  m.triangles = tris;
  return m.min_angle();
}

}  // namespace fem

/// Conforming triangulation with nominal size ≤ h_target. Axis-aligned rectangles get a
/// structured lattice mesh (h = grid step); other convex polygons get the best coarse
/// fan refined uniformly (h = max element diameter).
inline Mesh triangulate(const PolygonDomain& d, Real h_target, const MeshOptions& opt = {}) {
  if (!(h_target > 0)) throw Error("fem", ErrorCode::InvalidArgument, cat("h_target must be positive, got ", h_target));
  Mesh m;
  if (fem::is_axis_rectangle(d)) {
    Vec2 lo = d.vertices()[0], hi = d.vertices()[0];
    for (const auto& v : d.vertices()) {
      lo = lo.cwiseMin(v);
      hi = hi.cwiseMax(v);
    }
    const Real wx = hi.x() - lo.x(), wy = hi.y() - lo.y();
    const long nx = static_cast<long>(std::ceil(wx / h_target - 1e-9));
    const long ny = static_cast<long>(std::ceil(wy / h_target - 1e-9));
    if ((nx + 1) * (ny + 1) > opt.node_budget)
      throw Error("fem", ErrorCode::TargetTooFine,
                  cat("h = ", h_target, " needs ", (nx + 1) * (ny + 1), " nodes, budget ", opt.node_budget));
    m = fem::structured_rectangle(lo, wx / nx, wy / ny, static_cast<int>(nx), static_cast<int>(ny));
  } else {
    const auto& v = d.vertices();
    const int n = d.size();
    std::vector<Vec2> best_pts;
    std::vector<std::array<int, 3>> best_tris;
    Real best = -1.0;
    auto consider = [&](std::vector<Vec2> pts, std::vector<std::array<int, 3>> tris) {
      const Real a = fem::min_angle_of(pts, tris);
      if (a > best + 1e-12) {
        best = a;
        best_pts = std::move(pts);
        best_tris = std::move(tris);
      }
    };
    for (int r = 0; r < n; ++r) {
      std::vector<std::array<int, 3>> tris;
      for (int k = 1; k + 1 < n; ++k) tris.push_back({r, (r + k) % n, (r + k + 1) % n});
      consider(v, tris);
    }
    if (n > 3) {
      Vec2 c = Vec2::Zero();
      for (const auto& p : v) c += p;
      c /= n;
      auto pts = v;
      pts.push_back(c);
      std::vector<std::array<int, 3>> tris;
      for (int k = 0; k < n; ++k) tris.push_back({n, k, (k + 1) % n});
      consider(pts, tris);
    }
    if (best * 180.0 / pi < opt.min_angle_deg - 1e-9)
      throw Error("fem", ErrorCode::MeshQuality,
                  cat("best coarse triangulation has minimum angle ", best * 180.0 / pi, " degrees"));
    m.nodes = best_pts;
    m.triangles = best_tris;
    Real diam = 0.0;
    for (int t = 0; t < m.num_triangles(); ++t) diam = std::max(diam, m.element_diameter(t));
    int levels = 0;
    while (diam / std::ldexp(1.0, levels) > h_target * (1 + 1e-12)) ++levels;
    const double est = double(m.num_triangles()) * std::pow(4.0, levels) / 2.0 + 2.0 * std::pow(2.0, levels) * n;
    if (est > double(opt.node_budget))
      throw Error("fem", ErrorCode::TargetTooFine,
                  cat("h = ", h_target, " needs about ", est, " nodes, budget ", opt.node_budget));
    for (int l = 0; l < levels; ++l) m = fem::red_refine(m);
  }
  fem::finalize(m, d);
  if (!fem::is_axis_rectangle(d)) m.h = m.diameter;
  return m;
}

}  // namespace homog
