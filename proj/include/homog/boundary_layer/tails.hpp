#pragma once

#include "homog/boundary_layer/strip.hpp"
#include "homog/fem/norms.hpp"
#include "homog/microstructure/cell_problem.hpp"

#include <map>

namespace homog {

/// Tail sequence along the convergent directions of an irrational normal.
struct DiophantineRecord {
  std::vector<Rational> convergents;
  std::vector<Real> periods;
  std::vector<std::array<Matrix, 2>> tails;  // per convergent, per direction α
  std::vector<Real> differences;             // max-entry change between successive tails
  std::array<Matrix, 2> tail;                // last convergent's tails
  bool cauchy = true;
};

struct DiophantineOptions {
  int depth = 5;
  Real tolerance = 1e-3;  // required last successive difference
  int skip = 0;           // leading convergents left out (coarse directions)
  bool strict = true;
};

namespace bl {

/// Rational unit normal through the convergent p/q of n₁/n₂, oriented like n.
inline Vec2 convergent_normal(const Rational& r, const Vec2& n) {
  Vec2 d(static_cast<Real>(r.p), static_cast<Real>(r.q));
  d.normalize();
  return d.dot(n) < 0 ? Vec2(-d) : d;
}

inline Real max_entry_difference(const std::array<Matrix, 2>& a, const std::array<Matrix, 2>& b) {
  return std::max((a[0] - b[0]).cwiseAbs().maxCoeff(), (a[1] - b[1]).cwiseAbs().maxCoeff());
}

}  // namespace bl

/// Tails for an irrational edge from the rational strips of its convergent directions.
inline DiophantineRecord diophantine_tail(const PeriodicTensor& a, const std::array<GridField, 2>& chi, const Vec2& normal,
                                          const DiophantineOptions& dopt = {}, const StripOptions& sopt = {},
                                          const TailOptions& topt = {}) {
  const bool swap = std::abs(normal.y()) < std::abs(normal.x());
  // convergents of the smaller-magnitude slope keep the periods small
  const Vec2 n = swap ? Vec2(normal.y(), normal.x()) : normal;
  const auto conv = geometry::rational_approximation(n, std::min(20, dopt.depth + dopt.skip));
  DiophantineRecord rec;
  for (std::size_t j = dopt.skip; j < conv.size(); ++j) {
    Rational r = conv[j];
    Vec2 nr = bl::convergent_normal(r, n);
    if (swap) nr = Vec2(nr.y(), nr.x());
    const auto f = solve_corrector_strips(a, chi, nr, sopt);
    std::array<Matrix, 2> t;
    for (int al = 0; al < 2; ++al) t[al] = extract_tail(f[al], topt).tail;
    rec.convergents.push_back(r);
    rec.periods.push_back(bl::rational_period(nr));
    if (!rec.tails.empty()) rec.differences.push_back(bl::max_entry_difference(t, rec.tails.back()));
    rec.tails.push_back(t);
  }
  if (rec.tails.empty()) throw Error("boundary_layer", ErrorCode::InvalidArgument, "no convergent directions");
  rec.tail = rec.tails.back();
  rec.cauchy = rec.differences.empty() || rec.differences.back() <= dopt.tolerance;
  if (!rec.cauchy && dopt.strict) {
    std::string seq;
    for (Real d : rec.differences) seq += cat(seq.empty() ? "" : ", ", d);
    throw Error("boundary_layer", ErrorCode::NonCauchy, cat("successive tail differences [", seq, "] exceed ", dopt.tolerance));
  }
  return rec;
}

struct EdgeTails {
  int edge = 0;
  Vec2 normal;
  SlopeKind kind = SlopeKind::Rational;
  std::string method;                  // "strip-rational" or "convergent-extrapolated"
  std::array<Matrix, 2> tail;          // V^{k,α,*}
  std::array<TailFit, 2> fit;          // rational edges only
  Real phase_spread = 0.0;             // max tail change over the phase sample
  std::optional<DiophantineRecord> diophantine;
};

struct BoundaryLayerTailSet {
  std::map<int, EdgeTails> edges;

  bool has(int k) const { return edges.count(k) > 0; }
  const EdgeTails& at(int k) const {
    auto it = edges.find(k);
    if (it == edges.end()) throw Error("boundary_layer", ErrorCode::MissingTail, cat("no tail for edge ", k));
    return it->second;
  }
};

struct TailSetOptions {
  StripOptions strip;
  TailOptions tail;
  DiophantineOptions diophantine;
  int phase_samples = 0;  // extra normal offsets per rational edge for the spread report
  bool allow_undetermined = false;
};

namespace bl {

/// Strip origin for edge {n·x = c} at scale ε: y₀ = (c/ε) n, reduced modulo the lattice.
inline Vec2 edge_origin(const Edge& e, Real eps) {
  Vec2 y0 = (e.offset / eps) * e.normal;
  return y0 - Vec2(std::floor(y0.x()), std::floor(y0.y()));
}

}  // namespace bl

/// V^{k,α,*} for every edge of the domain at scale ε.
inline BoundaryLayerTailSet compute_tails(const PeriodicTensor& a, const std::array<GridField, 2>& chi, const PolygonDomain& d,
                                          Real eps, const TailSetOptions& opt = {}) {
  BoundaryLayerTailSet set;
  for (int k = 0; k < static_cast<int>(d.edges().size()); ++k) {
    const Edge& e = d.edges()[k];
    const SlopeClass& cls = d.classification()[k];
    EdgeTails et;
    et.edge = k;
    et.normal = e.normal;
    et.kind = cls.kind;
    StripOptions so = opt.strip;
    so.origin = bl::edge_origin(e, eps);
    if (cls.kind == SlopeKind::Rational) {
      et.method = "strip-rational";
      const auto f = solve_corrector_strips(a, chi, e.normal, so);
      for (int al = 0; al < 2; ++al) {
        et.fit[al] = extract_tail(f[al], opt.tail);
        et.tail[al] = et.fit[al].tail;
      }
      const Real period = bl::rational_period(e.normal);
      for (int s = 1; s <= opt.phase_samples; ++s) {
        StripOptions sp = so;
        sp.origin += (Real(s) / ((opt.phase_samples + 1) * period)) * e.normal;
        const auto fs = solve_corrector_strips(a, chi, e.normal, sp);
        std::array<Matrix, 2> t;
        for (int al = 0; al < 2; ++al) t[al] = extract_tail(fs[al], opt.tail).tail;
        et.phase_spread = std::max(et.phase_spread, bl::max_entry_difference(t, et.tail));
      }
    } else {
      if (cls.kind == SlopeKind::Undetermined && !opt.allow_undetermined)
        throw Error("boundary_layer", ErrorCode::InvalidArgument,
                    cat("edge ", k, " slope is undetermined; enable allow_undetermined to use convergents"));
      et.method = "convergent-extrapolated";
      et.diophantine = diophantine_tail(a, chi, e.normal, opt.diophantine, so, opt.tail);
      et.tail = et.diophantine->tail;
    }
    set.edges[k] = std::move(et);
  }
  return set;
}

// ---------------------------------------------------------------------------
// Boundary-layer problems on the polygon

namespace bl {

/// Per-boundary-node data −Σ_α V^{k,α} ∂_α u⁰, averaged over the edges meeting at a vertex.
/// grad_u0 uses the recover_gradient layout (v·N + i, α). Returns a full nodal vector.
inline Vector homogenized_boundary_data(const Mesh& mesh, const BoundaryLayerTailSet& tails, const Matrix& grad_u0, int nc) {
  Vector g = Vector::Zero(mesh.num_nodes() * nc);
  for (int v = 0; v < mesh.num_nodes(); ++v) {
    if (!mesh.on_boundary(v)) continue;
    Vector acc = Vector::Zero(nc);
    int cnt = 0;
    for (int k : mesh.node_edges[v]) {
      if (k < 0) continue;
      const auto& et = tails.at(k);
      for (int al = 0; al < 2; ++al) acc -= et.tail[al] * grad_u0.block(v * nc, al, nc, 1);
      ++cnt;
    }
    if (cnt) g.segment(v * nc, nc) = acc / cnt;
  }
  return g;
}

}  // namespace bl

/// ϑ*_bl: −∇·A⁰∇ϑ = 0 with the piecewise tail data on each edge.
inline DirichletResult solve_homogenized_bl(const DiscreteSystem& s0, const BoundaryLayerTailSet& tails, const Matrix& grad_u0,
                                            const SpdSolver* factor = nullptr) {
  const auto& mesh = *s0.mesh;
  const int nc = s0.n_components;
  const Vector g = bl::homogenized_boundary_data(mesh, tails, grad_u0, nc);
  return solve_dirichlet(s0, Vector::Zero(g.size()), g, factor);
}

/// Boundary data Φ(x/ε)·g(x) for the oscillating problem, evaluated at boundary nodes.
using OscillatingData = std::function<void(const Vec2& x, Eigen::Ref<Vector> out)>;

struct OscillatingBlOptions {
  int min_cells_per_period = 4;
};

/// ϑ^ε_bl: −∇·A(x/ε)∇ϑ = 0 with oscillating Dirichlet data.
inline DirichletResult solve_oscillating_bl(const DiscreteSystem& s, Real eps, const OscillatingData& data,
                                            const OscillatingBlOptions& opt = {}, const SpdSolver* factor = nullptr) {
  const auto& mesh = *s.mesh;
  if (mesh.h > eps / opt.min_cells_per_period * (1 + 1e-9))
    throw Error("boundary_layer", ErrorCode::UnresolvedOscillation,
                cat("mesh size ", mesh.h, " does not resolve ε = ", eps, " with ", opt.min_cells_per_period, " cells per period"));
  const int nc = s.n_components;
  Vector g = Vector::Zero(mesh.num_nodes() * nc);
  for (int v = 0; v < mesh.num_nodes(); ++v)
    if (mesh.on_boundary(v)) data(mesh.nodes[v], g.segment(v * nc, nc));
  return solve_dirichlet(s, Vector::Zero(g.size()), g, factor);
}

namespace bl {

/// Data −χ^α(x/ε) ∂_α u⁰(x) of the oscillating boundary layer, with nodal gradients of u⁰.
inline OscillatingData corrector_trace(const std::array<GridField, 2>& chi, Real eps, const Mesh& mesh, const Matrix& grad_u0,
                                       int nc) {
  // nodes are looked up by position, so build an index once
  auto index = std::make_shared<std::map<std::pair<long long, long long>, int>>();
  const Real q = 1e9;
  auto key = [q](const Vec2& x) { return std::make_pair(std::llround(x.x() * q), std::llround(x.y() * q)); };
  for (int v = 0; v < mesh.num_nodes(); ++v)
    if (mesh.on_boundary(v)) (*index)[key(mesh.nodes[v])] = v;
  return [chi, eps, grad_u0, nc, index, key](const Vec2& x, Eigen::Ref<Vector> out) {
    auto it = index->find(key(x));
    if (it == index->end()) throw Error("boundary_layer", ErrorCode::InvalidArgument, "corrector trace queried off the mesh boundary");
    const int v = it->second;
    out.setZero();
    for (int al = 0; al < 2; ++al) out -= chi[al](x / eps) * grad_u0.block(v * nc, al, nc, 1);
  };
}

/// Strip field of edge e (solved with origin edge_origin(e, ε)) at the physical point x.
inline Matrix strip_at(const StripField& f, const Edge& e, Real eps, const Vec2& x) {
  const Vec2 z = f.rotation.transpose() * ((x - e.offset * e.normal) / eps);
  return f.eval(z.x(), z.y());
}

/// ‖Σ_α (v^α(x/ε) − V^{α,*}) ∂_αu⁰‖_{L²(Ω)} for the strips of one edge (solved with origin
/// edge_origin(e, ε)), integrated with the seven-point rule on a mesh that resolves ε.
inline Real layer_deviation_l2(const std::array<StripField, 2>& f, const std::array<Matrix, 2>& tail, const Edge& e, Real eps,
                               const Mesh& mesh, const std::function<void(const Vec2&, Matrix&)>& grad_u0) {
  const int nc = f[0].n_components;
  Matrix g(nc, 2);
  Real acc = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tr = mesh.triangles[t];
    const Vec2 &p0 = mesh.nodes[tr[0]], &p1 = mesh.nodes[tr[1]], &p2 = mesh.nodes[tr[2]];
    const Real ar = mesh.area(t);
    for (const auto& q : fem::dunavant5()) {
      const Vec2 x = p0 + q[0] * (p1 - p0) + q[1] * (p2 - p0);
      grad_u0(x, g);
      Vector v = Vector::Zero(nc);
      for (int al = 0; al < 2; ++al) v += (strip_at(f[al], e, eps, x) - tail[al]) * g.col(al);
      acc += ar * q[2] * v.squaredNorm();
    }
  }
  return std::sqrt(acc);
}

}  // namespace bl

}  // namespace homog
