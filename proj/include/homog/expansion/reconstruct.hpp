#pragma once

#include "homog/expansion/eigen_expansion.hpp"

namespace homog {

/// u⁰ + εχ^α(x/ε)∂_αu⁰ + εϑ, plus ε²Γ^{αβ}(x/ε)∂²_{αβ}u⁰ + ε²ϑ² for order 2, at the mesh nodes.
/// chi and gamma are N×N fields; theta/theta2 are optional full nodal layers.
inline Vector multiscale_reconstruct(const Mesh& mesh, const Vector& u0, int nc, const std::array<GridField, 2>& chi, Real eps,
                                     int order = 1, const Vector* theta = nullptr,
                                     const std::array<GridField, 4>* gamma = nullptr, const Vector* theta2 = nullptr) {
  if (order != 1 && order != 2) throw Error("expansion", ErrorCode::InvalidArgument, cat("order must be 1 or 2, got ", order));
  if (chi[0].empty() || chi[1].empty()) throw Error("expansion", ErrorCode::MissingCorrector, "first-order corrector χ is missing");
  if (order == 2 && (!gamma || (*gamma)[0].empty()))
    throw Error("expansion", ErrorCode::MissingCorrector, "order 2 needs the second-order corrector Γ");
  if (eps < 0) throw Error("expansion", ErrorCode::InvalidArgument, cat("ε must be non-negative, got ", eps));
  Vector out = u0;
  if (eps == 0) return out;
  const Matrix g = recover_gradient(mesh, u0, nc);
  for (int v = 0; v < mesh.num_nodes(); ++v) {
    const Vec2 y = mesh.nodes[v] / eps;
    for (int al = 0; al < 2; ++al) out.segment(v * nc, nc) += eps * chi[al](y) * g.block(v * nc, al, nc, 1);
  }
  if (theta) out += eps * *theta;
  if (order == 2) {
    const Matrix hs = recover_hessian(mesh, u0, nc);
    for (int v = 0; v < mesh.num_nodes(); ++v) {
      const Vec2 y = mesh.nodes[v] / eps;
      for (int ab = 0; ab < 4; ++ab) out.segment(v * nc, nc) += eps * eps * (*gamma)[ab](y) * hs.block(v * nc, ab, nc, 1);
    }
    if (theta2) out += eps * eps * *theta2;
  }
  return out;
}

struct CorrectorStudyOptions {
  int order = 1;
  const std::array<GridField, 4>* gamma = nullptr;  // Γ for order 2
  ReportOptions homogenized{0.1};
  ReportOptions h1{0.15};
  ReportOptions l2{0.1};
  int quadrature_cap = 6;
};

struct CorrectorStudyRow {
  Real eps = 0.0;
  Real h = 0.0;
  Real homogenized_l2 = 0.0;      // ‖u^ε − u⁰‖_{L²}
  Real reconstruction_h1 = 0.0;   // ‖u^ε − reconstruction‖_{H¹}
  Real reconstruction_l2 = 0.0;   // ‖u^ε − reconstruction‖_{L²}
};

struct CorrectorStudy {
  std::vector<CorrectorStudyRow> rows;
  std::array<ConvergenceReport, 3> reports;
};

/// Dirichlet problems −∇·A(x/ε)∇u = f and −∇·A⁰_h∇u⁰ = f on the ε/n_c mesh, and the
/// reconstruction u⁰ + εχ_h∂u⁰ + εϑ^ε with the oscillating layer of the corrector trace.
inline CorrectorStudyRow corrector_error_row(const ExpansionProblem& p, const NodalFunction& f, Real eps,
                                             const CorrectorStudyOptions& opt = {}) {
  CorrectorStudyRow row;
  row.eps = eps;
  auto mesh = std::make_shared<const Mesh>(triangulate(p.domain, p.mesh_size(eps)));
  row.h = mesh->h;
  const int nc = p.a.n_components();
  AssemblyOptions ao;
  ao.quadrature_cap = opt.quadrature_cap;
  const auto s_eps = assemble_oscillating(mesh, p.a, eps, ao);
  const auto s0 = assemble_constant(mesh, p.lattice.homogenized);
  const Vector load = interpolate(*mesh, nc, f);
  const Vector zero = Vector::Zero(load.size());
  const SpdSolver f_eps(s_eps.k_ff);
  const Vector ue = solve_dirichlet(s_eps, load, zero, &f_eps).field;
  const Vector u0 = solve_dirichlet(s0, load, zero).field;
  row.homogenized_l2 = norms(*mesh, ue - u0, nc).l2;
  const Matrix g = recover_gradient(*mesh, u0, nc);
  OscillatingBlOptions bo;
  bo.min_cells_per_period = p.cells_per_period;
  const Vector theta = solve_oscillating_bl(s_eps, eps, bl::corrector_trace(p.lattice.chi, eps, *mesh, g, nc), bo, &f_eps).field;
  Vector theta2;
  const Vector* t2 = nullptr;
  if (opt.order == 2) {
    if (!opt.gamma || (*opt.gamma)[0].empty())
      throw Error("expansion", ErrorCode::MissingCorrector, "order 2 needs the second-order corrector Γ");
    const Matrix hs = recover_hessian(*mesh, u0, nc);
    const auto& gam = *opt.gamma;
    // second-order trace −Γ^{αβ}(x/ε)∂²_{αβ}u⁰ on the boundary nodes
    Vector data = Vector::Zero(load.size());
    for (int v = 0; v < mesh->num_nodes(); ++v) {
      if (!mesh->on_boundary(v)) continue;
      for (int ab = 0; ab < 4; ++ab) data.segment(v * nc, nc) -= gam[ab](mesh->nodes[v] / eps) * hs.block(v * nc, ab, nc, 1);
    }
    theta2 = solve_dirichlet(s_eps, zero, data, &f_eps).field;
    t2 = &theta2;
  }
  const Vector rec = multiscale_reconstruct(*mesh, u0, nc, p.lattice.chi, eps, opt.order, &theta, opt.gamma, t2);
  const auto en = norms(*mesh, ue - rec, nc);
  row.reconstruction_h1 = std::hypot(en.l2, en.h1_semi);
  row.reconstruction_l2 = en.l2;
  return row;
}

inline CorrectorStudy corrector_error_study(const ExpansionProblem& p, const NodalFunction& f, std::vector<Real> eps,
                                            const CorrectorStudyOptions& opt = {}) {
  if (eps.size() < 3) throw Error("expansion", ErrorCode::InvalidArgument, cat("ε list needs at least 3 entries, got ", eps.size()));
  std::sort(eps.begin(), eps.end(), std::greater<>());
  CorrectorStudy st;
  std::vector<std::pair<Real, Real>> a, b, c;
  for (Real e : eps) {
    st.rows.push_back(corrector_error_row(p, f, e, opt));
    const auto& r = st.rows.back();
    a.emplace_back(e, r.homogenized_l2);
    b.emplace_back(e, r.reconstruction_h1);
    c.emplace_back(e, r.reconstruction_l2);
  }
  st.reports[0] = make_report("homogenized_l2_error", a, 0.5, opt.homogenized);
  st.reports[1] = make_report("reconstruction_h1_error", b, 1.0, opt.h1);
  st.reports[2] = make_report("reconstruction_l2_error", c, opt.order == 2 ? 1.5 : 1.0, opt.l2);
  return st;
}

// ---------------------------------------------------------------------------
// The χ term of the eigenvalue expansion

namespace expansion {

/// Sub-triangles of the reference triangle at refinement level L, as vertex triples.
inline std::vector<std::array<std::array<Real, 2>, 3>> reference_subdivision(int level) {
  const int m = 1 << level;
  const Real s = 1.0 / m;
  std::vector<std::array<std::array<Real, 2>, 3>> out;
  for (int i = 0; i < m; ++i)
    for (int j = 0; i + j < m; ++j) {
      out.push_back({{{i * s, j * s}, {(i + 1) * s, j * s}, {i * s, (j + 1) * s}}});
      if (i + j + 1 < m) out.push_back({{{(i + 1) * s, j * s}, {(i + 1) * s, (j + 1) * s}, {i * s, (j + 1) * s}}});
    }
  return out;
}

/// Field value (N) and gradient (N×2) at x inside element e with barycentric (s, t).
using ElementSampler = std::function<void(int e, Real s, Real t, const Vec2& x, Vector& value, Matrix& grad)>;

/// ∫ Σ_α v·χ^α(x/ε)∂_αv over the mesh, each element split until sub-triangles are ≤ ε/8.
inline Real chi_term_integral(const std::array<GridField, 2>& chi, Real eps, const Mesh& mesh, int nc, const ElementSampler& sample,
                              int level_cap = 8) {
  const int level = std::min(level_cap, std::max(0, static_cast<int>(std::ceil(std::log2(8.0 * mesh.diameter / eps)))));
  const auto sub = reference_subdivision(level);
  const Real sub_area = 1.0 / sub.size();
  Vector val(nc);
  Matrix grad(nc, 2);
  Real total = 0.0;
  for (int e = 0; e < mesh.num_triangles(); ++e) {
    const auto& tr = mesh.triangles[e];
    const Vec2 &p0 = mesh.nodes[tr[0]], &p1 = mesh.nodes[tr[1]], &p2 = mesh.nodes[tr[2]];
    const Real ar = mesh.area(e);
    Real acc = 0.0;
    for (const auto& st : sub)
      for (const auto& q : fem::dunavant5()) {
        const Real s = st[0][0] + q[0] * (st[1][0] - st[0][0]) + q[1] * (st[2][0] - st[0][0]);
        const Real t = st[0][1] + q[0] * (st[1][1] - st[0][1]) + q[1] * (st[2][1] - st[0][1]);
        const Vec2 x = p0 + s * (p1 - p0) + t * (p2 - p0);
        sample(e, s, t, x, val, grad);
        const Vec2 y = x / eps;
        Real term = 0.0;
        for (int al = 0; al < 2; ++al) term += val.dot(chi[al](y) * grad.col(al));
        acc += q[2] * term;
      }
    total += ar * sub_area * acc;
  }
  return total;
}

/// Sampler of a P1 nodal field.
inline ElementSampler p1_sampler(const Mesh& mesh, const Vector& v, int nc) {
  return [&mesh, &v, nc](int e, Real s, Real t, const Vec2&, Vector& value, Matrix& grad) {
    const auto& tr = mesh.triangles[e];
    value = (1 - s - t) * v.segment(tr[0] * nc, nc) + s * v.segment(tr[1] * nc, nc) + t * v.segment(tr[2] * nc, nc);
    grad = fem::element_gradient(mesh, e, v, nc);
  };
}

/// Sampler of an exact field and its gradient.
inline ElementSampler exact_sampler(const NodalFunction& value, const std::function<void(const Vec2&, Matrix&)>& gradient) {
  return [value, gradient](int, Real, Real, const Vec2& x, Vector& v, Matrix& g) {
    value(x, v);
    gradient(x, g);
  };
}

}  // namespace expansion

/// |∫ χ^α(x/ε)∂_αv⁰·v⁰| over an ε sweep.
inline ConvergenceReport chi_term_decay(const std::array<GridField, 2>& chi, const Mesh& mesh, int nc,
                                        const expansion::ElementSampler& v0, const std::vector<Real>& eps,
                                        const ReportOptions& opt = {}) {
  std::vector<std::pair<Real, Real>> rows;
  const bool zero = chi[0].max_abs() == 0 && chi[1].max_abs() == 0;
  for (Real e : eps) rows.emplace_back(e, zero ? 0.0 : std::abs(expansion::chi_term_integral(chi, e, mesh, nc, v0)));
  return make_report("chi_term", rows, 1.0, opt);
}

// ---------------------------------------------------------------------------
// Tail-subtracted layer profiles

struct LayerDecayOptions {
  StripOptions strip;
  TailOptions tail;
  int cells_per_period = 4;  // quadrature mesh h = ε / cells_per_period
  ReportOptions report{0.1};
};

/// ‖Σ_k v^{k,ε}_bl(x, x/ε)‖ with v^{k,ε}_bl = −(v^{k,α} − V^{k,α,*})∂_αu⁰ over an ε sweep, edges combined in
/// quadrature. Rational edges only.
inline ConvergenceReport layer_decay_study(const PeriodicTensor& a, const std::array<GridField, 2>& chi, const PolygonDomain& d,
                                           const std::function<void(const Vec2&, Matrix&)>& grad_u0, const std::vector<Real>& eps,
                                           const LayerDecayOptions& opt = {}) {
  std::vector<std::pair<Real, Real>> rows;
  for (Real e : eps) {
    const Mesh mesh = triangulate(d, e / opt.cells_per_period);
    Real sq = 0.0;
    for (int k = 0; k < static_cast<int>(d.edges().size()); ++k) {
      const Edge& edge = d.edges()[k];
      if (d.classification()[k].kind != SlopeKind::Rational)
        throw Error("expansion", ErrorCode::InvalidArgument, cat("edge ", k, " is not rational"));
      StripOptions so = opt.strip;
      so.origin = bl::edge_origin(edge, e);
      const auto f = solve_corrector_strips(a, chi, edge.normal, so);
      const std::array<Matrix, 2> tail{extract_tail(f[0], opt.tail).tail, extract_tail(f[1], opt.tail).tail};
      sq += std::pow(bl::layer_deviation_l2(f, tail, edge, e, mesh, grad_u0), 2);
    }
    rows.emplace_back(e, std::sqrt(sq));
  }
  return make_report("layer_deviation_l2", rows, 0.5, opt.report);
}

}  // namespace homog
