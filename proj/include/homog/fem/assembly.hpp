#pragma once

#include "homog/fem/mesh.hpp"
#include "homog/microstructure/periodic_tensor.hpp"

#include <Eigen/Sparse>

#include <memory>

namespace homog {

using SpMat = Eigen::SparseMatrix<Real>;
using Triplet = Eigen::Triplet<Real>;

namespace fem {

/// Red-subdivision level so that sub-triangles of an element with diameter
/// `ratio` (in units of the period) have diameter ≤ 1/4, capped at `cap`.
inline int quadrature_level(Real ratio, int cap) {
  int level = 0;
  while (level < cap && ratio / std::ldexp(1.0, level) > 0.25 * (1 + 1e-9)) ++level;
  return level;
}

/// Centroid points (barycentric s, t) of the 4^level congruent sub-triangles.
inline std::vector<std::array<Real, 2>> subcentroids(int level) {
  const int m = 1 << level;
  std::vector<std::array<Real, 2>> pts;
  pts.reserve(static_cast<std::size_t>(m) * m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; i + j < m; ++j) {
      pts.push_back({(i + 1.0 / 3) / m, (j + 1.0 / 3) / m});
      if (i + j + 2 <= m) pts.push_back({(i + 2.0 / 3) / m, (j + 2.0 / 3) / m});
    }
  return pts;
}

/// Composite-centroid average of A(x/ε) over the triangle (p0, p1, p2).
inline void element_average(const PeriodicTensor& a, Real eps, const Vec2& p0, const Vec2& p1, const Vec2& p2,
                            const std::vector<std::array<Real, 2>>& pts, Matrix& avg, Matrix& scratch) {
  avg.setZero(2 * a.n_components(), 2 * a.n_components());
  for (const auto& st : pts) {
    const Vec2 x = p0 + st[0] * (p1 - p0) + st[1] * (p2 - p0);
    a.eval(x / eps, scratch);
    avg += scratch;
  }
  avg /= Real(pts.size());
}

/// P1 element stiffness for an element-averaged block tensor; local index a·N + i.
inline Matrix element_stiffness(const Eigen::Matrix<Real, 3, 2>& g, Real area, const Matrix& abar, int nc) {
  Matrix ke = Matrix::Zero(3 * nc, 3 * nc);
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      for (int al = 0; al < 2; ++al)
        for (int be = 0; be < 2; ++be) {
          const Real w = area * g(a, al) * g(b, be);
          if (w == 0.0) continue;
          ke.block(a * nc, b * nc, nc, nc) += w * abar.block(al * nc, be * nc, nc, nc);
        }
  return ke;
}

}  // namespace fem

/// Stiffness and mass over all vector DoFs (node·N + component) with the
/// Dirichlet boundary bookkeeping; dof_free[d] is the free index or −1.
struct DiscreteSystem {
  std::shared_ptr<const Mesh> mesh;
  int n_components = 1;
  SpMat stiffness;
  SpMat mass;
  std::vector<int> free_dofs;
  std::vector<int> dirichlet_dofs;
  std::vector<int> dof_free;
  int quadrature_level = 0;
  SpMat k_ff, m_ff, k_fd;

  int num_dofs() const { return static_cast<int>(dof_free.size()); }
  int num_free() const { return static_cast<int>(free_dofs.size()); }

  Vector restrict_free(const Vector& full) const {
    Vector out(num_free());
    for (int f = 0; f < num_free(); ++f) out[f] = full[free_dofs[f]];
    return out;
  }
  Vector restrict_dirichlet(const Vector& full) const {
    Vector out(dirichlet_dofs.size());
    for (std::size_t k = 0; k < dirichlet_dofs.size(); ++k) out[k] = full[dirichlet_dofs[k]];
    return out;
  }
  Vector extend(const Vector& free, const Vector* dirichlet = nullptr) const {
    Vector out = Vector::Zero(num_dofs());
    for (int f = 0; f < num_free(); ++f) out[free_dofs[f]] = free[f];
    if (dirichlet)
      for (std::size_t k = 0; k < dirichlet_dofs.size(); ++k) out[dirichlet_dofs[k]] = (*dirichlet)[k];
    return out;
  }

  Real stiffness_asymmetry() const {
    const SpMat d = SpMat(stiffness.transpose()) - stiffness;
    Real m = 0.0, s = 0.0;
    for (int k = 0; k < d.outerSize(); ++k)
      for (SpMat::InnerIterator it(d, k); it; ++it) m = std::max(m, std::abs(it.value()));
    for (int k = 0; k < stiffness.outerSize(); ++k)
      for (SpMat::InnerIterator it(stiffness, k); it; ++it) s = std::max(s, std::abs(it.value()));
    return s > 0 ? m / s : m;
  }

  /// Energy a(u, u) of a full nodal field.
  Real energy(const Vector& u) const { return u.dot(stiffness * u); }
};

struct AssemblyOptions {
  int quadrature_cap = 6;
  bool allow_underresolved = false;
};

namespace fem {

inline SpMat extract(const SpMat& a, const std::vector<int>& rows, const std::vector<int>& cols, int n) {
  std::vector<int> rmap(n, -1), cmap(n, -1);
  for (std::size_t k = 0; k < rows.size(); ++k) rmap[rows[k]] = static_cast<int>(k);
  for (std::size_t k = 0; k < cols.size(); ++k) cmap[cols[k]] = static_cast<int>(k);
  std::vector<Triplet> t;
  for (int c = 0; c < a.outerSize(); ++c)
    for (SpMat::InnerIterator it(a, c); it; ++it)
      if (rmap[it.row()] >= 0 && cmap[it.col()] >= 0) t.emplace_back(rmap[it.row()], cmap[it.col()], it.value());
  SpMat out(static_cast<int>(rows.size()), static_cast<int>(cols.size()));
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

inline SpMat mass_matrix(const Mesh& mesh, int nc) {
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(mesh.num_triangles()) * 9 * nc);
  for (int e = 0; e < mesh.num_triangles(); ++e) {
    const auto& tr = mesh.triangles[e];
    const Real ar = mesh.area(e);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        for (int i = 0; i < nc; ++i) t.emplace_back(tr[a] * nc + i, tr[b] * nc + i, ar / 12.0 * (a == b ? 2.0 : 1.0));
  }
  const int n = mesh.num_nodes() * nc;
  SpMat m(n, n);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

/// Assemble with a per-element averaged tensor supplied by `abar(e, out)`.
template <typename ElementTensor>
DiscreteSystem assemble(std::shared_ptr<const Mesh> mesh, int nc, ElementTensor&& abar, int level) {
  DiscreteSystem s;
  s.mesh = mesh;
  s.n_components = nc;
  s.quadrature_level = level;
  const int n = mesh->num_nodes() * nc;
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(mesh->num_triangles()) * 9 * nc * nc);
  Matrix a;
  for (int e = 0; e < mesh->num_triangles(); ++e) {
    abar(e, a);
    const auto ke = element_stiffness(mesh->gradients(e), mesh->area(e), a, nc);
    const auto& tr = mesh->triangles[e];
    for (int p = 0; p < 3; ++p)
      for (int q = 0; q < 3; ++q)
        for (int i = 0; i < nc; ++i)
          for (int j = 0; j < nc; ++j) {
            const Real v = ke(p * nc + i, q * nc + j);
            if (v != 0.0) t.emplace_back(tr[p] * nc + i, tr[q] * nc + j, v);
          }
  }
  s.stiffness.resize(n, n);
  s.stiffness.setFromTriplets(t.begin(), t.end());
  s.mass = mass_matrix(*mesh, nc);
  s.dof_free.assign(n, -1);
  for (int v = 0; v < mesh->num_nodes(); ++v)
    for (int i = 0; i < nc; ++i) {
      const int d = v * nc + i;
      if (mesh->on_boundary(v)) {
        s.dirichlet_dofs.push_back(d);
      } else {
        s.dof_free[d] = static_cast<int>(s.free_dofs.size());
        s.free_dofs.push_back(d);
      }
    }
  s.k_ff = extract(s.stiffness, s.free_dofs, s.free_dofs, n);
  s.m_ff = extract(s.mass, s.free_dofs, s.free_dofs, n);
  s.k_fd = extract(s.stiffness, s.free_dofs, s.dirichlet_dofs, n);
  return s;
}

}  // namespace fem

/// ∫ A(x/ε)∇φ_j·∇φ_i with A averaged per element by the composite centroid rule.
inline DiscreteSystem assemble_oscillating(std::shared_ptr<const Mesh> mesh, const PeriodicTensor& a, Real eps,
                                           const AssemblyOptions& opt = {}) {
  if (!(eps > 0)) throw Error("fem", ErrorCode::InvalidArgument, cat("epsilon must be positive, got ", eps));
  if (mesh->diameter > eps && !a.is_constant() && !opt.allow_underresolved)
    throw Error("fem", ErrorCode::QuadratureUnderResolved,
                cat("element diameter ", mesh->diameter, " exceeds epsilon ", eps));
  const int nc = a.n_components();
  if (a.is_constant()) {
    Matrix a0;
    a.eval(Vec2::Zero(), a0);
    return fem::assemble(mesh, nc, [&](int, Matrix& out) { out = a0; }, 0);
  }
  // one level from the largest element keeps every cell of a lattice mesh identical
  const int level = fem::quadrature_level(mesh->diameter / eps, opt.quadrature_cap);
  const auto pts = fem::subcentroids(level);
  Matrix scratch;
  return fem::assemble(
      mesh, nc,
      [&](int e, Matrix& out) {
        const auto& tr = mesh->triangles[e];
        fem::element_average(a, eps, mesh->nodes[tr[0]], mesh->nodes[tr[1]], mesh->nodes[tr[2]], pts, out, scratch);
      },
      level);
}

inline DiscreteSystem assemble_constant(std::shared_ptr<const Mesh> mesh, const BlockTensor& a0) {
  return fem::assemble(mesh, a0.n(), [&](int, Matrix& out) { out = a0.matrix(); }, 0);
}

}  // namespace homog
