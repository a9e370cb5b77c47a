#pragma once

#include "homog/fem/solve.hpp"
#include "homog/microstructure/cell_problem.hpp"

namespace homog {

/// P1 cell problem on the n×n union-jack torus lattice with the same
/// element quadrature as assemble_oscillating on a mesh of step ε/n. Its
/// homogenized tensor is the exact limit of that discrete scheme, so studies
/// on such meshes compare against it instead of the continuous A⁰.
struct LatticeCellOptions {
  int cells_per_period = 4;
  int quadrature_cap = 6;
};

namespace fem {

/// Torus lattice: node (k1, k2) has index k1·n + k2 (the GridField ordering).
inline Mesh torus_lattice(int n) {
  Mesh m;
  m.nx = m.ny = n;
  for (int k1 = 0; k1 < n; ++k1)
    for (int k2 = 0; k2 < n; ++k2) m.nodes.emplace_back(Real(k1) / n, Real(k2) / n);
  auto id = [n](int i, int j) { return ((i % n + n) % n) * n + ((j % n + n) % n); };
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      for (const auto& t : cell_split(i, j))
        m.triangles.push_back({id(i + t[0][0], j + t[0][1]), id(i + t[1][0], j + t[1][1]), id(i + t[2][0], j + t[2][1])});
    }
  m.h = 1.0 / n;
  m.diameter = std::sqrt(2.0) / n;
  m.node_edges.assign(m.num_nodes(), {-1, -1});
  return m;
}

/// Reference vertices of lattice triangle e (unwrapped, so gradients are correct).
inline std::array<Vec2, 3> torus_triangle(int n, int e) {
  const int cell = e / 2, i = cell / n, j = cell % n;
  const Vec2 o(Real(i) / n, Real(j) / n);
  const auto t = cell_split(i, j)[e % 2];
  std::array<Vec2, 3> v;
  for (int k = 0; k < 3; ++k) v[k] = o + Vec2(t[k][0], t[k][1]) / n;
  return v;
}

}  // namespace fem

inline CellCorrectors lattice_cell_correctors(const PeriodicTensor& a, const LatticeCellOptions& opt = {}) {
  const int n = opt.cells_per_period;
  if (n < 2 || n % 2) throw Error("fem", ErrorCode::InvalidArgument, cat("cells_per_period must be even and positive, got ", n));
  const int nc = a.n_components();
  const Mesh m = fem::torus_lattice(n);
  const int level = fem::quadrature_level(m.diameter, opt.quadrature_cap);
  const auto pts = fem::subcentroids(level);
  const int ne = m.num_triangles();
  std::vector<Matrix> abar(ne);
  std::vector<Eigen::Matrix<Real, 3, 2>> grads(ne);
  const Real area = 0.5 / (Real(n) * n);
  Matrix scratch;
  for (int e = 0; e < ne; ++e) {
    const auto v = fem::torus_triangle(n, e);
    if (a.is_constant()) {
      a.eval(Vec2::Zero(), abar[e]);
    } else {
      fem::element_average(a, 1.0, v[0], v[1], v[2], pts, abar[e], scratch);
    }
    const Real det = (v[1].x() - v[0].x()) * (v[2].y() - v[0].y()) - (v[2].x() - v[0].x()) * (v[1].y() - v[0].y());
    grads[e] << v[1].y() - v[2].y(), v[2].x() - v[1].x(), v[2].y() - v[0].y(), v[0].x() - v[2].x(),
        v[0].y() - v[1].y(), v[1].x() - v[0].x();
    grads[e] /= det;
  }
  // stiffness with node 0 pinned (all components) to remove the constant kernel
  const int ndof = m.num_nodes() * nc;
  auto reduced = [nc](int d) { return d - nc; };
  std::vector<Triplet> t;
  for (int e = 0; e < ne; ++e) {
    const auto ke = fem::element_stiffness(grads[e], area, abar[e], nc);
    const auto& tr = m.triangles[e];
    for (int p = 0; p < 3; ++p)
      for (int q = 0; q < 3; ++q)
        for (int i = 0; i < nc; ++i)
          for (int j = 0; j < nc; ++j) {
            const int r = tr[p] * nc + i, c = tr[q] * nc + j;
            if (r < nc || c < nc) continue;
            t.emplace_back(reduced(r), reduced(c), ke(p * nc + i, q * nc + j));
          }
  }
  SpMat k(ndof - nc, ndof - nc);
  k.setFromTriplets(t.begin(), t.end());

  CellCorrectors cc;
  cc.resolution = n;
  cc.n_components = nc;
  cc.homogenized = BlockTensor(nc);
  Matrix mean_a = Matrix::Zero(2 * nc, 2 * nc);
  for (int e = 0; e < ne; ++e) mean_a += area * abar[e];
  cc.homogenized.matrix() = mean_a;

  const bool trivial = a.is_constant() || ndof == nc;
  SpdSolver solver;
  if (!trivial) solver.compute(k);
  for (int g = 0; g < 2; ++g) {
    cc.chi[g] = GridField(n, nc, nc, Interpolation::p1_lattice);
    if (trivial) continue;
    // weak form of −∇·A∇χ^γ = ∂_α A^{αγ}: right side −∫ A^{αγ} ∂_α φ
    Matrix rhs = Matrix::Zero(ndof, nc);
    for (int e = 0; e < ne; ++e) {
      const auto& tr = m.triangles[e];
      for (int p = 0; p < 3; ++p)
        for (int al = 0; al < 2; ++al)
          rhs.middleRows(tr[p] * nc, nc) -= area * grads[e](p, al) * abar[e].block(al * nc, g * nc, nc, nc);
    }
    const Matrix sol = solver.solve(rhs.bottomRows(ndof - nc));
    Matrix full = Matrix::Zero(ndof, nc);
    full.bottomRows(ndof - nc) = sol;
    // zero mean (every lattice node carries the same mass weight)
    for (int i = 0; i < nc; ++i) {
      Vector mean = Vector::Zero(nc);
      for (int v = 0; v < m.num_nodes(); ++v) mean += full.row(v * nc + i).transpose();
      mean /= m.num_nodes();
      for (int v = 0; v < m.num_nodes(); ++v) full.row(v * nc + i) -= mean.transpose();
    }
    for (int v = 0; v < m.num_nodes(); ++v) cc.chi[g].set(v, full.middleRows(v * nc, nc));
    const Real res = (k * sol - rhs.bottomRows(ndof - nc)).norm() / std::max(rhs.norm(), 1e-300);
    cc.chi_stats[g].relative_residual = res;
    if (res > 1e-10) throw Error("fem", ErrorCode::SolverFailure, cat("lattice cell solve residual ", res));
  }
  if (!trivial) {
    // A⁰^{αβ} += ∫ A^{αγ} ∂_γ χ^β
    for (int e = 0; e < ne; ++e) {
      const auto& tr = m.triangles[e];
      for (int be = 0; be < 2; ++be) {
        Matrix dchi[2] = {Matrix::Zero(nc, nc), Matrix::Zero(nc, nc)};
        for (int p = 0; p < 3; ++p)
          for (int gm = 0; gm < 2; ++gm) dchi[gm] += grads[e](p, gm) * cc.chi[be].at(tr[p]);
        for (int al = 0; al < 2; ++al)
          for (int gm = 0; gm < 2; ++gm)
            cc.homogenized.block(al, be) += area * abar[e].block(al * nc, gm * nc, nc, nc) * dchi[gm];
      }
    }
  }
  return cc;
}

}  // namespace homog
