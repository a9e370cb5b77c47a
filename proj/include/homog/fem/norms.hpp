#pragma once

#include "homog/fem/solve.hpp"

namespace homog {

struct FieldNorms {
  Real l2 = 0.0;
  Real h1_semi = 0.0;
  Real linf = 0.0;
};

namespace fem {

/// Degree-5 seven-point rule on the reference triangle: (s, t, weight), weights sum to 1.
inline const std::array<std::array<Real, 3>, 7>& dunavant5() {
  static const std::array<std::array<Real, 3>, 7> q = [] {
    const Real a1 = 0.059715871789770, b1 = 0.470142064105115, w1 = 0.132394152788506;
    const Real a2 = 0.797426985353087, b2 = 0.101286507323456, w2 = 0.125939180544827;
    return std::array<std::array<Real, 3>, 7>{{{1.0 / 3, 1.0 / 3, 0.225},
                                              {a1, b1, w1},
                                              {b1, a1, w1},
                                              {b1, b1, w1},
                                              {a2, b2, w2},
                                              {b2, a2, w2},
                                              {b2, b2, w2}}};
  }();
  return q;
}

/// Element gradient of a nodal field: N×2 matrix (component, direction).
inline Matrix element_gradient(const Mesh& mesh, int e, const Vector& u, int nc) {
  const auto g = mesh.gradients(e);
  const auto& tr = mesh.triangles[e];
  Matrix out = Matrix::Zero(nc, 2);
  for (int a = 0; a < 3; ++a) out += u.segment(tr[a] * nc, nc) * g.row(a);
  return out;
}

}  // namespace fem

/// L², H¹-seminorm and nodal max of a P1 field; exact for the piecewise-linear field.
inline FieldNorms norms(const Mesh& mesh, const Vector& u, int nc = 1) {
  FieldNorms n;
  Real l2 = 0.0, h1 = 0.0;
  for (int e = 0; e < mesh.num_triangles(); ++e) {
    const auto& tr = mesh.triangles[e];
    const Real ar = mesh.area(e);
    for (int i = 0; i < nc; ++i) {
      const Real a = u[tr[0] * nc + i], b = u[tr[1] * nc + i], c = u[tr[2] * nc + i];
      l2 += ar / 6.0 * (a * a + b * b + c * c + a * b + b * c + c * a);
    }
    h1 += ar * fem::element_gradient(mesh, e, u, nc).squaredNorm();
  }
  n.l2 = std::sqrt(std::max(l2, 0.0));
  n.h1_semi = std::sqrt(h1);
  n.linf = u.size() ? u.cwiseAbs().maxCoeff() : 0.0;
  return n;
}

/// ‖u_h − u‖ in L² and the H¹ seminorm against an exact field and its gradient
/// (gradient callback fills an N×2 matrix), with the seven-point rule per element.
inline FieldNorms error_norms(const Mesh& mesh, const Vector& uh, int nc, const NodalFunction& exact,
                              const std::function<void(const Vec2&, Matrix&)>& exact_grad = {}) {
  FieldNorms n;
  Real l2 = 0.0, h1 = 0.0;
  Vector ue(nc), uhq(nc);
  Matrix ge(nc, 2);
  for (int e = 0; e < mesh.num_triangles(); ++e) {
    const auto& tr = mesh.triangles[e];
    const Real ar = mesh.area(e);
    const Vec2 &p0 = mesh.nodes[tr[0]], &p1 = mesh.nodes[tr[1]], &p2 = mesh.nodes[tr[2]];
    const Matrix gh = fem::element_gradient(mesh, e, uh, nc);
    for (const auto& q : fem::dunavant5()) {
      const Vec2 x = p0 + q[0] * (p1 - p0) + q[1] * (p2 - p0);
      exact(x, ue);
      uhq = (1 - q[0] - q[1]) * uh.segment(tr[0] * nc, nc) + q[0] * uh.segment(tr[1] * nc, nc) +
            q[1] * uh.segment(tr[2] * nc, nc);
      l2 += ar * q[2] * (uhq - ue).squaredNorm();
      if (exact_grad) {
        exact_grad(x, ge);
        h1 += ar * q[2] * (gh - ge).squaredNorm();
      }
    }
  }
  for (int v = 0; v < mesh.num_nodes(); ++v) {
    exact(mesh.nodes[v], ue);
    n.linf = std::max(n.linf, (uh.segment(v * nc, nc) - ue).cwiseAbs().maxCoeff());
  }
  n.l2 = std::sqrt(l2);
  n.h1_semi = std::sqrt(h1);
  return n;
}

/// Nodal gradients by area-weighted averaging of element gradients over each
/// node's patch. Layout: entry (v·N + i, α).
inline Matrix recover_gradient(const Mesh& mesh, const Vector& u, int nc = 1) {
  Matrix g = Matrix::Zero(mesh.num_nodes() * nc, 2);
  Vector w = Vector::Zero(mesh.num_nodes());
  for (int e = 0; e < mesh.num_triangles(); ++e) {
    const Real ar = mesh.area(e);
    const Matrix ge = fem::element_gradient(mesh, e, u, nc);
    for (int v : mesh.triangles[e]) {
      g.middleRows(v * nc, nc) += ar * ge;
      w[v] += ar;
    }
  }
  for (int v = 0; v < mesh.num_nodes(); ++v) g.middleRows(v * nc, nc) /= w[v];
  return g;
}

/// Nodal second derivatives by recovering the recovered gradient; entry (v·N + i, 2α + β).
inline Matrix recover_hessian(const Mesh& mesh, const Vector& u, int nc = 1) {
  const Matrix g = recover_gradient(mesh, u, nc);
  Matrix h(mesh.num_nodes() * nc, 4);
  for (int a = 0; a < 2; ++a) {
    const Matrix ga = recover_gradient(mesh, g.col(a), nc);
    h.col(2 * a) = ga.col(0);
    h.col(2 * a + 1) = ga.col(1);
  }
  // symmetrize the mixed derivatives
  const Vector mixed = 0.5 * (h.col(1) + h.col(2));
  h.col(1) = mixed;
  h.col(2) = mixed;
  return h;
}

/// Mass-matrix inner product of two full nodal fields.
inline Real mass_inner(const DiscreteSystem& s, const Vector& a, const Vector& b) { return a.dot(s.mass * b); }

}  // namespace homog
