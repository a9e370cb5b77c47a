#pragma once

#include "homog/fem/assembly.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>

#include <functional>

namespace homog {

struct LinearSolverOptions {
  int direct_limit = 200'000;  // sparse LDLᵀ up to this many unknowns
  Real cg_tolerance = 1e-12;
  int cg_max_iterations = 20'000;
};

/// Symmetric positive definite sparse solve: LDLᵀ for desk-scale systems,
/// incomplete-Cholesky CG above the size limit.
class SpdSolver {
 public:
  SpdSolver() = default;
  explicit SpdSolver(const SpMat& a, const LinearSolverOptions& opt = {}) { compute(a, opt); }

  void compute(const SpMat& a, const LinearSolverOptions& opt = {}) {
    opt_ = opt;
    rows_ = static_cast<int>(a.rows());
    direct_ = a.rows() <= opt.direct_limit;
    if (direct_) {
      ldlt_ = std::make_shared<Eigen::SimplicialLDLT<SpMat>>();
      ldlt_->compute(a);
      if (ldlt_->info() != Eigen::Success || (ldlt_->vectorD().array() <= 0).any())
        throw Error("fem", ErrorCode::SolverFailure, "sparse LDLT failed: matrix is not positive definite");
    } else {
      cg_ = std::make_shared<Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper, Eigen::IncompleteCholesky<Real>>>();
      cg_->setTolerance(opt.cg_tolerance);
      cg_->setMaxIterations(opt.cg_max_iterations);
      cg_->compute(a);
      if (cg_->info() != Eigen::Success) throw Error("fem", ErrorCode::SolverFailure, "incomplete Cholesky failed");
    }
  }

  bool direct() const noexcept { return direct_; }
  int rows() const noexcept { return rows_; }

  Matrix solve(const Matrix& b) const {
    if (direct_) return ldlt_->solve(b);
    Matrix x(b.rows(), b.cols());
    for (int c = 0; c < b.cols(); ++c) {
      x.col(c) = cg_->solve(b.col(c));
      if (cg_->info() != Eigen::Success)
        throw Error("fem", ErrorCode::SolverFailure, cat("CG stopped with estimated error ", cg_->error()));
    }
    return x;
  }

 private:
  LinearSolverOptions opt_;
  int rows_ = 0;
  bool direct_ = true;
  std::shared_ptr<Eigen::SimplicialLDLT<SpMat>> ldlt_;
  std::shared_ptr<Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper, Eigen::IncompleteCholesky<Real>>> cg_;
};

/// Nodal vector field: N values per node, node-major (node·N + component).
using NodalFunction = std::function<void(const Vec2&, Eigen::Ref<Vector>)>;

inline Vector interpolate(const Mesh& mesh, int nc, const NodalFunction& f) {
  Vector out(mesh.num_nodes() * nc);
  for (int v = 0; v < mesh.num_nodes(); ++v) f(mesh.nodes[v], out.segment(v * nc, nc));
  return out;
}

struct DirichletResult {
  Vector field;  // full nodal field including boundary values
  Real relative_residual = 0.0;
};

/// Solves K u = M f on free DoFs with u = g on the boundary. `load` and
/// `boundary` are full nodal vectors (only boundary entries of `boundary` are read).
inline DirichletResult solve_dirichlet(const DiscreteSystem& s, const Vector& load, const Vector& boundary,
                                       const SpdSolver* factor = nullptr, Real tolerance = 1e-10) {
  const Vector g = s.restrict_dirichlet(boundary);
  const Vector rhs = s.restrict_free(s.mass * load) - s.k_fd * g;
  DirichletResult r;
  Vector uf = Vector::Zero(s.num_free());
  if (rhs.norm() > 0 && s.num_free() > 0) {
    SpdSolver local;
    if (!factor) {
      local.compute(s.k_ff);
      factor = &local;
    }
    uf = factor->solve(rhs);
    r.relative_residual = (s.k_ff * uf - rhs).norm() / rhs.norm();
    if (r.relative_residual > tolerance)
      throw Error("fem", ErrorCode::SolverFailure, cat("Dirichlet solve residual ", r.relative_residual));
  }
  r.field = s.extend(uf, &g);
  return r;
}

}  // namespace homog
