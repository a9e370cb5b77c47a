#pragma once

#include "homog/fem/export.hpp"
#include "homog/fem/norms.hpp"

#include <Eigen/Eigenvalues>

#include <random>

namespace homog {

struct EigenOptions {
  int block_size = 4;
  Real tolerance = 1e-8;   // ‖Kv − λMv‖ ≤ tol·λ·‖v‖_M
  int dense_limit = 2000;  // dense generalized solve below this many free DoFs
  int max_dimension = 0;   // Krylov basis cap; 0 = automatic
  unsigned seed = 12345;
};

/// Lowest generalized eigenpairs of (K, M) on the free DoFs, ascending, M-orthonormal.
struct Eigenpairs {
  Vector values;
  Matrix vectors;  // free DoFs × count
  Vector residuals;  // ‖Kv − λMv‖ / (λ‖v‖_M)
  bool dense = false;
  int krylov_dimension = 0;

  int count() const { return static_cast<int>(values.size()); }
};

namespace spectral {

/// M-orthonormalize the columns of w (two passes of Gram–Schmidt against q, then
/// a symmetric eigen-based orthonormalization); directions that collapse are dropped.
inline Matrix m_orthonormalize(const SpMat& m, const Matrix& q, Matrix w, Real drop = 1e-10) {
  for (int pass = 0; pass < 2 && q.cols() > 0; ++pass) w -= q * (q.transpose() * (m * w));
  const Matrix mw = m * w;
  Matrix g = w.transpose() * mw;
  g = 0.5 * (g + g.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(g);
  const Real top = es.eigenvalues().size() ? es.eigenvalues().maxCoeff() : 0.0;
  std::vector<int> keep;
  for (int k = 0; k < es.eigenvalues().size(); ++k)
    if (es.eigenvalues()[k] > drop * std::max(top, 1e-300)) keep.push_back(k);
  Matrix out(w.rows(), static_cast<int>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k)
    out.col(static_cast<int>(k)) = w * es.eigenvectors().col(keep[k]) / std::sqrt(es.eigenvalues()[keep[k]]);
  // one more pass for numerical orthogonality against q
  if (q.cols() > 0) out -= q * (q.transpose() * (m * out));
  const Matrix g2 = out.transpose() * (m * out);
  Eigen::LLT<Matrix> llt(0.5 * (g2 + g2.transpose()));
  if (llt.info() == Eigen::Success) out = llt.matrixU().solve(out.transpose()).transpose();
  return out;
}

inline Vector residual_norms(const SpMat& k, const SpMat& m, const Vector& lambda, const Matrix& v) {
  Vector r(lambda.size());
  const Matrix kv = k * v, mv = m * v;
  for (int j = 0; j < lambda.size(); ++j) {
    const Real vm = std::sqrt(std::max(v.col(j).dot(mv.col(j)), 1e-300));
    r[j] = (kv.col(j) - lambda[j] * mv.col(j)).norm() / (std::abs(lambda[j]) * vm);
  }
  return r;
}

}  // namespace spectral

inline Eigenpairs solve_eigenpairs(const SpMat& k, const SpMat& m, int count, const EigenOptions& opt = {},
                                   const SpdSolver* factor = nullptr) {
  const int n = static_cast<int>(k.rows());
  if (count < 1 || count > 50) throw Error("spectral", ErrorCode::InvalidArgument, cat("count must be in [1,50], got ", count));
  if (count > n) throw Error("spectral", ErrorCode::InvalidArgument, cat("count ", count, " exceeds ", n, " free DoFs"));
  Eigenpairs out;
  if (n <= opt.dense_limit) {
    const Matrix kd(k), md(m);
    Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(kd, md);
    if (es.info() != Eigen::Success) throw Error("spectral", ErrorCode::ConvergenceFailure, "dense generalized eigensolve failed");
    out.values = es.eigenvalues().head(count);
    out.vectors = es.eigenvectors().leftCols(count);
    out.dense = true;
    if (out.values.minCoeff() <= 0)
      throw Error("spectral", ErrorCode::NonPositiveEigenvalue, "stiffness is not positive definite on free DoFs");
    out.residuals = spectral::residual_norms(k, m, out.values, out.vectors);
    return out;
  }
  SpdSolver local;
  if (!factor) {
    local.compute(k);
    factor = &local;
  }
  const int b = std::max(1, opt.block_size);
  const int cap = opt.max_dimension > 0 ? std::min(opt.max_dimension, n) : std::min(n, std::max(20 * count, 400));
  std::mt19937 rng(opt.seed);
  std::normal_distribution<Real> nd;
  auto random_block = [&](int cols) {
    Matrix r(n, cols);
    for (int c = 0; c < cols; ++c)
      for (int i = 0; i < n; ++i) r(i, c) = nd(rng);
    return r;
  };
  Matrix q = spectral::m_orthonormalize(m, Matrix(n, 0), random_block(b));
  Matrix z(n, 0);  // K⁻¹ M q, column by column
  Matrix block = q;
  int next_check = std::max(2 * count + 2 * b, count + 20);
  while (true) {
    const Matrix zb = factor->solve(m * block);
    z.conservativeResize(n, z.cols() + zb.cols());
    z.rightCols(zb.cols()) = zb;
    const int dim = static_cast<int>(q.cols());
    if (dim >= next_check || dim >= cap) {
      Matrix h = q.transpose() * (m * z);
      h = 0.5 * (h + h.transpose());
      Eigen::SelfAdjointEigenSolver<Matrix> es(h);
      // largest θ = 1/λ are the lowest eigenvalues
      const int take = std::min(count, dim);
      Vector lam(take);
      Matrix vec(n, take);
      for (int j = 0; j < take; ++j) {
        const int idx = dim - 1 - j;
        lam[j] = 1.0 / es.eigenvalues()[idx];
        vec.col(j) = q * es.eigenvectors().col(idx);
      }
      const Vector res = spectral::residual_norms(k, m, lam, vec);
      out.krylov_dimension = dim;
      if (take == count && (res.array() <= opt.tolerance).all()) {
        out.values = lam;
        out.vectors = vec;
        out.residuals = res;
        break;
      }
      if (dim >= cap) {
        std::string bad;
        for (int j = 0; j < take; ++j)
          if (!(res[j] <= opt.tolerance)) bad += cat(bad.empty() ? "" : ", ", j, " (residual ", res[j], ")");
        throw Error("spectral", ErrorCode::ConvergenceFailure,
                    cat("eigenpairs not converged at Krylov dimension ", dim, ": ", bad));
      }
      next_check = std::min(cap, dim + std::max(2 * b, dim / 4));
    }
    Matrix nb = spectral::m_orthonormalize(m, q, zb);
    if (nb.cols() == 0) nb = spectral::m_orthonormalize(m, q, random_block(b));  // invariant subspace found
    if (nb.cols() == 0) throw Error("spectral", ErrorCode::ConvergenceFailure, "Krylov space exhausted");
    if (q.cols() + nb.cols() > cap) nb = nb.leftCols(cap - q.cols());
    q.conservativeResize(n, q.cols() + nb.cols());
    q.rightCols(nb.cols()) = nb;
    block = nb;
  }
  if (out.values.minCoeff() <= 0)
    throw Error("spectral", ErrorCode::NonPositiveEigenvalue, "non-positive eigenvalue encountered");
  // re-orthonormalize the Ritz basis in M (clusters may come out slightly skewed)
  const Matrix g = out.vectors.transpose() * (m * out.vectors);
  out.vectors = out.vectors * Eigen::LLT<Matrix>(0.5 * (g + g.transpose())).matrixU().solve(Matrix::Identity(count, count));
  return out;
}

inline Eigenpairs solve_eigenpairs(const DiscreteSystem& s, int count, const EigenOptions& opt = {},
                                   const SpdSolver* factor = nullptr) {
  return solve_eigenpairs(s.k_ff, s.m_ff, count, opt, factor);
}

/// Index range [first, first + size) of a cluster.
struct ClusterRange {
  int first = 0;
  int size = 1;
  friend bool operator==(const ClusterRange&, const ClusterRange&) = default;
};

/// Maximal runs whose consecutive relative gaps are ≤ tol.
inline std::vector<ClusterRange> cluster_eigenvalues(const Vector& values, Real tol = 1e-6) {
  std::vector<ClusterRange> out;
  for (int i = 0; i < values.size(); ++i) {
    if (i > 0 && (values[i] - values[i - 1]) <= tol * std::abs(values[i - 1])) {
      ++out.back().size;
    } else {
      out.push_back({i, 1});
    }
  }
  return out;
}

inline Real harmonic_mean_cluster(const Vector& values) {
  if (values.size() == 0) throw Error("spectral", ErrorCode::InvalidArgument, "empty cluster");
  Real s = 0;
  for (int i = 0; i < values.size(); ++i) {
    if (!(values[i] > 0)) throw Error("spectral", ErrorCode::NonPositiveEigenvalue, cat("eigenvalue ", values[i]));
    s += 1.0 / values[i];
  }
  return values.size() / s;
}

struct EigenCluster {
  Vector values;
  Matrix vectors;  // free DoFs × m
  int first = 0;
  Real cluster_tol = 1e-6;

  int multiplicity() const { return static_cast<int>(values.size()); }
  Real spread() const { return values.size() ? (values.maxCoeff() - values.minCoeff()) / values.minCoeff() : 0.0; }
  Real harmonic_mean() const { return harmonic_mean_cluster(values); }
};

/// The cluster containing mode index k; solves enough pairs to see its upper edge.
inline EigenCluster cluster_containing(const Eigenpairs& ep, int k, Real tol = 1e-6) {
  for (const auto& r : cluster_eigenvalues(ep.values, tol))
    if (k >= r.first && k < r.first + r.size) {
      if (r.first + r.size == ep.count())
        throw Error("spectral", ErrorCode::ClusterMismatch,
                    cat("cluster of mode ", k, " reaches the last computed eigenvalue; request more pairs"));
      EigenCluster c;
      c.values = ep.values.segment(r.first, r.size);
      c.vectors = ep.vectors.middleCols(r.first, r.size);
      c.first = r.first;
      c.cluster_tol = tol;
      return c;
    }
  throw Error("spectral", ErrorCode::ClusterMismatch, cat("mode ", k, " not among ", ep.count(), " eigenpairs"));
}

/// CSV `epsilon,k,lambda,residual`.
inline void write_spectrum_csv(const std::string& path, const std::vector<std::pair<Real, Eigenpairs>>& rows) {
  auto out = io::open_output(path);
  out << "epsilon,k,lambda,residual\n";
  for (const auto& [eps, ep] : rows)
    for (int j = 0; j < ep.count(); ++j) out << eps << ',' << j << ',' << ep.values[j] << ',' << ep.residuals[j] << '\n';
}

}  // namespace homog
