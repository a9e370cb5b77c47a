#pragma once

#include "homog/microstructure/grid_field.hpp"
#include "homog/microstructure/periodic_tensor.hpp"
#include "homog/microstructure/spectral_ops.hpp"

#include <array>
#include <optional>

namespace homog {

struct CellSolverOptions {
  int resolution = 64;  // power of two
  Real tolerance = 1e-10;
  int max_iterations = -1;  // default 10·n²
};

struct SolveStats {
  int iterations = 0;
  Real relative_residual = 0.0;
};

/// Correctors and derived periodic potentials of one tensor at one resolution.
/// Index maps: chi[γ], stream[γ], b[α]; gamma2/b_matrix_field use 2α+β.
struct CellCorrectors {
  int resolution = 0;
  int n_components = 1;
  std::array<GridField, 2> chi;
  std::array<GridField, 4> second;  // Γ^{αβ}
  std::array<GridField, 4> b_field;  // B^{αβ}
  std::array<GridField, 2> b;       // b^α with Δb^α = χ^α
  std::array<GridField, 2> stream;  // Ψ^γ
  BlockTensor homogenized;
  std::array<SolveStats, 2> chi_stats{};

  bool has_second() const { return !second[0].empty(); }
};

/// Pseudo-spectral Galerkin discretization of −∇_y·A(y)∇_y on the torus,
/// solved by conjugate gradients with a Fourier-diagonal preconditioner and
/// projection of the constant mode.
class CellProblem {
 public:
  CellProblem(const PeriodicTensor& a, CellSolverOptions opt = {})
      : a_(a), opt_(opt), n_(opt.resolution), nc_(a.n_components()), fft_(opt.resolution) {
    if (n_ < 4 || (n_ & (n_ - 1)) != 0)
      throw Error("microstructure", ErrorCode::InvalidArgument, cat("cell resolution must be a power of two, got ", n_));
    if (opt_.max_iterations < 0) opt_.max_iterations = 10 * n_ * n_;
    const int m = n_ * n_;
    samples_.resize(m);
    Matrix mean = Matrix::Zero(2 * nc_, 2 * nc_);
    for (int p = 0; p < m; ++p) {
      samples_[p].resize(2 * nc_, 2 * nc_);
      a_.eval(point(p), samples_[p]);
      mean += samples_[p];
    }
    mean_ = BlockTensor(nc_, mean / m);
    build_preconditioner();
  }

  int resolution() const noexcept { return n_; }
  int n_components() const noexcept { return nc_; }
  const PeriodicTensor& tensor() const noexcept { return a_; }
  const spectral_ops::Fft2& fft() const noexcept { return fft_; }
  Vec2 point(int p) const { return Vec2(Real(p / n_) / n_, Real(p % n_) / n_); }
  const Matrix& sample(int p) const { return samples_[p]; }

  /// −∇·A∇u for an N×n² field.
  Matrix apply(const Matrix& u) const {
    const int m = n_ * n_;
    Matrix g0(nc_, m), g1(nc_, m);
    for (int c = 0; c < nc_; ++c) {
      Vector row = u.row(c).transpose();
      g0.row(c) = spectral_ops::derivative(fft_, row, 0).transpose();
      g1.row(c) = spectral_ops::derivative(fft_, row, 1).transpose();
    }
    Matrix q0(nc_, m), q1(nc_, m);
    Vector g(2 * nc_), q(2 * nc_);
    for (int p = 0; p < m; ++p) {
      g << g0.col(p), g1.col(p);
      q.noalias() = samples_[p] * g;
      q0.col(p) = q.head(nc_);
      q1.col(p) = q.tail(nc_);
    }
    return -(divergence(q0, q1));
  }

  /// ∂₁q⁰ + ∂₂q¹ rowwise.
  Matrix divergence(const Matrix& q0, const Matrix& q1) const {
    const int m = n_ * n_;
    Matrix out(q0.rows(), m);
    Eigen::VectorXcd c0, c1;
    for (int r = 0; r < q0.rows(); ++r) {
      Vector r0 = q0.row(r).transpose(), r1 = q1.row(r).transpose();
      fft_.forward(r0, c0);
      fft_.forward(r1, c1);
      for (int k1 = 0; k1 < n_; ++k1)
        for (int k2 = 0; k2 < n_; ++k2) {
          const int p = k1 * n_ + k2;
          c0[p] = spectral_ops::Complex(0, fft_.wavenumber(k1)) * c0[p] +
                  spectral_ops::Complex(0, fft_.wavenumber(k2)) * c1[p];
        }
      Vector o(m);
      fft_.backward(c0, o);
      out.row(r) = o.transpose();
    }
    return out;
  }

  /// Drop the mean and the Nyquist lines, which the discrete operator cannot reach.
  Matrix project_range(const Matrix& f) const {
    const int m = n_ * n_;
    Matrix out(f.rows(), m);
    Eigen::VectorXcd c;
    for (int r = 0; r < f.rows(); ++r) {
      Vector row = f.row(r).transpose();
      fft_.forward(row, c);
      for (int k1 = 0; k1 < n_; ++k1)
        for (int k2 = 0; k2 < n_; ++k2)
          if ((k1 == 0 && k2 == 0) || 2 * k1 == n_ || 2 * k2 == n_) c[k1 * n_ + k2] = 0.0;
      Vector o(m);
      fft_.backward(c, o);
      out.row(r) = o.transpose();
    }
    return out;
  }

  /// Solve −∇·A∇u = f − ⟨f⟩ with ⟨u⟩ = 0 for an N×n² right side.
  Matrix solve(const Matrix& f, SolveStats* stats = nullptr) const {
    const int m = n_ * n_;
    const Matrix rhs = project_range(f);
    const Real bnorm = rhs.norm();
    Matrix x = Matrix::Zero(nc_, m);
    SolveStats st;
    if (bnorm == 0.0) {
      if (stats) *stats = st;
      return x;
    }
    Matrix r = rhs;
    Matrix z = precondition(r);
    Matrix p = z;
    Real rz = (r.array() * z.array()).sum();
    Real rel = 1.0;
    for (int it = 1; it <= opt_.max_iterations; ++it) {
      Matrix ap = apply(p);
      const Real pap = (p.array() * ap.array()).sum();
      const Real alpha = rz / pap;
      x += alpha * p;
      r -= alpha * ap;
      rel = r.norm() / bnorm;
      st.iterations = it;
      if (rel <= opt_.tolerance) break;
      z = precondition(r);
      const Real rz_new = (r.array() * z.array()).sum();
      p = z + (rz_new / rz) * p;
      rz = rz_new;
    }
    // Report the true residual, not the recursive one.
    rel = (rhs - apply(x)).norm() / bnorm;
    st.relative_residual = rel;
    if (stats) *stats = st;
    if (rel > 10 * opt_.tolerance)
      throw Error("microstructure", ErrorCode::NonConvergence,
                  cat("CG stopped after ", st.iterations, " iterations with relative residual ", rel));
    for (int c = 0; c < nc_; ++c) x.row(c).array() -= x.row(c).mean();
    return x;
  }

  /// Solve column by column for a matrix-valued right side.
  GridField solve_field(const GridField& f, SolveStats* stats = nullptr) const {
    if (f.n() != n_ || f.rows() != nc_)
      throw Error("microstructure", ErrorCode::ResolutionMismatch, "right side does not match the cell grid");
    GridField u(n_, nc_, f.cols());
    SolveStats worst;
    for (int j = 0; j < f.cols(); ++j) {
      SolveStats st;
      u.data().middleRows(j * nc_, nc_) = solve(f.data().middleRows(j * nc_, nc_), &st);
      worst.iterations = std::max(worst.iterations, st.iterations);
      worst.relative_residual = std::max(worst.relative_residual, st.relative_residual);
    }
    if (stats) *stats = worst;
    return u;
  }

  /// Pointwise block A^{αβ} as an N×N grid field.
  GridField block_field(int alpha, int beta) const {
    GridField f(n_, nc_, nc_);
    for (int p = 0; p < n_ * n_; ++p) f.set(p, samples_[p].block(alpha * nc_, beta * nc_, nc_, nc_));
    return f;
  }

  /// Spectral derivative of every entry of a grid field.
  GridField derivative(const GridField& f, int alpha) const {
    GridField d(f.n(), f.rows(), f.cols(), f.interpolation());
    d.data() = spectral_ops::derivative_rows(fft_, f.data(), alpha);
    return d;
  }

  /// Pointwise product of matrix fields (or of the tensor block with a field).
  static GridField multiply(const GridField& a, const GridField& b) {
    GridField out(a.n(), a.rows(), b.cols(), b.interpolation());
    for (int p = 0; p < a.points(); ++p) out.set(p, a.at(p) * b.at(p));
    return out;
  }

  const BlockTensor& mean_tensor() const noexcept { return mean_; }

 private:
  Matrix precondition(const Matrix& r) const {
    const int m = n_ * n_;
    std::vector<Eigen::VectorXcd> c(nc_);
    for (int k = 0; k < nc_; ++k) {
      Vector row = r.row(k).transpose();
      fft_.forward(row, c[k]);
    }
    Eigen::VectorXcd v(nc_);
    for (int p = 0; p < m; ++p) {
      for (int k = 0; k < nc_; ++k) v[k] = c[k][p];
      v = inverse_symbol_[p].cast<spectral_ops::Complex>() * v;
      for (int k = 0; k < nc_; ++k) c[k][p] = v[k];
    }
    Matrix z(nc_, m);
    for (int k = 0; k < nc_; ++k) {
      Vector o(m);
      fft_.backward(c[k], o);
      z.row(k) = o.transpose();
    }
    return z;
  }

  void build_preconditioner() {
    const int m = n_ * n_;
    inverse_symbol_.assign(m, Matrix::Zero(nc_, nc_));
    for (int k1 = 0; k1 < n_; ++k1)
      for (int k2 = 0; k2 < n_; ++k2) {
        const Real xi[2] = {fft_.wavenumber(k1), fft_.wavenumber(k2)};
        if (xi[0] == 0.0 && xi[1] == 0.0) continue;
        Matrix s = Matrix::Zero(nc_, nc_);
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b) s += xi[a] * xi[b] * mean_.block(a, b);
        inverse_symbol_[k1 * n_ + k2] = s.inverse();
      }
  }

  PeriodicTensor a_;
  CellSolverOptions opt_;
  int n_;
  int nc_;
  spectral_ops::Fft2 fft_;
  std::vector<Matrix> samples_;
  BlockTensor mean_;
  std::vector<Matrix> inverse_symbol_;
};

/// χ^γ solving −∇·A∇χ^γ = ∂_{y_α}A^{αγ} with zero mean.
inline GridField solve_cell_corrector(const CellProblem& cp, int gamma, SolveStats* stats = nullptr) {
  const int nc = cp.n_components();
  if (cp.tensor().is_constant()) {
    if (stats) *stats = {};
    return GridField(cp.resolution(), nc, nc);
  }
  GridField rhs(cp.resolution(), nc, nc);
  for (int alpha = 0; alpha < 2; ++alpha) rhs.data() += cp.derivative(cp.block_field(alpha, gamma), alpha).data();
  return cp.solve_field(rhs, stats);
}

/// A^{0,αβ} = ∫A^{αβ} + ∫A^{αγ}∂_γχ^β with the solver's own quadrature.
inline BlockTensor homogenized_tensor(const CellProblem& cp, const std::array<GridField, 2>& chi) {
  const int nc = cp.n_components();
  for (const auto& c : chi)
    if (c.n() != cp.resolution() || c.rows() != nc)
      throw Error("microstructure", ErrorCode::ResolutionMismatch,
                  cat("corrector resolution ", c.n(), " vs cell grid ", cp.resolution()));
  BlockTensor a0(nc);
  const std::array<GridField, 2> dchi0{cp.derivative(chi[0], 0), cp.derivative(chi[0], 1)};
  const std::array<GridField, 2> dchi1{cp.derivative(chi[1], 0), cp.derivative(chi[1], 1)};
  const std::array<const std::array<GridField, 2>*, 2> dchi{&dchi0, &dchi1};
  const int m = cp.resolution() * cp.resolution();
  for (int alpha = 0; alpha < 2; ++alpha)
    for (int beta = 0; beta < 2; ++beta) {
      Matrix acc = Matrix::Zero(nc, nc);
      for (int p = 0; p < m; ++p) {
        const Matrix& s = cp.sample(p);
        acc += s.block(alpha * nc, beta * nc, nc, nc);
        for (int g = 0; g < 2; ++g) acc += s.block(alpha * nc, g * nc, nc, nc) * (*dchi[beta])[g].at(p);
      }
      a0.block(alpha, beta) = acc / m;
    }
  return a0;
}

/// B^{αβ} = A^{αβ} + A^{αγ}∂_γχ^β + ∂_γ(A^{γα}χ^β), and Γ^{αβ} solving
/// −∇·A∇Γ^{αβ} = B^{αβ} − ∫B^{αβ} with zero mean.
inline std::pair<std::array<GridField, 4>, std::array<GridField, 4>> solve_second_corrector(
    const CellProblem& cp, const std::array<GridField, 2>& chi) {
  const int nc = cp.n_components();
  std::array<GridField, 4> bf, gam;
  for (int alpha = 0; alpha < 2; ++alpha)
    for (int beta = 0; beta < 2; ++beta) {
      GridField b = cp.block_field(alpha, beta);
      for (int g = 0; g < 2; ++g) {
        b.data() += CellProblem::multiply(cp.block_field(alpha, g), cp.derivative(chi[beta], g)).data();
        b.data() += cp.derivative(CellProblem::multiply(cp.block_field(g, alpha), chi[beta]), g).data();
      }
      bf[2 * alpha + beta] = b;
      if (cp.tensor().is_constant()) {
        gam[2 * alpha + beta] = GridField(cp.resolution(), nc, nc);
      } else {
        b.data().colwise() -= b.data().rowwise().mean();
        gam[2 * alpha + beta] = cp.solve_field(b);
      }
    }
  return {bf, gam};
}

struct StreamOptions {
  Real divergence_tol = 1e-8;  // relative to the field's spectral gradient scale
  Real mean_tol = 1e-10;
};

/// ψ with ∇⊥ψ = (−∂₂ψ, ∂₁ψ) = v for a zero-mean divergence-free periodic field.
inline GridField stream_potential(const spectral_ops::Fft2& fft, const GridField& v1, const GridField& v2,
                                  const StreamOptions& opt = {}) {
  const int n = fft.n();
  if (v1.n() != n || v2.n() != n)
    throw Error("microstructure", ErrorCode::ResolutionMismatch, "field resolution differs from FFT grid");
  const Real scale = std::max({v1.max_abs(), v2.max_abs(), 1e-300});
  const Real mean = std::max(v1.mean().cwiseAbs().maxCoeff(), v2.mean().cwiseAbs().maxCoeff());
  if (mean > opt.mean_tol * std::max(scale, 1.0))
    throw Error("microstructure", ErrorCode::NonZeroMean, cat("field mean ", mean));
  Matrix div = spectral_ops::derivative_rows(fft, v1.data(), 0) + spectral_ops::derivative_rows(fft, v2.data(), 1);
  const Real dmax = div.size() ? div.cwiseAbs().maxCoeff() : 0.0;
  if (dmax > opt.divergence_tol * std::max(1.0, scale))
    throw Error("microstructure", ErrorCode::NotDivergenceFree, cat("max |div v| = ", dmax));
  GridField psi(n, v1.rows(), v1.cols(), v1.interpolation());
  Eigen::VectorXcd c1, c2;
  for (int r = 0; r < v1.data().rows(); ++r) {
    Vector r1 = v1.data().row(r).transpose(), r2 = v2.data().row(r).transpose();
    fft.forward(r1, c1);
    fft.forward(r2, c2);
    for (int k1 = 0; k1 < n; ++k1)
      for (int k2 = 0; k2 < n; ++k2) {
        const int p = k1 * n + k2;
        const Real x1 = fft.wavenumber(k1), x2 = fft.wavenumber(k2);
        const Real s = x1 * x1 + x2 * x2;
        // Δψ = ∂₁v₂ − ∂₂v₁
        c1[p] = s == 0.0 ? spectral_ops::Complex(0)
                         : -(spectral_ops::Complex(0, x1) * c2[p] - spectral_ops::Complex(0, x2) * c1[p]) / s;
      }
    Vector o(n * n);
    fft.backward(c1, o);
    psi.data().row(r) = o.transpose();
  }
  return psi;
}

/// b with Δ_y b = χ, zero mean.
inline GridField chi_potential(const spectral_ops::Fft2& fft, const GridField& chi, Real mean_tol = 1e-10) {
  const int n = fft.n();
  const Real mean = chi.mean().cwiseAbs().maxCoeff();
  if (mean > mean_tol * std::max(1.0, chi.max_abs()))
    throw Error("microstructure", ErrorCode::NonZeroMean, cat("chi mean ", mean));
  GridField b(n, chi.rows(), chi.cols(), chi.interpolation());
  Eigen::VectorXcd c;
  for (int r = 0; r < chi.data().rows(); ++r) {
    Vector row = chi.data().row(r).transpose();
    fft.forward(row, c);
    for (int k1 = 0; k1 < n; ++k1)
      for (int k2 = 0; k2 < n; ++k2) {
        const Real x1 = fft.wavenumber(k1), x2 = fft.wavenumber(k2);
        const Real s = x1 * x1 + x2 * x2;
        c[k1 * n + k2] = s == 0.0 ? spectral_ops::Complex(0) : -c[k1 * n + k2] / s;
      }
    Vector o(n * n);
    fft.backward(c, o);
    b.data().row(r) = o.transpose();
  }
  return b;
}

/// Spectral Laplacian, used to check b-potential residuals.
inline GridField laplacian(const spectral_ops::Fft2& fft, const GridField& f) {
  GridField out(f.n(), f.rows(), f.cols(), f.interpolation());
  Matrix d0 = spectral_ops::derivative_rows(fft, f.data(), 0);
  Matrix d1 = spectral_ops::derivative_rows(fft, f.data(), 1);
  out.data() = spectral_ops::derivative_rows(fft, d0, 0) + spectral_ops::derivative_rows(fft, d1, 1);
  return out;
}

/// The divergence-free field A^{αβ}∂_βχ^γ + A^{αγ} − A^{0,αγ}, returned as (α=1, α=2).
inline std::array<GridField, 2> corrector_flux(const CellProblem& cp, const std::array<GridField, 2>& chi,
                                               const BlockTensor& a0, int gamma) {
  const int nc = cp.n_components();
  std::array<GridField, 2> v;
  for (int alpha = 0; alpha < 2; ++alpha) {
    GridField f = cp.block_field(alpha, gamma);
    for (int b = 0; b < 2; ++b)
      f.data() += CellProblem::multiply(cp.block_field(alpha, b), cp.derivative(chi[gamma], b)).data();
    const Matrix a0blk = a0.block(alpha, gamma);
    f.data().colwise() -= Eigen::Map<const Vector>(a0blk.data(), nc * nc);
    v[alpha] = f;
  }
  return v;
}

struct CorrectorSelection {
  bool second = true;
  bool stream = true;
  bool potentials = true;
};

/// Full set of correctors for one tensor.
inline CellCorrectors compute_cell_correctors(const PeriodicTensor& a, const CellSolverOptions& opt = {},
                                              const CorrectorSelection& sel = {}) {
  CellProblem cp(a, opt);
  CellCorrectors cc;
  cc.resolution = cp.resolution();
  cc.n_components = cp.n_components();
  for (int g = 0; g < 2; ++g) cc.chi[g] = solve_cell_corrector(cp, g, &cc.chi_stats[g]);
  cc.homogenized = homogenized_tensor(cp, cc.chi);
  if (sel.second) std::tie(cc.b_field, cc.second) = solve_second_corrector(cp, cc.chi);
  if (sel.potentials)
    for (int alpha = 0; alpha < 2; ++alpha) cc.b[alpha] = chi_potential(cp.fft(), cc.chi[alpha]);
  if (sel.stream)
    for (int g = 0; g < 2; ++g) {
      auto v = corrector_flux(cp, cc.chi, cc.homogenized, g);
      StreamOptions so;
      so.divergence_tol = 1e-6;
      so.mean_tol = 1e-8;
      cc.stream[g] = stream_potential(cp.fft(), v[0], v[1], so);
    }
  return cc;
}

}  // namespace homog
