#pragma once

#include "homog/boundary_layer/tails.hpp"
#include "homog/expansion/report.hpp"
#include "homog/fem/cell_fem.hpp"
#include "homog/spectral/eigen.hpp"

namespace homog {

/// Oscillating tensor, domain and the lattice-consistent homogenized data for mesh size h = ε/n_c.
struct ExpansionProblem {
  PeriodicTensor a;
  PolygonDomain domain;
  int cells_per_period = 4;
  CellCorrectors lattice;  // χ_h and A⁰_h of the P1 lattice cell problem

  static ExpansionProblem make(PeriodicTensor a, PolygonDomain d, int cells_per_period = 4, int quadrature_cap = 6) {
    ExpansionProblem p{std::move(a), std::move(d), cells_per_period, {}};
    LatticeCellOptions lo;
    lo.cells_per_period = cells_per_period;
    lo.quadrature_cap = quadrature_cap;
    p.lattice = lattice_cell_correctors(p.a, lo);
    return p;
  }

  Real mesh_size(Real eps) const { return eps / cells_per_period; }

  /// Strip options whose grid coincides with the ε-scaled mesh lattice.
  StripOptions strip_options(StripOptions base = {}) const {
    base.points_per_period = cells_per_period;
    base.min_points_per_period = cells_per_period;
    return base;
  }
};

struct EigenExpansionOptions {
  int mode = 0;
  int extra_modes = 3;  // pairs solved beyond the cluster to see its upper edge
  Real cluster_tol = 1e-6;
  EigenOptions eigen;
  TailSetOptions tails;
  int quadrature_cap = 6;
};

/// Osborn comparison of T^ε and T⁰ on one eigencluster.
struct OsbornRecord {
  Real lhs = 0.0;
  Real rhs_norm = 0.0;  // ‖(T^ε − T⁰)|_E‖ in L²
  Real ratio = 0.0;     // lhs / rhs_norm²
};

struct EigenExpansionRow {
  Real eps = 0.0;
  Real h = 0.0;
  Real lambda0 = 0.0;
  Vector lambda_eps;
  Real harmonic_mean = 0.0;
  Vector corrections;  // c_j = ∫ ϑ*_j · v_j
  Real correction_sum = 0.0;
  Real first_order = 0.0;
  Real zeroth_residual = 0.0;
  Real first_residual = 0.0;
  OsbornRecord osborn;
};

struct EigenExpansionResult {
  int mode = 0;
  int multiplicity = 0;
  std::vector<EigenExpansionRow> rows;
};

namespace expansion {

/// Full nodal fields of an M-orthonormal free-DoF basis.
inline Matrix extend_columns(const DiscreteSystem& s, const Matrix& free) {
  Matrix out(s.num_dofs(), free.cols());
  for (int j = 0; j < free.cols(); ++j) out.col(j) = s.extend(free.col(j));
  return out;
}

/// λ⁰ − ε·(λ⁰/m)·Σc_j. The layer ϑ*_j carries data −V*∂v_j, the limit of the
/// oscillating layer correcting the trace of εχ∂v_j; with that data the
/// cluster moves opposite to Σc_j.
inline Real first_order_prediction(Real lambda0, Real eps, const Vector& corrections) {
  return lambda0 - eps * lambda0 * corrections.mean();
}

}  // namespace expansion

/// c_j = ∫ ϑ*_j · v_j with ϑ*_j the homogenized boundary layer of v_j (full nodal columns).
inline Vector first_order_eigen_correction(const DiscreteSystem& s0, const BoundaryLayerTailSet& tails, const Matrix& vectors,
                                           const SpdSolver* factor = nullptr) {
  const auto& mesh = *s0.mesh;
  for (int k = 0; k < static_cast<int>(mesh.node_edges.size()); ++k)
    for (int e : mesh.node_edges[k])
      if (e >= 0) tails.at(e);
  Vector c(vectors.cols());
  for (int j = 0; j < vectors.cols(); ++j) {
    const Vector v = vectors.col(j);
    const auto theta = solve_homogenized_bl(s0, tails, recover_gradient(mesh, v, s0.n_components), factor);
    c[j] = theta.field.dot(s0.mass * v);
  }
  return c;
}

/// lhs = |1/λ⁰ − mean 1/λ^ε − mean ⟨(T⁰ − T^ε)v_j, v_j⟩| against ‖(T^ε − T⁰)|_E‖².
/// `vectors` is an M-orthonormal basis of the homogenized cluster on the free DoFs.
inline OsbornRecord osborn_check(const DiscreteSystem& s_eps, const DiscreteSystem& s0, Real lambda0, const Vector& lambda_eps,
                                 const Matrix& vectors, const SpdSolver* eps_factor = nullptr,
                                 const SpdSolver* zero_factor = nullptr) {
  if (vectors.cols() == 0 || lambda_eps.size() != vectors.cols())
    throw Error("expansion", ErrorCode::ClusterMismatch,
                cat("cluster sizes differ: ", lambda_eps.size(), " values, ", vectors.cols(), " vectors"));
  SpdSolver le, l0;
  if (!eps_factor) {
    le.compute(s_eps.k_ff);
    eps_factor = &le;
  }
  if (!zero_factor) {
    l0.compute(s0.k_ff);
    zero_factor = &l0;
  }
  const Matrix mv = s0.m_ff * vectors;
  const Matrix diff = zero_factor->solve(mv) - eps_factor->solve(mv);  // (T⁰ − T^ε)V
  const int m = static_cast<int>(vectors.cols());
  Real inner = 0, inv = 0;
  for (int j = 0; j < m; ++j) {
    inner += diff.col(j).dot(mv.col(j));
    inv += 1.0 / lambda_eps[j];
  }
  OsbornRecord r;
  r.lhs = std::abs(1.0 / lambda0 - inv / m - inner / m);
  const Matrix gram = diff.transpose() * (s0.m_ff * diff);
  r.rhs_norm = std::sqrt(std::max(0.0, Eigen::SelfAdjointEigenSolver<Matrix>(gram).eigenvalues().maxCoeff()));
  r.ratio = r.rhs_norm > 0 ? r.lhs / (r.rhs_norm * r.rhs_norm) : 0.0;
  return r;
}

/// One ε row: both spectra on the ε/n_c mesh, tails at this ε, corrections and the Osborn record.
inline EigenExpansionRow eigen_expansion_row(const ExpansionProblem& p, Real eps, const EigenExpansionOptions& opt = {},
                                             const Matrix* rotation = nullptr) {
  EigenExpansionRow row;
  row.eps = eps;
  auto mesh = std::make_shared<const Mesh>(triangulate(p.domain, p.mesh_size(eps)));
  row.h = mesh->h;
  AssemblyOptions ao;
  ao.quadrature_cap = opt.quadrature_cap;
  const auto s_eps = assemble_oscillating(mesh, p.a, eps, ao);
  const auto s0 = assemble_constant(mesh, p.lattice.homogenized);
  const SpdSolver f_eps(s_eps.k_ff), f0(s0.k_ff);

  const int count = opt.mode + 1 + opt.extra_modes;
  auto ep0 = solve_eigenpairs(s0, std::min(count, s0.num_free()), opt.eigen, &f0);
  EigenCluster cl;
  for (;;) {
    try {
      cl = cluster_containing(ep0, opt.mode, opt.cluster_tol);
      break;
    } catch (const Error& e) {
      // the cluster may extend past the requested pairs; widen once it touches the end
      if (e.code() != ErrorCode::ClusterMismatch || ep0.count() <= opt.mode || ep0.count() + 4 > std::min(50, s0.num_free())) throw;
      ep0 = solve_eigenpairs(s0, ep0.count() + 4, opt.eigen, &f0);
    }
  }
  const int m = cl.multiplicity();
  const auto epe = solve_eigenpairs(s_eps, cl.first + m, opt.eigen, &f_eps);
  row.lambda0 = cl.harmonic_mean();
  row.lambda_eps = epe.values.segment(cl.first, m);
  row.harmonic_mean = harmonic_mean_cluster(row.lambda_eps);

  Matrix basis = cl.vectors;
  if (rotation) {
    if (rotation->rows() != m || rotation->cols() != m)
      throw Error("expansion", ErrorCode::ClusterMismatch, cat("rotation is ", rotation->rows(), "×", rotation->cols(), ", cluster has ", m));
    basis = basis * (*rotation);
  }
  TailSetOptions to = opt.tails;
  to.strip = p.strip_options(to.strip);
  const auto tails = compute_tails(p.a, p.lattice.chi, p.domain, eps, to);
  row.corrections = first_order_eigen_correction(s0, tails, expansion::extend_columns(s0, basis), &f0);
  row.correction_sum = row.corrections.sum();
  row.first_order = expansion::first_order_prediction(row.lambda0, eps, row.corrections);
  row.zeroth_residual = std::abs(row.harmonic_mean - row.lambda0);
  row.first_residual = std::abs(row.harmonic_mean - row.first_order);
  row.osborn = osborn_check(s_eps, s0, row.lambda0, row.lambda_eps, basis, &f_eps, &f0);
  return row;
}

struct EigenExpansionStudy {
  EigenExpansionResult result;
  ConvergenceReport zeroth;  // |HM(λ^ε) − λ⁰|
  ConvergenceReport first;   // |HM(λ^ε) − first-order prediction|
  bool first_dominates = false;  // first-order slope above the zeroth-order slope and above 1
};

struct StudyFloors {
  ReportOptions zeroth{};
  ReportOptions first{0.1, 1.0, true};
};

/// Reports over precomputed rows (any order; sorted by decreasing ε).
inline EigenExpansionStudy summarize_eigen_expansion(int mode, std::vector<EigenExpansionRow> rows, const StudyFloors& floors = {}) {
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.eps > b.eps; });
  EigenExpansionStudy st;
  st.result.mode = mode;
  std::vector<std::pair<Real, Real>> z, f;
  for (auto& row : rows) {
    if (st.result.rows.empty()) st.result.multiplicity = static_cast<int>(row.lambda_eps.size());
    if (static_cast<int>(row.lambda_eps.size()) != st.result.multiplicity)
      throw Error("expansion", ErrorCode::ClusterMismatch, cat("cluster size changes at ε = ", row.eps));
    z.emplace_back(row.eps, row.zeroth_residual);
    f.emplace_back(row.eps, row.first_residual);
    st.result.rows.push_back(std::move(row));
  }
  st.zeroth = make_report(cat("eigen_zeroth_order_residual_mode", mode), z, 1.0, floors.zeroth);
  st.first = make_report(cat("eigen_first_order_residual_mode", mode), f, 1.5, floors.first);
  st.first_dominates = (st.first.at_floor && st.zeroth.at_floor) ||
                       (st.first.fitted && st.zeroth.fitted && st.first.slope > st.zeroth.slope && st.first.slope > 1.0);
  return st;
}

inline EigenExpansionStudy eigen_expansion_study(const ExpansionProblem& p, const std::vector<Real>& eps,
                                                 const EigenExpansionOptions& opt = {}, const StudyFloors& floors = {}) {
  std::vector<EigenExpansionRow> rows;
  for (Real e : eps) rows.push_back(eigen_expansion_row(p, e, opt));
  return summarize_eigen_expansion(opt.mode, std::move(rows), floors);
}

/// max/min of the Osborn ratio over consecutive rows (1 when every ratio is zero).
inline Real osborn_growth(const EigenExpansionResult& r) {
  Real worst = 1.0;
  for (std::size_t i = 1; i < r.rows.size(); ++i) {
    const Real a = r.rows[i - 1].osborn.ratio, b = r.rows[i].osborn.ratio;
    if (a == 0 && b == 0) continue;
    worst = std::max(worst, std::max(a, b) / std::max(std::min(a, b), 1e-300));
  }
  return worst;
}

}  // namespace homog
