#pragma once

#include "homog/fem/export.hpp"
#include "homog/fem/solve.hpp"
#include "homog/geometry/polygon.hpp"
#include "homog/microstructure/grid_field.hpp"

#include <numeric>

namespace homog {

/// Bottom data of a strip problem: N×N matrix at a point y of the original lattice.
using StripData = std::function<void(const Vec2& y, Matrix& out)>;

struct StripOptions {
  Real height_periods = 10.0;  // L = height_periods · P
  int points_per_period = 32;  // grid points per unit length of y
  int min_points_per_period = 32;
  Vec2 origin = Vec2::Zero();  // y-coordinates of the strip origin z = 0 (lattice phase)
  int quadrature_cap = 6;
  Real residual_tol = 1e-9;
  LinearSolverOptions solver;
};

/// Half-space problem −∇·A∇V = 0 in z₂ > 0, V = data on z₂ = 0, written in
/// rotated coordinates y = M z + origin with M e₂ = n. The strip is periodic in
/// z₁ with period P and closed by a zero-flux condition at z₂ = L.
struct StripField {
  Vec2 normal;
  Mat2 rotation;
  Vec2 origin;
  Real period = 1.0;
  Real height = 0.0;
  Real spacing = 0.0;
  int m = 0;   // nodes per row (periodic)
  int ny = 0;  // rows 0..ny
  int n_components = 1;
  Matrix values;  // row (node·N + i), column j; node = i1·(ny+1) + i2
  Real relative_residual = 0.0;

  int num_nodes() const { return m * (ny + 1); }
  int node(int i1, int i2) const { return ((i1 % m + m) % m) * (ny + 1) + i2; }
  Vec2 z(int i1, int i2) const { return Vec2(i1 * spacing, i2 * spacing); }
  Vec2 y(int i1, int i2) const { return rotation * z(i1, i2) + origin; }
  auto at(int i1, int i2) const { return values.middleRows(node(i1, i2) * n_components, n_components); }

  /// Field at arbitrary (z₁, z₂) by P1 interpolation on the strip mesh; z₁ wraps, z₂ is clamped.
  Matrix eval(Real z1, Real z2) const;
};

namespace bl {

/// Lattice period of the tangent direction of a rational normal n ∝ (p, q).
inline Real rational_period(const Vec2& n) {
  const auto d = geometry::rational_direction(n);
  if (!d) throw Error("boundary_layer", ErrorCode::InvalidArgument, cat("normal (", n.x(), ", ", n.y(), ") is not rational"));
  return std::hypot(Real((*d)[0]), Real((*d)[1]));
}

inline StripData chi_data(const GridField& chi) {
  return [chi](const Vec2& y, Matrix& out) { out = chi(y); };
}

inline StripData constant_data(const Matrix& g) {
  return [g](const Vec2&, Matrix& out) { out = g; };
}

}  // namespace bl

inline Matrix StripField::eval(Real z1, Real z2) const {
  const Real s1 = z1 / spacing - std::floor(z1 / period) * m;
  const Real s2 = std::clamp(z2 / spacing, 0.0, Real(ny));
  const int i1 = std::min(static_cast<int>(std::floor(s1)), m - 1);
  const int i2 = std::min(static_cast<int>(std::floor(s2)), ny - 1);
  const Real t1 = s1 - i1, t2 = s2 - i2;
  const Matrix f00 = at(i1, i2), f10 = at(i1 + 1, i2), f01 = at(i1, i2 + 1), f11 = at(i1 + 1, i2 + 1);
  if (fem::main_diagonal(i1, i2)) {
    if (t1 >= t2) return f00 + t1 * (f10 - f00) + t2 * (f11 - f10);
    return f00 + t1 * (f11 - f01) + t2 * (f01 - f00);
  }
  if (t1 + t2 <= 1) return f00 + t1 * (f10 - f00) + t2 * (f01 - f00);
  return f11 + (1 - t1) * (f01 - f11) + (1 - t2) * (f10 - f11);
}

/// Solve the strip problem for a rational inward normal n, one field per bottom data
/// (all share one factorization).
inline std::vector<StripField> solve_strips(const PeriodicTensor& a, const std::vector<StripData>& data, const Vec2& normal,
                                            const StripOptions& opt = {}) {
  if (opt.points_per_period < opt.min_points_per_period)
    throw Error("boundary_layer", ErrorCode::UnresolvedCell,
                cat(opt.points_per_period, " points per period, need at least ", opt.min_points_per_period));
  if (opt.height_periods < 10.0)
    throw Error("boundary_layer", ErrorCode::InvalidArgument, cat("strip height ", opt.height_periods, " periods < 10"));
  const int nc = a.n_components();
  StripField f;
  f.normal = normal;
  f.rotation = geometry::rotation_to_halfspace(normal);
  f.origin = opt.origin;
  f.period = bl::rational_period(normal);
  f.m = 2 * static_cast<int>(std::ceil(opt.points_per_period * f.period / 2 - 1e-9));
  f.spacing = f.period / f.m;
  f.ny = static_cast<int>(std::ceil(opt.height_periods * f.period / f.spacing - 1e-9));
  f.height = f.ny * f.spacing;
  f.n_components = nc;

  // unknowns: rows 1..ny of every column; row 0 carries the data
  const int nfree = f.m * f.ny * nc;
  const int ndir = f.m * nc;
  auto dof = [&](int i1, int i2, int i) {
    const int c = (i1 % f.m + f.m) % f.m;
    return i2 == 0 ? -(c * nc + i) - 1 : (c * f.ny + i2 - 1) * nc + i;
  };
  const int nd = static_cast<int>(data.size());
  Matrix g(ndir, nc * nd), scratch, abar(2 * nc, 2 * nc);
  for (int d = 0; d < nd; ++d)
    for (int i1 = 0; i1 < f.m; ++i1) {
      Matrix v;
      data[d](f.y(i1, 0), v);
      if (v.rows() != nc || v.cols() != nc)
        throw Error("boundary_layer", ErrorCode::InvalidArgument, cat("bottom data must be ", nc, "×", nc));
      g.block(i1 * nc, d * nc, nc, nc) = v;
    }
  const int level = fem::quadrature_level(std::sqrt(2.0) * f.spacing, opt.quadrature_cap);
  const auto pts = fem::subcentroids(level);
  const Real area = 0.5 * f.spacing * f.spacing;
  std::vector<Triplet> tff, tfd;
  tff.reserve(static_cast<std::size_t>(f.m) * f.ny * 2 * 9 * nc * nc);
  for (int i1 = 0; i1 < f.m; ++i1)
    for (int i2 = 0; i2 < f.ny; ++i2)
      for (const auto& t : fem::cell_split(i1, i2)) {
        std::array<Vec2, 3> yv;
        std::array<std::array<int, 2>, 3> ij;
        for (int k = 0; k < 3; ++k) {
          ij[k] = {i1 + t[k][0], i2 + t[k][1]};
          yv[k] = f.y(ij[k][0], ij[k][1]);
        }
        if (a.is_constant())
          a.eval(yv[0], abar);
        else
          fem::element_average(a, 1.0, yv[0], yv[1], yv[2], pts, abar, scratch);
        // gradients in y (the map z ↦ y is a rigid motion)
        const Real det = (yv[1].x() - yv[0].x()) * (yv[2].y() - yv[0].y()) - (yv[2].x() - yv[0].x()) * (yv[1].y() - yv[0].y());
        Eigen::Matrix<Real, 3, 2> gr;
        gr << yv[1].y() - yv[2].y(), yv[2].x() - yv[1].x(), yv[2].y() - yv[0].y(), yv[0].x() - yv[2].x(),
            yv[0].y() - yv[1].y(), yv[1].x() - yv[0].x();
        gr /= det;
        const Matrix ke = fem::element_stiffness(gr, area, abar, nc);
        for (int p = 0; p < 3; ++p)
          for (int q = 0; q < 3; ++q)
            for (int i = 0; i < nc; ++i)
              for (int j = 0; j < nc; ++j) {
                const int r = dof(ij[p][0], ij[p][1], i), c = dof(ij[q][0], ij[q][1], j);
                if (r < 0) continue;
                const Real val = ke(p * nc + i, q * nc + j);
                if (c >= 0)
                  tff.emplace_back(r, c, val);
                else
                  tfd.emplace_back(r, -c - 1, val);
              }
      }
  SpMat kff(nfree, nfree), kfd(nfree, ndir);
  kff.setFromTriplets(tff.begin(), tff.end());
  kfd.setFromTriplets(tfd.begin(), tfd.end());
  const Matrix rhs = -(kfd * g);
  Matrix sol = Matrix::Zero(nfree, nc * nd);
  if (rhs.norm() > 0) {
    SpdSolver solver;
    solver.compute(kff, opt.solver);
    sol = solver.solve(rhs);
    f.relative_residual = (kff * sol - rhs).norm() / rhs.norm();
    if (!(f.relative_residual <= opt.residual_tol))
      throw Error("boundary_layer", ErrorCode::NonConvergence, cat("strip solve residual ", f.relative_residual));
  }
  std::vector<StripField> out(nd, f);
  for (int d = 0; d < nd; ++d) {
    auto& o = out[d];
    o.values.resize(f.num_nodes() * nc, nc);
    for (int i1 = 0; i1 < f.m; ++i1) {
      o.values.middleRows(f.node(i1, 0) * nc, nc) = g.block(i1 * nc, d * nc, nc, nc);
      for (int i2 = 1; i2 <= f.ny; ++i2)
        o.values.middleRows(f.node(i1, i2) * nc, nc) = sol.block(dof(i1, i2, 0), d * nc, nc, nc);
    }
  }
  return out;
}

inline StripField solve_strip(const PeriodicTensor& a, const StripData& data, const Vec2& normal, const StripOptions& opt = {}) {
  return solve_strips(a, {data}, normal, opt).front();
}

inline StripField solve_strip(const PeriodicTensor& a, const GridField& chi, const Vec2& normal, const StripOptions& opt = {}) {
  return solve_strip(a, bl::chi_data(chi), normal, opt);
}

/// Both corrector directions χ^1, χ^2 as bottom data.
inline std::array<StripField, 2> solve_corrector_strips(const PeriodicTensor& a, const std::array<GridField, 2>& chi,
                                                        const Vec2& normal, const StripOptions& opt = {}) {
  auto v = solve_strips(a, {bl::chi_data(chi[0]), bl::chi_data(chi[1])}, normal, opt);
  return {std::move(v[0]), std::move(v[1])};
}

// ---------------------------------------------------------------------------
// Tails

struct TailOptions {
  Real window = 0.25;          // top fraction of the strip averaged for the tail
  Real monotone_slack = 0.05;  // allowed relative growth between smoothed profile samples
  Real floor = 1e-12;          // deviations below floor·scale count as converged
  bool strict = true;          // throw NoDecay instead of flagging
};

struct TailFit {
  Matrix tail;             // V*
  Vector z2;               // row heights
  Vector deviation;        // sup_{z₁} max_{ij} |V − V*| per row
  Vector smoothed;         // running max over one period, sampled per period
  Real rate = 0.0;         // fitted exponential decay rate (per unit z₂)
  Real fit_r2 = 0.0;
  int fit_points = 0;
  bool decays = true;      // smoothed profile non-increasing within slack
  bool trivial = false;    // the whole profile sits below the floor
  Real lateral_variation = 0.0;  // max z₁-variation of V inside the window
};

/// Tail V* as the z₁-and-window average near the top, with the decay profile
/// and an exponential fit of its per-period maxima.
inline TailFit extract_tail(const StripField& f, const TailOptions& opt = {}) {
  if (!(opt.window > 0 && opt.window <= 0.5))
    throw Error("boundary_layer", ErrorCode::InvalidArgument, cat("tail window ", opt.window, " must lie in (0, 0.5]"));
  const int nc = f.n_components;
  TailFit t;
  const int first = static_cast<int>(std::floor((1 - opt.window) * f.ny));
  t.tail = Matrix::Zero(nc, nc);
  int count = 0;
  for (int i2 = first; i2 <= f.ny; ++i2)
    for (int i1 = 0; i1 < f.m; ++i1, ++count) t.tail += f.at(i1, i2);
  t.tail /= count;
  for (int i2 = first; i2 <= f.ny; ++i2) {
    Matrix mean = Matrix::Zero(nc, nc);
    for (int i1 = 0; i1 < f.m; ++i1) mean += f.at(i1, i2);
    mean /= f.m;
    for (int i1 = 0; i1 < f.m; ++i1)
      t.lateral_variation = std::max(t.lateral_variation, (f.at(i1, i2) - mean).cwiseAbs().maxCoeff());
  }
  t.z2.resize(f.ny + 1);
  t.deviation.resize(f.ny + 1);
  for (int i2 = 0; i2 <= f.ny; ++i2) {
    Real d = 0;
    for (int i1 = 0; i1 < f.m; ++i1) d = std::max(d, (f.at(i1, i2) - t.tail).cwiseAbs().maxCoeff());
    t.z2[i2] = i2 * f.spacing;
    t.deviation[i2] = d;
  }
  const Real scale = std::max({f.values.size() ? f.values.cwiseAbs().maxCoeff() : 0.0, t.tail.cwiseAbs().maxCoeff(), 1e-300});
  const Real floor = opt.floor * scale;
  // smoothing: maxima over consecutive one-period blocks (the coefficients are P-periodic in z₂ too)
  const int block = std::max(1, static_cast<int>(std::lround(f.period / f.spacing)));
  std::vector<Real> bz, bmax;
  for (int s = 0; s + block <= f.ny + 1; s += block) {
    bmax.push_back(t.deviation.segment(s, block).maxCoeff());
    bz.push_back(t.z2[s] + 0.5 * (block - 1) * f.spacing);
  }
  t.smoothed = Eigen::Map<const Vector>(bmax.data(), static_cast<Eigen::Index>(bmax.size()));
  t.trivial = t.deviation.maxCoeff() <= floor;
  for (std::size_t k = 1; k < bmax.size(); ++k)
    if (bmax[k] > (1 + opt.monotone_slack) * std::max(bmax[k - 1], floor)) t.decays = false;
  // log-linear fit over blocks below the window and above the floor
  std::vector<Real> xs, ys;
  for (std::size_t k = 0; k < bmax.size(); ++k)
    if (bz[k] < (1 - opt.window) * f.height && bmax[k] > floor) {
      xs.push_back(bz[k]);
      ys.push_back(std::log(bmax[k]));
    }
  t.fit_points = static_cast<int>(xs.size());
  if (xs.size() >= 2) {
    const Real mx = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
    const Real my = std::accumulate(ys.begin(), ys.end(), 0.0) / ys.size();
    Real sxx = 0, sxy = 0, syy = 0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
      sxx += (xs[k] - mx) * (xs[k] - mx);
      sxy += (xs[k] - mx) * (ys[k] - my);
      syy += (ys[k] - my) * (ys[k] - my);
    }
    t.rate = -sxy / sxx;
    t.fit_r2 = syy > 0 ? sxy * sxy / (sxx * syy) : 1.0;
  }
  if (!t.trivial && t.fit_points >= 2 && !(t.rate > 0)) t.decays = false;
  if (!t.decays && opt.strict)
    throw Error("boundary_layer", ErrorCode::NoDecay,
                cat("deviation profile does not decay (rate ", t.rate, ", ", t.fit_points, " fit points)"));
  return t;
}

/// Strip field CSV `z1,z2,component,value` (component = i·N + j + 1 of the N×N value).
inline void write_strip_csv(const std::string& path, const StripField& f) {
  auto out = io::open_output(path);
  out << "z1,z2,component,value\n";
  const int nc = f.n_components;
  for (int i1 = 0; i1 < f.m; ++i1)
    for (int i2 = 0; i2 <= f.ny; ++i2) {
      const Matrix v = f.at(i1, i2);
      for (int i = 0; i < nc; ++i)
        for (int j = 0; j < nc; ++j)
          out << i1 * f.spacing << ',' << i2 * f.spacing << ',' << i * nc + j + 1 << ',' << v(i, j) << '\n';
    }
}

/// Decay profile CSV `z2,sup_deviation`.
inline void write_decay_csv(const std::string& path, const TailFit& t) {
  auto out = io::open_output(path);
  out << "z2,sup_deviation\n";
  for (int k = 0; k < t.z2.size(); ++k) out << t.z2[k] << ',' << t.deviation[k] << '\n';
}

}  // namespace homog
