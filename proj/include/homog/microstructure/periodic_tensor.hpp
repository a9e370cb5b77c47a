#pragma once

#include "homog/core.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>

namespace homog {

/// Periodic coefficient family A^{αβ}(y) on the unit torus.
///
/// Builtin presets are evaluated analytically; tabulated tensors hold samples
/// on a uniform n×n grid and are interpolated bilinearly with wrap-around.
class PeriodicTensor {
 public:
  using Evaluator = std::function<void(const Vec2&, Matrix&)>;

  PeriodicTensor() = default;
  PeriodicTensor(std::string name, int n_components, Evaluator eval, bool constant = false)
      : name_(std::move(name)), n_(n_components), eval_(std::move(eval)), constant_(constant) {}

  /// Tabulated samples: `samples[k1*n + k2]` is the 2N×2N block matrix at (k1/n, k2/n).
  static PeriodicTensor tabulated(std::string name, int n_components, int grid, std::vector<Matrix> samples) {
    auto data = std::make_shared<const std::vector<Matrix>>(std::move(samples));
    PeriodicTensor t(std::move(name), n_components,
                     [data, grid](const Vec2& y, Matrix& out) {
                       const Real s1 = (y.x() - std::floor(y.x())) * grid;
                       const Real s2 = (y.y() - std::floor(y.y())) * grid;
                       const int i1 = static_cast<int>(std::floor(s1));
                       const int i2 = static_cast<int>(std::floor(s2));
                       const Real t1 = s1 - i1, t2 = s2 - i2;
                       auto at = [&](int a, int b) -> const Matrix& {
                         return (*data)[((a % grid + grid) % grid) * grid + ((b % grid + grid) % grid)];
                       };
                       out = (1 - t1) * (1 - t2) * at(i1, i2) + t1 * (1 - t2) * at(i1 + 1, i2) +
                             (1 - t1) * t2 * at(i1, i2 + 1) + t1 * t2 * at(i1 + 1, i2 + 1);
                     });
    t.tabulated_grid_ = grid;
    t.samples_ = std::move(data);
    return t;
  }

  const std::string& name() const noexcept { return name_; }
  int n_components() const noexcept { return n_; }
  bool is_constant() const noexcept { return constant_; }
  bool is_tabulated() const noexcept { return tabulated_grid_ > 0; }
  int tabulated_grid() const noexcept { return tabulated_grid_; }
  const std::vector<Matrix>& samples() const { return *samples_; }

  Real ellipticity() const noexcept { return lambda_; }
  void set_ellipticity(Real l) noexcept { lambda_ = l; }
  bool symmetric() const noexcept { return symmetric_; }
  void set_symmetric(bool s) noexcept { symmetric_ = s; }

  void eval(const Vec2& y, Matrix& out) const { eval_(y, out); }

  BlockTensor operator()(const Vec2& y) const {
    Matrix m(2 * n_, 2 * n_);
    eval_(y, m);
    return BlockTensor(n_, std::move(m));
  }

  /// c·A, used for the scaling-covariance checks.
  PeriodicTensor scaled(Real c) const {
    PeriodicTensor t = *this;
    auto inner = eval_;
    t.eval_ = [inner, c](const Vec2& y, Matrix& out) {
      inner(y, out);
      out *= c;
    };
    t.name_ = cat(name_, "*", c);
    t.lambda_ = lambda_ * c;
    if (samples_) {
      auto s = std::make_shared<std::vector<Matrix>>(*samples_);
      for (auto& m : *s) m *= c;
      t.samples_ = s;
    }
    return t;
  }

  /// y ↦ A(y + phase): the same microstructure with the lattice moved by −phase.
  PeriodicTensor shifted(const Vec2& phase) const {
    if (phase.isZero() || constant_) return *this;
    PeriodicTensor t = *this;
    auto inner = eval_;
    t.eval_ = [inner, phase](const Vec2& y, Matrix& out) { inner(y + phase, out); };
    t.name_ = cat(name_, "@(", phase.x(), ",", phase.y(), ")");
    t.tabulated_grid_ = 0;
    t.samples_.reset();
    return t;
  }

  /// A frozen at a single point, as a constant tensor.
  static PeriodicTensor constant(std::string name, const BlockTensor& a) {
    Matrix m = a.matrix();
    PeriodicTensor t(std::move(name), a.n(), [m](const Vec2&, Matrix& out) { out = m; }, true);
    return t;
  }

 private:
  std::string name_;
  int n_ = 1;
  Evaluator eval_;
  bool constant_ = false;
  int tabulated_grid_ = 0;
  std::shared_ptr<const std::vector<Matrix>> samples_;
  Real lambda_ = 0.0;
  bool symmetric_ = true;
};

namespace presets {

/// a(y₁) = 2 + cos(2πy₁)
inline Real laminate_profile(Real y1) { return 2.0 + std::cos(two_pi * y1); }

inline PeriodicTensor identity(int n = 1) {
  Matrix id = Matrix::Identity(2 * n, 2 * n);
  return PeriodicTensor("identity", n, [id](const Vec2&, Matrix& out) { out = id; }, true);
}

/// Scalar laminate times the identity; with n = 2 this is the duplicated-block system.
inline PeriodicTensor laminate(int n = 1) {
  return PeriodicTensor("laminate", n, [n](const Vec2& y, Matrix& out) {
    out.setZero(2 * n, 2 * n);
    out.diagonal().setConstant(laminate_profile(y.x()));
  });
}

/// a(y) = 2 + cos(2πy₁)cos(2πy₂), isotropic.
inline PeriodicTensor checkerboard_smooth(int n = 1) {
  return PeriodicTensor("checkerboard_smooth", n, [n](const Vec2& y, Matrix& out) {
    out.setZero(2 * n, 2 * n);
    out.diagonal().setConstant(2.0 + std::cos(two_pi * y.x()) * std::cos(two_pi * y.y()));
  });
}

/// Scalar tensor with an oscillating off-diagonal coupling between directions.
inline PeriodicTensor anisotropic_smooth() {
  return PeriodicTensor("anisotropic_smooth", 1, [](const Vec2& y, Matrix& out) {
    out.resize(2, 2);
    out(0, 0) = 2.0 + std::cos(two_pi * y.x());
    out(1, 1) = 2.0 + std::sin(two_pi * y.y());
    out(0, 1) = out(1, 0) = 0.5 * std::cos(two_pi * (y.x() - y.y()));
  });
}

/// N = 2 system: laminate diagonal plus a y₂-oscillating coupling between components.
inline PeriodicTensor coupled_laminate() {
  return PeriodicTensor("coupled_laminate", 2, [](const Vec2& y, Matrix& out) {
    out.setZero(4, 4);
    const Real a = laminate_profile(y.x());
    const Real c = 0.5 * std::sin(two_pi * y.y());
    for (int alpha = 0; alpha < 2; ++alpha) {
      out(2 * alpha, 2 * alpha) = a;
      out(2 * alpha + 1, 2 * alpha + 1) = a;
      out(2 * alpha, 2 * alpha + 1) = c;
      out(2 * alpha + 1, 2 * alpha) = c;
    }
  });
}

inline const std::vector<std::string>& names() {
  static const std::vector<std::string> n{"identity",  "laminate",         "duplicated_block",
                                          "checkerboard_smooth", "anisotropic_smooth", "coupled_laminate"};
  return n;
}

/// Look up a preset by name; `scale` multiplies the whole tensor.
inline PeriodicTensor by_name(const std::string& name, int n_components = 1, Real scale = 1.0) {
  PeriodicTensor t;
  if (name == "identity" || name == "constant")
    t = identity(n_components);
  else if (name == "laminate")
    t = laminate(n_components);
  else if (name == "duplicated_block")
    t = laminate(2);
  else if (name == "checkerboard_smooth")
    t = checkerboard_smooth(n_components);
  else if (name == "anisotropic_smooth")
    t = anisotropic_smooth();
  else if (name == "coupled_laminate")
    t = coupled_laminate();
  else
    throw Error("microstructure", ErrorCode::InvalidArgument, cat("unknown tensor preset '", name, "'"));
  if (scale != 1.0) {
    const bool c = t.is_constant();
    t = t.scaled(scale);
    if (c) t = PeriodicTensor::constant(t.name(), t(Vec2::Zero()));
  }
  return t;
}

}  // namespace presets

// ---------------------------------------------------------------------------
// Validation: symmetry and uniform ellipticity.

struct Violation {
  ErrorCode code;
  Vec2 worst_point;
  Real measured;
  std::string detail;
};

struct ValidationReport {
  Real measured_ellipticity = 0.0;  // smallest Rayleigh quotient over the grid
  Real measured_bound = 0.0;        // largest Rayleigh quotient over the grid
  Real max_asymmetry = 0.0;
  Vec2 worst_ellipticity_point = Vec2::Zero();
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

/// Rejection carrying every violated assumption.
class TensorRejected : public Error {
 public:
  explicit TensorRejected(ValidationReport r)
      : Error("microstructure", r.violations.front().code, describe(r)), report_(std::move(r)) {}
  const ValidationReport& report() const noexcept { return report_; }

 private:
  static std::string describe(const ValidationReport& r) {
    std::string s;
    for (const auto& v : r.violations)
      s += cat(to_string(v.code), " at y=(", v.worst_point.x(), ",", v.worst_point.y(), ") measured ", v.measured,
               " ", v.detail, "; ");
    return s;
  }
  ValidationReport report_;
};

struct ValidationOptions {
  Real symmetry_tol = 1e-12;
  bool require_symmetry = true;
};

/// Check samples of a tensor at the given grid points against λ_claim.
inline ValidationReport inspect_samples(int n_components, const std::vector<Vec2>& points,
                                        const std::function<void(std::size_t, Matrix&)>& sample, Real lambda_claim,
                                        const ValidationOptions& opt = {}) {
  ValidationReport rep;
  rep.measured_ellipticity = std::numeric_limits<Real>::infinity();
  rep.measured_bound = -std::numeric_limits<Real>::infinity();
  Vec2 worst_sym = Vec2::Zero(), worst_finite = Vec2::Zero();
  bool non_finite = false;
  Matrix m(2 * n_components, 2 * n_components);
  for (std::size_t p = 0; p < points.size(); ++p) {
    sample(p, m);
    if (!m.allFinite()) {
      if (!non_finite) worst_finite = points[p];
      non_finite = true;
      continue;
    }
    const BlockTensor bt(n_components, m);
    const Real asym = bt.asymmetry();
    if (asym > rep.max_asymmetry) {
      rep.max_asymmetry = asym;
      worst_sym = points[p];
    }
    const auto [lo, hi] = bt.rayleigh_bounds();
    if (lo < rep.measured_ellipticity) {
      rep.measured_ellipticity = lo;
      rep.worst_ellipticity_point = points[p];
    }
    rep.measured_bound = std::max(rep.measured_bound, hi);
  }
  if (non_finite) rep.violations.push_back({ErrorCode::NonFiniteEntry, worst_finite, NAN, "non-finite sample"});
  if (!non_finite || rep.measured_ellipticity < std::numeric_limits<Real>::infinity()) {
    // Tolerance of a few ulps absorbs eigen-solver rounding on exact presets.
    if (rep.measured_ellipticity < lambda_claim * (1.0 - 1e-12))
      rep.violations.push_back({ErrorCode::EllipticityViolation, rep.worst_ellipticity_point,
                                rep.measured_ellipticity, cat("< lambda_claim ", lambda_claim)});
  }
  if (opt.require_symmetry && rep.max_asymmetry > opt.symmetry_tol)
    rep.violations.push_back(
        {ErrorCode::SymmetryViolation, worst_sym, rep.max_asymmetry, cat("> tolerance ", opt.symmetry_tol)});
  return rep;
}

/// Grid points k/n used to probe analytic tensors.
inline std::vector<Vec2> probe_grid(int n) {
  std::vector<Vec2> pts;
  pts.reserve(static_cast<std::size_t>(n) * n);
  for (int k1 = 0; k1 < n; ++k1)
    for (int k2 = 0; k2 < n; ++k2) pts.emplace_back(Real(k1) / n, Real(k2) / n);
  return pts;
}

/// Validate raw tabulated samples (n×n grid, n ≥ 4) and build the tensor.
inline PeriodicTensor validate_tensor(int n_components, int grid, std::vector<Matrix> raw_samples,
                                      Real lambda_claim, const ValidationOptions& opt = {},
                                      std::string name = "tabulated") {
  if (grid < 4)
    throw Error("microstructure", ErrorCode::InvalidArgument, cat("tabulated grid must be >= 4, got ", grid));
  if (raw_samples.size() != static_cast<std::size_t>(grid) * grid)
    throw Error("microstructure", ErrorCode::InvalidArgument, "sample count does not match grid");
  const auto pts = probe_grid(grid);
  auto rep = inspect_samples(
      n_components, pts, [&](std::size_t p, Matrix& m) { m = raw_samples[p]; }, lambda_claim, opt);
  if (!rep.ok()) throw TensorRejected(std::move(rep));
  auto t = PeriodicTensor::tabulated(std::move(name), n_components, grid, std::move(raw_samples));
  t.set_ellipticity(rep.measured_ellipticity);
  t.set_symmetric(rep.max_asymmetry <= opt.symmetry_tol);
  return t;
}

/// Validate an analytic tensor by probing it on an n×n grid; records the
/// measured constant on success.
inline ValidationReport validate_tensor(PeriodicTensor& a, Real lambda_claim, int probe = 64,
                                        const ValidationOptions& opt = {}) {
  const auto pts = probe_grid(probe);
  auto rep = inspect_samples(
      a.n_components(), pts, [&](std::size_t p, Matrix& m) { a.eval(pts[p], m); }, lambda_claim, opt);
  if (!rep.ok()) throw TensorRejected(rep);
  a.set_ellipticity(rep.measured_ellipticity);
  a.set_symmetric(rep.max_asymmetry <= opt.symmetry_tol);
  return rep;
}

/// Read `alpha,beta,i,j,y1,y2,value` rows (1-based indices) on a full uniform grid.
inline PeriodicTensor read_tensor_csv(const std::string& path, Real lambda_claim, const ValidationOptions& opt = {}) {
  std::ifstream in(path);
  if (!in) throw Error("microstructure", ErrorCode::ConfigParse, cat("cannot open tensor file '", path, "'"));
  std::string line;
  std::getline(in, line);
  line.erase(std::remove_if(line.begin(), line.end(), [](char c) { return c == ' ' || c == '\r'; }), line.end());
  if (line != "alpha,beta,i,j,y1,y2,value")
    throw Error("microstructure", ErrorCode::ConfigParse, cat("bad header in '", path, "': ", line));
  struct Row {
    int a, b, i, j;
    Real y1, y2, v;
  };
  std::vector<Row> rows;
  int n_comp = 0;
  std::set<long long> y1s;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    Row r{};
    char c;
    std::istringstream is(line);
    if (!(is >> r.a >> c >> r.b >> c >> r.i >> c >> r.j >> c >> r.y1 >> c >> r.y2 >> c >> r.v))
      throw Error("microstructure", ErrorCode::ConfigParse, cat(path, ":", lineno, ": malformed row"));
    if (r.a < 1 || r.a > 2 || r.b < 1 || r.b > 2 || r.i < 1 || r.j < 1)
      throw Error("microstructure", ErrorCode::ConfigParse, cat(path, ":", lineno, ": index out of range"));
    n_comp = std::max({n_comp, r.i, r.j});
    y1s.insert(std::llround(r.y1 * 1e9));
    rows.push_back(r);
  }
  const int grid = static_cast<int>(y1s.size());
  if (grid < 4) throw Error("microstructure", ErrorCode::ConfigParse, cat(path, ": grid must be at least 4x4"));
  const std::size_t expect = static_cast<std::size_t>(grid) * grid * 4 * n_comp * n_comp;
  if (rows.size() != expect)
    throw Error("microstructure", ErrorCode::ConfigParse,
                cat(path, ": expected ", expect, " rows for a full ", grid, "x", grid, " grid, got ", rows.size()));
  std::vector<Matrix> samples(static_cast<std::size_t>(grid) * grid,
                              Matrix::Constant(2 * n_comp, 2 * n_comp, std::numeric_limits<Real>::quiet_NaN()));
  for (const auto& r : rows) {
    const long k1 = std::lround(r.y1 * grid), k2 = std::lround(r.y2 * grid);
    if (std::abs(r.y1 * grid - k1) > 1e-6 || std::abs(r.y2 * grid - k2) > 1e-6 || k1 < 0 || k1 >= grid || k2 < 0 ||
        k2 >= grid)
      throw Error("microstructure", ErrorCode::ConfigParse, cat(path, ": point off the uniform grid"));
    samples[k1 * grid + k2]((r.a - 1) * n_comp + r.i - 1, (r.b - 1) * n_comp + r.j - 1) = r.v;
  }
  return validate_tensor(n_comp, grid, std::move(samples), lambda_claim, opt, path);
}

}  // namespace homog
