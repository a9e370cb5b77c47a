#include "homog/expansion/reconstruct.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

using namespace homog;

namespace {

// lattice-commensurate sequence with a fixed phase on the right edge
std::vector<Real> shifted_sweep() { return {1.0 / 8.25, 1.0 / 16.25, 1.0 / 32.25}; }

const ExpansionProblem& laminate_problem() {
  static const ExpansionProblem p = ExpansionProblem::make(presets::laminate(), domains::unit_square());
  return p;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

// ---------------------------------------------------------------------------
// Convergence reports

TEST(Report, ExactPowerLaw) {
  std::vector<std::pair<Real, Real>> rows;
  for (Real e : {0.5, 0.25, 0.125, 0.0625}) rows.emplace_back(e, 3.0 * std::pow(e, 1.5));
  const auto r = make_report("q", rows, 1.5);
  ASSERT_TRUE(r.fitted);
  EXPECT_NEAR(r.slope, 1.5, 1e-12);
  EXPECT_NEAR(r.intercept, std::log(3.0), 1e-12);
  EXPECT_NEAR(r.interval[0], 1.5, 1e-10);
  EXPECT_NEAR(r.interval[1], 1.5, 1e-10);
  EXPECT_TRUE(r.pass);
  EXPECT_TRUE(r.clean);
  EXPECT_DOUBLE_EQ(r.floor, 1.4);
}

TEST(Report, IntervalUsesStudentT) {
  const std::vector<std::pair<Real, Real>> rows{{1.0, 1.0}, {0.5, 0.6}, {0.25, 0.2}};
  const auto r = make_report("q", rows, 1.0);
  // three points, one degree of freedom: t = 12.706
  EXPECT_NEAR(expansion::t_quantile_95(1), 12.7062047, 1e-6);
  EXPECT_LT(r.interval[0], r.slope);
  EXPECT_GT(r.interval[1], r.slope);
  EXPECT_GT(r.interval[1] - r.interval[0], 1.0);
}

TEST(Report, SortingIsDeterministic) {
  std::vector<std::pair<Real, Real>> rows{{0.125, 0.1}, {0.5, 0.5}, {0.25, 0.2}};
  const auto a = make_report("q", rows, 1.0);
  std::reverse(rows.begin(), rows.end());
  const auto b = make_report("q", rows, 1.0);
  EXPECT_EQ(a.rows, b.rows);
  EXPECT_EQ(a.slope, b.slope);
  EXPECT_EQ(a.rows.front().first, 0.5);
}

TEST(Report, FloorsAndValidation) {
  const std::vector<std::pair<Real, Real>> slow{{0.5, 0.5}, {0.25, 0.35}, {0.125, 0.25}};
  EXPECT_FALSE(make_report("q", slow, 1.0).pass);
  ReportOptions strict;
  strict.floor = 1.0;
  strict.strict_floor = true;
  const std::vector<std::pair<Real, Real>> unit{{0.5, 0.5}, {0.25, 0.25}, {0.125, 0.125}};
  const auto r = make_report("q", unit, 1.5, strict);
  EXPECT_NEAR(r.slope, 1.0, 1e-12);
  EXPECT_EQ(r.pass, r.slope > 1.0);

  const auto two = make_report("q", {{0.5, 1.0}, {0.25, 0.5}}, 1.0);
  EXPECT_FALSE(two.fitted);
  EXPECT_FALSE(two.pass);
  const auto zero = make_report("q", {{0.5, 0.0}, {0.25, 1e-15}, {0.125, 0.0}}, 1.0);
  EXPECT_TRUE(zero.at_floor);
  EXPECT_TRUE(zero.pass);
  EXPECT_THROW(make_report("q", {{0.5, 1.0}, {0.5, 0.5}, {0.25, 0.1}}, 1.0), Error);
  EXPECT_THROW(make_report("q", {{-0.5, 1.0}, {0.25, 0.5}, {0.125, 0.1}}, 1.0), Error);
}

TEST(Report, CsvAndJson) {
  const auto dir = std::filesystem::temp_directory_path() / "homog_report";
  std::filesystem::create_directories(dir);
  const auto r = make_report("q", {{0.5, 0.5}, {0.25, 0.25}, {0.125, 0.125}}, 1.0);
  write_report_csv((dir / "q.csv").string(), r);
  write_report_json((dir / "q.json").string(), r);
  const auto csv = slurp((dir / "q.csv").string());
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "epsilon,value");
  const auto j = nlohmann::json::parse(slurp((dir / "q.json").string()));
  for (const char* k : {"quantity", "slope", "interval", "claimed", "pass"}) EXPECT_TRUE(j.contains(k)) << k;
  EXPECT_EQ(j["interval"].size(), 2u);
  EXPECT_EQ(j["slope"].get<Real>(), r.slope);
}

// ---------------------------------------------------------------------------
// Reconstruction and corrector errors

TEST(Reconstruct, TrivialCases) {
  const auto square = domains::unit_square();
  const Mesh mesh = triangulate(square, 1.0 / 8);
  const Vector u0 = interpolate(mesh, 1, [](const Vec2& x, Eigen::Ref<Vector> o) { o[0] = x.x() * (1 - x.x()) * x.y(); });
  const Vector theta = Vector::Constant(u0.size(), 0.3);
  const std::array<GridField, 2> zero{GridField(8, 1, 1), GridField(8, 1, 1)};
  EXPECT_LE((multiscale_reconstruct(mesh, u0, 1, zero, 0.1, 1, &theta) - (u0 + 0.1 * theta)).cwiseAbs().maxCoeff(), 1e-15);
  const auto& chi = laminate_problem().lattice.chi;
  EXPECT_EQ(multiscale_reconstruct(mesh, u0, 1, chi, 0.0, 1, &theta), u0);
  const std::array<GridField, 2> missing{};
  try {
    multiscale_reconstruct(mesh, u0, 1, missing, 0.1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.qualified(), "expansion.MissingCorrector");
  }
  try {
    multiscale_reconstruct(mesh, u0, 1, chi, 0.1, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.qualified(), "expansion.MissingCorrector");
  }
}

TEST(CorrectorStudy, ConstantTensorIsExact) {
  const auto p = ExpansionProblem::make(presets::identity(), domains::unit_square());
  const NodalFunction f = [](const Vec2&, Eigen::Ref<Vector> o) { o[0] = 1; };
  const auto st = corrector_error_study(p, f, {1.0 / 4, 1.0 / 8, 1.0 / 16});
  for (const auto& r : st.rows) {
    EXPECT_LE(r.homogenized_l2, 1e-13);
    EXPECT_LE(r.reconstruction_h1, 1e-13);
  }
  for (const auto& r : st.reports) EXPECT_TRUE(r.at_floor && r.pass) << r.quantity;
}

TEST(CorrectorStudy, LaminateReconstructionRates) {
  const NodalFunction f = [](const Vec2&, Eigen::Ref<Vector> o) { o[0] = 1; };
  const auto st = corrector_error_study(laminate_problem(), f, {1.0 / 8, 1.0 / 16, 1.0 / 32});
  for (const auto& r : st.rows)
    std::printf("eps %.4f  |ue-u0| %.4e  H1 rec %.4e  L2 rec %.4e\n", r.eps, r.homogenized_l2, r.reconstruction_h1,
                r.reconstruction_l2);
  for (const auto& r : st.reports) std::printf("%s slope %.3f\n", r.quantity.c_str(), r.slope);
  EXPECT_GE(st.reports[1].slope, 0.85);
  EXPECT_TRUE(st.reports[1].pass);
  EXPECT_TRUE(st.reports[0].pass);
  const auto swapped = corrector_error_study(laminate_problem(), f, {1.0 / 32, 1.0 / 8, 1.0 / 16});
  for (int k = 0; k < 3; ++k) EXPECT_EQ(st.reports[k].rows, swapped.reports[k].rows);
}

// ---------------------------------------------------------------------------
// The χ term

namespace {

std::array<GridField, 2> single_mode_chi(int n) {
  std::array<GridField, 2> chi{GridField(n, 1, 1), GridField(n, 1, 1)};
  for (int p = 0; p < n * n; ++p) chi[0].data()(0, p) = std::sin(two_pi * chi[0].point(p).x());
  return chi;
}

// v = sin(πx)sin(πy): ∫ sin(2πx/ε) ∂₁v v = (π/8)[sin 2π(k−1)/(2π(k−1)) − sin 2π(k+1)/(2π(k+1))], k = 1/ε
Real single_mode_oracle(Real eps) {
  const Real k = 1.0 / eps;
  return pi / 8 * (std::sin(two_pi * (k - 1)) / (two_pi * (k - 1)) - std::sin(two_pi * (k + 1)) / (two_pi * (k + 1)));
}

const expansion::ElementSampler& sine_sampler() {
  static const auto s = expansion::exact_sampler(
      [](const Vec2& x, Eigen::Ref<Vector> o) { o[0] = std::sin(pi * x.x()) * std::sin(pi * x.y()); },
      [](const Vec2& x, Matrix& g) {
        g(0, 0) = pi * std::cos(pi * x.x()) * std::sin(pi * x.y());
        g(0, 1) = pi * std::sin(pi * x.x()) * std::cos(pi * x.y());
      });
  return s;
}

}  // namespace

TEST(ChiTerm, ZeroCorrector) {
  const Mesh mesh = triangulate(domains::unit_square(), 1.0 / 8);
  const std::array<GridField, 2> zero{GridField(8, 1, 1), GridField(8, 1, 1)};
  const auto r = chi_term_decay(zero, mesh, 1, sine_sampler(), shifted_sweep());
  for (const auto& row : r.rows) EXPECT_EQ(row.second, 0.0);
  EXPECT_TRUE(r.at_floor);
}

TEST(ChiTerm, SingleModeMatchesOracleAndDecays) {
  const Mesh mesh = triangulate(domains::unit_square(), 1.0 / 16);
  const auto chi = single_mode_chi(128);
  for (Real e : shifted_sweep()) {
    const Real got = expansion::chi_term_integral(chi, e, mesh, 1, sine_sampler());
    EXPECT_NEAR(got, single_mode_oracle(e), 1e-3 * std::abs(single_mode_oracle(e))) << e;
  }
  const auto r = chi_term_decay(chi, mesh, 1, sine_sampler(), shifted_sweep());
  std::printf("chi term slope %.3f\n", r.slope);
  EXPECT_GE(r.slope, 0.9);
  EXPECT_TRUE(r.pass);
  // halving ε at least halves the integral
  for (std::size_t i = 1; i < r.rows.size(); ++i) EXPECT_LE(r.rows[i].second, 0.6 * r.rows[i - 1].second);
}

TEST(ChiTerm, DiscreteSamplerAgreesWithExact) {
  const Mesh mesh = triangulate(domains::unit_square(), 1.0 / 64);
  const Vector v = interpolate(mesh, 1, [](const Vec2& x, Eigen::Ref<Vector> o) { o[0] = std::sin(pi * x.x()) * std::sin(pi * x.y()); });
  const auto chi = single_mode_chi(128);
  const Real e = 1.0 / 8.25;
  const Real got = expansion::chi_term_integral(chi, e, mesh, 1, expansion::p1_sampler(mesh, v, 1));
  EXPECT_NEAR(got, single_mode_oracle(e), 0.05 * std::abs(single_mode_oracle(e)));
}

// ---------------------------------------------------------------------------
// Eigenvalue expansion

TEST(EigenExpansion, ConstantTensorIsExact) {
  const auto p = ExpansionProblem::make(presets::identity(), domains::unit_square());
  const auto st = eigen_expansion_study(p, {1.0 / 4, 1.0 / 8, 1.0 / 16});
  for (const auto& r : st.result.rows) {
    EXPECT_EQ(r.corrections.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(r.first_order, r.lambda0);
    EXPECT_LE(r.zeroth_residual, 10 * 1e-8 * r.lambda0);
    EXPECT_LE(r.osborn.lhs, 1e-10);
    EXPECT_LE(r.osborn.rhs_norm, 1e-10);
  }
  EXPECT_TRUE(st.first_dominates);
}

TEST(EigenExpansion, SimpleModeFormula) {
  const auto row = eigen_expansion_row(laminate_problem(), 1.0 / 8.25);
  ASSERT_EQ(row.corrections.size(), 1);
  EXPECT_DOUBLE_EQ(row.first_order, row.lambda0 - row.eps * row.lambda0 * row.corrections[0]);
  EXPECT_NE(row.corrections[0], 0.0);
}

TEST(EigenExpansion, VanishingCorrectionAtIntegerPeriods) {
  // both vertical edges share the lattice phase when 1/ε is an integer
  const auto row = eigen_expansion_row(laminate_problem(), 1.0 / 8);
  EXPECT_LE(std::abs(row.correction_sum), 1e-10);
}

TEST(EigenExpansion, LaminateFirstOrderDominates) {
  for (int mode : {0, 1}) {
    EigenExpansionOptions o;
    o.mode = mode;
    const auto st = eigen_expansion_study(laminate_problem(), shifted_sweep(), o);
    for (const auto& r : st.result.rows)
      std::printf("mode %d eps %.5f  HM %.8f  lambda0 %.8f  res0 %.4e  res1 %.4e  osborn %.3f\n", mode, r.eps, r.harmonic_mean,
                  r.lambda0, r.zeroth_residual, r.first_residual, r.osborn.ratio);
    std::printf("zeroth slope %.3f  first slope %.3f\n", st.zeroth.slope, st.first.slope);
    EXPECT_TRUE(st.zeroth.pass);
    EXPECT_TRUE(st.first.pass);
    EXPECT_GT(st.first.slope, 1.0);
    EXPECT_GT(st.first.slope, st.zeroth.slope);
    EXPECT_TRUE(st.first_dominates);
  }
}

TEST(EigenExpansion, StudyIsDeterministic) {
  const auto dir = std::filesystem::temp_directory_path() / "homog_det";
  std::filesystem::create_directories(dir);
  std::vector<Real> eps{1.0 / 4.25, 1.0 / 8.25, 1.0 / 16.25};
  for (int run = 0; run < 2; ++run) {
    const auto st = eigen_expansion_study(laminate_problem(), eps);
    write_report_csv((dir / cat("first", run, ".csv")).string(), st.first);
  }
  EXPECT_EQ(slurp((dir / "first0.csv").string()), slurp((dir / "first1.csv").string()));
}

TEST(Osborn, LaminateRatioBounded) {
  std::vector<Real> ratios;
  for (Real e : {1.0 / 8, 1.0 / 16}) ratios.push_back(eigen_expansion_row(laminate_problem(), e).osborn.ratio);
  EXPECT_GT(ratios[0], 0);
  EXPECT_LE(std::max(ratios[0], ratios[1]) / std::min(ratios[0], ratios[1]), 3.0);
}

TEST(Osborn, ClusterSizeMismatchThrows) {
  const auto mesh = std::make_shared<const Mesh>(triangulate(domains::unit_square(), 1.0 / 8));
  const auto s = assemble_constant(mesh, BlockTensor::identity(1));
  try {
    osborn_check(s, s, 1.0, Vector::Ones(2), Matrix::Zero(s.num_free(), 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.qualified(), "expansion.ClusterMismatch");
  }
}

TEST(Degeneracy, DuplicatedBlockSumIsRotationInvariant) {
  const auto p = ExpansionProblem::make(presets::laminate(2), domains::unit_square());
  const Real eps = 1.0 / 8.25;
  const auto base = eigen_expansion_row(p, eps);
  ASSERT_EQ(base.lambda_eps.size(), 2);
  std::mt19937 rng(7);
  std::normal_distribution<Real> g;
  Matrix r(2, 2);
  for (int i = 0; i < 4; ++i) r(i / 2, i % 2) = g(rng);
  const Matrix q = Eigen::HouseholderQR<Matrix>(r).householderQ();
  const auto rot = eigen_expansion_row(p, eps, {}, &q);
  std::printf("sum c: %.12e vs %.12e\n", base.correction_sum, rot.correction_sum);
  EXPECT_LE(std::abs(rot.correction_sum - base.correction_sum), 1e-6 * std::abs(base.correction_sum));
  EXPECT_NEAR(rot.osborn.lhs, base.osborn.lhs, 1e-12);
  // the m = 2 Osborn ratio stays bounded too
  const auto next = eigen_expansion_row(p, 1.0 / 16.25);
  EXPECT_LE(std::max(base.osborn.ratio, next.osborn.ratio) / std::min(base.osborn.ratio, next.osborn.ratio), 3.0);
}

TEST(EigenExpansion, MissingTailIsReported) {
  const auto mesh = std::make_shared<const Mesh>(triangulate(domains::unit_square(), 1.0 / 8));
  const auto s0 = assemble_constant(mesh, BlockTensor::identity(1));
  try {
    first_order_eigen_correction(s0, BoundaryLayerTailSet{}, Matrix::Zero(s0.num_dofs(), 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.qualified(), "boundary_layer.MissingTail");
  }
}

TEST(LayerDecay, TailSubtractedProfileShrinksLikeSqrtEps) {
  CellSolverOptions co;
  co.resolution = 64;
  const auto cc = compute_cell_correctors(presets::laminate(), co, {false, false, false});
  // u⁰ = cos(πx₁)(1 + x₂): nonzero tangential derivative on the horizontal edges, where the laminate layer lives
  const auto grad = [](const Vec2& x, Matrix& g) {
    g(0, 0) = -pi * std::sin(pi * x.x()) * (1 + x.y());
    g(0, 1) = std::cos(pi * x.x());
  };
  const auto r = layer_decay_study(presets::laminate(), cc.chi, domains::unit_square(), grad, {1.0 / 8, 1.0 / 16, 1.0 / 32});
  for (const auto& [e, v] : r.rows) std::printf("eps %.4f  layer L2 %.4e\n", e, v);
  std::printf("layer slope %.3f\n", r.slope);
  EXPECT_GE(r.slope, 0.4);
  EXPECT_TRUE(r.pass);
}
