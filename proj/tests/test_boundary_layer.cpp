#include "homog/boundary_layer/tails.hpp"
#include "homog/spectral/eigen.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

using namespace homog;

namespace {

const CellCorrectors& laminate_correctors() {
  static const CellCorrectors cc = [] {
    CellSolverOptions o;
    o.resolution = 128;
    return compute_cell_correctors(presets::laminate(), o, {false, false, false});
  }();
  return cc;
}

std::array<GridField, 2> zero_chi(int nc = 1) {
  return {GridField(8, nc, nc), GridField(8, nc, nc)};
}

Real max_diff(const Matrix& a, const Matrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace

TEST(Strip, IdentityGivesZeroField) {
  const auto chi = compute_cell_correctors(presets::identity(), {}, {false, false, false}).chi;
  const auto f = solve_strip(presets::identity(), chi[0], Vec2(0, 1));
  EXPECT_EQ(f.values.cwiseAbs().maxCoeff(), 0.0);
  const auto t = extract_tail(f);
  EXPECT_EQ(t.tail.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_TRUE(t.trivial);
  EXPECT_TRUE(t.decays);
}

TEST(Strip, ConstantDataIsReproduced) {
  BlockTensor a(2);
  a.matrix() << 2, 0.3, 0.1, 0.2, 0.3, 1.5, 0.2, 0.1, 0.1, 0.2, 2.5, 0.4, 0.2, 0.1, 0.4, 1.8;
  Matrix g(2, 2);
  g << 0.7, -0.2, 1.1, 0.05;
  StripOptions o;
  o.points_per_period = 32;
  for (const Vec2& n : {Vec2(0, 1), Vec2(Vec2(1, 2) / std::sqrt(5.0))}) {
    const auto f = solve_strip(PeriodicTensor::constant("c", a), bl::constant_data(g), n, o);
    for (int i1 = 0; i1 < f.m; i1 += 7)
      for (int i2 = 0; i2 <= f.ny; i2 += 13) EXPECT_LE(max_diff(f.at(i1, i2), g), 1e-10);
    EXPECT_LE(max_diff(extract_tail(f).tail, g), 1e-10);
  }
}

TEST(Strip, RotatedCoefficientIsPeriodic) {
  const auto a = presets::anisotropic_smooth();
  const Vec2 n = Vec2(1, 2) / std::sqrt(5.0);
  const Mat2 m = geometry::rotation_to_halfspace(n);
  const Real p = bl::rational_period(n);
  EXPECT_NEAR(p, std::sqrt(5.0), 1e-14);
  const Vec2 y0(0.31, 0.77);
  for (Real z1 : {0.0, 0.37, 1.9})
    for (Real z2 : {0.0, 0.5, 3.3}) {
      const Vec2 z(z1, z2);
      const Matrix a0 = a(m * z + y0).matrix();
      const Matrix a1 = a(m * (z + Vec2(p, 0)) + y0).matrix();
      EXPECT_LE(max_diff(a0, a1), 1e-10);
    }
}

TEST(Strip, BottomDataIsCorrectorTrace) {
  const auto& cc = laminate_correctors();
  StripOptions o;
  o.origin = Vec2(0.125, 0.5);
  const Vec2 n = Vec2(-1, 1) / std::sqrt(2.0);
  const auto f = solve_strip(presets::laminate(), cc.chi[0], n, o);
  for (int i1 = 0; i1 < f.m; ++i1) EXPECT_LE(max_diff(f.at(i1, 0), cc.chi[0](f.y(i1, 0))), 1e-12);
}

TEST(Strip, LaminateTailSelfConvergesAndIsTruncationIndependent) {
  const auto& cc = laminate_correctors();
  const auto a = presets::laminate();
  StripOptions base;
  const auto t0 = extract_tail(solve_strip(a, cc.chi[0], Vec2(0, 1), base));
  EXPECT_TRUE(t0.decays);
  EXPECT_GT(t0.rate, 0.0);
  EXPECT_LE(t0.lateral_variation, 1e-8);
  StripOptions tall = base;
  tall.height_periods = 20;
  const auto t1 = extract_tail(solve_strip(a, cc.chi[0], Vec2(0, 1), tall));
  EXPECT_LE(max_diff(t0.tail, t1.tail), 1e-6);
  StripOptions fine = tall;
  fine.points_per_period = 64;
  const auto t2 = extract_tail(solve_strip(a, cc.chi[0], Vec2(0, 1), fine));
  EXPECT_LE(max_diff(t0.tail, t2.tail), 1e-4);
}

TEST(Strip, DecayProfileNonIncreasingWithExponentialFit) {
  const auto& cc = laminate_correctors();
  StripOptions o;
  o.origin = Vec2(0.3, 0.0);
  const auto t = extract_tail(solve_strip(presets::laminate(), cc.chi[0], Vec2(1, 1) / std::sqrt(2.0), o));
  ASSERT_GE(t.fit_points, 2);
  EXPECT_GT(t.rate, 0.0);
  for (int k = 1; k < t.smoothed.size(); ++k)
    EXPECT_LE(t.smoothed[k], 1.05 * std::max(t.smoothed[k - 1], 1e-12 * t.smoothed[0]));
}

TEST(Strip, TailIsLinearInData) {
  const auto& cc = laminate_correctors();
  const auto a = presets::checkerboard_smooth();
  const Vec2 n(0, 1);
  const StripData phi1 = bl::chi_data(cc.chi[0]);
  const StripData phi2 = [](const Vec2& y, Matrix& out) { out = Matrix::Constant(1, 1, std::sin(two_pi * y.x()) + 0.4); };
  const StripData sum = [&](const Vec2& y, Matrix& out) {
    Matrix b;
    phi1(y, out);
    phi2(y, b);
    out += b;
  };
  const auto f = solve_strips(a, {phi1, phi2, sum}, n);
  const Matrix t1 = extract_tail(f[0]).tail, t2 = extract_tail(f[1]).tail, t12 = extract_tail(f[2]).tail;
  EXPECT_LE(max_diff(t12, t1 + t2), 1e-10);
}

TEST(Strip, TailInvariantUnderLateralTranslation) {
  const auto& cc = laminate_correctors();
  const auto a = presets::checkerboard_smooth();
  StripOptions o;
  const auto f0 = solve_strip(a, cc.chi[0], Vec2(0, 1), o);
  // shift along the edge by an even number of grid cells: the discrete problem is a relabeling
  o.origin = Vec2(4.0 / 32, 0.0);
  const auto f1 = solve_strip(a, cc.chi[0], Vec2(0, 1), o);
  EXPECT_LE(max_diff(extract_tail(f0).tail, extract_tail(f1).tail), 1e-8);
}

TEST(Strip, ResolutionAndHeightChecks) {
  StripOptions o;
  o.points_per_period = 16;
  try {
    solve_strip(presets::laminate(), zero_chi()[0], Vec2(0, 1), o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.qualified(), "boundary_layer.UnresolvedCell");
  }
  o.min_points_per_period = 16;
  EXPECT_NO_THROW(solve_strip(presets::laminate(), zero_chi()[0], Vec2(0, 1), o));
  o.height_periods = 5;
  EXPECT_THROW(solve_strip(presets::laminate(), zero_chi()[0], Vec2(0, 1), o), Error);
}

TEST(Strip, NoDecayIsReportedOrThrown) {
  // a hand-made field that grows with z₂
  StripField f;
  f.period = 1;
  f.m = 4;
  f.ny = 40;
  f.spacing = 0.25;
  f.height = 10;
  f.rotation.setIdentity();
  f.origin.setZero();
  f.values.resize(f.num_nodes(), 1);
  for (int i1 = 0; i1 < f.m; ++i1)
    for (int i2 = 0; i2 <= f.ny; ++i2) f.values(f.node(i1, i2), 0) = (i2 < 20 ? i2 : 0) * (i1 % 2 ? 1.0 : -1.0);
  TailOptions lax;
  lax.strict = false;
  EXPECT_FALSE(extract_tail(f, lax).decays);
  try {
    extract_tail(f);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.qualified(), "boundary_layer.NoDecay");
  }
}

TEST(Strip, CsvSchemas) {
  const auto& cc = laminate_correctors();
  const auto f = solve_strip(presets::laminate(), cc.chi[0], Vec2(0, 1));
  const auto dir = std::filesystem::temp_directory_path();
  write_strip_csv((dir / "homog_strip.csv").string(), f);
  write_decay_csv((dir / "homog_decay.csv").string(), extract_tail(f));
  std::string line;
  std::ifstream a(dir / "homog_strip.csv");
  std::getline(a, line);
  EXPECT_EQ(line, "z1,z2,component,value");
  std::ifstream b(dir / "homog_decay.csv");
  std::getline(b, line);
  EXPECT_EQ(line, "z2,sup_deviation");
}

TEST(Diophantine, TrivialCases) {
  DiophantineOptions d;
  d.depth = 4;
  StripOptions s;
  s.points_per_period = s.min_points_per_period = 8;
  const Vec2 n = Vec2(1, (1 + std::sqrt(5.0)) / 2).normalized();
  const auto rec = diophantine_tail(presets::identity(), zero_chi(), n, d, s);
  for (const auto& t : rec.tails) EXPECT_EQ(t[0].cwiseAbs().maxCoeff(), 0.0);
  // constant bottom data: every convergent gives that constant
  std::array<GridField, 2> c = zero_chi();
  c[0].data().setConstant(0.3);
  c[1].data().setConstant(-1.2);
  const auto rc = diophantine_tail(presets::laminate(), c, n, d, s);
  for (const auto& t : rc.tails) {
    EXPECT_NEAR(t[0](0, 0), 0.3, 1e-10);
    EXPECT_NEAR(t[1](0, 0), -1.2, 1e-10);
  }
}

TEST(Diophantine, GoldenSlopeLaminateIsCauchy) {
  DiophantineOptions d;
  d.depth = 5;
  d.strict = false;
  StripOptions s;
  s.points_per_period = s.min_points_per_period = 16;
  const Vec2 n = Vec2(1, (1 + std::sqrt(5.0)) / 2).normalized();
  const auto rec = diophantine_tail(presets::laminate(), laminate_correctors().chi, n, d, s);
  ASSERT_EQ(rec.differences.size(), 4u);
  for (std::size_t k = 0; k < rec.differences.size(); ++k) std::printf("diff %zu: %.3e\n", k, rec.differences[k]);
  EXPECT_LT(rec.differences.back(), rec.differences.front());
}

TEST(HomogenizedBl, ZeroTailsGiveZero) {
  auto mesh = std::make_shared<const Mesh>(triangulate(domains::unit_square(), 1.0 / 8));
  const auto s0 = assemble_constant(mesh, BlockTensor::identity(1));
  BoundaryLayerTailSet tails;
  for (int k = 0; k < 4; ++k) tails.edges[k].tail = {Matrix::Zero(1, 1), Matrix::Zero(1, 1)};
  const Vector u = interpolate(*mesh, 1, [](const Vec2& x, Eigen::Ref<Vector> o) { o[0] = x.x() * x.y(); });
  const auto r = solve_homogenized_bl(s0, tails, recover_gradient(*mesh, u));
  EXPECT_EQ(r.field.cwiseAbs().maxCoeff(), 0.0);
  tails.edges.erase(2);
  try {
    solve_homogenized_bl(s0, tails, recover_gradient(*mesh, u));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.qualified(), "boundary_layer.MissingTail");
  }
}

TEST(HomogenizedBl, MaximumPrincipleForAffineData) {
  auto mesh = std::make_shared<const Mesh>(triangulate(domains::unit_triangle(), 1.0 / 16));
  const auto s0 = assemble_constant(mesh, BlockTensor::scalar(1, 1.7));
  BoundaryLayerTailSet tails;
  const Real v[3][2] = {{0.5, -0.2}, {1.0, 0.3}, {-0.4, 0.9}};
  for (int k = 0; k < 3; ++k) tails.edges[k].tail = {Matrix::Constant(1, 1, v[k][0]), Matrix::Constant(1, 1, v[k][1])};
  const Vector u = interpolate(*mesh, 1, [](const Vec2& x, Eigen::Ref<Vector> o) { o[0] = 2 * x.x() - 3 * x.y(); });
  const auto r = solve_homogenized_bl(s0, tails, recover_gradient(*mesh, u));
  Real bmax = 0;
  for (int n : mesh->boundary_nodes()) bmax = std::max(bmax, std::abs(r.field[n]));
  EXPECT_GT(bmax, 0.0);
  EXPECT_LE(r.field.cwiseAbs().maxCoeff(), bmax + 1e-12);
}

TEST(HomogenizedBl, LaminateEigenvectorSelfConvergence) {
  // shifted laminate, so the tails on the vertical edges do not vanish
  const auto a = presets::laminate().shifted(Vec2(0.25, 0));
  CellSolverOptions co;
  co.resolution = 128;
  const auto cc = compute_cell_correctors(a, co, {false, false, false});
  const auto square = domains::unit_square();
  const auto tails = compute_tails(a, cc.chi, square, 1.0 / 8);
  for (int k = 0; k < 4; ++k)
    if (square.edges()[k].normal.isApprox(Vec2(1, 0)))
      EXPECT_NEAR(tails.at(k).tail[0](0, 0), cc.chi[0](Vec2::Zero())(0, 0), 1e-10);  // constant data on x₁ = 0
  std::vector<Vector> sols;
  std::vector<std::shared_ptr<const Mesh>> meshes;
  for (Real h : {1.0 / 32, 1.0 / 64}) {
    auto mesh = std::make_shared<const Mesh>(triangulate(square, h));
    const auto s0 = assemble_constant(mesh, cc.homogenized);
    const auto ep = solve_eigenpairs(s0, 1);
    Vector v = s0.extend(ep.vectors.col(0));
    if (v.sum() < 0) v = -v;
    sols.push_back(solve_homogenized_bl(s0, tails, recover_gradient(*mesh, v)).field);
    meshes.push_back(mesh);
  }
  TriangleLocator loc(*meshes[0]);
  const NodalFunction coarse = [&](const Vec2& x, Eigen::Ref<Vector> o) {
    const auto hit = loc.locate(x, 1e-9);
    const auto& tr = meshes[0]->triangles[hit->first];
    o[0] = 0;
    for (int k = 0; k < 3; ++k) o[0] += hit->second[k] * sols[0][tr[k]];
  };
  const Real diff = error_norms(*meshes[1], sols[1], 1, coarse).l2;
  const Real size = norms(*meshes[1], sols[1]).l2;
  std::printf("theta* L2 %.4e, half-h change %.3e\n", size, diff);
  EXPECT_GT(size, 1e-3);
  EXPECT_LE(diff, 2e-3);
}

TEST(OscillatingBl, ZeroAndConstantCases) {
  auto mesh = std::make_shared<const Mesh>(triangulate(domains::unit_square(), 1.0 / 32));
  const auto s = assemble_oscillating(mesh, presets::laminate(), 0.125);
  const auto z = solve_oscillating_bl(s, 0.125, [](const Vec2&, Eigen::Ref<Vector> o) { o.setZero(); });
  EXPECT_EQ(z.field.cwiseAbs().maxCoeff(), 0.0);
  // constant A, Φ constant, g affine: the plain Dirichlet solve
  const auto sc = assemble_constant(mesh, BlockTensor::scalar(1, 2.0));
  const OscillatingData data = [](const Vec2& x, Eigen::Ref<Vector> o) { o[0] = 0.6 * (1 + 2 * x.x() - x.y()); };
  const auto r = solve_oscillating_bl(sc, 0.125, data);
  const Vector g = interpolate(*mesh, 1, [](const Vec2& x, Eigen::Ref<Vector> o) { o[0] = 0.6 * (1 + 2 * x.x() - x.y()); });
  EXPECT_LE((r.field - g).cwiseAbs().maxCoeff(), 1e-10);  // affine data is discretely harmonic
  try {
    solve_oscillating_bl(s, 1.0 / 64, data);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.qualified(), "boundary_layer.UnresolvedOscillation");
  }
}

TEST(OscillatingBl, ApproachesHomogenizedLayer) {
  const auto a = presets::laminate().shifted(Vec2(0.25, 0));
  CellSolverOptions co;
  co.resolution = 128;
  const auto cc = compute_cell_correctors(a, co, {false, false, false});
  const auto square = domains::unit_square();
  const NodalFunction u0 = [](const Vec2& x, Eigen::Ref<Vector> o) { o[0] = std::cos(pi * x.x()) * (1 + x.y()); };
  std::vector<Real> err;
  for (Real eps : {0.25, 0.125}) {
    auto mesh = std::make_shared<const Mesh>(triangulate(square, eps / 16));
    const Vector u = interpolate(*mesh, 1, u0);
    const Matrix grad = recover_gradient(*mesh, u);
    const auto tails = compute_tails(a, cc.chi, square, eps);
    const auto star = solve_homogenized_bl(assemble_constant(mesh, cc.homogenized), tails, grad).field;
    const auto s = assemble_oscillating(mesh, a, eps);
    const auto osc = solve_oscillating_bl(s, eps, bl::corrector_trace(cc.chi, eps, *mesh, grad, 1)).field;
    err.push_back(norms(*mesh, osc - star).l2);
    std::printf("eps %.4f  |theta_eps - theta*| = %.4e  |theta*| = %.4e\n", eps, err.back(), norms(*mesh, star).l2);
  }
  EXPECT_LT(err[1], err[0]);
}
