#include "homog/geometry/polygon.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace homog;

namespace {

const Real golden = (1.0 + std::sqrt(5.0)) / 2.0;

// Brute-force continued fraction of a/b for integers, as an oracle.
std::vector<Rational> integer_convergents(std::int64_t a, std::int64_t b) {
  std::vector<Rational> out;
  std::int64_t p0 = 0, q0 = 1, p1 = 1, q1 = 0;
  while (b != 0) {
    std::int64_t t = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --t;
    const std::int64_t r = a - t * b;
    const std::int64_t p = t * p1 + p0, q = t * q1 + q0;
    out.push_back({p, q});
    p0 = p1, q0 = q1, p1 = p, q1 = q;
    a = b;
    b = r;
  }
  return out;
}

}  // namespace

TEST(BuildPolygon, UnitSquare) {
  auto d = domains::unit_square();
  ASSERT_EQ(d.edges().size(), 4u);
  const Vec2 normals[4] = {{0, 1}, {-1, 0}, {0, -1}, {1, 0}};
  const Real offsets[4] = {0, -1, -1, 0};
  for (int k = 0; k < 4; ++k) {
    EXPECT_LE((d.edges()[k].normal - normals[k]).norm(), 1e-15);
    EXPECT_NEAR(d.edges()[k].offset, offsets[k], 1e-15);
  }
  EXPECT_NEAR(d.area(), 1.0, 1e-15);
}

TEST(BuildPolygon, RightTriangleHypotenuse) {
  auto d = domains::unit_triangle();
  const auto& h = d.edges()[1];
  EXPECT_LE((h.normal - Vec2(-1, -1) / std::sqrt(2.0)).norm(), 1e-15);
  EXPECT_NEAR(h.offset, -1 / std::sqrt(2.0), 1e-15);
}

TEST(BuildPolygon, LShapeIsNonConvex) {
  try {
    build_polygon({{0, 0}, {2, 0}, {2, 1}, {1, 1}, {1, 2}, {0, 2}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonConvex);
    EXPECT_NE(std::string(e.what()).find("vertex 3"), std::string::npos);
  }
}

TEST(BuildPolygon, DegenerateEdge) {
  try {
    build_polygon({{0, 0}, {1, 0}, {1, 0}, {0, 1}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateEdge);
  }
}

TEST(BuildPolygon, ClockwiseInputIsReoriented) {
  auto d = build_polygon({{0, 0}, {0, 1}, {1, 1}, {1, 0}});
  EXPECT_NEAR(d.area(), 1.0, 1e-15);
  for (const auto& e : d.edges()) EXPECT_GT(e.signed_distance(Vec2(0.5, 0.5)), 0.0);
}

TEST(BuildPolygon, InvariantsOnRandomConvexPolygons) {
  std::mt19937 rng(11);
  std::uniform_real_distribution<Real> u(0, 1);
  for (int trial = 0; trial < 50; ++trial) {
    const int m = 3 + trial % 6;
    std::vector<Real> ang(m);
    for (auto& a : ang) a = two_pi * u(rng);
    std::sort(ang.begin(), ang.end());
    std::vector<Vec2> v;
    for (Real a : ang) v.emplace_back(std::cos(a), 0.7 * std::sin(a));
    PolygonDomain d;
    try {
      d = build_polygon(v);
    } catch (const Error&) {
      continue;  // nearly coincident angles
    }
    EXPECT_NEAR(d.exterior_angle_sum(), two_pi, 1e-10);
    for (const auto& e : d.edges()) {
      EXPECT_NEAR(e.normal.norm(), 1.0, 1e-14);
      for (const auto& x : d.vertices()) EXPECT_GE(e.signed_distance(x), -1e-12);
    }
    for (const auto& x : d.vertices()) {
      int on = 0;
      for (const auto& e : d.edges()) on += std::abs(e.signed_distance(x)) <= 1e-12;
      EXPECT_EQ(on, 2);
    }
  }
}

TEST(ClassifyNormal, AxisNormalIsRational) {
  auto sc = geometry::classify_normal(Vec2(0, 1));
  EXPECT_EQ(sc.kind, SlopeKind::Rational);
  EXPECT_EQ(sc.p, 0);
  EXPECT_EQ(sc.q, 1);
}

TEST(ClassifyNormal, SlopeOneHalf) {
  auto sc = geometry::classify_normal(Vec2(1, 2) / std::sqrt(5.0));
  EXPECT_EQ(sc.kind, SlopeKind::Rational);
  EXPECT_EQ(sc.p, 1);
  EXPECT_EQ(sc.q, 2);
  EXPECT_NEAR(sc.q * (1 / std::sqrt(5.0)) - sc.p * (2 / std::sqrt(5.0)), 0.0, 1e-12);
}

TEST(ClassifyNormal, GoldenSlopeCertifiedAgainstExhaustiveScan) {
  const Vec2 n = Vec2(1, golden).normalized();
  auto sc = geometry::classify_normal(n, {0.2, 1.0, 100});
  EXPECT_EQ(sc.kind, SlopeKind::DiophantineCertified);
  // independent scan over the full box, filtered to the disc
  Real worst = 1e300;
  for (int a = -100; a <= 100; ++a)
    for (int b = -100; b <= 100; ++b) {
      if ((a == 0 && b == 0) || a * a + b * b > 100 * 100) continue;
      worst = std::min(worst, std::abs(n.x() * a + n.y() * b) * std::hypot(Real(a), Real(b)));
    }
  EXPECT_DOUBLE_EQ(sc.worst_divisor, worst);
  EXPECT_GE(worst, 0.2);
}

TEST(ClassifyNormal, UndeterminedReportsFailingXi) {
  // close to slope 1/3 but not rational within the denominator bound
  const Vec2 n = Vec2(1, 3 + 1e-5 * std::sqrt(2.0)).normalized();
  auto sc = geometry::classify_normal(n, {0.2, 1.0, 20});
  EXPECT_EQ(sc.kind, SlopeKind::Undetermined);
  EXPECT_LT(sc.worst_divisor, 0.2);
  EXPECT_EQ(std::abs(sc.worst_xi[0]), 3 * std::abs(sc.worst_xi[1]));
}

TEST(ClassifyNormal, SignInvariantKind) {
  for (Vec2 n : {Vec2(0, 1), Vec2(1, 2).normalized(), Vec2(1, golden).normalized(), Vec2(3, -7).normalized()}) {
    EXPECT_EQ(geometry::classify_normal(n).kind, geometry::classify_normal(-n).kind);
  }
}

TEST(ClassifyNormal, ExactIntegerNormalOverridesScan) {
  auto d = PolygonDomain::build({{0, 0}, {2, 1}, {0, 1}}, {std::array<std::int64_t, 2>{-2, 4}, std::nullopt, std::nullopt});
  EXPECT_EQ(d.classification()[0].kind, SlopeKind::Rational);
  EXPECT_EQ(d.classification()[0].p, -1);
  EXPECT_EQ(d.classification()[0].q, 2);
  EXPECT_EQ(d.classification()[1].p, 0);  // top edge normal (0,-1)
  EXPECT_EQ(d.classification()[1].q, -1);
  EXPECT_THROW(PolygonDomain::build({{0, 0}, {1, 0}, {0, 1}}, {std::array<std::int64_t, 2>{1, 1}, std::nullopt, std::nullopt}),
               Error);
}

TEST(RotationToHalfspace, Examples) {
  EXPECT_LE((geometry::rotation_to_halfspace(Vec2(0, 1)) - Mat2::Identity()).norm(), 0.0);
  const Mat2 q = geometry::rotation_to_halfspace(Vec2(1, 0));
  Mat2 expect;
  expect << 0, 1, -1, 0;
  EXPECT_EQ(q, expect);
  const Vec2 n = Vec2(1, 1) / std::sqrt(2.0);
  const Mat2 m = geometry::rotation_to_halfspace(n);
  EXPECT_LE((m * Vec2(0, 1) - n).norm(), 1e-15);
  const Real angle = std::atan2(m(1, 0), m(0, 0));
  EXPECT_NEAR(angle, -pi / 4, 1e-15);
}

TEST(RotationToHalfspace, OrthogonalOnRandomNormals) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<Real> u(0, two_pi);
  for (int t = 0; t < 100; ++t) {
    const Real a = u(rng);
    const Vec2 n(std::cos(a), std::sin(a));
    const Mat2 m = geometry::rotation_to_halfspace(n);
    EXPECT_LE((m.transpose() * m - Mat2::Identity()).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_NEAR(m.determinant(), 1.0, 1e-14);
    EXPECT_LE((m * Vec2(0, 1) - n).norm(), 1e-14);
  }
}

TEST(RationalApproximation, Examples) {
  EXPECT_EQ(geometry::convergents(0.5), (std::vector<Rational>{{0, 1}, {1, 2}}));
  EXPECT_EQ(geometry::convergents(0.0), (std::vector<Rational>{{0, 1}}));
  const auto g = geometry::convergents(golden, 12);
  // all partial quotients 1: ratios of consecutive Fibonacci numbers
  std::int64_t lo = 1, hi = 1;
  for (const auto& r : g) {
    EXPECT_EQ(r, (Rational{hi, lo}));
    const std::int64_t next = lo + hi;
    lo = hi;
    hi = next;
  }
  EXPECT_EQ(g[0], (Rational{1, 1}));
  EXPECT_EQ(g[1], (Rational{2, 1}));
  EXPECT_EQ(g[2], (Rational{3, 2}));
  EXPECT_EQ(g[3], (Rational{5, 3}));
  EXPECT_EQ(g[4], (Rational{8, 5}));
  EXPECT_THROW(geometry::rational_approximation(Vec2(1, 0)), Error);
}

TEST(RationalApproximation, MatchesIntegerOracleAndClassicalBound) {
  std::mt19937 rng(5);
  std::uniform_int_distribution<int> u(1, 5000);
  for (int t = 0; t < 200; ++t) {
    const std::int64_t a = u(rng) - 2500, b = u(rng);
    const auto got = geometry::convergents(Real(a) / Real(b));
    const auto want = integer_convergents(a, b);
    ASSERT_LE(got.size(), want.size());
    for (std::size_t j = 0; j < got.size(); ++j) {
      EXPECT_EQ(got[j], want[j]);
      EXPECT_EQ(std::gcd(got[j].p, got[j].q), 1);
    }
  }
  for (Real s : {golden, std::sqrt(2.0), pi, -std::exp(1.0)}) {
    const auto c = geometry::convergents(s, 15);
    for (const auto& r : c) EXPECT_LT(std::abs(s - r.value()), 1.0 / (Real(r.q) * Real(r.q)));
  }
}
