#include <cmath>

#include <gtest/gtest.h>

#include <revcomp/metricspace.hpp>
#include <revcomp/rng.hpp>

using namespace revcomp;

namespace {

// great-circle distance with the atan2 form, accurate near 0 and pi
double sphere_distance(PolarPoint a, PolarPoint b) {
  double ax = std::sin(a.r) * std::cos(a.theta), ay = std::sin(a.r) * std::sin(a.theta), az = std::cos(a.r);
  double bx = std::sin(b.r) * std::cos(b.theta), by = std::sin(b.r) * std::sin(b.theta), bz = std::cos(b.r);
  double cx = ay * bz - az * by, cy = az * bx - ax * bz, cz = ax * by - ay * bx;
  return std::atan2(std::sqrt(cx * cx + cy * cy + cz * cz), ax * bx + ay * by + az * bz);
}

const SurfaceModel& sphere() {
  static auto S = make_unit_sphere();
  return S;
}
const SurfaceModel& ellipsoid() {
  static auto S = make_prolate_ellipsoid(1, 2);
  return S;
}

}  // namespace

TEST(Distance, SphereLawOfCosines) {
  Rng g(2024);
  for (int k = 0; k < 60; ++k) {
    PolarPoint a{g.uniform(0, pi), g.uniform(0, two_pi)}, b{g.uniform(0, pi), g.uniform(0, two_pi)};
    EXPECT_NEAR(distance_value(sphere(), a, b), sphere_distance(a, b), 1e-8) << k;
  }
}

TEST(Distance, Poles) {
  const auto& S = ellipsoid();
  EXPECT_DOUBLE_EQ(distance_value(S, {0, 0}, {S.L, 0}), S.L);
  EXPECT_DOUBLE_EQ(distance_value(S, {0, 0}, {1.2, 2.0}), 1.2);
  EXPECT_DOUBLE_EQ(distance_value(S, {1.2, 2.0}, {S.L, 0}), S.L - 1.2);
  auto d = distance(S, {0, 0}, {S.L, 0});
  EXPECT_TRUE(d.continuum);
}

TEST(Distance, EquatorIsAGeodesic) {
  // parallel at L/2 has f' = 0; its arcs are the minimizers between equator points
  const auto& S = ellipsoid();
  double fe = S.f(S.L / 2);
  EXPECT_NEAR(fe, 0.6485233924101425, 1e-12);  // lambda * a, lambda = pi / (4 E(sqrt(3)/2))
  for (double d : {0.5, 2.0, pi}) EXPECT_NEAR(distance_value(S, {S.L / 2, 0}, {S.L / 2, d}), fe * d, 1e-9) << d;
  EXPECT_EQ(distance(S, {S.L / 2, 0}, {S.L / 2, pi}).multiplicity, 2);
}

TEST(Distance, SymmetricAndRotationInvariant) {
  const auto& S = ellipsoid();
  Rng g(5);
  for (int k = 0; k < 10; ++k) {
    PolarPoint a{g.uniform(0.1, S.L - 0.1), g.uniform(0, two_pi)}, b{g.uniform(0.1, S.L - 0.1), g.uniform(0, two_pi)};
    double d = distance_value(S, a, b);
    EXPECT_NEAR(distance_value(S, b, a), d, 1e-8);
    double rot = g.uniform(0, two_pi);
    EXPECT_NEAR(distance_value(S, {a.r, a.theta + rot}, {b.r, b.theta + rot}), d, 1e-8);
    // reflection theta -> -theta
    EXPECT_NEAR(distance_value(S, {a.r, -a.theta}, {b.r, -b.theta}), d, 1e-8);
  }
}

TEST(Distance, TriangleInequality) {
  const auto& S = ellipsoid();
  Rng g(6);
  for (int k = 0; k < 8; ++k) {
    PolarPoint a{g.uniform(0, S.L), g.uniform(0, two_pi)}, b{g.uniform(0, S.L), g.uniform(0, two_pi)},
        c{g.uniform(0, S.L), g.uniform(0, two_pi)};
    EXPECT_LE(distance_value(S, a, c), distance_value(S, a, b) + distance_value(S, b, c) + 1e-9);
  }
}

TEST(Distance, MinimizersConnect) {
  const auto& S = ellipsoid();
  PolarPoint x{0.9, 0.0}, y{2.2, 2.5};
  auto d = distance(S, x, y);
  ASSERT_GE(d.multiplicity, 1);
  for (auto& m : d.minimizers) {
    EXPECT_NEAR(m.length, d.value, 1e-15);
    auto e = m.point_at(m.length);
    EXPECT_NEAR(e.r, y.r, 1e-8);
    EXPECT_NEAR(std::abs(wrap_pi(e.theta - y.theta)), 0.0, 1e-8);
  }
}

TEST(Distance, FieldMatchesOneShot) {
  const auto& S = ellipsoid();
  DistanceField F(S, {1.1, 0.4});
  for (double th : {0.0, 1.0, 3.0, 5.0})
    EXPECT_NEAR(F.distance({2.0, th}), distance_value(S, {1.1, 0.4}, {2.0, th}), 1e-10);
}

TEST(Distance, NModelOnRoundSphere) {
  // dr^2 + sin^2 r dTheta^2 over S^2 is the unit 3-sphere
  const auto& S = sphere();
  std::vector<double> u{1, 0, 0}, v{0.6, 0.8, 0};
  double rx = 0.7, ry = 2.1;
  double expect = std::acos(std::cos(rx) * std::cos(ry) + std::sin(rx) * std::sin(ry) * 0.6);
  EXPECT_NEAR(distance_nmodel(S, 3, rx, u, ry, v), expect, 1e-9);
  EXPECT_THROW(distance_nmodel(S, 3, rx, {1, 1, 0}, ry, v), std::invalid_argument);
}

TEST(CutLocus, SphereAntipode) {
  auto rep = cut_locus(sphere(), {1.0, 0.3}, 12);
  EXPECT_EQ(rep.failures, 0);
  for (auto& c : rep.cut_points) {
    EXPECT_NEAR(c.cut_time, pi, 1e-7);
    EXPECT_NEAR(c.point.r, pi - 1.0, 1e-7);
  }
  EXPECT_LT(rep.max_meridian_deviation, 1e-7);
}

TEST(CutLocus, EllipsoidOppositeMeridian) {
  auto rep = cut_locus(ellipsoid(), {1.0, 0.0}, 12);
  EXPECT_EQ(rep.failures, 0);
  EXPECT_LT(rep.max_meridian_deviation, 1e-6);
  for (auto& c : rep.cut_points) EXPECT_LE(c.cut_time, c.conjugate + 1e-6);
}

TEST(Diameter, EllipsoidIsPi) {
  auto d = diameter_report(ellipsoid(), 100);
  EXPECT_NEAR(d.value, pi, 1e-9);
  EXPECT_EQ(d.failures, 0);
  EXPECT_THROW(diameter_report(ellipsoid(), 10), std::invalid_argument);
}

TEST(Parallel, SphereMonotone) {
  std::vector<std::pair<double, double>> pairs{{0.0, 0.5}, {0.5, 1.5}, {1.5, 3.0}, {3.0, pi}};
  auto rep = parallel_monotonicity_check(sphere(), 1.0, 2.0, pairs);
  ASSERT_EQ(rep.margins.size(), pairs.size());
  for (size_t i = 0; i < pairs.size(); ++i) {
    double want = sphere_distance({1.0, 0}, {2.0, pairs[i].second}) - sphere_distance({1.0, 0}, {2.0, pairs[i].first});
    EXPECT_NEAR(rep.margins[i], want, 1e-8);
  }
  EXPECT_TRUE(rep.all_positive());
  EXPECT_THROW(parallel_monotonicity_check(sphere(), 1.0, 2.0, {{1.0, 0.5}}), std::domain_error);
}

TEST(Distance, TargetsNearAGrazingRay) {
  // y sits at the lowest point of a geodesic leaving the equator, and a pair close to a pole
  auto ell_k1 = make_prolate_ellipsoid(1, 2, Normalize::curvature);
  struct Case {
    const SurfaceModel* S;
    PolarPoint x, y;
  };
  for (auto [S, x, y] : {Case{&ellipsoid(), {pi / 2, 0.0}, {1.5628065751813762, 3.1415926565388554}},
                         Case{&ell_k1, {0.2291829293469958, 0.0}, {0.12770312450288721, 0.76640566702283974}}}) {
    auto d = distance(*S, x, y);
    ASSERT_GE(d.multiplicity, 1);
    for (auto& m : d.minimizers) {
      auto e = m.point_at(m.length);
      EXPECT_NEAR(e.r, y.r, 1e-8);
      EXPECT_NEAR(std::abs(wrap_pi(e.theta - y.theta)), 0.0, 1e-8);
    }
    EXPECT_NEAR(distance_value(*S, y, x), d.value, 1e-9);
  }
}
