#include <array>
#include <cmath>

#include <gtest/gtest.h>

#include <revcomp/geodesic.hpp>
#include <revcomp/rng.hpp>

using namespace revcomp;

namespace {

using V3 = std::array<double, 3>;

V3 embed(double r, double th) { return {std::sin(r) * std::cos(th), std::sin(r) * std::sin(th), std::cos(r)}; }

// great circle through (r0, th0) leaving at angle phi0 from the meridian direction
V3 great_circle(double r0, double th0, double phi0, double s) {
  V3 P = embed(r0, th0);
  V3 er{std::cos(r0) * std::cos(th0), std::cos(r0) * std::sin(th0), -std::sin(r0)};
  V3 et{-std::sin(th0), std::cos(th0), 0};
  V3 out;
  for (int i = 0; i < 3; ++i)
    out[i] = std::cos(s) * P[i] + std::sin(s) * (std::cos(phi0) * er[i] + std::sin(phi0) * et[i]);
  return out;
}

double gap(V3 a, V3 b) { return std::hypot(a[0] - b[0], a[1] - b[1], a[2] - b[2]); }

}  // namespace

TEST(Geodesic, SphereMatchesGreatCircles) {
  auto S = make_unit_sphere();
  Rng g(7);
  for (int k = 0; k < 40; ++k) {
    double r0 = g.uniform(0.05, pi - 0.05), th0 = g.uniform(0, two_pi), ph0 = g.uniform(-pi, pi);
    double len = g.uniform(0.5, two_pi);
    auto seg = shoot(S, {r0, th0}, ph0, len);
    for (int i = 0; i <= 10; ++i) {
      double s = len * i / 10;
      auto st = seg.state_at(s);
      EXPECT_LT(gap(embed(st.r, st.theta), great_circle(r0, th0, ph0, s)), 1e-8) << k << " s=" << s;
    }
  }
}

TEST(Geodesic, PassesThroughPole) {
  auto S = make_unit_sphere();
  auto seg = shoot(S, {1.0, 0.3}, 0.0, 3.0);  // heads for the far pole
  auto st = seg.state_at(pi - 1.0 + 0.5);
  EXPECT_NEAR(st.r, pi - 0.5, 1e-9);
  EXPECT_NEAR(wrap_two_pi(st.theta), 0.3 + pi, 1e-9);
  EXPECT_NEAR(std::abs(wrap_pi(st.phi)), pi, 1e-9);
  EXPECT_EQ(seg.pole_crossings.size(), 1u);
}

TEST(Geodesic, ClairautOnEllipsoid) {
  auto S = make_prolate_ellipsoid(1, 2);
  Rng g(11);
  for (int k = 0; k < 30; ++k) {
    double r0 = g.uniform(0.1, S.L - 0.1), ph0 = g.uniform(-pi, pi), len = g.uniform(1, two_pi);
    auto seg = shoot(S, {r0, 0.0}, ph0, len);
    double nu0 = S.f(r0) * std::sin(ph0);
    double worst = 0;
    for (int i = 0; i <= 200; ++i) worst = std::max(worst, std::abs(seg.state_at(len * i / 200).nu - nu0));
    EXPECT_LT(worst / len, 1e-9) << k;
  }
}

TEST(Geodesic, UnitSpeed) {
  // |(dr, f dtheta)| = 1 along the curve, checked with central differences
  auto S = make_prolate_ellipsoid(1, 2);
  auto seg = shoot(S, {0.8, 0.0}, 1.1, 3.0);
  const double h = 1e-5;
  for (double s : {0.4, 1.2, 2.5}) {
    auto a = seg.state_at(s - h), b = seg.state_at(s + h), m = seg.state_at(s);
    double dr = (b.r - a.r) / (2 * h), dt = (b.theta - a.theta) / (2 * h);
    EXPECT_NEAR(std::hypot(dr, S.f(m.r) * dt), 1.0, 1e-7);
  }
}

TEST(Geodesic, Meridian) {
  auto S = make_prolate_ellipsoid(1, 2);
  auto m = meridian(S, 0.7);
  EXPECT_DOUBLE_EQ(m.length, 2 * S.L);
  auto a = m.state_at(1.0), b = m.state_at(S.L + 1.0);
  EXPECT_DOUBLE_EQ(a.r, 1.0);
  EXPECT_DOUBLE_EQ(a.theta, 0.7);
  EXPECT_DOUBLE_EQ(b.r, S.L - 1.0);
  EXPECT_DOUBLE_EQ(b.theta, 0.7 + pi);
}

TEST(Geodesic, ParallelPoints) {
  auto S = make_unit_sphere();
  auto p = parallel(S, 1.0, -0.5);
  EXPECT_DOUBLE_EQ(p.r, 1.0);
  EXPECT_NEAR(p.theta, two_pi - 0.5, 1e-15);
  EXPECT_THROW(parallel(S, 0.0, 0.0), std::domain_error);
}

TEST(Jacobi, SphereConjugateAtPi) {
  auto S = make_unit_sphere();
  Rng g(3);
  for (int k = 0; k < 10; ++k) {
    double r0 = g.uniform(0.1, 3.0), ph0 = g.uniform(-pi, pi);
    auto J = first_conjugate(S, {r0, 1.0}, ph0, 4.0);
    ASSERT_TRUE(J.first_conjugate.has_value());
    EXPECT_NEAR(*J.first_conjugate, pi, 1e-8);
  }
}

TEST(Jacobi, FieldMatchesSine) {
  // on the unit sphere J(s) = sin s with J(0) = 0, J'(0) = 1
  auto S = make_unit_sphere();
  auto J = first_conjugate(S, {1.2, 0.0}, 0.4, 3.0);
  for (double s : {0.3, 1.0, 2.0}) EXPECT_NEAR(J.geodesic.jacobi_at(s).first, std::sin(s), 1e-8);
  EXPECT_FALSE(J.first_conjugate.has_value());
}

TEST(Geodesic, RejectsBadInput) {
  auto S = make_unit_sphere();
  EXPECT_THROW(shoot(S, {1.0, 0.0}, 0.0, -1.0), std::invalid_argument);
  EXPECT_THROW(first_conjugate(S, {1.0, 0.0}, 0.0, 20.0), std::invalid_argument);
}
