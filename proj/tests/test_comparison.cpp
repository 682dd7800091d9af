#include <cmath>

#include <gtest/gtest.h>

#include <revcomp/comparison.hpp>

using namespace revcomp;

namespace {

const SurfaceModel& sphere() {
  static auto S = make_unit_sphere();
  return S;
}
const SurfaceModel& ell_k1() {
  static auto S = make_prolate_ellipsoid(1, 2, Normalize::curvature);
  return S;
}

// spherical law of cosines for the angle opposite side `opp`
double sph_angle(double opp, double s1, double s2) {
  return std::acos((std::cos(opp) - std::cos(s1) * std::cos(s2)) / (std::sin(s1) * std::sin(s2)));
}

}  // namespace

TEST(AngleFunction, SphereLawOfCosines) {
  for (auto [a, b, c] : {std::array<double, 3>{1.0, 1.5, 1.2}, {0.3, 0.2, 0.4}, {2.5, 1.0, 2.0}, {1.0, 2.9, 2.0}})
    EXPECT_NEAR(angle_function(sphere(), {a, b, c}), sph_angle(b, a, c), 1e-9) << a << " " << b << " " << c;
}

TEST(AngleFunction, OutsideT) {
  EXPECT_THROW(angle_function(sphere(), {1.0, 0.1, 1.5}), std::domain_error);   // b < |a - c|
  EXPECT_THROW(angle_function(sphere(), {1.0, 3.0, 2.5}), std::domain_error);   // beyond d(mu_0(a), mu_pi(c))
  EXPECT_THROW(angle_function(sphere(), {-1.0, 1.0, 1.0}), std::domain_error);
  EXPECT_THROW(angle_function(sphere(), {4.0, 1.0, 1.0}), std::domain_error);
  EXPECT_FALSE(in_T(sphere(), {1.0, 0.1, 1.5}).inside);
  EXPECT_TRUE(in_T(sphere(), {1.0, 1.0, 1.5}).inside);
}

TEST(Triangle, SphereVertexAngles) {
  auto T = make_triangle(sphere(), {1.0, 0.2}, {1.8, 1.5});
  EXPECT_NEAR(T.b, std::acos(std::cos(1.0) * std::cos(1.8) + std::sin(1.0) * std::sin(1.8) * std::cos(1.3)), 1e-9);
  EXPECT_NEAR(T.angles[0], 1.3, 1e-15);
  EXPECT_NEAR(T.angles[1], sph_angle(T.c, T.a, T.b), 1e-7);
  EXPECT_NEAR(T.angles[2], sph_angle(T.a, T.b, T.c), 1e-7);
  EXPECT_THROW(make_triangle(sphere(), {0.0, 0.0}, {1.0, 1.0}), std::domain_error);
}

TEST(Toponogov, SphereAgainstItselfIsEquality) {
  auto T = make_triangle(sphere(), {1.2, 0.0}, {2.0, 2.0});
  auto r = toponogov_check(sphere(), sphere(), T);
  EXPECT_TRUE(r.equality_case);
  for (double m : r.angle_margins) EXPECT_NEAR(m, 0.0, 1e-7);
  EXPECT_EQ(r.constraints_held(), 9);
}

TEST(Toponogov, SphereOverCurvatureEllipsoid) {
  for (auto [x, y] : {std::pair<PolarPoint, PolarPoint>{{1.0, 0.0}, {2.0, 1.0}}, {{0.5, 0.0}, {2.8, 2.5}}}) {
    auto T = make_triangle(sphere(), x, y);
    auto r = toponogov_check(sphere(), ell_k1(), T);
    EXPECT_FALSE(r.falsified);
    EXPECT_GE(r.min_margin(), -1e-6);
    EXPECT_LE(r.max_side_residual(), 1e-7);
    EXPECT_EQ(r.constraints_held(), 9);
  }
}

TEST(Toponogov, RefusesWithoutRadialBound) {
  auto T = make_triangle(ell_k1(), {1.0, 0.0}, {2.0, 1.0});
  EXPECT_THROW(toponogov_check(ell_k1(), sphere(), T), std::invalid_argument);
}

TEST(Theta, MonotoneAndLimit) {
  auto p = theta_monotonicity_check(sphere(), ell_k1(), {1.3, 0.0}, {2.0, 1.4}, 16);
  EXPECT_TRUE(p.monotone(1e-6));
  EXPECT_LT(p.limit_error(), 1e-4);
  EXPECT_EQ(p.t.size(), 16u);
  auto q = theta_monotonicity_check(sphere(), sphere(), {1.3, 0.0}, {2.0, 1.4}, 8);
  EXPECT_LT(q.total_variation, 1e-8);
  EXPECT_NEAR(q.theta.front(), 1.4, 1e-8);
}

TEST(FirstVariation, TwoMeridiansClosedForm) {
  // psi(t) = d(mu_0(t), mu_1(t)): cos psi = cos^2 t + sin^2 t cos 1
  auto mu = meridian(sphere(), 0.0), eta = meridian(sphere(), 1.0);
  double t0 = 1.0;
  double psi = std::acos(std::cos(t0) * std::cos(t0) + std::sin(t0) * std::sin(t0) * std::cos(1.0));
  double dpsi = std::sin(2 * t0) * (1 - std::cos(1.0)) / std::sin(psi);
  auto r = first_variation_check(sphere(), mu, eta, t0, 1e-4);
  EXPECT_NEAR(r.psi_value, psi, 1e-9);
  EXPECT_NEAR(r.analytic_derivative, dpsi, 1e-7);
  EXPECT_NEAR(r.numeric_derivative, dpsi, 1e-4);
  EXPECT_EQ(r.multiplicity, 1);
}

TEST(FirstVariation, LadderOnEllipsoid) {
  auto S = make_prolate_ellipsoid(1, 2);
  auto mu = shoot(S, {1.0, 0.0}, 0.8, 1.5), eta = shoot(S, {2.0, 1.5}, -0.5, 1.5);
  std::vector<double> hs(richardson_steps.begin(), richardson_steps.end());
  auto L = first_variation_ladder(S, mu, eta, 0.5, hs);
  EXPECT_LT(L.extrapolated_residual, 1e-5);
  ASSERT_TRUE(L.order_measured);
  EXPECT_GT(L.order, 0.9);
  EXPECT_THROW(first_variation_ladder(S, mu, eta, 1.4999, hs), std::domain_error);
}

TEST(Lipschitz, SphereBox) {
  auto rep = lipschitz_probe(sphere(), {1.0, 1.2, 1.1, 0.1}, 12);
  EXPECT_GT(rep.pairs, 0);
  EXPECT_TRUE(std::isfinite(rep.constant));
  EXPECT_GT(rep.constant, 0.0);
}

TEST(Rigidity, SphereRealizesEquality) {
  std::vector<PolarPoint> zs{{0.5, 1.0}, {2.0, 4.0}, {1.5, 2.5}};
  auto r = rigidity_probe(sphere(), {1.0, 0.0}, {pi - 1.0, pi}, zs, 8, pi);
  EXPECT_TRUE(r.precondition);
  EXPECT_TRUE(r.pass()) << r.max_z_defect << " " << r.max_cut_defect;
  EXPECT_NEAR(r.perimeter, 2 * pi, 1e-7);
}

TEST(Rigidity, EllipsoidReportsUnrealizedEquality) {
  auto S = make_prolate_ellipsoid(1, 2);
  auto r = rigidity_probe(S, {1.0, 0.0}, {S.L - 1.0, pi}, {{1.0, 1.0}}, 8, pi);
  EXPECT_FALSE(r.precondition);
  EXPECT_EQ(r.diagnostic.rfind("equality case not realized", 0), 0u);
  EXPECT_LT(r.dxy, S.L - 1e-3);
}
