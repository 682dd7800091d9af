#pragma once

// Comparison triangles with apex at the pole of a model surface, the angle function
// theta(a, b, c), and the checks built on it.

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "metricspace.hpp"
#include "rng.hpp"

namespace revcomp {

struct TriangleSides {
  double a = 0, b = 0, c = 0;
};

struct Membership {
  bool inside = false;
  std::string violated;  // empty when inside
  double upper = 0;      // d(mu_0(a), mu_pi(c))
};

inline constexpr double angle_bracket = 1e-9;
inline constexpr double angle_tol = 1e-11;
inline constexpr int angle_max_iter = 200;

namespace detail {

// every connecting geodesic from (a, 0) to (c, .) of interest is shorter than this
inline double comparison_horizon(const SurfaceModel& S, double a, double c) {
  return std::min(a + c, 2 * S.L - a - c) + 1e-6;
}

inline DistanceField apex_field(const SurfaceModel& S, double a, double c) {
  return DistanceField(S, {a, 0.0}, comparison_horizon(S, a, c));
}

inline std::string fmt(double v) {
  std::ostringstream o;
  o.precision(12);
  o << v;
  return o.str();
}

inline Membership membership(const DistanceField& F, const TriangleSides& s) {
  const SurfaceModel& S = F.surface();
  Membership m;
  if (!(s.a > 0 && s.b > 0 && s.c > 0)) {
    m.violated = "a, b, c > 0";
    return m;
  }
  if (s.a > S.L || s.c > S.L) {
    m.violated = "a, c <= L (" + fmt(S.L) + ")";
    return m;
  }
  m.upper = F.distance({s.c, pi});
  if (!(std::abs(s.a - s.c) < s.b)) {
    m.violated = "|a - c| < b (|a - c| = " + fmt(std::abs(s.a - s.c)) + ", b = " + fmt(s.b) + ")";
    return m;
  }
  if (!(s.b < m.upper)) {
    m.violated = "b < d(mu_0(a), mu_pi(c)) (b = " + fmt(s.b) + ", bound = " + fmt(m.upper) + ")";
    return m;
  }
  m.inside = true;
  return m;
}

// d((a,0), (c,theta)) is strictly increasing in theta on [0, pi], so the root is unique
inline double solve_angle(const DistanceField& F, const TriangleSides& s) {
  auto g = [&](double th) { return F.distance({s.c, th}) - s.b; };
  double lo = angle_bracket, hi = pi - angle_bracket;
  double glo = g(lo), ghi = g(hi);
  if (glo >= 0) return lo;
  if (ghi <= 0) return hi;
  std::uintmax_t iters = angle_max_iter;
  auto tol = [](double u, double v) { return std::abs(v - u) <= angle_tol; };
  auto r = boost::math::tools::toms748_solve(g, lo, hi, glo, ghi, tol, iters);
  if (iters >= static_cast<std::uintmax_t>(angle_max_iter))
    throw std::runtime_error("angle function did not converge for (a, b, c) = (" + fmt(s.a) + ", " + fmt(s.b) +
                             ", " + fmt(s.c) + ")");
  return 0.5 * (r.first + r.second);
}

// angle between an edge leaving a vertex with direction phi and the meridian back to p
inline double angle_to_pole_start(double phi0) { return pi - std::abs(wrap_pi(phi0)); }
// same at the far end, where the edge arrives with direction phi
inline double angle_to_pole_end(double phi_end) { return std::abs(wrap_pi(phi_end)); }

}  // namespace detail

inline Membership in_T(const SurfaceModel& S, const TriangleSides& s) {
  if (!(s.a > 0 && s.c > 0 && s.a <= S.L && s.c <= S.L)) {
    Membership m;
    m.violated = !(s.a > 0 && s.c > 0) ? "a, b, c > 0" : "a, c <= L (" + detail::fmt(S.L) + ")";
    return m;
  }
  return detail::membership(detail::apex_field(S, s.a, s.c), s);
}

inline double angle_function(const SurfaceModel& S, const TriangleSides& s) {
  if (!(s.a > 0 && s.b > 0 && s.c > 0)) throw std::domain_error("sides outside T: a, b, c > 0");
  if (s.a > S.L || s.c > S.L) throw std::domain_error("sides outside T: a, c <= L");
  auto F = detail::apex_field(S, s.a, s.c);
  auto m = detail::membership(F, s);
  if (!m.inside) throw std::domain_error("sides outside T: " + m.violated);
  return detail::solve_angle(F, s);
}

// A triangle with apex at the pole p (r = 0). angles are ordered p, x, y.
struct SurfaceTriangle {
  SurfaceModel surface;
  PolarPoint p{0, 0}, x, y;
  std::array<GeodesicSegment, 3> edges;  // p->x, p->y, x->y
  std::array<double, 3> angles{};
  double a = 0, b = 0, c = 0;  // d(p,x), d(x,y), d(p,y)
  int multiplicity = 1;        // of the x->y edge
  // vertex angles at x and y for every x->y minimizer
  std::vector<std::pair<double, double>> edge_angles;
};

inline SurfaceTriangle make_triangle(const SurfaceModel& S, PolarPoint x, PolarPoint y) {
  SurfaceTriangle T;
  T.surface = S;
  T.x = canonical(S, x);
  T.y = canonical(S, y);
  if (T.x.r == 0 || T.y.r == 0) throw std::domain_error("triangle vertices must differ from the apex");
  T.a = T.x.r;
  T.c = T.y.r;
  auto d = distance(S, T.x, T.y);
  T.b = d.value;
  T.multiplicity = d.multiplicity;
  T.edges[0] = meridian(S, T.x.theta, T.a);
  T.edges[1] = meridian(S, T.y.theta, T.c);
  for (size_t i = 0; i < d.minimizers.size(); ++i)
    T.edge_angles.push_back({detail::angle_to_pole_start(d.initial_angles[i]),
                             detail::angle_to_pole_end(d.minimizers[i].end_state().phi)});
  if (!d.minimizers.empty()) T.edges[2] = d.minimizers.front();
  T.angles[0] = std::abs(wrap_pi(T.y.theta - T.x.theta));
  if (!T.edge_angles.empty()) {
    T.angles[1] = T.edge_angles.front().first;
    T.angles[2] = T.edge_angles.front().second;
  }
  return T;
}

struct ComparisonReport {
  TriangleSides sides;
  std::array<double, 3> angles{};         // in M, at p, x, y
  std::array<double, 3> tangles{};        // in the comparison surface
  std::array<double, 3> sides_match{};    // |d(p,x) - d~|, |d(p,y) - d~|, |d(x,y) - d~|
  std::array<double, 3> angle_margins{};  // angle in M minus comparison angle
  bool equality_case = false;
  bool falsified = false;  // comparison sides left T
  std::string note;

  double min_margin() const { return std::min({angle_margins[0], angle_margins[1], angle_margins[2]}); }
  double max_side_residual() const { return std::max({sides_match[0], sides_match[1], sides_match[2]}); }
  // side equations, angle inequalities, and comparison angles inside [0, pi]
  int constraints_held(double side_tol = 1e-7, double slack = 1e-6) const {
    if (falsified) return 0;
    int n = 0;
    for (int i = 0; i < 3; ++i) {
      n += sides_match[i] <= side_tol;
      n += angle_margins[i] >= -slack;
      n += tangles[i] >= 0 && tangles[i] <= pi;
    }
    return n;
  }
};

inline constexpr double equality_tol = 1e-5;

namespace detail {

inline ComparisonReport compare_triangle(const SurfaceModel& Mt, const SurfaceTriangle& tri) {
  ComparisonReport rep;
  rep.sides = {tri.a, tri.b, tri.c};
  rep.angles = tri.angles;
  if (tri.a > Mt.L || tri.c > Mt.L) {
    rep.falsified = true;
    rep.note = "sides outside T: a, c <= L";
    return rep;
  }
  auto F = apex_field(Mt, tri.a, tri.c);
  auto m = membership(F, rep.sides);
  if (!m.inside) {
    rep.falsified = true;
    rep.note = "sides outside T: " + m.violated;
    return rep;
  }
  double th = solve_angle(F, rep.sides);
  auto q = F.query({tri.c, th});
  rep.sides_match[0] = std::abs(distance_value(Mt, {0, 0}, {tri.a, 0.0}) - tri.a);
  rep.sides_match[1] = std::abs(distance_value(Mt, {0, 0}, {tri.c, th}) - tri.c);
  rep.sides_match[2] = std::abs(q.value - tri.b);
  rep.tangles[0] = th;

  // The theorem must hold for every choice of edge in M and provides some triangle in
  // the comparison surface: take the worst M edge against its best partner.
  double worst = std::numeric_limits<double>::infinity();
  for (auto [ax, ay] : tri.edge_angles) {
    double best = -std::numeric_limits<double>::infinity();
    std::array<double, 2> pick{};
    for (size_t j = 0; j < q.minimizers.size(); ++j) {
      double tx = angle_to_pole_start(q.initial_angles[j]);
      double ty = angle_to_pole_end(q.minimizers[j].end_state().phi);
      double score = std::min(ax - tx, ay - ty);
      if (score > best) {
        best = score;
        pick = {tx, ty};
      }
    }
    if (best < worst) {
      worst = best;
      rep.tangles[1] = pick[0];
      rep.tangles[2] = pick[1];
      rep.angles[1] = ax;
      rep.angles[2] = ay;
    }
  }
  for (int i = 0; i < 3; ++i) rep.angle_margins[i] = rep.angles[i] - rep.tangles[i];
  rep.equality_case = std::abs(rep.angle_margins[0]) <= equality_tol;
  return rep;
}

}  // namespace detail

inline void require_radial_bound(const SurfaceModel& M, const SurfaceModel& Mt) {
  auto rb = check_radial_bound(M, Mt);
  if (!rb.holds())
    throw std::invalid_argument("radial curvature bound fails for " + M.name + " over " + Mt.name +
                                " (margin " + detail::fmt(rb.margin) + " at r = " + detail::fmt(rb.at_r) +
                                (rb.domain_ok ? "" : ", L exceeds the comparison surface") + ")");
}

inline ComparisonReport toponogov_check(const SurfaceModel& M, const SurfaceModel& Mt, const SurfaceTriangle& tri) {
  require_radial_bound(M, Mt);
  return detail::compare_triangle(Mt, tri);
}

// theta~(t) = theta(a t, d(x(t), y(t)), c t) on t = i/steps
struct ThetaProfile {
  std::vector<double> t, theta, phi;
  double apex_angle = 0;   // angle(xpy) in M
  double limit = 0;        // linear extrapolation to t = 0
  double max_increase = -std::numeric_limits<double>::infinity();
  double total_variation = 0;
  std::vector<std::string> errors;  // grid points whose sides left T

  bool monotone(double slack = 1e-6) const { return errors.empty() && max_increase <= slack; }
  double limit_error() const { return std::abs(limit - apex_angle); }
};

inline ThetaProfile theta_monotonicity_check(const SurfaceModel& M, const SurfaceModel& Mt, PolarPoint x,
                                             PolarPoint y, int steps = 64) {
  if (steps < 2) throw std::invalid_argument("theta grid needs at least 2 steps");
  require_radial_bound(M, Mt);
  x = canonical(M, x);
  y = canonical(M, y);
  ThetaProfile out;
  out.apex_angle = std::abs(wrap_pi(y.theta - x.theta));
  std::optional<double> prev;
  for (int i = 1; i <= steps; ++i) {
    double t = static_cast<double>(i) / steps;
    double at = t * x.r, ct = t * y.r;
    double phi = distance_value(M, {at, x.theta}, {ct, y.theta});
    out.t.push_back(t);
    out.phi.push_back(phi);
    try {
      double th = angle_function(Mt, {at, phi, ct});
      out.theta.push_back(th);
      if (prev) {
        out.max_increase = std::max(out.max_increase, th - *prev);
        out.total_variation += std::abs(th - *prev);
      }
      prev = th;
    } catch (const std::domain_error& e) {
      out.theta.push_back(std::numeric_limits<double>::quiet_NaN());
      out.errors.push_back("t = " + detail::fmt(t) + ": " + e.what());
      prev.reset();
    }
  }
  out.limit = 2 * out.theta[0] - out.theta[1];
  return out;
}

struct VariationReport {
  double t0 = 0, h = 0;
  double psi_value = 0;
  double analytic_derivative = 0;  // right derivative from the minimizer tangents
  double numeric_derivative = 0;   // (psi(t0 + h) - psi(t0)) / h
  double residual = 0;
  int multiplicity = 1;
  // one-sided derivatives; they differ only when minimizers are not unique
  double analytic_plus = 0, analytic_minus = 0;
};

namespace detail {

struct VariationBase {
  double psi;
  int multiplicity;
  double plus, minus;
};

// Each minimizer gamma gives -g(mu', gamma'(0)) + g(eta', gamma'(psi)). psi is locally
// the minimum over the minimizer branches, so the right derivative is the smallest of
// these and the left derivative the largest.
inline VariationBase variation_base(const SurfaceModel& M, const GeodesicSegment& mu, const GeodesicSegment& eta,
                                    double t0) {
  auto sm = mu.state_at(t0), se = eta.state_at(t0);
  PolarPoint x{sm.r, sm.theta}, y{se.r, se.theta};
  if (at_pole(M, x.r) || at_pole(M, y.r))
    throw std::domain_error("first variation needs both curves away from the poles at t0");
  auto d = distance(M, x, y);
  if (!(d.value > 0)) throw std::domain_error("first variation needs psi(t0) > 0");
  VariationBase b{d.value, d.multiplicity, std::numeric_limits<double>::infinity(),
                  -std::numeric_limits<double>::infinity()};
  for (size_t i = 0; i < d.minimizers.size(); ++i) {
    double g0 = d.initial_angles[i];
    double g1 = d.minimizers[i].end_state().phi;
    double v = -std::cos(sm.phi - g0) + std::cos(se.phi - g1);
    b.plus = std::min(b.plus, v);
    b.minus = std::max(b.minus, v);
  }
  return b;
}

inline double psi_at(const SurfaceModel& M, const GeodesicSegment& mu, const GeodesicSegment& eta, double t) {
  auto a = mu.state_at(t), b = eta.state_at(t);
  return distance_value(M, {a.r, a.theta}, {b.r, b.theta});
}

inline void check_parameter(const GeodesicSegment& mu, const GeodesicSegment& eta, double t0, double h) {
  double span = std::min(mu.length, eta.length);
  if (!(t0 > 0 && t0 + h < span)) throw std::domain_error("t0 and t0 + h must lie inside both curves");
}

}  // namespace detail

inline VariationReport first_variation_check(const SurfaceModel& M, const GeodesicSegment& mu,
                                             const GeodesicSegment& eta, double t0, double h) {
  if (!(h > 0)) throw std::invalid_argument("step must be positive");
  detail::check_parameter(mu, eta, t0, h);
  auto b = detail::variation_base(M, mu, eta, t0);
  VariationReport r;
  r.t0 = t0;
  r.h = h;
  r.psi_value = b.psi;
  r.multiplicity = b.multiplicity;
  r.analytic_plus = b.plus;
  r.analytic_minus = b.minus;
  r.analytic_derivative = b.plus;
  r.numeric_derivative = (detail::psi_at(M, mu, eta, t0 + h) - b.psi) / h;
  r.residual = std::abs(r.analytic_derivative - r.numeric_derivative);
  return r;
}

inline constexpr std::array<double, 3> richardson_steps{1e-3, 5e-4, 2.5e-4};

struct VariationLadder {
  std::vector<VariationReport> steps;
  double order = std::numeric_limits<double>::quiet_NaN();  // fitted slope of log residual vs log h
  bool order_measured = false;  // residuals sit far enough above the distance noise floor
  double extrapolated = 0;      // Richardson value from the two smallest steps
  double extrapolated_residual = 0;
  double noise_floor = 0;  // residual level explained by distance error alone
};

// distance values carry roughly this much absolute error
inline constexpr double distance_noise = 1e-10;

inline VariationLadder first_variation_ladder(const SurfaceModel& M, const GeodesicSegment& mu,
                                              const GeodesicSegment& eta, double t0,
                                              std::vector<double> hs = {richardson_steps.begin(),
                                                                        richardson_steps.end()}) {
  if (hs.size() < 2) throw std::invalid_argument("ladder needs at least two steps");
  for (double h : hs) detail::check_parameter(mu, eta, t0, h);
  auto b = detail::variation_base(M, mu, eta, t0);
  VariationLadder L;
  for (double h : hs) {
    VariationReport r;
    r.t0 = t0;
    r.h = h;
    r.psi_value = b.psi;
    r.multiplicity = b.multiplicity;
    r.analytic_plus = b.plus;
    r.analytic_minus = b.minus;
    r.analytic_derivative = b.plus;
    r.numeric_derivative = (detail::psi_at(M, mu, eta, t0 + h) - b.psi) / h;
    r.residual = std::abs(r.analytic_derivative - r.numeric_derivative);
    L.steps.push_back(r);
  }
  size_t n = hs.size();
  double hmin = hs[n - 1];
  L.noise_floor = 2 * distance_noise / hmin;
  // forward differences carry an O(h) error, eliminated by pairing h and h/2-ish steps
  double ratio = hs[n - 2] / hmin;
  L.extrapolated = (ratio * L.steps[n - 1].numeric_derivative - L.steps[n - 2].numeric_derivative) / (ratio - 1);
  L.extrapolated_residual = std::abs(L.extrapolated - b.plus);

  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  bool usable = true;
  for (auto& r : L.steps) {
    if (!(r.residual >= 10 * L.noise_floor)) usable = false;
    double lx = std::log(r.h), ly = std::log(std::max(r.residual, 1e-300));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  L.order = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  L.order_measured = usable && b.multiplicity == 1;
  return L;
}

// Box around (a, b, c) used by the Lipschitz probe.
struct Region {
  double a, b, c, half;
};

struct LipschitzReport {
  double constant = 0;  // max |d theta| / |d(a,b,c)| over sampled pairs
  int pairs = 0;
  int excluded = 0;     // samples outside T, or zero-displacement pairs
  // lower-bound structure: |d(c, theta2) - d(c, theta1)| / |theta2 - theta1| against
  // f(c) sin(eps), eps the angle between the edge and the meridian at the far vertex
  double lower_ratio = std::numeric_limits<double>::infinity();
  double lower_bound = std::numeric_limits<double>::infinity();
  double min_edge_angle = pi;
  std::vector<std::array<double, 4>> samples;  // a, b, c, theta
};

inline LipschitzReport lipschitz_probe(const SurfaceModel& S, const Region& box, int samples,
                                       std::uint64_t seed = 1) {
  LipschitzReport rep;
  Rng rng(seed, "lipschitz", 0);
  const double dtheta = 1e-4;
  std::optional<std::array<double, 4>> prev;
  for (int i = 0; i < samples; ++i) {
    TriangleSides s{box.a + box.half * rng.uniform(-1, 1), box.b + box.half * rng.uniform(-1, 1),
                    box.c + box.half * rng.uniform(-1, 1)};
    if (!(s.a > 0 && s.c > 0 && s.a <= S.L && s.c <= S.L)) {
      ++rep.excluded;
      prev.reset();
      continue;
    }
    auto F = detail::apex_field(S, s.a, s.c);
    if (!detail::membership(F, s).inside) {
      ++rep.excluded;
      prev.reset();
      continue;
    }
    double th = detail::solve_angle(F, s);
    std::array<double, 4> cur{s.a, s.b, s.c, th};
    rep.samples.push_back(cur);

    auto q = F.query({s.c, th});
    double eps = std::abs(wrap_pi(q.minimizers.front().end_state().phi));
    eps = std::min(eps, pi - eps);
    double step = th + dtheta < pi ? dtheta : -dtheta;
    double ratio = std::abs(F.distance({s.c, th + step}) - q.value) / dtheta;
    rep.min_edge_angle = std::min(rep.min_edge_angle, eps);
    rep.lower_ratio = std::min(rep.lower_ratio, ratio);
    rep.lower_bound = std::min(rep.lower_bound, S.f(s.c) * std::sin(eps));

    if (prev) {
      double dx = cur[0] - (*prev)[0], dy = cur[1] - (*prev)[1], dz = cur[2] - (*prev)[2];
      double n = std::sqrt(dx * dx + dy * dy + dz * dz);
      if (n == 0) {
        ++rep.excluded;
      } else {
        rep.constant = std::max(rep.constant, std::abs(cur[3] - (*prev)[3]) / n);
        ++rep.pairs;
      }
    }
    prev = cur;
  }
  return rep;
}

struct RigidityReport {
  bool precondition = false;
  std::string diagnostic;  // why the equality case is not realized
  double diameter = 0, dxy = 0;
  double dpx = 0, dpy = 0;
  double apex_angle = std::numeric_limits<double>::quiet_NaN();  // undefined if x or y is a pole
  double perimeter = 0;
  double max_z_defect = 0;    // max |d(x,z) + d(z,y) - L|
  double max_cut_defect = 0;  // cut times against L, and cut points against y
  int z_count = 0;
  bool angle_ok = false, split_ok = false, perimeter_ok = false, z_ok = false, cut_ok = false;

  bool pass() const { return precondition && angle_ok && split_ok && perimeter_ok && z_ok && cut_ok; }
};

inline constexpr double rigidity_tol = 1e-5;

// Equality-case structure for a pair x, y at the maximal distance L (pi after
// normalization). Pass diameter_estimate to skip the built-in estimate.
inline RigidityReport rigidity_probe(const SurfaceModel& S, PolarPoint x, PolarPoint y,
                                     const std::vector<PolarPoint>& zs, int cut_dirs = 16,
                                     std::optional<double> diameter_estimate = std::nullopt) {
  RigidityReport rep;
  x = canonical(S, x);
  y = canonical(S, y);
  const double L = S.L;
  rep.diameter = diameter_estimate ? *diameter_estimate : diameter(S, 100);
  rep.dxy = distance_value(S, x, y);
  if (std::abs(rep.diameter - L) > rigidity_tol) {
    rep.diagnostic = "equality case not realized: diameter " + detail::fmt(rep.diameter) + " differs from " +
                     detail::fmt(L);
    return rep;
  }
  if (std::abs(rep.dxy - L) > rigidity_tol) {
    rep.diagnostic = "equality case not realized: d(x,y) = " + detail::fmt(rep.dxy) + ", short of " +
                     detail::fmt(L) + " by " + detail::fmt(L - rep.dxy);
    return rep;
  }
  rep.precondition = true;
  PolarPoint p{0, 0};
  rep.dpx = distance_value(S, p, x);
  rep.dpy = distance_value(S, p, y);
  rep.perimeter = rep.dpx + rep.dpy + rep.dxy;
  rep.split_ok = std::abs(rep.dpx + rep.dpy - L) <= rigidity_tol;
  rep.perimeter_ok = std::abs(rep.perimeter - 2 * L) <= rigidity_tol;
  if (x.r > 0 && y.r > 0 && x.r < L && y.r < L) {
    rep.apex_angle = std::abs(wrap_pi(y.theta - x.theta));
    rep.angle_ok = std::abs(rep.apex_angle - pi) <= rigidity_tol;
  } else {
    rep.angle_ok = true;  // a vertex sits on a pole: the apex angle is not defined
  }
  DistanceField fx(S, x, 2 * L), fy(S, y, 2 * L);
  for (auto z : zs) {
    double dz = fx.distance(z) + fy.distance(z);
    rep.max_z_defect = std::max(rep.max_z_defect, std::abs(dz - L));
    ++rep.z_count;
  }
  rep.z_ok = rep.max_z_defect <= rigidity_tol;
  auto cl = cut_locus(S, x, cut_dirs);
  rep.cut_ok = cl.failures == 0;
  for (auto& cp : cl.cut_points) {
    double dr = std::abs(cp.point.r - y.r);
    double dt = at_pole(S, y.r) ? 0.0 : S.f(y.r) * std::abs(wrap_pi(cp.point.theta - y.theta));
    rep.max_cut_defect = std::max({rep.max_cut_defect, std::abs(cp.cut_time - L), dr + dt});
  }
  rep.cut_ok = rep.cut_ok && rep.max_cut_defect <= rigidity_tol;
  return rep;
}

}  // namespace revcomp
