#pragma once

// Two-spheres of revolution: metric dr^2 + f(r)^2 dtheta^2 on [0, L] x S^1.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/special_functions/ellint_2.hpp>

#include "config.hpp"

namespace revcomp {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

struct ProfileValues {
  double f, f1, f2;
};

// f and its first two derivatives on [0, L]
class WarpingProfile {
 public:
  virtual ~WarpingProfile() = default;
  virtual double length() const = 0;
  virtual ProfileValues eval(double r) const = 0;

  double f(double r) const { return eval(r).f; }
  double f1(double r) const { return eval(r).f1; }
  double f2(double r) const { return eval(r).f2; }
  // f'(0), and the signed value f'(L)
  std::pair<double, double> pole_slope() const { return {f1(0.0), f1(length())}; }
};

// s * sin(r / s): round sphere of radius s
class SineProfile final : public WarpingProfile {
 public:
  explicit SineProfile(double scale = 1.0) : s_(scale) {}
  double length() const override { return pi * s_; }
  ProfileValues eval(double r) const override {
    double t = r / s_;
    double sn = std::sin(t), cs = std::cos(t);
    return {s_ * sn, cs, -sn / s_};
  }

 private:
  double s_;
};

// Meridian of x^2/a^2 + z^2/b^2 = 1 (revolved about z), reparametrized by arclength
// and multiplied by lambda. The ellipse parameter u(r) is tabulated on [0, L/2] with
// quintic Hermite interpolation, everything else is evaluated in closed form from u.
class EllipsoidProfile final : public WarpingProfile {
 public:
  EllipsoidProfile(double a, double b, double lambda, int nodes = 2048)
      : a_(a), b_(b), lam_(lambda), n_(nodes) {
    k_ = std::sqrt(1.0 - (a * a) / (b * b));
    Ek_ = boost::math::ellint_2(k_);
    half_raw_ = b_ * Ek_;
    L_ = 2.0 * lam_ * half_raw_;
    h_ = 0.5 * L_ / n_;
    u_.resize(n_ + 1);
    du_.resize(n_ + 1);
    ddu_.resize(n_ + 1);
    for (int i = 0; i <= n_; ++i) {
      double target = (i * h_) / lam_;
      double u = (i == n_) ? 0.5 * pi : solve_u(target, 0.5 * pi * i / n_);
      double D = speed(u);
      double Dp = (b_ * b_ - a_ * a_) * std::sin(u) * std::cos(u) / D;
      u_[i] = u;
      du_[i] = 1.0 / (lam_ * D);
      ddu_[i] = -Dp / (lam_ * lam_ * D * D * D);
    }
  }

  double length() const override { return L_; }

  ProfileValues eval(double r) const override {
    r = std::clamp(r, 0.0, L_);
    bool upper = r > 0.5 * L_;
    double rr = upper ? L_ - r : r;
    double u = interp(rr);
    double su = std::sin(u), cu = std::cos(u);
    double D2 = a_ * a_ * cu * cu + b_ * b_ * su * su;
    double D = std::sqrt(D2);
    ProfileValues v;
    v.f = lam_ * a_ * su;
    v.f1 = a_ * cu / D;
    v.f2 = -a_ * b_ * b_ * su / (lam_ * D2 * D2);
    if (upper) v.f1 = -v.f1;
    return v;
  }

  // arclength of the unscaled meridian from the pole to parameter u
  double raw_arclength(double u) const {
    return b_ * (Ek_ - boost::math::ellint_2(k_, 0.5 * pi - u));
  }
  double raw_half_length() const { return half_raw_; }

 private:
  double speed(double u) const {
    double su = std::sin(u), cu = std::cos(u);
    return std::sqrt(a_ * a_ * cu * cu + b_ * b_ * su * su);
  }

  double solve_u(double s, double guess) const {
    double u = guess;
    for (int it = 0; it < 60; ++it) {
      double du = (raw_arclength(u) - s) / speed(u);
      u -= du;
      if (std::abs(du) < 1e-16) break;
    }
    return u;
  }

  double interp(double r) const {
    int i = std::min(static_cast<int>(r / h_), n_ - 1);
    double t = r / h_ - i;
    double t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t;
    double H0 = 1 - 10 * t3 + 15 * t4 - 6 * t5;
    double H1 = 10 * t3 - 15 * t4 + 6 * t5;
    double G0 = t - 6 * t3 + 8 * t4 - 3 * t5;
    double G1 = -4 * t3 + 7 * t4 - 3 * t5;
    double K0 = 0.5 * (t2 - 3 * t3 + 3 * t4 - t5);
    double K1 = 0.5 * (t3 - 2 * t4 + t5);
    return H0 * u_[i] + H1 * u_[i + 1] + h_ * (G0 * du_[i] + G1 * du_[i + 1]) +
           h_ * h_ * (K0 * ddu_[i] + K1 * ddu_[i + 1]);
  }

  double a_, b_, lam_;
  int n_;
  double k_, Ek_, half_raw_, L_, h_;
  std::vector<double> u_, du_, ddu_;
};

// f = g * S with S(r) = (L/pi) sin(pi r / L) and g a clamped cubic spline
// (g' = 0 at both ends, g = 1 at both ends). That pins f'(0) = 1, f'(L) = -1 and
// f''(0) = f''(L) = 0, which keeps -f''/f bounded at the poles.
class SplineProfile final : public WarpingProfile {
 public:
  SplineProfile(std::vector<double> r, std::vector<double> f) : x_(std::move(r)) {
    size_t n = x_.size();
    L_ = x_.back();
    k_ = pi / L_;
    y_.resize(n);
    for (size_t i = 1; i + 1 < n; ++i) y_[i] = f[i] / S(x_[i]);
    y_[0] = 1.0;
    y_[n - 1] = 1.0;
    solve_moments();
  }

  double length() const override { return L_; }

  ProfileValues eval(double r) const override {
    r = std::clamp(r, 0.0, L_);
    size_t i = std::upper_bound(x_.begin(), x_.end(), r) - x_.begin();
    i = std::clamp<size_t>(i, 1, x_.size() - 1) - 1;
    double h = x_[i + 1] - x_[i];
    double A = (x_[i + 1] - r) / h, B = (r - x_[i]) / h;
    double g = A * y_[i] + B * y_[i + 1] + ((A * A * A - A) * m_[i] + (B * B * B - B) * m_[i + 1]) * h * h / 6.0;
    double g1 = (y_[i + 1] - y_[i]) / h - (3 * A * A - 1) / 6.0 * h * m_[i] + (3 * B * B - 1) / 6.0 * h * m_[i + 1];
    double g2 = A * m_[i] + B * m_[i + 1];
    double sn = std::sin(k_ * r), cs = std::cos(k_ * r);
    double s0 = sn / k_, s1 = cs, s2 = -k_ * sn;
    return {g * s0, g1 * s0 + g * s1, g2 * s0 + 2 * g1 * s1 + g * s2};
  }

 private:
  double S(double r) const { return std::sin(k_ * r) / k_; }

  void solve_moments() {
    size_t n = x_.size();
    std::vector<double> lo(n), di(n), up(n), rhs(n);
    double h0 = x_[1] - x_[0];
    di[0] = 2 * h0;
    up[0] = h0;
    rhs[0] = 6 * ((y_[1] - y_[0]) / h0);
    for (size_t i = 1; i + 1 < n; ++i) {
      double hl = x_[i] - x_[i - 1], hr = x_[i + 1] - x_[i];
      lo[i] = hl;
      di[i] = 2 * (hl + hr);
      up[i] = hr;
      rhs[i] = 6 * ((y_[i + 1] - y_[i]) / hr - (y_[i] - y_[i - 1]) / hl);
    }
    double hn = x_[n - 1] - x_[n - 2];
    lo[n - 1] = hn;
    di[n - 1] = 2 * hn;
    rhs[n - 1] = 6 * (0.0 - (y_[n - 1] - y_[n - 2]) / hn);
    // Thomas
    for (size_t i = 1; i < n; ++i) {
      double w = lo[i] / di[i - 1];
      di[i] -= w * up[i - 1];
      rhs[i] -= w * rhs[i - 1];
    }
    m_.assign(n, 0.0);
    m_[n - 1] = rhs[n - 1] / di[n - 1];
    for (size_t i = n - 1; i-- > 0;) m_[i] = (rhs[i] - up[i] * m_[i + 1]) / di[i];
  }

  std::vector<double> x_, y_, m_;
  double L_, k_;
};

struct ValidationLine {
  std::string name;
  bool pass;
  double margin;  // measured quantity; meaning depends on the line
};

class SurfaceModel {
 public:
  std::string name;
  std::shared_ptr<const WarpingProfile> profile;
  double L = 0;
  bool reflective_symmetric = false;
  bool curvature_monotone = false;
  bool cutlocus_assumption_checked = false;
  double G_p = 0, G_q = 0;  // pole limits of the curvature
  std::vector<ValidationLine> report;

  ProfileValues eval(double r) const { return profile->eval(r); }
  double f(double r) const { return profile->eval(r).f; }

  bool valid() const {
    for (auto& l : report)
      if (!l.pass && is_invariant(l.name)) return false;
    return true;
  }

  static bool is_invariant(const std::string& n) {
    return n == "endpoint_zeros" || n == "interior_positive" || n == "pole_slope" ||
           n == "derivative_consistency";
  }
};

struct PolarPoint {
  double r = 0, theta = 0;
};

inline double wrap_two_pi(double t) {
  t = std::fmod(t, two_pi);
  if (t < 0) t += two_pi;
  if (t >= two_pi) t -= two_pi;
  return t;
}

// (-pi, pi]
inline double wrap_pi(double t) {
  t = std::remainder(t, two_pi);
  if (t <= -pi) t += two_pi;
  return t;
}

inline bool at_pole(const SurfaceModel& S, double r) {
  return r <= 1e-12 * S.L || r >= S.L * (1 - 1e-12);
}

inline PolarPoint canonical(const SurfaceModel& S, PolarPoint p) {
  if (!(p.r >= -1e-12 * S.L && p.r <= S.L * (1 + 1e-12)))
    throw std::domain_error("radial coordinate outside [0, L]: " + std::to_string(p.r));
  p.r = std::clamp(p.r, 0.0, S.L);
  if (at_pole(S, p.r)) {
    p.r = p.r < 0.5 * S.L ? 0.0 : S.L;
    p.theta = 0.0;
  } else {
    p.theta = wrap_two_pi(p.theta);
  }
  return p;
}

namespace detail {

inline double pole_stencil(const WarpingProfile& P, bool at_q) {
  double L = P.length();
  double h = 1e-4 * L;
  double F[5];
  for (int j = 0; j < 5; ++j) F[j] = P.f2(at_q ? L - j * h : j * h);
  double d3 = (-25 * F[0] + 48 * F[1] - 36 * F[2] + 16 * F[3] - 3 * F[4]) / (12 * h);
  if (at_q) d3 = -d3;
  return -d3 / P.f1(at_q ? L : 0.0);
}

}  // namespace detail

inline double gaussian_curvature(const SurfaceModel& S, double r) {
  if (r <= 0) return S.G_p;
  if (r >= S.L) return S.G_q;
  auto v = S.eval(r);
  return -v.f2 / v.f;
}

inline constexpr int validation_grid = 10000;

// fills the flags and the margin report; never throws
inline void validate(SurfaceModel& S) {
  const auto& P = *S.profile;
  S.L = P.length();
  S.G_p = detail::pole_stencil(P, false);
  S.G_q = detail::pole_stencil(P, true);
  const double L = S.L;
  const int N = validation_grid;
  auto grid = [&](int i, double span) { return span * i / (N - 1); };

  S.report.clear();
  double endz = std::max(std::abs(P.f(0.0)), std::abs(P.f(L)));
  S.report.push_back({"endpoint_zeros", endz <= 1e-12, endz});

  double fmin = std::numeric_limits<double>::infinity();
  for (int i = 1; i < N - 1; ++i) fmin = std::min(fmin, P.f(grid(i, L)));
  S.report.push_back({"interior_positive", fmin > 0, fmin});

  auto [s0, sL] = P.pole_slope();
  double slope = std::max(std::abs(s0 - 1.0), std::abs(sL + 1.0));
  S.report.push_back({"pole_slope", slope <= 1e-9, slope});

  // central differences, h small enough that the O(h^2) term is ~1e-8
  double h = 1e-4 * L / pi;
  double c1 = 0, c2 = 0;
  for (int i = 1; i < N - 1; ++i) {
    double r = grid(i, L);
    if (r < h || r > L - h) continue;
    double fm = P.f(r - h), fp = P.f(r + h);
    auto v = P.eval(r);
    c1 = std::max(c1, std::abs((fp - fm) / (2 * h) - v.f1));
    c2 = std::max(c2, std::abs((fp - 2 * v.f + fm) / (h * h) - v.f2));
  }
  double cons = std::max(c1, c2 * 1e-2);
  S.report.push_back({"derivative_consistency", c1 <= 1e-6 && c2 <= 1e-4, cons});

  double sym = 0;
  for (int i = 0; i < N; ++i) {
    double r = grid(i, L);
    sym = std::max(sym, std::abs(P.f(L - r) - P.f(r)));
  }
  S.reflective_symmetric = sym <= 1e-9;
  S.report.push_back({"reflective_symmetric", S.reflective_symmetric, sym});

  // strict decrease of G on [0, L/2], ties count as violations
  double worst = std::numeric_limits<double>::infinity();
  double slack = 0;
  double prev = gaussian_curvature(S, 0.0);
  double gmax = std::abs(prev);
  for (int i = 1; i < N; ++i) {
    double g = gaussian_curvature(S, grid(i, 0.5 * L));
    worst = std::min(worst, prev - g);
    gmax = std::max(gmax, std::abs(g));
    prev = g;
  }
  S.curvature_monotone = worst > 0;
  S.report.push_back({"curvature_monotone", S.curvature_monotone, worst});

  // Sufficient condition for the opposite-half-meridian cut locus: reflective
  // symmetry plus curvature non-increasing from pole to equator.
  slack = 1e-9 * std::max(1.0, gmax);
  bool nonincreasing = worst >= -slack;
  S.cutlocus_assumption_checked = S.reflective_symmetric && nonincreasing;
  S.report.push_back({"cutlocus_assumption", S.cutlocus_assumption_checked, worst});
}

inline SurfaceModel finish(std::string name, std::shared_ptr<const WarpingProfile> prof) {
  SurfaceModel S;
  S.name = std::move(name);
  S.profile = std::move(prof);
  validate(S);
  return S;
}

inline SurfaceModel make_unit_sphere() {
  return finish("sphere", std::make_shared<SineProfile>(1.0));
}

// round sphere of curvature H (L = pi / sqrt(H)); not normalized
inline SurfaceModel make_round_sphere(double H) {
  if (!(H > 0)) throw std::invalid_argument("curvature must be positive");
  return finish("sphere", std::make_shared<SineProfile>(1.0 / std::sqrt(H)));
}

enum class Normalize { length, curvature, none };

inline Normalize parse_normalize(const std::string& s) {
  if (s == "length" || s == "pi") return Normalize::length;
  if (s == "curvature") return Normalize::curvature;
  if (s == "none") return Normalize::none;
  throw std::invalid_argument("normalize must be length, curvature or none, got " + s);
}

// length: L = pi. curvature: max curvature (at the pole) = 1.
inline SurfaceModel make_prolate_ellipsoid(double a, double b, Normalize mode = Normalize::length) {
  if (!(a > 0 && b > 0)) throw std::invalid_argument("ellipsoid semi-axes must be positive");
  if (!(a < b))
    throw std::invalid_argument("ellipsoid must be prolate (a < b), got a=" + std::to_string(a) +
                                " b=" + std::to_string(b));
  double lam = 1.0;
  if (mode == Normalize::length) {
    double k = std::sqrt(1.0 - (a * a) / (b * b));
    lam = pi / (2.0 * b * boost::math::ellint_2(k));
  } else if (mode == Normalize::curvature) {
    lam = b / (a * a);  // pole curvature b^2/a^4
  }
  return finish("ellipsoid", std::make_shared<EllipsoidProfile>(a, b, lam));
}

// derivative at x[0] of the interpolating polynomial through the first m points
inline double one_sided_slope(const std::vector<double>& x, const std::vector<double>& y, size_t first,
                              int dir, int m = 5) {
  std::vector<double> xs, ys;
  for (int j = 0; j < m; ++j) {
    size_t idx = first + dir * j;
    xs.push_back(x[idx]);
    ys.push_back(y[idx]);
  }
  double x0 = xs[0];
  double d = 0;
  for (int j = 0; j < m; ++j) {
    double w;
    if (j == 0) {
      w = 0;
      for (int q = 1; q < m; ++q) w += 1.0 / (x0 - xs[q]);
    } else {
      double num = 1, den = 1;
      for (int q = 0; q < m; ++q) {
        if (q == j) continue;
        den *= xs[j] - xs[q];
        if (q != 0) num *= x0 - xs[q];
      }
      w = num / den;
    }
    d += w * ys[j];
  }
  return d;
}

inline constexpr double sample_slope_tol = 1e-6;

inline SurfaceModel make_custom(std::vector<double> r, std::vector<double> f,
                                Normalize mode = Normalize::length) {
  if (r.size() != f.size()) throw std::invalid_argument("r and f sample counts differ");
  if (r.size() < 8) throw std::invalid_argument("need at least 8 samples");
  for (size_t i = 1; i < r.size(); ++i)
    if (!(r[i] > r[i - 1])) throw std::invalid_argument("sample r values must be strictly increasing");
  double L = r.back() - r.front();
  if (std::abs(r.front()) > 1e-12 * L) throw std::invalid_argument("samples must start at r = 0");
  r.front() = 0.0;
  if (std::abs(f.front()) > 1e-12 * L)
    throw std::invalid_argument("f(0) = " + std::to_string(f.front()) + " is not 0");
  if (std::abs(f.back()) > 1e-12 * L)
    throw std::invalid_argument("f(L) = " + std::to_string(f.back()) + " is not 0");
  for (size_t i = 1; i + 1 < f.size(); ++i)
    if (!(f[i] > 0))
      throw std::invalid_argument("f must be positive inside (0, L), fails at r = " + std::to_string(r[i]));
  double s0 = one_sided_slope(r, f, 0, +1);
  double sL = one_sided_slope(r, f, r.size() - 1, -1);
  if (std::abs(s0 - 1.0) > sample_slope_tol || std::abs(sL + 1.0) > sample_slope_tol)
    throw std::invalid_argument("pole slopes must be +1 and -1, samples give " + std::to_string(s0) +
                                " and " + std::to_string(sL));
  f.front() = 0.0;
  f.back() = 0.0;

  double lam = 1.0;
  if (mode == Normalize::length) {
    lam = pi / L;
  } else if (mode == Normalize::curvature) {
    SurfaceModel raw = finish("custom", std::make_shared<SplineProfile>(r, f));
    double gmax = std::max(raw.G_p, raw.G_q);
    for (int i = 1; i < validation_grid - 1; ++i)
      gmax = std::max(gmax, gaussian_curvature(raw, L * i / (validation_grid - 1)));
    if (!(gmax > 0)) throw std::invalid_argument("curvature normalization needs positive curvature somewhere");
    lam = std::sqrt(gmax);
  }
  for (auto& v : r) v *= lam;
  for (auto& v : f) v *= lam;
  return finish("custom", std::make_shared<SplineProfile>(std::move(r), std::move(f)));
}

inline SurfaceModel make_custom_from_file(const std::filesystem::path& path, Normalize mode) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open samples file " + path.string());
  std::vector<double> r, f;
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    double a, b;
    if (ls >> a >> b) {
      r.push_back(a);
      f.push_back(b);
    }
  }
  return make_custom(std::move(r), std::move(f), mode);
}

inline SurfaceModel load_surface(const KeyValueFile& kv) {
  std::string kind = kv.get("kind");
  SurfaceModel S;
  if (kind == "sphere") {
    if (kv.has("curvature"))
      S = make_round_sphere(kv.number("curvature"));
    else
      S = make_unit_sphere();
  } else if (kind == "ellipsoid") {
    S = make_prolate_ellipsoid(kv.number("a"), kv.number("b"), parse_normalize(kv.get("normalize", "length")));
  } else if (kind == "custom") {
    S = make_custom_from_file(kv.resolve(kv.get("samples")), parse_normalize(kv.get("normalize", "length")));
  } else {
    throw std::invalid_argument("unknown surface kind '" + kind + "'");
  }
  if (kv.has("name")) S.name = kv.get("name");
  return S;
}

inline SurfaceModel load_surface(const std::filesystem::path& path) {
  return load_surface(KeyValueFile::load(path));
}

struct RadialBound {
  double margin;       // min over the grid of G_M - G_Mtilde
  double at_r;         // where the minimum sits
  bool domain_ok;      // L_M <= L_Mtilde
  bool holds() const { return domain_ok && margin >= -1e-9; }
};

// Radial curvature comparison for two surfaces sharing a pole as base point. The
// comparison runs over the distances M actually realizes, r in [0, L_M].
inline RadialBound check_radial_bound(const SurfaceModel& M, const SurfaceModel& Mt) {
  RadialBound out{std::numeric_limits<double>::infinity(), 0, M.L <= Mt.L * (1 + 1e-12)};
  double span = std::min(M.L, Mt.L);
  const int N = validation_grid;
  for (int i = 0; i < N; ++i) {
    double r = span * i / (N - 1);
    double gm = (i == N - 1 && span == M.L) ? M.G_q : gaussian_curvature(M, r);
    double gt = (i == N - 1 && span == Mt.L) ? Mt.G_q : gaussian_curvature(Mt, r);
    double m = gm - gt;
    if (m < out.margin) {
      out.margin = m;
      out.at_r = r;
    }
  }
  return out;
}

}  // namespace revcomp
