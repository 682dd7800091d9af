#pragma once

// Unit-speed geodesics in (r, theta, phi), phi measured from the outward meridian.
//   r' = cos phi,  theta' = sin phi / f,  phi' = -f' sin phi / f
// nu = f sin phi is the Clairaut constant. Near a pole the metric is flat to
// O(r^3), so passages within r_switch of a pole are done as straight lines in
// the tangent plane instead of through the singular chart.

#include <array>
#include <cmath>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <boost/math/tools/toms748_solve.hpp>
#include <boost/numeric/odeint/stepper/runge_kutta_fehlberg78.hpp>

#include "surface.hpp"

namespace revcomp {

struct GeodesicState {
  double r, theta, phi, nu;
};

struct GeodesicSample {
  double s;
  GeodesicState state;
};

namespace detail {

using State = std::array<double, 5>;  // r, theta, phi, J, J'

enum class Piece : unsigned char { rk, flat_p, flat_q };

struct Node {
  double s;
  State x;
};

struct Crossing {
  double s, theta, phi;
  int dir;  // sign of dr/ds at the crossing
};

inline constexpr double rtol = 1e-10;
inline constexpr double atol = 1e-12;

class Flow {
 public:
  Flow(const SurfaceModel& S, bool jacobi)
      : S_(S), jac_(jacobi), L_(S.L), hmax_(S.L / 100), rswitch_(1e-6 * S.L / pi) {}

  double r_switch() const { return rswitch_; }
  const SurfaceModel& surface() const { return S_; }

  double curvature(double r) const {
    if (r < rswitch_) return S_.G_p;
    if (L_ - r < rswitch_) return S_.G_q;
    auto v = S_.eval(r);
    return -v.f2 / v.f;
  }

  void operator()(const State& x, State& dx, double) const {
    auto v = S_.eval(x[0]);
    double sp = std::sin(x[2]), cp = std::cos(x[2]);
    dx[0] = cp;
    dx[1] = sp / v.f;
    dx[2] = -v.f1 * sp / v.f;
    if (jac_) {
      double G = (x[0] < rswitch_) ? S_.G_p : (L_ - x[0] < rswitch_) ? S_.G_q : -v.f2 / v.f;
      dx[3] = x[4];
      dx[4] = -G * x[3];
    } else {
      dx[3] = 0;
      dx[4] = 0;
    }
  }

  Node rk_advance(const Node& a, double tau) const {
    if (tau == 0) return a;
    Node b{a.s + tau, {}};
    State err;
    stepper_.do_step(std::cref(*this), a.x, a.s, b.x, tau, err);
    return b;
  }

  // straight line in the tangent plane at the pole
  Node flat_advance(const Node& a, bool at_q, double tau) const {
    double rho = at_q ? L_ - a.x[0] : a.x[0];
    double phi = a.x[2];
    double psi = at_q ? ((phi >= 0 ? pi : -pi) - phi) : phi;
    double X = rho + tau * std::cos(psi), Y = tau * std::sin(psi);
    double rho2 = std::hypot(X, Y);
    double dth = (rho2 == 0) ? 0.0 : std::atan2(Y, X);
    double psi2 = wrap_pi(psi - dth);
    Node b{a.s + tau, a.x};
    b.x[0] = at_q ? L_ - rho2 : rho2;
    b.x[1] = a.x[1] + dth;
    b.x[2] = at_q ? wrap_pi((psi2 >= 0 ? pi : -pi) - psi2) : psi2;
    double G = at_q ? S_.G_q : S_.G_p;
    b.x[3] = a.x[3] + tau * a.x[4] - 0.5 * G * tau * tau * a.x[3];
    b.x[4] = a.x[4] - G * tau * a.x[3];
    return b;
  }

  Node advance(const Node& a, Piece k, double tau) const {
    switch (k) {
      case Piece::rk: return rk_advance(a, tau);
      case Piece::flat_p: return flat_advance(a, false, tau);
      case Piece::flat_q: return flat_advance(a, true, tau);
    }
    return a;
  }

  // Integrates from a up to arclength `length`, calling on_piece(a, kind, h, b) for
  // every accepted piece; on_piece returns false to stop early.
  template <class F>
  void run(Node a, double length, F&& on_piece) const {
    double h = hmax_ / 4;
    while (true) {
      double rem = length - a.s;
      if (rem <= 1e-14 * std::max(1.0, length)) return;
      double rp = a.x[0], rq = L_ - a.x[0];
      double cp = std::cos(a.x[2]);
      bool fp = rp <= rswitch_ && (cp < 0 || rp == 0);
      bool fq = !fp && rq <= rswitch_ && (cp > 0 || rq == 0);
      if (fp || fq) {
        double rho = fp ? rp : rq;
        double psi = fp ? a.x[2] : ((a.x[2] >= 0 ? pi : -pi) - a.x[2]);
        double ell = rho == 0 ? rswitch_ : -2 * rho * std::cos(psi);
        ell = std::max(ell, 0.0);
        bool last = ell >= rem;
        if (last) ell = rem;
        Node b = flat_advance(a, fq, ell);
        if (last) b.s = length;
        if (!on_piece(a, fp ? Piece::flat_p : Piece::flat_q, ell, b)) return;
        a = b;
        continue;
      }
      double cap = std::min({hmax_, rem, 0.25 * std::min(rp, rq)});
      h = std::min(h, cap);
      while (true) {
        State out, err;
        stepper_.do_step(std::cref(*this), a.x, a.s, out, h, err);
        double e = 0;
        int n = jac_ ? 5 : 3;
        for (int i = 0; i < n; ++i) {
          double sc = atol + rtol * std::max(std::abs(a.x[i]), std::abs(out[i]));
          e = std::max(e, std::abs(err[i]) / sc);
        }
        if (e <= 1.0 && std::isfinite(e)) {
          bool last = h >= rem;
          Node b{last ? length : a.s + h, out};
          if (!on_piece(a, Piece::rk, b.s - a.s, b)) return;
          a = b;
          h *= (e == 0) ? 4.0 : std::clamp(0.9 * std::pow(e, -1.0 / 8), 0.2, 4.0);
          break;
        }
        h *= std::isfinite(e) ? std::clamp(0.9 * std::pow(e, -1.0 / 8), 0.2, 0.9) : 0.2;
        if (h < 1e-13 * std::max(1.0, a.s)) {
          std::ostringstream msg;
          msg.precision(17);
          msg << "geodesic step underflow at s=" << a.s << " r=" << a.x[0] << " theta=" << a.x[1]
              << " phi=" << a.x[2] << " (h=" << h << ", L=" << L_ << ")";
          throw std::runtime_error(msg.str());
        }
      }
    }
  }

  // crossings of the parallel r = level inside one piece, appended in order of s
  template <class Out>
  void piece_crossings(const Node& a, Piece k, double h, const Node& b, double level, Out&& out) const {
    auto sgnF = [&](const Node& n) {
      double F = n.x[0] - level;
      if (F > 0) return 1;
      if (F < 0) return -1;
      return std::cos(n.x[2]) > 0 ? 1 : -1;
    };
    int sa = sgnF(a), sb = sgnF(b);
    bool ca = std::cos(a.x[2]) > 0, cb = std::cos(b.x[2]) > 0;
    if (ca == cb) {
      if (sa != sb) out(root(a, k, 0, h, level));
      return;
    }
    // r has an extremum inside the piece
    auto cosf = [&](double t) { return std::cos(advance(a, k, t).x[2]); };
    boost::uintmax_t it = 100;
    auto tol = boost::math::tools::eps_tolerance<double>(52);
    double c0 = std::cos(a.x[2]), c1 = std::cos(b.x[2]);
    double tt;
    if (c0 == 0) {
      tt = 0;
    } else if (c1 == 0) {
      tt = h;
    } else {
      auto br = boost::math::tools::toms748_solve(cosf, 0.0, h, c0, c1, tol, it);
      tt = 0.5 * (br.first + br.second);
    }
    Node m = advance(a, k, tt);
    double Fm = m.x[0] - level;
    int sm = Fm > 0 ? 1 : (Fm < 0 ? -1 : 0);
    if (sm == 0) {
      if (tt > 0) out(Crossing{m.s, m.x[1], m.x[2], std::cos(m.x[2]) > 0 ? 1 : -1});
      return;
    }
    if (sa != sm && tt > 0) out(root(a, k, 0, tt, level));
    if (sm != sb) out(root(a, k, tt, h, level));
  }

 private:
  Crossing root(const Node& a, Piece k, double t0, double t1, double level) const {
    auto F = [&](double t) { return advance(a, k, t).x[0] - level; };
    double F0 = F(t0), F1 = F(t1);
    double t;
    if (F0 == 0) {
      t = t0;
    } else if (F1 == 0) {
      t = t1;
    } else {
      boost::uintmax_t it = 100;
      auto br = boost::math::tools::toms748_solve(F, t0, t1, F0, F1,
                                                  boost::math::tools::eps_tolerance<double>(52), it);
      t = 0.5 * (br.first + br.second);
    }
    Node m = advance(a, k, t);
    return {m.s, m.x[1], m.x[2], F1 > F0 ? 1 : -1};
  }

  const SurfaceModel& S_;
  bool jac_;
  double L_, hmax_, rswitch_;
  mutable boost::numeric::odeint::runge_kutta_fehlberg78<State> stepper_;
};

inline Node start_node(const SurfaceModel& S, PolarPoint p, double phi0) {
  p = canonical(S, p);
  if (p.r == 0) return {0, {0.0, phi0, 0.0, 0.0, 1.0}};
  if (p.r == S.L) return {0, {S.L, phi0, pi, 0.0, 1.0}};
  return {0, {p.r, p.theta, wrap_pi(phi0), 0.0, 1.0}};
}

}  // namespace detail

class GeodesicSegment {
 public:
  SurfaceModel surface;
  PolarPoint start;
  double phi0 = 0;
  double length = 0;
  std::vector<GeodesicSample> samples;
  std::vector<double> pole_crossings;

  // analytic meridian from p: theta = alpha on (0, L), alpha + pi on (L, 2L), period 2L
  bool is_meridian = false;
  double alpha = 0;

  GeodesicState state_at(double s) const {
    if (is_meridian) return meridian_state(s);
    if (nodes_.empty()) throw std::logic_error("empty geodesic");
    s = std::clamp(s, 0.0, length);
    size_t i = std::upper_bound(nodes_.begin(), nodes_.end(), s,
                                [](double v, const detail::Node& n) { return v < n.s; }) -
               nodes_.begin();
    if (i == 0) i = 1;
    if (i >= nodes_.size()) return to_state(nodes_.back());
    const auto& a = nodes_[i - 1];
    detail::Flow F(surface, jacobi_);
    return to_state(F.advance(a, pieces_[i - 1], s - a.s));
  }

  // scalar Jacobi field (J, J') when integrated with Jacobi data
  std::pair<double, double> jacobi_at(double s) const {
    if (!jacobi_) throw std::logic_error("geodesic was integrated without Jacobi data");
    s = std::clamp(s, 0.0, length);
    size_t i = std::upper_bound(nodes_.begin(), nodes_.end(), s,
                                [](double v, const detail::Node& n) { return v < n.s; }) -
               nodes_.begin();
    if (i == 0) i = 1;
    if (i >= nodes_.size()) return {nodes_.back().x[3], nodes_.back().x[4]};
    const auto& a = nodes_[i - 1];
    detail::Flow F(surface, true);
    auto b = F.advance(a, pieces_[i - 1], s - a.s);
    return {b.x[3], b.x[4]};
  }

  GeodesicState end_state() const { return state_at(length); }

  PolarPoint point_at(double s) const {
    auto st = state_at(s);
    return canonical(surface, {st.r, st.theta});
  }

  // internal representation, kept for re-stepping
  std::vector<detail::Node> nodes_;
  std::vector<detail::Piece> pieces_;
  bool jacobi_ = false;

  GeodesicState to_state(const detail::Node& n) const {
    double r = n.x[0];
    return {r, n.x[1], n.x[2], surface.f(r) * std::sin(n.x[2])};
  }

 private:
  GeodesicState meridian_state(double s) const {
    double L = surface.L;
    double t = std::fmod(s, 2 * L);
    if (t < 0) t += 2 * L;
    if (t <= L) return {t, alpha, 0.0, 0.0};
    return {2 * L - t, alpha + pi, pi, 0.0};
  }
};

namespace detail {

inline GeodesicSegment integrate_segment(const SurfaceModel& S, PolarPoint start, double phi0, double length,
                                         bool jacobi, bool stop_at_conjugate = false,
                                         std::optional<double>* conj = nullptr) {
  GeodesicSegment g;
  g.surface = S;
  g.start = canonical(S, start);
  g.phi0 = phi0;
  g.jacobi_ = jacobi;
  Node a = start_node(S, start, phi0);
  g.nodes_.push_back(a);
  Flow F(g.surface, jacobi);
  double end_s = length;
  F.run(a, length, [&](const Node& n0, Piece k, double h, const Node& n1) {
    if (k != Piece::rk) {
      bool q = k == Piece::flat_q;
      double rho = q ? S.L - n0.x[0] : n0.x[0];
      double psi = q ? ((n0.x[2] >= 0 ? pi : -pi) - n0.x[2]) : n0.x[2];
      double half = -rho * std::cos(psi);
      if (rho > 0 && h >= half) g.pole_crossings.push_back(n0.s + half);
    }
    if (stop_at_conjugate && n0.x[3] > 0 && n1.x[3] <= 0 && n0.s > 0) {
      // bisection on the zero of J inside this piece
      double lo = 0, hi = h;
      while (hi - lo > 1e-10) {
        double mid = 0.5 * (lo + hi);
        if (F.advance(n0, k, mid).x[3] > 0)
          lo = mid;
        else
          hi = mid;
      }
      double t = 0.5 * (lo + hi);
      Node z = F.advance(n0, k, t);
      g.pieces_.push_back(k);
      g.nodes_.push_back(z);
      end_s = z.s;
      if (conj) *conj = z.s;
      return false;
    }
    g.pieces_.push_back(k);
    g.nodes_.push_back(n1);
    return true;
  });
  g.length = stop_at_conjugate && conj && conj->has_value() ? end_s : length;
  g.samples.reserve(g.nodes_.size());
  for (auto& n : g.nodes_) g.samples.push_back({n.s, g.to_state(n)});
  return g;
}

}  // namespace detail

inline GeodesicSegment shoot(const SurfaceModel& S, PolarPoint start, double phi0, double length) {
  if (!(length > 0)) throw std::invalid_argument("geodesic length must be positive");
  return detail::integrate_segment(S, start, phi0, length, false);
}

inline GeodesicSegment meridian(const SurfaceModel& S, double alpha, double length = -1) {
  GeodesicSegment g;
  g.surface = S;
  g.start = {0, 0};
  g.phi0 = alpha;
  g.alpha = alpha;
  g.is_meridian = true;
  g.length = length > 0 ? length : 2 * S.L;
  for (double s = 0; s <= g.length + 1e-12; s += S.L) g.samples.push_back({s, g.state_at(s)});
  for (double s = S.L; s <= g.length + 1e-12; s += S.L) g.pole_crossings.push_back(s);
  return g;
}

// sigma_c(theta) = mu_theta(c)
inline PolarPoint parallel(const SurfaceModel& S, double c, double theta) {
  if (!(c > 0 && c < S.L)) throw std::domain_error("parallel radius must lie strictly inside (0, L)");
  return {c, wrap_two_pi(theta)};
}

struct JacobiSolution {
  GeodesicSegment geodesic;
  std::optional<double> first_conjugate;  // empty: none within the horizon
};

inline JacobiSolution first_conjugate(const SurfaceModel& S, PolarPoint start, double phi0, double horizon) {
  if (!(horizon > 0 && horizon <= 4 * pi + 1e-12))
    throw std::invalid_argument("conjugate-point horizon must lie in (0, 4 pi]");
  JacobiSolution out;
  std::optional<double> c;
  out.geodesic = detail::integrate_segment(S, start, phi0, horizon, true, true, &c);
  out.first_conjugate = c;
  return out;
}

}  // namespace revcomp
