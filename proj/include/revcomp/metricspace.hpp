#pragma once

// Global distance by shooting. From x = (rx, 0) a fan of initial angles covers
// [0, pi]; along each ray we record where it crosses the parallel r = ry and the
// angle theta swept there. A connection to y = (ry, delta) is a zero of
// theta_k(phi0) - target, bracketed between fan rays and refined with TOMS 748.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/tools/toms748_solve.hpp>

#include "geodesic.hpp"

namespace revcomp {

struct DistanceResult {
  double value = 0;
  std::vector<GeodesicSegment> minimizers;
  std::vector<double> initial_angles;  // phi0 of each minimizer at x
  int multiplicity = 0;
  bool continuum = false;  // pole to pole: every meridian minimizes
};

class DistanceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int fan_intervals = 720;
inline constexpr double theta_tol = 1e-10;
inline constexpr double distinct_angle = 1e-4;
inline constexpr double equal_length = 1e-8;

namespace detail {

struct Candidate {
  double phi;  // signed initial angle at x, relative to the reduced frame
  double s;
};

// an end of a bracket: either a fan ray (by index) or a one-off shot
struct End {
  double phi;
  int ray;
  std::vector<Crossing> c;  // used when ray < 0
};

struct Interval {
  End a, b;
};

struct RayLevel {
  std::vector<Crossing> c;
  bool exact = false;
};

inline bool same_signature(const std::vector<Crossing>& a, const std::vector<Crossing>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i)
    if (a[i].dir != b[i].dir) return false;
  return true;
}

// Same as same_signature except for trailing crossings at or beyond the pole-path
// bound U; those can never be minimizing, so a change there needs no split.
inline bool compatible(const std::vector<Crossing>& a, const std::vector<Crossing>& b, double U) {
  size_t m = std::min(a.size(), b.size());
  for (size_t i = 0; i < m; ++i)
    if (a[i].dir != b[i].dir) {
      m = i;
      break;
    }
  for (size_t i = m; i < a.size(); ++i)
    if (a[i].s < U - 1e-7) return false;
  for (size_t i = m; i < b.size(); ++i)
    if (b[i].s < U - 1e-7) return false;
  return true;
}

// roots of the cubic c0 + c1 u + c2 u^2 + c3 u^3 - level between u0 and u1 (sign change assumed)
inline double cubic_root(const double c[4], double level, double u0, double u1) {
  auto p = [&](double u) { return c[0] + u * (c[1] + u * (c[2] + u * c[3])) - level; };
  double f0 = p(u0);
  for (int it = 0; it < 60; ++it) {
    double um = 0.5 * (u0 + u1);
    double fm = p(um);
    if ((fm > 0) == (f0 > 0)) {
      u0 = um;
      f0 = fm;
    } else {
      u1 = um;
    }
  }
  return 0.5 * (u0 + u1);
}

struct NoBranch {};

}  // namespace detail

// Shooting data from one base point. Not thread-safe (caches per level); use one per thread.
class DistanceField {
 public:
  DistanceField(const SurfaceModel& S, PolarPoint x, double horizon = -1)
      : S_(S), x_(canonical(S, x)) {
    H_ = horizon > 0 ? horizon : S_.L + 1e-6;
    if (at_pole(S_, x_.r)) return;
    rays_.resize(fan_intervals + 1);
    for (int j = 0; j <= fan_intervals; ++j) {
      auto& ray = rays_[j];
      ray.phi0 = pi * j / fan_intervals;
      detail::Node a = detail::start_node(S_, {x_.r, 0.0}, ray.phi0);
      ray.nodes.push_back(a);
      flow().run(a, H_, [&](const detail::Node&, detail::Piece k, double, const detail::Node& b) {
        ray.pieces.push_back(k);
        ray.nodes.push_back(b);
        return true;
      });
    }
  }

  const SurfaceModel& surface() const { return S_; }
  PolarPoint base() const { return x_; }
  double horizon() const { return H_; }

  DistanceResult query(PolarPoint y, bool with_geodesics = true) const {
    y = canonical(S_, y);
    DistanceResult out;
    const double L = S_.L;
    if (at_pole(S_, x_.r) || at_pole(S_, y.r)) return pole_query(y, with_geodesics);
    double draw = wrap_pi(y.theta - x_.theta);
    if (std::abs(y.r - x_.r) == 0 && draw == 0) {
      out.value = 0;
      out.multiplicity = 1;
      return out;
    }
    double U = std::min(x_.r + y.r, 2 * L - x_.r - y.r);
    if (U + 1e-6 > H_ + 1e-12) {
      DistanceField wider(S_, x_, U + 1e-6);
      return wider.query(y, with_geodesics);
    }
    double delta = std::abs(draw);
    double orient = draw >= 0 ? 1.0 : -1.0;
    auto cands = candidates(y.r, delta);
    // a parallel with f' = 0 is a geodesic that never crosses its own level; nearby
    // rays come back only after the pole bound, so the fan cannot see it
    if (std::abs(y.r - x_.r) <= 1e-13 * L && std::abs(S_.eval(x_.r).f1) <= 1e-12) {
      double fr = S_.f(x_.r);
      cands.push_back({pi / 2, fr * delta});
      cands.push_back({-pi / 2, fr * (two_pi - delta)});
    }
    if (cands.empty() || fold_gap(y.r, delta)) {
      auto more = theta_candidates(y.r, delta);
      cands.insert(cands.end(), more.begin(), more.end());
    }
    if (cands.empty()) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "no connecting geodesic found from (" << x_.r << "," << x_.theta << ") to (" << y.r << ","
          << y.theta << ")";
      throw DistanceError(msg.str());
    }
    double best = std::numeric_limits<double>::infinity();
    for (auto& c : cands) best = std::min(best, c.s);
    out.value = best;
    for (auto& c : cands) {
      if (c.s > best + equal_length) continue;
      double phi = wrap_pi(orient * c.phi);
      bool dup = false;
      for (double p : out.initial_angles)
        if (std::abs(wrap_pi(p - phi)) <= distinct_angle) dup = true;
      if (!dup) out.initial_angles.push_back(phi);
    }
    out.multiplicity = static_cast<int>(out.initial_angles.size());
    if (with_geodesics)
      for (double p : out.initial_angles) out.minimizers.push_back(shoot(S_, x_, p, best));
    return out;
  }

  double distance(PolarPoint y) const { return query(y, false).value; }

 private:
  struct Ray {
    double phi0;
    std::vector<detail::Node> nodes;
    std::vector<detail::Piece> pieces;
  };

  DistanceResult pole_query(PolarPoint y, bool with_geodesics) const {
    DistanceResult out;
    const double L = S_.L;
    out.multiplicity = 1;
    auto add = [&](PolarPoint from, double phi, double len) {
      out.initial_angles.push_back(phi);
      if (with_geodesics && len > 0) out.minimizers.push_back(shoot(S_, from, phi, len));
    };
    if (x_.r == 0 || x_.r == L) {
      bool xp = x_.r == 0;
      if (at_pole(S_, y.r) && y.r != x_.r) {
        out.value = L;
        out.continuum = true;
        add(x_, 0.0, L);
        return out;
      }
      if (at_pole(S_, y.r)) {
        out.value = 0;
        return out;
      }
      out.value = xp ? y.r : L - y.r;
      add(x_, y.theta, out.value);
      return out;
    }
    // x regular, y at a pole
    bool yp = y.r == 0;
    out.value = yp ? x_.r : L - x_.r;
    add(x_, yp ? pi : 0.0, out.value);
    return out;
  }

  // exact crossings along a stored fan ray
  std::vector<detail::Crossing> ray_crossings(const Ray& ray, double level) const {
    std::vector<detail::Crossing> c;
    auto fl = flow();
    const double cut = cutoff(level);
    for (size_t i = 0; i + 1 < ray.nodes.size() && c.size() < 3 && ray.nodes[i].s <= cut; ++i) {
      const auto& a = ray.nodes[i];
      const auto& b = ray.nodes[i + 1];
      bool sideA = a.x[0] > level, sideB = b.x[0] > level;
      if (sideA == sideB && a.x[0] != level && b.x[0] != level) {
        bool ca = std::cos(a.x[2]) > 0, cb = std::cos(b.x[2]) > 0;
        if (ca == cb) continue;
      }
      fl.piece_crossings(a, ray.pieces[i], b.s - a.s, b, level, [&](const detail::Crossing& x) {
        if (c.size() < 3 && x.s <= cut) c.push_back(x);
      });
    }
    return c;
  }

  // Cheap estimate from cubic Hermite interpolation of r and theta between nodes
  // (error ~h^4). Rays whose extremum of r comes close to the level are done exactly.
  detail::RayLevel approx_crossings(const Ray& ray, double level) const {
    detail::RayLevel out;
    auto fl = flow();
    auto side = [&](const detail::Node& n) {
      double F = n.x[0] - level;
      if (F > 0) return 1;
      if (F < 0) return -1;
      return std::cos(n.x[2]) > 0 ? 1 : -1;
    };
    const double cut = cutoff(level);
    for (size_t i = 0; i + 1 < ray.nodes.size() && out.c.size() < 3 && ray.nodes[i].s <= cut; ++i) {
      const auto& a = ray.nodes[i];
      const auto& b = ray.nodes[i + 1];
      double m0 = std::cos(a.x[2]), m1 = std::cos(b.x[2]);
      int sa = side(a), sb = side(b);
      bool turn = (m0 > 0) != (m1 > 0);
      if (sa == sb && !turn) continue;
      double h = b.s - a.s;
      if (ray.pieces[i] != detail::Piece::rk) {
        fl.piece_crossings(a, ray.pieces[i], h, b, level, [&](const detail::Crossing& x) {
          if (out.c.size() < 3 && x.s <= cut) out.c.push_back(x);
        });
        continue;
      }
      double c[4] = {a.x[0], h * m0, 3 * (b.x[0] - a.x[0]) - h * (2 * m0 + m1), 2 * (a.x[0] - b.x[0]) + h * (m0 + m1)};
      auto P = [&](double u) { return c[0] + u * (c[1] + u * (c[2] + u * c[3])); };
      double w0 = std::sin(a.x[2]) / S_.f(a.x[0]), w1 = std::sin(b.x[2]) / S_.f(b.x[0]);
      auto emit = [&](double u, int dir) {
        double h00 = 2 * u * u * u - 3 * u * u + 1, h10 = u * u * u - 2 * u * u + u;
        double h01 = -2 * u * u * u + 3 * u * u, h11 = u * u * u - u * u;
        double th = h00 * a.x[1] + h10 * h * w0 + h01 * b.x[1] + h11 * h * w1;
        if (out.c.size() < 3 && a.s + u * h <= cut) out.c.push_back({a.s + u * h, th, dir > 0 ? 0.0 : pi, dir});
      };
      if (!turn) {
        emit(detail::cubic_root(c, level, 0, 1), sb > sa ? 1 : -1);
        continue;
      }
      // extremum of the cubic inside the piece
      double A = 3 * c[3], B = 2 * c[2], C = c[1];
      double ut;
      if (std::abs(A) < 1e-300) {
        ut = -C / B;
      } else {
        double disc = std::max(0.0, B * B - 4 * A * C);
        double q = -0.5 * (B + std::copysign(std::sqrt(disc), B));
        double u1 = q / A, u2 = (q != 0) ? C / q : u1;
        ut = (u1 >= 0 && u1 <= 1) ? u1 : u2;
      }
      ut = std::clamp(ut, 0.0, 1.0);
      double rt = P(ut);
      if (std::abs(rt - level) < 1e-6) {
        out.exact = true;
        out.c = ray_crossings(ray, level);
        return out;
      }
      int st = rt > level ? 1 : -1;
      if (sa != st) emit(detail::cubic_root(c, level, 0, ut), st > sa ? 1 : -1);
      if (st != sb) emit(detail::cubic_root(c, level, ut, 1), sb > st ? 1 : -1);
    }
    return out;
  }

  std::vector<detail::Crossing> shoot_crossings(double phi0, double level, size_t want = 3) const {
    std::vector<detail::Crossing> c;
    detail::Node a = detail::start_node(S_, {x_.r, 0.0}, phi0);
    auto fl = flow();
    fl.run(a, std::min(H_, cutoff(level)), [&](const detail::Node& n0, detail::Piece k, double h,
                                               const detail::Node& n1) {
      fl.piece_crossings(n0, k, h, n1, level, [&](const detail::Crossing& x) {
        if (c.size() < 3) c.push_back(x);
      });
      return c.size() < want;
    });
    return c;
  }

  struct Level {
    std::vector<detail::RayLevel> rays;
    std::vector<detail::Interval> iv;
  };

  Level& level_data(double level) const {
    auto it = levels_.find(level);
    if (it != levels_.end()) return it->second;
    Level L;
    L.rays.resize(rays_.size());
    for (size_t j = 0; j < rays_.size(); ++j) L.rays[j] = approx_crossings(rays_[j], level);
    for (size_t j = 0; j + 1 < rays_.size(); ++j) {
      detail::End a{rays_[j].phi0, static_cast<int>(j), {}};
      detail::End b{rays_[j + 1].phi0, static_cast<int>(j + 1), {}};
      if (detail::compatible(L.rays[j].c, L.rays[j + 1].c, bound(level))) {
        L.iv.push_back({a, b});
        continue;
      }
      // pattern changes: make both ends exact before locating the change
      for (size_t q : {j, j + 1})
        if (!L.rays[q].exact) L.rays[q] = {ray_crossings(rays_[q], level), true};
      split(a, L.rays[j].c, b, L.rays[j + 1].c, level, L.iv, 0);
    }
    return levels_.emplace(level, std::move(L)).first->second;
  }

  const std::vector<detail::Crossing>& end_crossings(Level& lv, const detail::End& e, double level, bool exact) const {
    if (e.ray < 0) return e.c;
    auto& R = lv.rays[e.ray];
    if (exact && !R.exact) R = {ray_crossings(rays_[e.ray], level), true};
    return R.c;
  }

  // locate where the crossing pattern changes (grazing or horizon) and keep
  // sub-intervals of constant pattern
  void split(detail::End a, const std::vector<detail::Crossing>& ca, detail::End b,
             const std::vector<detail::Crossing>& cb, double level, std::vector<detail::Interval>& iv,
             int depth) const {
    const double U = bound(level);
    if (detail::compatible(ca, cb, U) || depth > 4) {
      iv.push_back({a, b});
      return;
    }
    double lo = a.phi, hi = b.phi;
    auto clo = ca, chi = cb;
    // A ray grazes r = level exactly when its Clairaut constant f(x_r) sin(phi0)
    // equals f(level); start from a narrow bracket around that angle when it checks out.
    double ratio = S_.f(level) / S_.f(x_.r);
    if (ratio < 1) {
      double g0 = std::asin(ratio);
      bool narrowed = false;
      for (double g : {g0, pi - g0}) {
        if (narrowed || !(g > lo && g < hi)) continue;
        for (double w : {1e-9, 1e-6}) {
          double l2 = std::max(lo, g - w), h2 = std::min(hi, g + w);
          auto cl = l2 == lo ? clo : shoot_crossings(l2, level);
          if (!detail::compatible(cl, ca, U)) continue;
          auto ch = h2 == hi ? chi : shoot_crossings(h2, level);
          if (detail::compatible(ch, ca, U)) continue;
          lo = l2;
          hi = h2;
          clo = std::move(cl);
          chi = std::move(ch);
          narrowed = true;
          break;
        }
      }
    }
    while (hi - lo > 1e-13) {
      double mid = 0.5 * (lo + hi);
      auto cm = shoot_crossings(mid, level);
      if (detail::compatible(cm, ca, U)) {
        lo = mid;
        clo = std::move(cm);
      } else {
        hi = mid;
        chi = std::move(cm);
      }
    }
    iv.push_back({a, detail::End{lo, -1, clo}});
    detail::End h{hi, -1, chi};
    split(h, chi, b, cb, level, iv, depth + 1);
  }

  std::vector<detail::Candidate> candidates(double level, double delta) const {
    auto& lv = level_data(level);
    struct Target {
      double value;
      double sign;
    };
    const Target targets[] = {{delta, 1}, {two_pi - delta, -1}, {delta + two_pi, 1}, {2 * two_pi - delta, -1}};
    const double near = 1e-6;  // estimates are good to ~1e-8
    std::vector<detail::Candidate> out;
    auto push = [&](double phi, double s) {
      for (auto& c : out)
        if (std::abs(c.phi - phi) < 1e-13 && std::abs(c.s - s) < 1e-12) return;
      out.push_back({phi, s});
    };
    for (const auto& I : lv.iv) {
      for (const auto& T : targets) {
        for (size_t k = 0; k < 3; ++k) {
          const auto* ca = &end_crossings(lv, I.a, level, false);
          const auto* cb = &end_crossings(lv, I.b, level, false);
          if (k >= std::min(ca->size(), cb->size()) || (*ca)[k].dir != (*cb)[k].dir) break;
          double ga = (*ca)[k].theta - T.value, gb = (*cb)[k].theta - T.value;
          bool maybe = ga * gb < 0 || std::abs(ga) <= near || std::abs(gb) <= near;
          if (!maybe) continue;
          ca = &end_crossings(lv, I.a, level, true);
          cb = &end_crossings(lv, I.b, level, true);
          if (k >= std::min(ca->size(), cb->size()) || (*ca)[k].dir != (*cb)[k].dir) break;
          ga = (*ca)[k].theta - T.value;
          gb = (*cb)[k].theta - T.value;
          bool ha = std::abs(ga) <= theta_tol, hb = std::abs(gb) <= theta_tol;
          if (ha) push(T.sign * I.a.phi, (*ca)[k].s);
          if (hb) push(T.sign * I.b.phi, (*cb)[k].s);
          if (ha || hb || !(ga * gb < 0)) continue;
          try {
            auto c = refine(I.a.phi, I.b.phi, ga, gb, k, T.value, level);
            push(T.sign * c.phi, c.s);
          } catch (const detail::NoBranch&) {
            // branch vanished inside the bracket (hidden tangency); nothing to refine
          }
        }
      }
    }
    return out;
  }

  detail::Candidate refine(double pa, double pb, double ga, double gb, size_t k, double target,
                           double level) const {
    double best_g = std::numeric_limits<double>::infinity();
    detail::Candidate best{0, 0};
    auto g = [&](double phi) {
      auto c = shoot_crossings(phi, level, k + 1);
      if (c.size() <= k) throw detail::NoBranch{};
      double v = c[k].theta - target;
      if (std::abs(v) < std::abs(best_g)) {
        best_g = v;
        best = {phi, c[k].s};
      }
      return v;
    };
    auto tol = [&](double a, double b) {
      return std::abs(best_g) <= theta_tol ||
             std::abs(b - a) <= 4 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(a));
    };
    boost::uintmax_t iters = 200;
    boost::math::tools::toms748_solve(g, pa, pb, ga, gb, tol, iters);
    if (iters >= 200 && std::abs(best_g) > theta_tol) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "angle refinement did not converge after 200 iterations: bracket [" << pa << ", " << pb
          << "], level " << level << ", target " << target << ", residual " << best_g;
      throw DistanceError(msg.str());
    }
    // bracket collapsed onto a jump of the branch rather than a root
    if (std::abs(best_g) > 1e-8) throw detail::NoBranch{};
    return best;
  }

  // Second formulation, used when the one above has a blind spot. theta is monotone
  // along every ray with phi0 in (0, pi), so each ray reaches theta = T at most once;
  // r there minus the level is smooth in phi0, with no fold where a ray grazes the level.
  using Hit = std::optional<std::pair<double, double>>;  // (s, r)

  Hit theta_hit(const detail::Flow& fl, const detail::Node& a, detail::Piece k, double h, const detail::Node& b,
                double T) const {
    if (!(a.x[1] <= T && T <= b.x[1])) return std::nullopt;
    double F0 = a.x[1] - T, F1 = b.x[1] - T, u;
    if (F0 == 0) {
      u = 0;
    } else if (F1 == 0) {
      u = h;
    } else {
      auto F = [&](double t) { return fl.advance(a, k, t).x[1] - T; };
      boost::uintmax_t it = 100;
      auto br = boost::math::tools::toms748_solve(F, 0.0, h, F0, F1, boost::math::tools::eps_tolerance<double>(52), it);
      u = 0.5 * (br.first + br.second);
    }
    auto m = fl.advance(a, k, u);
    return std::pair{m.s, m.x[0]};
  }

  Hit ray_theta(const Ray& ray, double T, double cut) const {
    auto fl = flow();
    for (size_t i = 0; i + 1 < ray.nodes.size() && ray.nodes[i].s <= cut; ++i) {
      const auto& a = ray.nodes[i];
      const auto& b = ray.nodes[i + 1];
      if (auto hit = theta_hit(fl, a, ray.pieces[i], b.s - a.s, b, T)) {
        if (hit->first <= cut) return hit;
        return std::nullopt;
      }
    }
    return std::nullopt;
  }

  Hit shot_theta(double phi0, double T, double cut) const {
    Hit out;
    auto fl = flow();
    detail::Node a = detail::start_node(S_, {x_.r, 0.0}, phi0);
    fl.run(a, cut, [&](const detail::Node& n0, detail::Piece k, double h, const detail::Node& n1) {
      out = theta_hit(fl, n0, k, h, n1, T);
      return !out;
    });
    return out;
  }

  std::vector<detail::Candidate> theta_candidates(double level, double delta) const {
    const double cut = cutoff(level);
    const std::pair<double, double> targets[] = {{delta, 1}, {two_pi - delta, -1}, {delta + two_pi, 1}, {2 * two_pi - delta, -1}};
    std::vector<detail::Candidate> out;
    for (auto [T, sign] : targets) {
      if (T <= 0) continue;
      std::vector<Hit> v(rays_.size());
      for (size_t j = 1; j + 1 < rays_.size(); ++j) v[j] = ray_theta(rays_[j], T, cut);
      for (size_t j = 1; j + 2 < rays_.size(); ++j) {
        if (!v[j] || !v[j + 1]) continue;
        double ha = v[j]->second - level, hb = v[j + 1]->second - level;
        if (ha == 0) out.push_back({sign * rays_[j].phi0, v[j]->first});
        if (!(ha * hb < 0)) continue;
        Hit best;
        double best_h = std::numeric_limits<double>::infinity(), best_phi = 0;
        auto g = [&](double phi) {
          auto hit = shot_theta(phi, T, cut);
          if (!hit) throw detail::NoBranch{};
          double e = hit->second - level;
          if (std::abs(e) < std::abs(best_h)) {
            best_h = e;
            best = hit;
            best_phi = phi;
          }
          return e;
        };
        auto tol = [&](double a, double b) {
          return std::abs(best_h) <= 1e-13 * S_.L || std::abs(b - a) <= 4 * std::numeric_limits<double>::epsilon();
        };
        try {
          boost::uintmax_t it = 200;
          boost::math::tools::toms748_solve(g, rays_[j].phi0, rays_[j + 1].phi0, ha, hb, tol, it);
        } catch (const detail::NoBranch&) {
          continue;
        }
        if (best && std::abs(best_h) <= 1e-9) out.push_back({sign * best_phi, best->first});
      }
    }
    return out;
  }

  // A ray that grazes the level leaves a fold: just past the grazing angle its two
  // crossings start from the same theta, and targets between them belong to neither
  // branch of the crossing search.
  bool fold_gap(double level, double delta) const {
    auto& lv = level_data(level);
    const double targets[] = {delta, two_pi - delta, delta + two_pi, 2 * two_pi - delta};
    for (const auto& I : lv.iv)
      for (const auto* e : {&I.a, &I.b}) {
        if (e->ray >= 0) continue;
        for (size_t k = 0; k + 1 < e->c.size(); ++k) {
          double t0 = e->c[k].theta, t1 = e->c[k + 1].theta;
          if (e->c[k].dir == e->c[k + 1].dir || std::abs(t1 - t0) > 1e-3) continue;
          for (double T : targets)
            if ((T - t0) * (T - t1) <= 0) return true;
        }
      }
    return false;
  }

  detail::Flow flow() const { return detail::Flow(S_, false); }

  // Paths through either pole bound the distance to the level, so crossings further
  // along a ray can never be minimizing. Dropping them also removes pattern changes
  // caused by crossings slipping past the fan horizon.
  double bound(double level) const { return std::min(x_.r + level, 2 * S_.L - x_.r - level); }
  double cutoff(double level) const { return bound(level) + 2e-6; }

  SurfaceModel S_;
  PolarPoint x_;
  double H_;
  std::vector<Ray> rays_;
  mutable std::map<double, Level> levels_;
};

inline DistanceResult distance(const SurfaceModel& S, PolarPoint x, PolarPoint y) {
  x = canonical(S, x);
  y = canonical(S, y);
  double U = std::min(x.r + y.r, 2 * S.L - x.r - y.r);
  DistanceField F(S, x, U + 1e-6);
  return F.query(y);
}

inline double distance_value(const SurfaceModel& S, PolarPoint x, PolarPoint y) {
  x = canonical(S, x);
  y = canonical(S, y);
  double U = std::min(x.r + y.r, 2 * S.L - x.r - y.r);
  DistanceField F(S, x, U + 1e-6);
  return F.query(y, false).value;
}

// Warped product dr^2 + f(r)^2 dTheta^2 over the unit (n-1)-sphere. Any two points
// lie in a totally geodesic 2D slice, where the angle between directions plays theta.
inline double distance_nmodel(const SurfaceModel& S, int n, double rx, const std::vector<double>& ux, double ry,
                              const std::vector<double>& uy) {
  if (n < 2) throw std::invalid_argument("dimension must be at least 2");
  if (static_cast<int>(ux.size()) != n || static_cast<int>(uy.size()) != n)
    throw std::invalid_argument("direction vectors must live in R^n (unit sphere S^{n-1})");
  double nx = 0, ny = 0, dot = 0;
  for (int i = 0; i < n; ++i) {
    nx += ux[i] * ux[i];
    ny += uy[i] * uy[i];
    dot += ux[i] * uy[i];
  }
  if (std::abs(std::sqrt(nx) - 1) > 1e-9 || std::abs(std::sqrt(ny) - 1) > 1e-9)
    throw std::invalid_argument("direction vectors must be unit length");
  double c = std::clamp(dot, -1.0, 1.0);
  // acos loses accuracy near +-1, use atan2 of |u x v| and u.v
  double cross2 = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double m = ux[i] * uy[j] - ux[j] * uy[i];
      cross2 += m * m;
    }
  double delta = std::atan2(std::sqrt(cross2), c);
  return distance_value(S, {rx, 0.0}, {ry, delta});
}

struct CutPoint {
  double phi0;
  double cut_time;
  double conjugate;  // first conjugate time along the direction (inf if none)
  PolarPoint point;
  double deviation;
  std::string error;  // non-empty when this direction failed
};

struct CutLocusReport {
  PolarPoint base;
  std::vector<CutPoint> cut_points;
  double max_meridian_deviation = 0;
  int failures = 0;
};

inline constexpr double cut_predicate_slack = 1e-9;
inline constexpr double cut_time_tol = 1e-9;

inline CutLocusReport cut_locus(const SurfaceModel& S, PolarPoint x, int directions) {
  if (directions < 8) throw std::invalid_argument("cut locus sweep needs at least 8 directions");
  CutLocusReport rep;
  x = canonical(S, x);
  rep.base = x;
  if (at_pole(S, x.r)) {
    PolarPoint other{x.r == 0 ? S.L : 0.0, 0.0};
    for (int i = 0; i < directions; ++i) {
      double phi = pi * i / (directions - 1);
      rep.cut_points.push_back({phi, S.L, S.L, other, 0.0, ""});
    }
    return rep;
  }
  DistanceField field(S, x);
  double opposite = x.theta + pi;
  for (int i = 0; i < directions; ++i) {
    CutPoint cp{pi * i / (directions - 1), 0, std::numeric_limits<double>::infinity(), {}, 0, ""};
    try {
      auto J = first_conjugate(S, x, cp.phi0, std::min(4 * pi, 4 * S.L));
      const auto& g = J.geodesic;
      double hi = J.first_conjugate ? *J.first_conjugate : g.length;
      if (J.first_conjugate) cp.conjugate = *J.first_conjugate;
      auto gap = [&](double t) {
        auto st = g.state_at(t);
        return t - field.distance({st.r, st.theta});
      };
      const double slack = cut_predicate_slack;
      double lo = std::min(0.1, 0.5 * hi);
      double ghi = gap(hi);
      if (!(ghi > slack)) {
        cp.cut_time = hi;
      } else {
        // Bracket on the predicate gap > slack, lo never past and hi always past.
        // Beyond the cut point the gap grows about linearly, so false position through
        // the two latest past points lands next to the switch; a pair of probes
        // straddling that estimate usually closes the bracket. Otherwise bisect.
        double h2 = std::numeric_limits<double>::quiet_NaN(), g2 = h2;
        auto take_past = [&](double t, double gt) {
          h2 = hi;
          g2 = ghi;
          hi = t;
          ghi = gt;
        };
        for (int it = 0; hi - lo > cut_time_tol && it < 200; ++it) {
          double est = std::numeric_limits<double>::quiet_NaN();
          if (std::isfinite(h2) && ghi != g2) est = hi - (ghi - slack) * (hi - h2) / (ghi - g2);
          if (est > lo && est < hi) {
            double b = std::min(est + 0.4 * cut_time_tol, hi);
            double gb = gap(b);
            if (!(gb > slack)) {
              lo = b;
              continue;
            }
            take_past(b, gb);
            double a = std::max(est - 0.4 * cut_time_tol, lo);
            double ga = gap(a);
            if (ga > slack)
              take_past(a, ga);
            else
              lo = a;
            continue;
          }
          double mid = 0.5 * (lo + hi);
          double gm = gap(mid);
          if (gm > slack)
            take_past(mid, gm);
          else
            lo = mid;
        }
        cp.cut_time = 0.5 * (lo + hi);
      }
      auto st = g.state_at(cp.cut_time);
      cp.point = canonical(S, {st.r, st.theta});
      cp.deviation = at_pole(S, cp.point.r) ? 0.0 : std::abs(wrap_pi(st.theta - opposite));
      rep.max_meridian_deviation = std::max(rep.max_meridian_deviation, cp.deviation);
    } catch (const std::exception& e) {
      cp.error = e.what();
      ++rep.failures;
    }
    rep.cut_points.push_back(cp);
  }
  return rep;
}

// radical-inverse low-discrepancy sequence
inline double halton(unsigned i, unsigned base) {
  double f = 1, r = 0;
  while (i > 0) {
    f /= base;
    r += f * (i % base);
    i /= base;
  }
  return r;
}

struct DiameterReport {
  double value;
  PolarPoint x, y;
  int failures = 0;
};

inline DiameterReport diameter_report(const SurfaceModel& S, int sample_count) {
  if (sample_count < 100) throw std::invalid_argument("diameter needs at least 100 samples");
  DiameterReport rep{S.L, {0, 0}, {S.L, 0}};  // the pole pair
  for (int i = 1; i <= sample_count; ++i) {
    PolarPoint a{S.L * halton(i, 2), two_pi * halton(i, 3)};
    PolarPoint b{S.L * halton(i, 5), two_pi * halton(i, 7)};
    try {
      double d = distance_value(S, a, b);
      if (d > rep.value) rep = {d, a, b, rep.failures};
    } catch (const std::exception&) {
      ++rep.failures;
    }
  }
  return rep;
}

inline double diameter(const SurfaceModel& S, int sample_count) { return diameter_report(S, sample_count).value; }

struct MonotonicityReport {
  std::vector<double> margins;
  double min_margin = std::numeric_limits<double>::infinity();
  bool all_positive() const { return min_margin > 0; }
};

// margins d(x, sigma_c(theta2)) - d(x, sigma_c(theta1)) for x = (x_r, 0)
inline MonotonicityReport parallel_monotonicity_check(const SurfaceModel& S, double x_r, double c,
                                                      const std::vector<std::pair<double, double>>& theta_pairs) {
  if (!(c > 0 && c < S.L)) throw std::domain_error("parallel radius must lie in (0, L)");
  MonotonicityReport rep;
  DistanceField field(S, {x_r, 0.0});
  for (auto [t1, t2] : theta_pairs) {
    if (!(0 <= t1 && t1 <= t2 && t2 <= pi + 1e-15))
      throw std::domain_error("theta pairs must satisfy 0 <= theta1 <= theta2 <= pi");
    double m = field.distance(parallel(S, c, t2)) - field.distance(parallel(S, c, t1));
    if (t1 == t2) m = 0;
    rep.margins.push_back(m);
    rep.min_margin = std::min(rep.min_margin, m);
  }
  return rep;
}

}  // namespace revcomp
