// Acceptance run: one PASS/FAIL line per criterion. Tolerances are fixed here.
// Usage: acceptance [criterion numbers...]   (no arguments runs all eleven)

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <revcomp/revcomp.hpp>

using namespace revcomp;
namespace fs = std::filesystem;

namespace {

constexpr double tol_sphere_distance = 1e-8;
constexpr double max_seconds_c1 = 60.0;
constexpr double tol_clairaut = 1e-9;  // per unit length
constexpr double tol_perimeter = 1e-6;
constexpr double tol_diameter = 1e-4;
constexpr double tol_cut_deviation = 1e-4;
constexpr double min_theta_gap = 1e-3;
constexpr double min_order = 0.9;
constexpr double tol_extrapolated = 1e-5;
constexpr double tol_side = 1e-7;
constexpr double tol_angle = 1e-6;
constexpr double tol_theta_step = 1e-6;
constexpr double tol_total_variation = 1e-5;
constexpr double tol_equality = 1e-5;
constexpr double tol_rigidity = 1e-5;

constexpr std::uint64_t seed = 20240917;

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%.3g", v);
  return b;
}

SurfaceModel conf(const char* name) { return load_surface(std::string(REVCOMP_CONFIG_DIR) + "/" + name + ".conf"); }

// independent oracle: great-circle distance in R^3
double sphere_distance(PolarPoint a, PolarPoint b) {
  double ax = std::sin(a.r) * std::cos(a.theta), ay = std::sin(a.r) * std::sin(a.theta), az = std::cos(a.r);
  double bx = std::sin(b.r) * std::cos(b.theta), by = std::sin(b.r) * std::sin(b.theta), bz = std::cos(b.r);
  double cx = ay * bz - az * by, cy = az * bx - ax * bz, cz = ax * by - ay * bx;
  return std::atan2(std::sqrt(cx * cx + cy * cy + cz * cz), ax * bx + ay * by + az * bz);
}

Outcome c1() {
  auto S = conf("sphere");
  auto t0 = std::chrono::steady_clock::now();
  auto err = parallel_map<double>(1000, [&](size_t i) {
    Rng g(seed, "c1", i);
    PolarPoint a{g.uniform(0, pi), g.uniform(0, two_pi)}, b{g.uniform(0, pi), g.uniform(0, two_pi)};
    return std::abs(distance_value(S, a, b) - sphere_distance(a, b));
  });
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  double worst = *std::max_element(err.begin(), err.end());
  return {worst <= tol_sphere_distance && secs <= max_seconds_c1,
          "1000 pairs, max |d - law of cosines| = " + fmt(worst) + " (tol " + fmt(tol_sphere_distance) + "), " +
              fmt(secs) + " s (limit " + fmt(max_seconds_c1) + " s)"};
}

Outcome c2() {
  double worst = 0;
  std::string where;
  for (auto S : {conf("sphere"), conf("ellipsoid")}) {
    auto drift = parallel_map<double>(200, [&](size_t i) {
      Rng g(seed, "c2/" + S.name, i);
      double r0 = g.uniform(0.02, S.L - 0.02), th0 = g.uniform(0, two_pi), ph0 = g.uniform(-pi, pi);
      double len = g.uniform(0.1, two_pi);
      auto seg = shoot(S, {r0, th0}, ph0, len);
      double nu0 = S.f(r0) * std::sin(ph0), d = 0;
      for (int k = 0; k <= 400; ++k) d = std::max(d, std::abs(seg.state_at(len * k / 400).nu - nu0));
      return d / len;
    });
    double w = *std::max_element(drift.begin(), drift.end());
    where += S.name + " " + fmt(w) + " ";
    worst = std::max(worst, w);
  }
  return {worst <= tol_clairaut, "200 geodesics per surface, max nu drift per unit length: " + where + "(tol " +
                                     fmt(tol_clairaut) + ")"};
}

Outcome c3() {
  bool ok = true;
  std::string detail;
  for (auto S : {conf("sphere"), conf("ellipsoid")}) {
    auto P = parallel_map<double>(500, [&](size_t i) {
      Rng g(seed, "c3/" + S.name, i);
      auto ts = sample_triangle(S, nullptr, g);
      return ts.triangle->a + ts.triangle->b + ts.triangle->c;
    });
    double top = *std::max_element(P.begin(), P.end());
    // degenerate: y at the far pole, x anywhere on its meridian
    double closest = 1e300;
    for (double r : {0.4, 1.0, 2.2}) {
      PolarPoint x{r, 0.7}, q{S.L, 0};
      double Pd = distance_value(S, {0, 0}, x) + distance_value(S, {0, 0}, q) + distance_value(S, x, q);
      top = std::max(top, Pd);
      closest = std::min(closest, std::abs(Pd - two_pi));
    }
    bool here = top <= two_pi + tol_perimeter && closest <= tol_perimeter;
    ok = ok && here;
    detail += S.name + ": max perimeter - 2pi = " + fmt(top - two_pi) + ", degenerate |P - 2pi| = " + fmt(closest) + "; ";
  }
  return {ok, "500 triangles per surface; " + detail + "tol " + fmt(tol_perimeter)};
}

Outcome c4() {
  auto S = conf("ellipsoid");
  auto d = diameter_report(S, 400);
  double e = std::abs(d.value - pi);
  return {e <= tol_diameter && d.failures == 0,
          "diameter " + std::to_string(d.value) + ", |diameter - pi| = " + fmt(e) + " (tol " + fmt(tol_diameter) +
              "), " + std::to_string(d.failures) + " failed queries"};
}

Outcome c5() {
  auto S = conf("ellipsoid");
  auto reps = parallel_map<CutLocusReport>(5, [&](size_t i) { return cut_locus(S, {S.L * (i + 1) / 6.0, 0.0}, 256); });
  double worst = 0;
  int fails = 0;
  for (auto& r : reps) {
    worst = std::max(worst, r.max_meridian_deviation);
    fails += r.failures;
  }
  return {worst <= tol_cut_deviation && fails == 0, "5 points x 256 directions, max meridian deviation " + fmt(worst) +
                                                        " (tol " + fmt(tol_cut_deviation) + "), " +
                                                        std::to_string(fails) + " failed directions"};
}

Outcome c6() {
  double worst = 1e300;
  int n = 0;
  for (auto S : {conf("sphere"), conf("ellipsoid")}) {
    auto mins = parallel_map<std::pair<double, int>>(100, [&](size_t gi) {
      Rng g(seed, "c6/" + S.name, gi);
      double xr = g.uniform(0.05 * S.L, 0.95 * S.L), c = g.uniform(0.05 * S.L, 0.95 * S.L);
      std::vector<std::pair<double, double>> pairs;
      for (int k = 0; k < 10; ++k) {
        double t1 = g.uniform(0, pi - min_theta_gap);
        pairs.emplace_back(t1, g.uniform(t1 + min_theta_gap, pi));
      }
      auto rep = parallel_monotonicity_check(S, xr, c, pairs);
      return std::make_pair(rep.min_margin, static_cast<int>(rep.margins.size()));
    });
    for (auto [m, k] : mins) {
      worst = std::min(worst, m);
      n += k;
    }
  }
  return {worst > 0, std::to_string(n) + " configurations on sphere and ellipsoid, min margin " + fmt(worst) +
                         " (must be > 0)"};
}

Outcome c7() {
  auto S = conf("ellipsoid");
  std::vector<double> hs(richardson_steps.begin(), richardson_steps.end());
  struct R {
    bool unique = false, measured = false;
    double order = 0, res = 0;
  };
  auto out = parallel_map<R>(100, [&](size_t i) {
    Rng g(seed, "c7", i);
    for (int attempt = 0;; ++attempt) {
      PolarPoint a{g.uniform(0.1, S.L - 0.1), g.uniform(0, two_pi)}, b{g.uniform(0.1, S.L - 0.1), g.uniform(0, two_pi)};
      double pa = g.uniform(-pi, pi), pb = g.uniform(-pi, pi), t0 = g.uniform(0.2, 0.8) * 0.25 * S.L;
      try {
        auto L = first_variation_ladder(S, shoot(S, a, pa, 0.5 * S.L), shoot(S, b, pb, 0.5 * S.L), t0, hs);
        return R{L.steps.front().multiplicity == 1, L.order_measured, L.order, L.extrapolated_residual};
      } catch (const std::domain_error&) {
        if (attempt > 10) throw;
      }
    }
  });
  int unique = 0, measured = 0;
  double worst_res = 0, worst_order = 1e300;
  for (auto& r : out) {
    if (!r.unique) continue;
    ++unique;
    worst_res = std::max(worst_res, r.res);
    if (r.measured) {
      ++measured;
      worst_order = std::min(worst_order, r.order);
    }
  }
  bool ok = unique > 0 && measured > 0 && worst_res <= tol_extrapolated && worst_order >= min_order;
  return {ok, "100 pairs, " + std::to_string(unique) + " with unique minimizer; max extrapolated residual " +
                  fmt(worst_res) + " (tol " + fmt(tol_extrapolated) + "); min order " + fmt(worst_order) + " over " +
                  std::to_string(measured) + " ladders above the noise floor (min " + fmt(min_order) + ")"};
}

Outcome c8() {
  auto M = conf("sphere"), Mt = conf("ellipsoid_curvature");
  auto rb = check_radial_bound(M, Mt);
  if (!rb.holds()) return {false, "radial curvature bound fails, margin " + fmt(rb.margin)};
  struct R {
    int held = 0;
    double side = 0, margin = 0;
    bool ok = false;
  };
  auto out = parallel_map<R>(200, [&](size_t i) {
    Rng g(seed, "c8", i);
    auto ts = sample_triangle(M, &Mt, g);
    if (!ts.triangle) return R{};
    auto cr = toponogov_check(M, Mt, *ts.triangle);
    return R{cr.constraints_held(tol_side, tol_angle), cr.max_side_residual(), cr.min_margin(), !cr.falsified};
  });
  int all9 = 0;
  double side = 0, margin = 1e300;
  for (auto& r : out) {
    all9 += r.ok && r.held == 9;
    side = std::max(side, r.side);
    margin = std::min(margin, r.margin);
  }
  return {all9 == 200, "bound margin " + fmt(rb.margin) + "; " + std::to_string(all9) +
                           "/200 triangles hold all nine constraints; max side residual " + fmt(side) + " (tol " +
                           fmt(tol_side) + "), min angle margin " + fmt(margin) + " (tol -" + fmt(tol_angle) + ")"};
}

Outcome c9() {
  auto M = conf("sphere"), Mt = conf("ellipsoid_curvature");
  auto inc = parallel_map<double>(50, [&](size_t i) {
    Rng g(seed, "c9", i);
    auto ts = sample_triangle(M, &Mt, g);
    if (!ts.triangle) return 1e300;
    auto pr = theta_monotonicity_check(M, Mt, ts.triangle->x, ts.triangle->y, 64);
    return pr.errors.empty() ? pr.max_increase : 1e300;
  });
  struct E {
    double tv = 1e300, eq = 1e300;
  };
  auto same = parallel_map<E>(50, [&](size_t i) {
    Rng g(seed, "c9/self", i);
    auto ts = sample_triangle(Mt, &Mt, g);
    if (!ts.triangle) return E{};
    auto pr = theta_monotonicity_check(Mt, Mt, ts.triangle->x, ts.triangle->y, 64);
    auto cr = toponogov_check(Mt, Mt, *ts.triangle);
    if (!pr.errors.empty() || !cr.equality_case) return E{};
    return E{pr.total_variation, std::max(std::abs(cr.angle_margins[1]), std::abs(cr.angle_margins[2]))};
  });
  double up = *std::max_element(inc.begin(), inc.end());
  double tv = 0, eq = 0;
  for (auto& e : same) {
    tv = std::max(tv, e.tv);
    eq = std::max(eq, e.eq);
  }
  bool ok = up <= tol_theta_step && tv <= tol_total_variation && eq <= tol_equality;
  return {ok, "50 grids of 64: largest step increase " + fmt(up) + " (tol " + fmt(tol_theta_step) +
                  "); M = model on 50 triangles: total variation " + fmt(tv) + " (tol " + fmt(tol_total_variation) +
                  "), other two margins " + fmt(eq) + " (tol " + fmt(tol_equality) + ")"};
}

Outcome c10() {
  auto S = conf("ellipsoid");
  PolarPoint x{1.0, 0.0}, y{S.L - 1.0, pi};  // opposite on a meridian
  std::vector<PolarPoint> zs;
  for (int i = 0; i < 50; ++i) {
    Rng g(seed, "c10", i);
    zs.push_back({g.uniform(0, S.L), g.uniform(0, two_pi)});
  }
  double dxy = distance_value(S, x, y);
  double angle = std::abs(wrap_pi(y.theta - x.theta));
  double perim = distance_value(S, {0, 0}, x) + distance_value(S, {0, 0}, y) + dxy;
  DistanceField fx(S, x, 2 * S.L), fy(S, y, 2 * S.L);
  double zdef = 0;
  for (auto z : zs) zdef = std::max(zdef, std::abs(fx.distance(z) + fy.distance(z) - pi));
  auto rp = rigidity_probe(S, x, y, zs, 16);
  bool ok = std::abs(dxy - pi) <= tol_rigidity && std::abs(angle - pi) <= tol_rigidity &&
            std::abs(perim - two_pi) <= tol_rigidity && zdef <= tol_rigidity;
  std::string d = "d(x,y) = " + std::to_string(dxy) + " (needs pi), angle xpy - pi = " + fmt(angle - pi) +
                  ", perimeter - 2pi = " + fmt(perim - two_pi) + ", max |d(x,z) + d(z,y) - pi| = " + fmt(zdef) +
                  " over 50 z (tol " + fmt(tol_rigidity) + ")";
  if (!rp.precondition) d += "; " + rp.diagnostic;
  return {ok && rp.pass(), d};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome c11() {
  auto base = fs::temp_directory_path() / "revcomp_acceptance_c11";
  fs::remove_all(base);
  std::string cfg = std::string(REVCOMP_CONFIG_DIR) + "/suite_quick.conf";
  int rc[2];
  for (int k = 0; k < 2; ++k) {
    std::string cmd = "REVCOMP_THREADS=" + std::to_string(k + 1) + " '" + REVCOMP_CLI + "' verify --config '" + cfg +
                      "' --output-dir '" + (base / (k ? "b" : "a")).string() + "' > /dev/null";
    rc[k] = std::system(cmd.c_str());
  }
  std::set<std::string> names;
  for (auto sub : {"a", "b"})
    if (fs::exists(base / sub))
      for (auto& e : fs::directory_iterator(base / sub)) names.insert(e.path().filename().string());
  int same = 0, differ = 0;
  for (auto& n : names) {
    if (fs::exists(base / "a" / n) && fs::exists(base / "b" / n) && slurp(base / "a" / n) == slurp(base / "b" / n))
      ++same;
    else
      ++differ;
  }
  fs::remove_all(base);
  bool ok = !names.empty() && differ == 0 && rc[0] == rc[1];
  return {ok, "two verify runs (1 and 2 threads): " + std::to_string(same) + " identical CSV files, " +
                  std::to_string(differ) + " differing; exit codes " + std::to_string(rc[0]) + "/" +
                  std::to_string(rc[1])};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> all = {
      {"sphere distance oracle", c1},        {"clairaut conservation", c2},
      {"perimeter bound", c3},               {"diameter", c4},
      {"cut locus on opposite meridian", c5}, {"parallel monotonicity", c6},
      {"first variation", c7},               {"comparison margins", c8},
      {"monotone comparison angle", c9},     {"rigidity structure", c10},
      {"determinism", c11}};
  std::set<int> pick;
  for (int i = 1; i < argc; ++i) pick.insert(std::atoi(argv[i]));
  int failed = 0;
  for (size_t i = 0; i < all.size(); ++i) {
    int id = static_cast<int>(i) + 1;
    if (!pick.empty() && !pick.count(id)) continue;
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = all[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s criterion %d (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, all[i].first.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
