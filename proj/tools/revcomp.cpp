// revcomp command line: surface checks, geodesics, distances and the verification suite.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include <revcomp/revcomp.hpp>

using namespace revcomp;

namespace {

PolarPoint parse_point(const std::string& s) {
  auto comma = s.find(',');
  if (comma == std::string::npos) throw std::invalid_argument("expected r,theta but got '" + s + "'");
  try {
    size_t p1 = 0, p2 = 0;
    std::string a = s.substr(0, comma), b = s.substr(comma + 1);
    double r = std::stod(a, &p1), t = std::stod(b, &p2);
    if (p1 != a.size() || p2 != b.size()) throw std::invalid_argument(s);
    return {r, t};
  } catch (const std::exception&) {
    throw std::invalid_argument("expected r,theta but got '" + s + "'");
  }
}

void check_point(const SurfaceModel& S, PolarPoint p) {
  if (!(p.r >= 0 && p.r <= S.L))
    throw std::invalid_argument("r = " + num(p.r) + " lies outside [0, " + num(S.L) + "]");
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

int surface_check(const std::string& cfg) {
  auto S = load_surface(cfg);
  std::printf("surface %s L=%s\n", S.name.c_str(), num(S.L).c_str());
  for (auto& l : S.report) std::printf("%s %s %s\n", l.pass ? "PASS" : "FAIL", l.name.c_str(), num(l.margin).c_str());
  return S.valid() ? 0 : 1;
}

int geodesic_shoot(const std::string& cfg, double r0, double th0, double ph0, double len, int n) {
  auto S = load_surface(cfg);
  check_point(S, {r0, th0});
  if (!(len > 0)) throw std::invalid_argument("--len must be positive");
  if (n < 1) throw std::invalid_argument("--samples must be at least 1");
  auto g = shoot(S, {r0, th0}, ph0, len);
  std::printf("s,r,theta,phi,nu\n");
  for (int i = 0; i <= n; ++i) {
    double s = len * i / n;
    auto st = g.state_at(s);
    std::printf("%s,%s,%s,%s,%s\n", num(s).c_str(), num(st.r).c_str(), num(st.theta).c_str(), num(st.phi).c_str(),
                num(st.nu).c_str());
  }
  return 0;
}

int dist(const std::string& cfg, const std::string& xs, const std::string& ys) {
  auto S = load_surface(cfg);
  auto x = parse_point(xs), y = parse_point(ys);
  check_point(S, x);
  check_point(S, y);
  auto d = distance(S, x, y);
  std::printf("distance %s\nmultiplicity %d\n", num(d.value).c_str(), d.multiplicity);
  if (d.continuum) std::printf("continuum 1\n");
  for (double a : d.initial_angles) std::printf("phi0 %s\n", num(a).c_str());
  return 0;
}

int cutlocus(const std::string& cfg, const std::string& xs, int dirs, const std::string& out_path) {
  auto S = load_surface(cfg);
  auto x = parse_point(xs);
  check_point(S, x);
  auto rep = cut_locus(S, x, dirs);
  auto out = open_out(out_path);
  out << "phi0,cut_time,r,theta,meridian_deviation\n";
  for (auto& c : rep.cut_points)
    out << num(c.phi0) << ',' << num(c.cut_time) << ',' << num(c.point.r) << ',' << num(c.point.theta) << ','
        << num(c.deviation) << '\n';
  std::printf("max_meridian_deviation %s\nfailures %d\n", num(rep.max_meridian_deviation).c_str(), rep.failures);
  for (auto& c : rep.cut_points)
    if (!c.error.empty()) std::fprintf(stderr, "phi0 %s: %s\n", num(c.phi0).c_str(), c.error.c_str());
  return rep.failures == 0 ? 0 : 1;
}

int diam(const std::string& cfg, int n) {
  auto S = load_surface(cfg);
  auto d = diameter_report(S, n);
  std::printf("diameter %s\nL %s\nx %s,%s\ny %s,%s\nfailures %d\n", num(d.value).c_str(), num(S.L).c_str(),
              num(d.x.r).c_str(), num(d.x.theta).c_str(), num(d.y.r).c_str(), num(d.y.theta).c_str(), d.failures);
  return 0;
}

int theta_cmd(const std::string& cfg, double a, double b, double c) {
  auto S = load_surface(cfg);
  std::printf("%s\n", num(angle_function(S, {a, b, c})).c_str());
  return 0;
}

int compare(const std::string& m, const std::string& mt, int n, std::uint64_t seed, const std::string& out_path) {
  auto M = load_surface(m), Mt = load_surface(mt);
  require_radial_bound(M, Mt);
  struct Line {
    std::string text, err;
  };
  auto lines = parallel_map<Line>(n, [&](size_t i) {
    Line l;
    try {
      Rng g(seed, "compare", i);
      auto ts = sample_triangle(M, &Mt, g);
      if (!ts.triangle) {
        l.err = "triangle " + std::to_string(i) + " skipped: " + ts.last_rejection;
        return l;
      }
      auto cr = toponogov_check(M, Mt, *ts.triangle);
      Row r;
      r << cr.sides.a << cr.sides.b << cr.sides.c;
      for (double v : cr.angles) r << v;
      for (double v : cr.tangles) r << v;
      for (double v : cr.angle_margins) r << v;
      r << cr.equality_case;
      l.text = r.str();
      if (cr.falsified) l.err = "triangle " + std::to_string(i) + " falsified: " + cr.note;
    } catch (const std::exception& e) {
      l.err = "triangle " + std::to_string(i) + ": " + e.what();
    }
    return l;
  });
  auto out = open_out(out_path);
  out << "a,b,c,angle_p,angle_x,angle_y,tangle_p,tangle_x,tangle_y,margin_p,margin_x,margin_y,equality\n";
  int bad = 0;
  for (auto& l : lines) {
    if (!l.text.empty()) out << l.text << '\n';
    if (!l.err.empty()) {
      ++bad;
      std::fprintf(stderr, "%s\n", l.err.c_str());
    }
  }
  return bad == 0 ? 0 : 1;
}

int verify(const std::string& cfg, const std::string& only, const std::string& out_dir) {
  auto sc = load_suite(cfg);
  if (!out_dir.empty()) sc.output_dir = out_dir;
  auto rep = run_lemma_suite(sc, only);
  for (auto& c : rep.checks)
    std::printf("%s %-22s %-28s n=%-5d fail=%-3d max_violation=%-12s tol=%s%s%s\n", c.pass ? "PASS" : "FAIL",
                c.check.c_str(), c.subject.c_str(), c.samples, c.failures, num(c.max_violation).c_str(),
                num(c.tolerance).c_str(), c.note.empty() ? "" : "  # ", c.note.c_str());
  if (!sc.output_dir.empty()) std::printf("csv written to %s\n", sc.output_dir.string().c_str());
  return rep.all_pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rotationally symmetric surfaces: geodesics, distances and comparison checks"};
  app.require_subcommand(1);

  auto* surf = app.add_subcommand("surface", "surface model tools");
  surf->require_subcommand(1);
  auto* surf_check = surf->add_subcommand("check", "validate a surface config");
  std::string cfg;
  surf_check->add_option("--config", cfg, "surface config")->required();

  auto* geo = app.add_subcommand("geodesic", "geodesic tools");
  geo->require_subcommand(1);
  auto* geo_shoot = geo->add_subcommand("shoot", "integrate one geodesic, CSV s,r,theta,phi,nu");
  double r0 = 0, th0 = 0, ph0 = 0, len = 0;
  int gsamples = 100;
  geo_shoot->add_option("--config", cfg, "surface config")->required();
  geo_shoot->add_option("--r0", r0)->required();
  geo_shoot->add_option("--theta0", th0)->required();
  geo_shoot->add_option("--phi0", ph0, "angle to the meridian direction")->required();
  geo_shoot->add_option("--len", len)->required();
  geo_shoot->add_option("--samples", gsamples, "number of equal steps")->capture_default_str();

  auto* dist_cmd = app.add_subcommand("dist", "distance between two points");
  std::string xs, ys;
  dist_cmd->add_option("--config", cfg)->required();
  dist_cmd->add_option("--x", xs, "r,theta")->required();
  dist_cmd->add_option("--y", ys, "r,theta")->required();

  auto* cut_cmd = app.add_subcommand("cutlocus", "cut locus sweep from one point");
  int dirs = 64;
  std::string out;
  cut_cmd->add_option("--config", cfg)->required();
  cut_cmd->add_option("--x", xs, "r,theta")->required();
  cut_cmd->add_option("--dirs", dirs)->capture_default_str();
  cut_cmd->add_option("--out", out, "CSV path")->required();

  auto* diam_cmd = app.add_subcommand("diameter", "diameter estimate");
  int dsamples = 400;
  diam_cmd->add_option("--config", cfg)->required();
  diam_cmd->add_option("--samples", dsamples)->capture_default_str();

  auto* theta = app.add_subcommand("theta", "apex angle of the comparison triangle with sides a, b, c");
  double a = 0, b = 0, c = 0;
  theta->add_option("--config", cfg)->required();
  theta->add_option("--a", a)->required();
  theta->add_option("--b", b)->required();
  theta->add_option("--c", c)->required();

  auto* cmp = app.add_subcommand("compare", "sampled triangles in M against the model");
  std::string m, mt;
  int tri = 100;
  std::uint64_t seed = 42;
  cmp->add_option("--m", m, "surface config of M")->required();
  cmp->add_option("--mtilde", mt, "surface config of the model")->required();
  cmp->add_option("--triangles", tri)->capture_default_str();
  cmp->add_option("--seed", seed)->capture_default_str();
  cmp->add_option("--out", out, "CSV path")->required();

  auto* ver = app.add_subcommand("verify", "run the verification suite");
  std::string only, out_dir;
  ver->add_option("--config", cfg, "suite config")->required();
  ver->add_option("--only", only, "run a single check or check group");
  ver->add_option("--output-dir", out_dir, "overrides output_dir from the config");

  CLI11_PARSE(app, argc, argv);

  try {
    if (surf_check->parsed()) return surface_check(cfg);
    if (geo_shoot->parsed()) return geodesic_shoot(cfg, r0, th0, ph0, len, gsamples);
    if (dist_cmd->parsed()) return dist(cfg, xs, ys);
    if (cut_cmd->parsed()) return cutlocus(cfg, xs, dirs, out);
    if (diam_cmd->parsed()) return diam(cfg, dsamples);
    if (theta->parsed()) return theta_cmd(cfg, a, b, c);
    if (cmp->parsed()) return compare(m, mt, tri, seed, out);
    if (ver->parsed()) return verify(cfg, only, out_dir);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
