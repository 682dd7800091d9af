#pragma once

// Suite runner: seeded sampling, per-check CSV files and a summary table.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "comparison.hpp"
#include "config.hpp"
#include "metricspace.hpp"
#include "rng.hpp"
#include "surface.hpp"

namespace revcomp {

// check name -> default tolerance. Order here is the order of the summary.
inline const std::vector<std::pair<std::string, double>>& check_catalogue() {
  static const std::vector<std::pair<std::string, double>> c = {
      {"clairaut", 1e-9},
      {"perimeter", 1e-6},
      {"perimeter_degenerate", 1e-6},
      {"diameter", 1e-4},
      {"cut_locus", 1e-4},
      {"parallel_monotonicity", 0.0},
      {"first_variation", 1e-5},
      {"first_variation_order", 0.0},
      {"toponogov_sides", 1e-7},
      {"toponogov_angles", 1e-6},
      {"equality_propagation", 1e-5},
      {"theta_monotonicity", 1e-6},
      {"theta_limit", 1e-4},
      {"theta_constancy", 1e-5},
      {"rigidity", 1e-5},
  };
  return c;
}

// checks that come out of the same computation run together
inline std::string check_group(const std::string& check) {
  if (check.rfind("perimeter", 0) == 0) return "perimeter";
  if (check.rfind("first_variation", 0) == 0) return "first_variation";
  if (check.rfind("toponogov", 0) == 0 || check == "equality_propagation") return "toponogov";
  if (check.rfind("theta", 0) == 0) return "theta";
  return check;
}

struct SuiteConfig {
  std::vector<std::filesystem::path> surface_paths;
  std::vector<SurfaceModel> surfaces;
  std::uint64_t seed = 42;
  int triangle_count = 500;
  std::map<std::string, double> tolerance_overrides;
  std::filesystem::path output_dir;

  int clairaut_geodesics = 200;
  int diameter_samples = 400;
  int cut_points = 5;
  int cut_directions = 256;
  int monotonicity_configs = 1000;
  int variation_pairs = 100;
  int theta_triangles = 50;
  int theta_steps = 64;
  int rigidity_points = 50;
  int rigidity_cut_directions = 16;

  std::vector<std::pair<std::string, std::string>> echo;  // config as read

  double tolerance(const std::string& check) const {
    auto it = tolerance_overrides.find(check);
    if (it != tolerance_overrides.end()) return it->second;
    for (auto& [name, tol] : check_catalogue())
      if (name == check) return tol;
    throw std::invalid_argument("unknown check '" + check + "'");
  }
};

namespace detail {

inline int count_key(const KeyValueFile& kv, const std::string& key, int fallback, int minimum) {
  if (!kv.has(key)) return fallback;
  double v = kv.number(key);
  if (!(v >= minimum) || v != std::floor(v) || v > 1e9)
    throw std::invalid_argument(key + " must be an integer >= " + std::to_string(minimum));
  return static_cast<int>(v);
}

inline std::uint64_t parse_seed(const std::string& s) {
  try {
    size_t pos = 0;
    unsigned long long v = std::stoull(s, &pos, 0);
    if (pos != s.size() || s.front() == '-') throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("seed must be a non-negative 64-bit integer, got '" + s + "'");
  }
}

}  // namespace detail

inline SuiteConfig parse_suite(const KeyValueFile& kv) {
  static const std::set<std::string> known = {
      "surface",          "seed",           "triangle_count",       "output_dir",
      "clairaut_geodesics", "diameter_samples", "cut_points",       "cut_directions",
      "monotonicity_configs", "variation_pairs", "theta_triangles", "theta_steps",
      "rigidity_points",  "rigidity_cut_directions"};
  for (auto& [k, v] : kv.entries()) {
    if (k.rfind("tolerance.", 0) == 0) continue;
    if (!known.count(k)) throw std::invalid_argument("unknown suite key '" + k + "'");
  }
  SuiteConfig c;
  c.echo = kv.entries();
  for (auto& s : kv.all("surface")) c.surface_paths.push_back(kv.resolve(s));
  if (c.surface_paths.empty()) throw std::invalid_argument("suite config lists no surfaces");
  for (auto& p : c.surface_paths) c.surfaces.push_back(load_surface(p));
  if (kv.has("seed")) c.seed = detail::parse_seed(kv.get("seed"));
  c.triangle_count = detail::count_key(kv, "triangle_count", c.triangle_count, 0);
  c.clairaut_geodesics = detail::count_key(kv, "clairaut_geodesics", c.clairaut_geodesics, 0);
  c.diameter_samples = detail::count_key(kv, "diameter_samples", c.diameter_samples, 100);
  c.cut_points = detail::count_key(kv, "cut_points", c.cut_points, 0);
  c.cut_directions = detail::count_key(kv, "cut_directions", c.cut_directions, 8);
  c.monotonicity_configs = detail::count_key(kv, "monotonicity_configs", c.monotonicity_configs, 0);
  c.variation_pairs = detail::count_key(kv, "variation_pairs", c.variation_pairs, 0);
  c.theta_triangles = detail::count_key(kv, "theta_triangles", c.theta_triangles, 0);
  c.theta_steps = detail::count_key(kv, "theta_steps", c.theta_steps, 2);
  c.rigidity_points = detail::count_key(kv, "rigidity_points", c.rigidity_points, 0);
  c.rigidity_cut_directions = detail::count_key(kv, "rigidity_cut_directions", c.rigidity_cut_directions, 8);
  if (kv.has("output_dir")) c.output_dir = kv.resolve(kv.get("output_dir"));
  for (auto& [k, v] : kv.entries()) {
    if (k.rfind("tolerance.", 0) != 0) continue;
    std::string check = k.substr(10);
    bool found = false;
    for (auto& e : check_catalogue()) found = found || e.first == check;
    if (!found) throw std::invalid_argument("tolerance for unknown check '" + check + "'");
    double t = kv.number(k);
    if (!(t >= 0)) throw std::invalid_argument(k + " must be >= 0");
    c.tolerance_overrides[check] = t;
  }
  return c;
}

inline SuiteConfig load_suite(const std::filesystem::path& path) { return parse_suite(KeyValueFile::load(path)); }

// ---- worker pool -----------------------------------------------------------

inline int worker_count() {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (n < 1) n = 1;
  if (const char* env = std::getenv("REVCOMP_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) n = static_cast<int>(std::min<long>(v, 256));
  }
  return n;
}

// results land at their index, whatever order the workers finish in
template <class R, class F>
std::vector<R> parallel_map(size_t n, F&& fn) {
  std::vector<R> out(n);
  std::atomic<size_t> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  auto work = [&] {
    for (size_t i; (i = next++) < n;) {
      try {
        out[i] = fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lk(err_mu);
        if (!err) err = std::current_exception();
      }
    }
  };
  size_t w = std::min<size_t>(static_cast<size_t>(worker_count()), n);
  if (w <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (size_t k = 0; k < w; ++k) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (err) std::rethrow_exception(err);
  return out;
}

// ---- csv ---------------------------------------------------------------------

inline std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string csv_text(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string o = "\"";
  for (char ch : s) {
    if (ch == '"') o += '"';
    o += ch == '\n' ? ' ' : ch;
  }
  return o + "\"";
}

class Row {
 public:
  Row& operator<<(double v) { return put(num(v)); }
  Row& operator<<(int v) { return put(std::to_string(v)); }
  Row& operator<<(size_t v) { return put(std::to_string(v)); }
  Row& operator<<(bool v) { return put(v ? "1" : "0"); }
  Row& operator<<(const std::string& s) { return put(csv_text(s)); }
  Row& operator<<(const char* s) { return put(csv_text(s)); }
  const std::string& str() const { return s_; }

 private:
  Row& put(const std::string& f) {
    if (!first_) s_ += ',';
    first_ = false;
    s_ += f;
    return *this;
  }
  std::string s_;
  bool first_ = true;
};

struct Table {
  std::string header;
  std::vector<std::string> rows;
  void add(const Row& r) { rows.push_back(r.str()); }
  void append(const std::vector<std::string>& more) { rows.insert(rows.end(), more.begin(), more.end()); }
  std::string text() const {
    std::string o = header + "\n";
    for (auto& r : rows) o += r + "\n";
    return o;
  }
};

// ---- report ------------------------------------------------------------------

struct CheckResult {
  std::string check, subject;
  int samples = 0;
  int failures = 0;  // samples that errored or broke a strict condition
  double min_margin = std::numeric_limits<double>::quiet_NaN();
  double max_violation = std::numeric_limits<double>::quiet_NaN();
  double tolerance = 0;
  bool pass = false;
  std::string note;
};

struct SuiteReport {
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> provenance;
  std::vector<CheckResult> checks;
  std::map<std::string, Table> tables;  // file stem -> contents

  bool all_pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
  }

  Table summary() const {
    Table t{"check,subject,samples,failures,min_margin,max_violation,tolerance,pass,note", {}};
    for (auto& c : checks) {
      Row r;
      r << c.check << c.subject << c.samples << c.failures << c.min_margin << c.max_violation << c.tolerance
        << std::string(c.pass ? "PASS" : "FAIL") << c.note;
      t.add(r);
    }
    return t;
  }

  Table provenance_table() const {
    Table t{"key,value", {}};
    for (auto& [k, v] : provenance) {
      Row r;
      r << k << v;
      t.add(r);
    }
    return t;
  }

  void write(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    auto put = [&](const std::string& stem, const Table& t) {
      std::ofstream out(dir / (stem + ".csv"), std::ios::binary);
      if (!out) throw std::runtime_error("cannot write " + (dir / (stem + ".csv")).string());
      out << t.text();
    };
    for (auto& [stem, t] : tables) put(stem, t);
    put("summary", summary());
    put("provenance", provenance_table());
  }
};

namespace detail {

struct Acc {
  int samples = 0, failures = 0;
  double min_margin = std::numeric_limits<double>::infinity();
  double max_violation = -std::numeric_limits<double>::infinity();
  std::string first_error;

  void add(double margin, double violation) {
    ++samples;
    min_margin = std::min(min_margin, margin);
    max_violation = std::max(max_violation, violation);
  }
  void add(double violation) { add(-violation, violation); }
  void fail(const std::string& why) {
    ++failures;
    if (first_error.empty()) first_error = why;
  }
};

// pass: no failed samples and max_violation <= tolerance
inline CheckResult finish_check(const std::string& check, const std::string& subject, const Acc& a, double tol,
                                std::string note = "") {
  CheckResult c;
  c.check = check;
  c.subject = subject;
  c.samples = a.samples;
  c.failures = a.failures;
  c.tolerance = tol;
  if (a.samples > 0) {
    c.min_margin = a.min_margin;
    c.max_violation = a.max_violation;
  }
  c.pass = a.failures == 0 && (a.samples == 0 || a.max_violation <= tol);
  if (!a.first_error.empty()) note += (note.empty() ? "" : "; ") + ("first failure: " + a.first_error);
  c.note = note;
  return c;
}

inline CheckResult not_applicable(const std::string& check, const std::string& subject, double tol,
                                  const std::string& why) {
  CheckResult c;
  c.check = check;
  c.subject = subject;
  c.tolerance = tol;
  c.pass = true;
  c.note = "not applicable: " + why;
  return c;
}

}  // namespace detail

// ---- sampling ----------------------------------------------------------------

inline constexpr int max_resamples = 100;
inline constexpr double vertex_margin = 0.1;  // keep vertices this far from both poles

struct TriangleSample {
  std::optional<SurfaceTriangle> triangle;
  int rejections = 0;
  std::string last_rejection;
};

// Apex at the pole; x, y with r uniform in (0.1, L - 0.1). With a partner, sides
// outside its admissible set are rejected and redrawn.
inline TriangleSample sample_triangle(const SurfaceModel& M, const SurfaceModel* partner, Rng& rng) {
  TriangleSample out;
  double lo = vertex_margin, hi = M.L - vertex_margin;
  if (!(hi > lo)) throw std::domain_error("surface too short for the vertex exclusion zone");
  for (int k = 0; k < max_resamples; ++k) {
    PolarPoint x{rng.uniform(lo, hi), rng.uniform(0, two_pi)};
    PolarPoint y{rng.uniform(lo, hi), rng.uniform(0, two_pi)};
    auto tri = make_triangle(M, x, y);
    if (partner) {
      auto m = in_T(*partner, {tri.a, tri.b, tri.c});
      if (!m.inside) {
        ++out.rejections;
        out.last_rejection = m.violated;
        continue;
      }
    }
    out.triangle = std::move(tri);
    return out;
  }
  return out;
}

// ---- suites ------------------------------------------------------------------

namespace detail {

struct SampleOut {
  std::vector<std::string> rows;
  std::vector<std::pair<double, double>> values;  // (margin, violation) per check slot
  std::vector<bool> present;
  std::vector<std::string> fails;  // per check slot, empty = fine
  std::string error;
  int rejections = 0;
};

inline std::string what(const std::exception& e) { return e.what(); }

class Suite {
 public:
  Suite(const SuiteConfig& cfg, const std::string& only) : cfg_(cfg), only_(only) {
    if (!only.empty()) {
      bool ok = false;
      for (auto& [name, tol] : check_catalogue()) ok = ok || name == only || check_group(name) == only;
      if (!ok) {
        std::string list;
        for (auto& [name, tol] : check_catalogue()) list += (list.empty() ? "" : ", ") + name;
        throw std::invalid_argument("unknown check '" + only + "'; known: " + list);
      }
    }
  }

  SuiteReport run() {
    rep_.seed = cfg_.seed;
    rep_.provenance.emplace_back("seed", std::to_string(cfg_.seed));
    for (auto& [k, v] : cfg_.echo) rep_.provenance.emplace_back("config." + k, v);
    for (size_t i = 0; i < cfg_.surfaces.size(); ++i) {
      auto& S = cfg_.surfaces[i];
      rep_.provenance.emplace_back("surface." + std::to_string(i), S.name + " L=" + num(S.L));
    }
    for (auto& [name, tol] : check_catalogue()) rep_.provenance.emplace_back("tolerance." + name, num(cfg_.tolerance(name)));
    if (!only_.empty()) rep_.provenance.emplace_back("only", only_);

    for (auto& S : cfg_.surfaces) {
      if (wants("clairaut")) clairaut(S);
      if (wants("perimeter")) perimeter(S);
      std::optional<double> diam;
      if (wants("diameter") || wants("rigidity")) diam = diameter_check(S, wants("diameter"));
      if (wants("cut_locus")) cut_locus_check(S);
      if (wants("parallel_monotonicity")) monotonicity(S);
      if (wants("first_variation")) variation(S);
      if (wants("rigidity")) rigidity(S, *diam);
    }
    for (size_t i = 0; i < cfg_.surfaces.size(); ++i)
      for (size_t j = 0; j < cfg_.surfaces.size(); ++j) {
        if (wants("toponogov")) toponogov(i, j);
        if (wants("theta")) theta(i, j);
      }
    // keep catalogue order in the summary
    std::vector<CheckResult> sorted;
    for (auto& [name, tol] : check_catalogue())
      for (auto& c : rep_.checks)
        if (c.check == name) sorted.push_back(c);
    rep_.checks = std::move(sorted);
    return std::move(rep_);
  }

 private:
  const SuiteConfig& cfg_;
  std::string only_;
  SuiteReport rep_;

  bool wants(const std::string& group) const { return only_.empty() || only_ == group || check_group(only_) == group; }
  bool selected(const std::string& check) const { return only_.empty() || only_ == check || only_ == check_group(check); }

  void push(CheckResult c) {
    if (selected(c.check)) rep_.checks.push_back(std::move(c));
  }

  Table& table(const std::string& stem, const std::string& header) {
    auto& t = rep_.tables[stem];
    if (t.header.empty()) t.header = header;
    return t;
  }

  Rng rng(const std::string& stream, const std::string& subject, size_t index) const {
    return Rng(cfg_.seed, stream + "/" + subject, index);
  }

  // ---- clairaut: nu = f(r) sin(phi) along random geodesics
  void clairaut(const SurfaceModel& S) {
    auto& t = table("clairaut", "subject,index,r0,theta0,phi0,length,nu0,max_drift,drift_per_length,error");
    auto out = parallel_map<SampleOut>(cfg_.clairaut_geodesics, [&](size_t i) {
      SampleOut o;
      Rng g = rng("clairaut", S.name, i);
      double r0 = g.uniform(0.05 * S.L, 0.95 * S.L), th0 = g.uniform(0, two_pi), ph0 = g.uniform(-pi, pi);
      double len = g.uniform(0.25, 2.0) * S.L;
      Row r;
      r << S.name << i << r0 << th0 << ph0 << len;
      try {
        auto seg = shoot(S, {r0, th0}, ph0, len);
        double nu0 = S.f(r0) * std::sin(ph0), drift = 0;
        for (auto& n : seg.nodes_) drift = std::max(drift, std::abs(seg.to_state(n).nu - nu0));
        drift = std::max(drift, std::abs(seg.end_state().nu - nu0));
        r << nu0 << drift << drift / len << "";
        o.values = {{-drift / len, drift / len}};
        o.present = {true};
      } catch (const std::exception& e) {
        r << NAN << NAN << NAN << what(e);
        o.error = what(e);
      }
      o.rows = {r.str()};
      return o;
    });
    Acc a;
    for (auto& o : out) {
      t.append(o.rows);
      if (!o.error.empty()) a.fail(o.error);
      else a.add(o.values[0].first, o.values[0].second);
    }
    push(finish_check("clairaut", S.name, a, cfg_.tolerance("clairaut"), "max nu drift per unit length"));
  }

  // ---- perimeter of triangles with apex at the pole, plus degenerate cases
  void perimeter(const SurfaceModel& S) {
    auto& t = table("perimeter",
                    "subject,index,kind,x_r,x_theta,y_r,y_theta,d_px,d_py,d_xy,perimeter,excess,multiplicity,error");
    const double L = S.L;
    auto out = parallel_map<SampleOut>(cfg_.triangle_count, [&](size_t i) {
      SampleOut o;
      Rng g = rng("perimeter", S.name, i);
      Row r;
      r << S.name << i << "random";
      try {
        auto ts = sample_triangle(S, nullptr, g);
        auto& T = *ts.triangle;
        double P = T.a + T.b + T.c;
        r << T.x.r << T.x.theta << T.y.r << T.y.theta << T.a << T.c << T.b << P << P - 2 * L << T.multiplicity << "";
        o.values = {{2 * L - P, P - 2 * L}};
      } catch (const std::exception& e) {
        for (int k = 0; k < 9; ++k) r << NAN;
        r << 0 << what(e);
        o.error = what(e);
      }
      o.rows = {r.str()};
      return o;
    });
    // degenerate: y at the far pole, and x, y on opposite meridians with r_x + r_y = L
    struct Degenerate {
      const char* kind;
      PolarPoint x, y;
    };
    std::vector<Degenerate> deg;
    for (double frac : {0.25, 0.5, 0.75}) {
      deg.push_back({"far_pole", {frac * L, 0.0}, {L, 0.0}});
      deg.push_back({"opposite_meridian", {frac * L, 0.0}, {(1 - frac) * L, pi}});
    }
    auto dout = parallel_map<SampleOut>(deg.size(), [&](size_t i) {
      SampleOut o;
      auto& d = deg[i];
      Row r;
      r << S.name << i << d.kind << d.x.r << d.x.theta << d.y.r << d.y.theta;
      try {
        double px = distance_value(S, {0, 0}, d.x), py = distance_value(S, {0, 0}, d.y);
        auto dxy = distance(S, d.x, d.y);
        double P = px + py + dxy.value;
        r << px << py << dxy.value << P << P - 2 * L << dxy.multiplicity << "";
        o.values = {{2 * L - P, P - 2 * L}};
      } catch (const std::exception& e) {
        for (int k = 0; k < 5; ++k) r << NAN;
        r << 0 << what(e);
        o.error = what(e);
      }
      o.rows = {r.str()};
      return o;
    });
    Acc a, ad;
    double closest = std::numeric_limits<double>::infinity();
    for (auto& o : out) {
      t.append(o.rows);
      if (!o.error.empty()) a.fail(o.error);
      else a.add(o.values[0].first, o.values[0].second);
    }
    for (auto& o : dout) {
      t.append(o.rows);
      if (!o.error.empty()) {
        a.fail(o.error);
        ad.fail(o.error);
        continue;
      }
      a.add(o.values[0].first, o.values[0].second);
      closest = std::min(closest, std::abs(o.values[0].second));
    }
    push(finish_check("perimeter", S.name, a, cfg_.tolerance("perimeter"), "perimeter minus 2L"));
    if (std::isfinite(closest)) ad.add(-closest, closest);
    push(finish_check("perimeter_degenerate", S.name, ad, cfg_.tolerance("perimeter_degenerate"),
                      "closest degenerate perimeter to 2L"));
  }

  double diameter_check(const SurfaceModel& S, bool emit) {
    auto d = diameter_report(S, cfg_.diameter_samples);
    if (!emit) return d.value;
    auto& t = table("diameter", "subject,samples,value,L,x_r,x_theta,y_r,y_theta,failures");
    Row r;
    r << S.name << cfg_.diameter_samples << d.value << S.L << d.x.r << d.x.theta << d.y.r << d.y.theta << d.failures;
    t.add(r);
    Acc a;
    a.add(-std::abs(d.value - S.L), std::abs(d.value - S.L));
    for (int k = 0; k < d.failures; ++k) a.fail("distance query failed");
    push(finish_check("diameter", S.name, a, cfg_.tolerance("diameter"), "|diameter - L|"));
    return d.value;
  }

  void cut_locus_check(const SurfaceModel& S) {
    auto& t = table("cut_locus",
                    "subject,point,x_r,x_theta,phi0,cut_time,conjugate,r,theta,meridian_deviation,error");
    auto out = parallel_map<SampleOut>(cfg_.cut_points, [&](size_t i) {
      SampleOut o;
      PolarPoint x{S.L * (i + 1.0) / (cfg_.cut_points + 1.0), 0.0};
      double worst = 0;
      try {
        auto cl = cut_locus(S, x, cfg_.cut_directions);
        for (auto& cp : cl.cut_points) {
          Row r;
          r << S.name << i << x.r << x.theta << cp.phi0 << cp.cut_time << cp.conjugate << cp.point.r
            << cp.point.theta << cp.deviation << cp.error;
          o.rows.push_back(r.str());
          if (!cp.error.empty() && o.error.empty()) o.error = cp.error;
          // the cut point never lies past the first conjugate point
          if (cp.error.empty() && cp.cut_time > cp.conjugate + 1e-6 && o.error.empty())
            o.error = "cut time " + num(cp.cut_time) + " beyond conjugate time " + num(cp.conjugate);
        }
        worst = cl.max_meridian_deviation;
      } catch (const std::exception& e) {
        Row r;
        r << S.name << i << x.r << x.theta << NAN << NAN << NAN << NAN << NAN << NAN << what(e);
        o.rows.push_back(r.str());
        o.error = what(e);
      }
      o.values = {{-worst, worst}};
      return o;
    });
    Acc a;
    for (auto& o : out) {
      t.append(o.rows);
      a.add(o.values[0].first, o.values[0].second);
      if (!o.error.empty()) a.fail(o.error);
    }
    push(finish_check("cut_locus", S.name, a, cfg_.tolerance("cut_locus"), "max distance of cut points from the opposite meridian"));
  }

  // groups of 10 theta pairs share (x_r, c) and one distance field
  void monotonicity(const SurfaceModel& S) {
    auto& t = table("parallel_monotonicity", "subject,group,x_r,c,theta1,theta2,margin,error");
    const int per = 10;
    int n = cfg_.monotonicity_configs;
    int groups = (n + per - 1) / per;
    auto out = parallel_map<SampleOut>(groups, [&](size_t gi) {
      SampleOut o;
      Rng g = rng("parallel_monotonicity", S.name, gi);
      double xr = g.uniform(0.05 * S.L, 0.95 * S.L), c = g.uniform(0.05 * S.L, 0.95 * S.L);
      int m = std::min(per, n - static_cast<int>(gi) * per);
      std::vector<std::pair<double, double>> pairs;
      for (int k = 0; k < m; ++k) {
        double t1 = g.uniform(0, pi - 1e-3);
        double t2 = g.uniform(t1 + 1e-3, pi);
        pairs.emplace_back(t1, t2);
      }
      try {
        auto rep = parallel_monotonicity_check(S, xr, c, pairs);
        for (int k = 0; k < m; ++k) {
          Row r;
          r << S.name << gi << xr << c << pairs[k].first << pairs[k].second << rep.margins[k] << "";
          o.rows.push_back(r.str());
          o.values.emplace_back(rep.margins[k], -rep.margins[k]);
        }
      } catch (const std::exception& e) {
        for (int k = 0; k < m; ++k) {
          Row r;
          r << S.name << gi << xr << c << pairs[k].first << pairs[k].second << NAN << what(e);
          o.rows.push_back(r.str());
        }
        o.error = what(e);
      }
      return o;
    });
    Acc a;
    for (auto& o : out) {
      t.append(o.rows);
      if (!o.error.empty()) a.fail(o.error);
      for (auto [m, v] : o.values) {
        a.add(m, v);
        if (!(m > 0)) a.fail("margin " + num(m) + " is not positive");  // strict
      }
    }
    push(finish_check("parallel_monotonicity", S.name, a, cfg_.tolerance("parallel_monotonicity"),
                      "margins must be strictly positive"));
  }

  void variation(const SurfaceModel& S) {
    auto& t = table("first_variation",
                    "subject,index,t0,h,psi,analytic,numeric,residual,multiplicity,analytic_plus,analytic_minus,"
                    "order,order_measured,extrapolated,extrapolated_residual,noise_floor,error");
    std::vector<double> hs(richardson_steps.begin(), richardson_steps.end());
    auto out = parallel_map<SampleOut>(cfg_.variation_pairs, [&](size_t i) {
      SampleOut o;
      Rng g = rng("first_variation", S.name, i);
      std::string last;
      const double lo = vertex_margin, hi = S.L - vertex_margin;
      for (int attempt = 0; attempt < 10; ++attempt) {
        PolarPoint a{g.uniform(lo, hi), g.uniform(0, two_pi)}, b{g.uniform(lo, hi), g.uniform(0, two_pi)};
        double pa = g.uniform(-pi, pi), pb = g.uniform(-pi, pi);
        double len = 0.5 * S.L, t0 = g.uniform(0.2, 0.8) * 0.5 * len;
        try {
          auto mu = shoot(S, a, pa, len), eta = shoot(S, b, pb, len);
          auto lad = first_variation_ladder(S, mu, eta, t0, hs);
          for (auto& st : lad.steps) {
            Row r;
            r << S.name << i << st.t0 << st.h << st.psi_value << st.analytic_derivative << st.numeric_derivative
              << st.residual << st.multiplicity << st.analytic_plus << st.analytic_minus << lad.order
              << lad.order_measured << lad.extrapolated << lad.extrapolated_residual << lad.noise_floor << "";
            o.rows.push_back(r.str());
          }
          bool unique = lad.steps.front().multiplicity == 1;
          o.present = {unique, lad.order_measured};
          o.values = {{-lad.extrapolated_residual, lad.extrapolated_residual}, {lad.order - 0.9, 0.9 - lad.order}};
          return o;
        } catch (const std::domain_error& e) {
          last = what(e);  // a vertex of the pair hit a pole or psi vanished: redraw
        } catch (const std::exception& e) {
          last = what(e);
          break;
        }
      }
      Row r;
      r << S.name << i;
      for (int k = 0; k < 14; ++k) r << NAN;
      r << last;
      o.rows.push_back(r.str());
      o.error = last;
      return o;
    });
    Acc res, ord;
    int shared = 0;
    for (auto& o : out) {
      t.append(o.rows);
      if (!o.error.empty()) {
        res.fail(o.error);
        ord.fail(o.error);
        continue;
      }
      if (o.present[0]) res.add(o.values[0].first, o.values[0].second);
      else ++shared;
      if (o.present[1]) ord.add(o.values[1].first, o.values[1].second);
    }
    std::string note = std::to_string(shared) + " samples with several minimizers excluded";
    push(finish_check("first_variation", S.name, res, cfg_.tolerance("first_variation"),
                      "extrapolated residual; " + note));
    push(finish_check("first_variation_order", S.name, ord, cfg_.tolerance("first_variation_order"),
                      "0.9 minus fitted order; " + std::to_string(ord.samples) + " ladders above the noise floor"));
  }

  void rigidity(const SurfaceModel& S, double diam) {
    auto& t = table("rigidity",
                    "subject,x_r,x_theta,y_r,y_theta,precondition,diameter,dxy,apex_angle,perimeter,max_z_defect,"
                    "max_cut_defect,z_count,diagnostic");
    const double L = S.L;
    PolarPoint x{L / 3, 0.0}, y{2 * L / 3, pi};
    std::vector<PolarPoint> zs;
    for (int i = 0; i < cfg_.rigidity_points; ++i) {
      Rng g = rng("rigidity", S.name, i);
      zs.push_back({g.uniform(0, L), g.uniform(0, two_pi)});
    }
    Row r;
    r << S.name << x.r << x.theta << y.r << y.theta;
    try {
      auto rep = rigidity_probe(S, x, y, zs, cfg_.rigidity_cut_directions, diam);
      r << rep.precondition << rep.diameter << rep.dxy << rep.apex_angle << rep.perimeter << rep.max_z_defect
        << rep.max_cut_defect << rep.z_count << rep.diagnostic;
      t.add(r);
      if (!rep.precondition) {
        push(not_applicable("rigidity", S.name, cfg_.tolerance("rigidity"), rep.diagnostic));
        return;
      }
      Acc a;
      double v = std::max({std::abs(rep.apex_angle - pi), std::abs(rep.perimeter - 2 * L),
                           std::abs(rep.dpx + rep.dpy - L), rep.max_z_defect, rep.max_cut_defect});
      if (std::isnan(rep.apex_angle)) v = std::max({std::abs(rep.perimeter - 2 * L), rep.max_z_defect, rep.max_cut_defect});
      a.add(-v, v);
      if (!rep.cut_ok && rep.max_cut_defect <= rigidity_tol) a.fail("cut locus sweep failed");
      push(finish_check("rigidity", S.name, a, cfg_.tolerance("rigidity"),
                        std::to_string(rep.z_count) + " points z; worst of angle, perimeter, split and cut defects"));
    } catch (const std::exception& e) {
      for (int k = 0; k < 8; ++k) r << NAN;
      r << what(e);
      t.add(r);
      Acc a;
      a.fail(what(e));
      push(finish_check("rigidity", S.name, a, cfg_.tolerance("rigidity")));
    }
  }

  std::string pair_name(size_t i, size_t j) const { return cfg_.surfaces[i].name + "/" + cfg_.surfaces[j].name; }

  // empty when the ordered pair satisfies the comparison hypotheses
  std::string pair_blocked(size_t i, size_t j) const {
    auto rb = check_radial_bound(cfg_.surfaces[i], cfg_.surfaces[j]);
    if (rb.holds()) return "";
    return "radial curvature bound fails (margin " + num(rb.margin) + " at r = " + num(rb.at_r) +
           (rb.domain_ok ? "" : ", M longer than the model") + ")";
  }

  void toponogov(size_t i, size_t j) {
    const auto& M = cfg_.surfaces[i];
    const auto& Mt = cfg_.surfaces[j];
    std::string subject = pair_name(i, j);
    std::string blocked = pair_blocked(i, j);
    if (!blocked.empty()) {
      for (auto c : {"toponogov_sides", "toponogov_angles", "equality_propagation"})
        push(not_applicable(c, subject, cfg_.tolerance(c), blocked));
      return;
    }
    auto& t = table("toponogov",
                    "subject,index,x_r,x_theta,y_r,y_theta,a,b,c,angle_p,angle_x,angle_y,tangle_p,tangle_x,tangle_y,"
                    "margin_p,margin_x,margin_y,equality,side_residual,multiplicity,rejections,note");
    auto out = parallel_map<SampleOut>(cfg_.triangle_count, [&](size_t k) {
      SampleOut o;
      Rng g = rng("toponogov", subject, k);
      Row r;
      r << subject << k;
      try {
        auto ts = sample_triangle(M, &Mt, g);
        o.rejections = ts.rejections;
        if (!ts.triangle) {
          for (int q = 0; q < 19; ++q) r << NAN;
          r << ts.rejections << ("skipped after " + std::to_string(max_resamples) + " rejections: " + ts.last_rejection);
          o.rows = {r.str()};
          o.error = "skip";
          return o;
        }
        auto& T = *ts.triangle;
        auto cr = toponogov_check(M, Mt, T);
        r << T.x.r << T.x.theta << T.y.r << T.y.theta << cr.sides.a << cr.sides.b << cr.sides.c;
        for (double v : cr.angles) r << v;
        for (double v : cr.tangles) r << v;
        for (double v : cr.angle_margins) r << v;
        r << cr.equality_case << cr.max_side_residual() << T.multiplicity << ts.rejections << cr.note;
        o.rows = {r.str()};
        o.values = {{-cr.max_side_residual(), cr.max_side_residual()},
                    {cr.min_margin(), -cr.min_margin()},
                    {0, std::max(std::abs(cr.angle_margins[1]), std::abs(cr.angle_margins[2]))}};
        o.values[2].first = -o.values[2].second;
        o.present = {true, true, cr.equality_case};
        o.fails = {"", cr.falsified ? "falsified: " + cr.note : "", ""};
      } catch (const std::exception& e) {
        for (int q = 0; q < 19; ++q) r << NAN;
        r << o.rejections << what(e);
        o.rows = {r.str()};
        o.error = what(e);
      }
      return o;
    });
    Acc a[3];
    int skipped = 0, rejections = 0;
    for (auto& o : out) {
      t.append(o.rows);
      rejections += o.rejections;
      if (o.error == "skip") {
        ++skipped;
        continue;
      }
      if (!o.error.empty()) {
        for (auto& x : a) x.fail(o.error);
        continue;
      }
      for (int q = 0; q < 3; ++q) {
        if (o.present[q]) a[q].add(o.values[q].first, o.values[q].second);
        if (!o.fails[q].empty()) a[q].fail(o.fails[q]);
      }
    }
    std::string counts = std::to_string(rejections) + " rejections, " + std::to_string(skipped) + " skipped";
    push(finish_check("toponogov_sides", subject, a[0], cfg_.tolerance("toponogov_sides"), "side residual; " + counts));
    push(finish_check("toponogov_angles", subject, a[1], cfg_.tolerance("toponogov_angles"),
                      "angle in M minus comparison angle; " + counts));
    push(finish_check("equality_propagation", subject, a[2], cfg_.tolerance("equality_propagation"),
                      "other two margins when the apex margin vanishes"));
  }

  void theta(size_t i, size_t j) {
    const auto& M = cfg_.surfaces[i];
    const auto& Mt = cfg_.surfaces[j];
    std::string subject = pair_name(i, j);
    std::string blocked = pair_blocked(i, j);
    if (!blocked.empty()) {
      for (auto c : {"theta_monotonicity", "theta_limit", "theta_constancy"})
        push(not_applicable(c, subject, cfg_.tolerance(c), blocked));
      return;
    }
    auto& grid = table("theta", "subject,triangle,step,t,phi,theta");
    auto& t = table("theta_triangles",
                    "subject,triangle,x_r,x_theta,y_r,y_theta,apex_angle,limit,limit_error,max_increase,"
                    "total_variation,errors,note");
    auto out = parallel_map<SampleOut>(cfg_.theta_triangles, [&](size_t k) {
      SampleOut o;
      Rng g = rng("theta", subject, k);
      Row r;
      r << subject << k;
      try {
        auto ts = sample_triangle(M, &Mt, g);
        if (!ts.triangle) {
          for (int q = 0; q < 9; ++q) r << NAN;
          r << 0 << ("skipped: " + ts.last_rejection);
          o.rows = {r.str()};
          o.error = "skip";
          return o;
        }
        auto& T = *ts.triangle;
        auto pr = theta_monotonicity_check(M, Mt, T.x, T.y, cfg_.theta_steps);
        for (size_t s = 0; s < pr.t.size(); ++s) {
          Row gr;
          gr << subject << k << s << pr.t[s] << pr.phi[s] << pr.theta[s];
          o.rows.push_back(gr.str());
        }
        r << T.x.r << T.x.theta << T.y.r << T.y.theta << pr.apex_angle << pr.limit << pr.limit_error()
          << pr.max_increase << pr.total_variation << static_cast<int>(pr.errors.size())
          << (pr.errors.empty() ? std::string() : pr.errors.front());
        o.rows.push_back(r.str());
        o.values = {{-pr.max_increase, pr.max_increase},
                    {-pr.limit_error(), pr.limit_error()},
                    {-pr.total_variation, pr.total_variation}};
        o.fails = {pr.errors.empty() ? "" : "grid point left T: " + pr.errors.front(), "", ""};
      } catch (const std::exception& e) {
        for (int q = 0; q < 9; ++q) r << NAN;
        r << 0 << what(e);
        o.rows = {r.str()};
        o.error = what(e);
      }
      return o;
    });
    Acc a[3];
    int skipped = 0;
    for (auto& o : out) {
      // per-triangle line goes to theta_triangles, grid lines to theta
      if (!o.rows.empty()) {
        t.rows.push_back(o.rows.back());
        grid.rows.insert(grid.rows.end(), o.rows.begin(), o.rows.end() - 1);
      }
      if (o.error == "skip") {
        ++skipped;
        continue;
      }
      if (!o.error.empty()) {
        for (auto& x : a) x.fail(o.error);
        continue;
      }
      for (int q = 0; q < 3; ++q) {
        a[q].add(o.values[q].first, o.values[q].second);
        if (!o.fails[q].empty()) a[q].fail(o.fails[q]);
      }
    }
    std::string sk = std::to_string(skipped) + " skipped";
    push(finish_check("theta_monotonicity", subject, a[0], cfg_.tolerance("theta_monotonicity"),
                      "largest step increase; " + sk));
    push(finish_check("theta_limit", subject, a[1], cfg_.tolerance("theta_limit"),
                      "extrapolated limit against the apex angle"));
    if (i == j)
      push(finish_check("theta_constancy", subject, a[2], cfg_.tolerance("theta_constancy"),
                        "total variation with M equal to the model"));
    else
      push(not_applicable("theta_constancy", subject, cfg_.tolerance("theta_constancy"),
                          "only defined when M is the model itself"));
  }
};

}  // namespace detail

// Runs every check (or only one check or group) and writes the CSV files when
// output_dir is set.
inline SuiteReport run_lemma_suite(const SuiteConfig& config, const std::string& only = "") {
  if (config.surfaces.empty()) throw std::invalid_argument("suite config lists no surfaces");
  detail::Suite suite(config, only);
  auto rep = suite.run();
  if (!config.output_dir.empty()) rep.write(config.output_dir);
  return rep;
}

}  // namespace revcomp
