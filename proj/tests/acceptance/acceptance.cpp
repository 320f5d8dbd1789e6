// Acceptance run: one PASS/FAIL line per criterion. Exit status is the number of failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <numbers>
#include <regex>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "cli.hpp"
#include "pml/conformal.hpp"
#include "pml/dimension.hpp"
#include "pml/error.hpp"
#include "pml/fem.hpp"
#include "pml/io.hpp"
#include "pml/measure.hpp"
#include "pml/mesh.hpp"
#include "pml/parallel.hpp"
#include "pml/random.hpp"

using namespace pml;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os.precision(digits);
  os << v;
  return os.str();
}

struct Verdict {
  bool pass = true;
  std::vector<std::string> notes;

  void check(bool ok, const std::string& note) {
    pass = pass && ok;
    notes.push_back(note + (ok ? "" : " [fail]"));
  }
};

// ---------------------------------------------------------------------------
// Shared fixtures

constexpr double kSnowH = 0.02;
constexpr double kSnowFineH = 0.014;
constexpr double kGrading = 0.5;
constexpr int kArcs = 4096;
constexpr int kMapN = 4096;
constexpr std::uint64_t kSeed = 20240611;

Domain annulus() { return Domain::create(regular_ngon(512, 2.0), {0.0, 0.0}); }

double radial_u(double p, double r) {
  if (p == 2.0) return std::log(2.0 / r) / std::log(2.0);
  const double b = (p - 2.0) / (p - 1.0);
  return (std::pow(r, b) - std::pow(2.0, b)) / (1.0 - std::pow(2.0, b));
}

double radial_du(double p, double r) {
  if (p == 2.0) return 1.0 / (r * std::log(2.0));
  const double b = (p - 2.0) / (p - 1.0);
  return std::abs(b * std::pow(r, b - 1.0) / (1.0 - std::pow(2.0, b)));
}

struct Fixtures {
  Domain snow = Domain::create(koch_snowflake(3, 1.0), vertex_centroid(koch_snowflake(3, 1.0)));
  std::map<std::pair<double, double>, std::shared_ptr<const Mesh>> meshes;
  std::map<std::tuple<double, double, double>, std::shared_ptr<PHField>> fields;
  std::map<std::tuple<double, double, double>, std::shared_ptr<BoundaryMeasure>> measures;
  std::map<int, std::shared_ptr<HalfPlaneMap>> maps;

  std::shared_ptr<const Mesh> mesh(double h, double grading) {
    auto& m = meshes[{h, grading}];
    if (!m) m = std::make_shared<const Mesh>(build_ring_mesh(snow, h, grading));
    return m;
  }
  const PHField& field(double p, double h, double grading = kGrading) {
    auto& f = fields[{p, h, grading}];
    if (!f) f = std::make_shared<PHField>(solve_p_capacitary(mesh(h, grading), p));
    return *f;
  }
  const BoundaryMeasure& measure(double p, double h, double grading = kGrading) {
    auto& m = measures[{p, h, grading}];
    if (!m) m = std::make_shared<BoundaryMeasure>(extract_boundary_measure(field(p, h, grading), snow, kArcs));
    return *m;
  }
  const HalfPlaneMap& map(int n) {
    auto& m = maps[n];
    if (!m) m = std::make_shared<HalfPlaneMap>(build_riemann_map(snow, n));
    return *m;
  }
};

std::vector<Point> ring_points(const Domain& d, int count, std::uint64_t seed, const std::function<bool(Point)>& accept) {
  const BoundingBox& bb = d.boundary.bbox();
  std::vector<Point> out;
  for (int i = 0; i < count; ++i) {
    auto rng = stream(seed, static_cast<std::uint64_t>(i));
    for (int attempt = 0; attempt < 100000; ++attempt) {
      const Point z{bb.lo.x + unit(rng) * bb.width(), bb.lo.y + unit(rng) * bb.height()};
      if (d.in_ring(z) && accept(z)) {
        out.push_back(z);
        break;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Criteria

Verdict radial_oracles(Fixtures&) {
  Verdict v;
  const Domain d = annulus();
  for (double p : {1.5, 2.0, 3.0}) {
    const auto t0 = Clock::now();
    const auto mesh = std::make_shared<const Mesh>(build_ring_mesh(d, 0.02));
    const PHField f = solve_p_capacitary(mesh, p);
    double err = 0.0;
    for (std::size_t i = 0; i < mesh->nodes.size(); ++i)
      err = std::max(err, std::abs(f.u[i] - radial_u(p, norm(mesh->nodes[i]))));
    const BoundaryMeasure mu = extract_boundary_measure(f, d, kArcs);
    const double exact = 4.0 * std::numbers::pi * std::pow(radial_du(p, 2.0), p - 1.0);
    const double rel = std::abs(mu.total - exact) / exact;
    const double secs = seconds_since(t0);
    v.check(err <= 5e-3 && rel <= 0.01 && secs <= 60.0,
            "p=" + fmt(p) + ": Linf " + fmt(err, 3) + ", total " + fmt(mu.total, 6) + " vs " + fmt(exact, 6) +
                " (" + fmt(100 * rel, 2) + "%), " + fmt(secs, 3) + " s");
  }
  return v;
}

Verdict theorem2(Fixtures& fx) {
  Verdict v;
  const Domain d = annulus();
  for (double p : {1.5, 2.0, 3.0}) {
    const PHField f = solve_p_capacitary(std::make_shared<const Mesh>(build_ring_mesh(d, 0.02)), p);
    double worst = 0.0;
    for (double r : {1.2, 1.4, 1.6, 1.8})
      for (int k = 0; k < 8; ++k) {
        const double th = 2.0 * std::numbers::pi * (k + 0.5) / 8.0;
        const Point z{r * std::cos(th), r * std::sin(th)};
        const FieldSample s = evaluate(f, z);
        const double R = norm(s.gradient) * d.distance_to_boundary(z) / s.value;
        const double exact = radial_du(p, r) * d.distance_to_boundary(z) / radial_u(p, r);
        worst = std::max(worst, std::abs(R - exact) / exact);
      }
    v.check(worst <= 0.03, "annulus p=" + fmt(p) + ": worst relative R error " + fmt(100 * worst, 3) + "%");
  }
  const auto pts = ring_points(fx.snow, 2000, kSeed, [](Point) { return true; });
  const RatioStats coarse = theorem2_ratio(fx.field(2.0, kSnowH), fx.snow, pts);
  const RatioStats fine = theorem2_ratio(fx.field(2.0, kSnowH / 2.0), fx.snow, pts);
  const double lo = fine.min / coarse.min, hi = fine.max / coarse.max;
  v.check(coarse.max / coarse.min <= 50.0 && fine.max / fine.min <= 50.0,
          "snowflake p=2 range [" + fmt(coarse.min) + ", " + fmt(coarse.max) + "] (h " + fmt(kSnowH) + "), [" +
              fmt(fine.min) + ", " + fmt(fine.max) + "] (h " + fmt(kSnowH / 2.0) + ")");
  v.check(lo >= 0.5 && lo <= 2.0 && hi >= 0.5 && hi <= 2.0,
          "refinement ratios min " + fmt(lo) + ", max " + fmt(hi));
  return v;
}

Verdict conservation(Fixtures& fx) {
  Verdict v;
  const Domain d = annulus();
  auto one = [&](const std::string& name, const PHField& f, const BoundaryMeasure& mu, double tol) {
    std::vector<double> flux;
    for (double t : {0.2, 0.5, 0.8}) flux.push_back(level_flux(f, t));
    const auto [lo, hi] = std::minmax_element(flux.begin(), flux.end());
    double mean = 0.0;
    for (double x : flux) mean += x / flux.size();
    const double spread = (*hi - *lo) / mean, dev = std::abs(mean - mu.total) / mu.total;
    v.check(spread <= tol && dev <= 0.02, name + " p=" + fmt(f.p) + ": spread " + fmt(100 * spread, 2) +
                                              "%, vs total " + fmt(100 * dev, 2) + "%");
  };
  for (double p : {1.5, 2.0, 3.0}) {
    const PHField f = solve_p_capacitary(std::make_shared<const Mesh>(build_ring_mesh(d, 0.02)), p);
    one("annulus", f, extract_boundary_measure(f, d, kArcs), 0.01);
  }
  for (double p : {1.5, 2.0, 3.0}) one("snowflake", fx.field(p, kSnowH), fx.measure(p, kSnowH), 0.03);
  return v;
}

Verdict comparability(Fixtures& fx) {
  Verdict v;
  const Domain& d = fx.snow;
  const double diam = d.boundary.diameter();
  for (double p : {1.5, 2.0, 3.0}) {
    const BoundaryMeasure& mc = fx.measure(p, kSnowH);
    const BoundaryMeasure& mf = fx.measure(p, kSnowFineH);
    const double r_lo = 4.0 * std::max(mc.resolution(), mf.resolution()), r_hi = diam / 8.0;
    double c_coarse = 0.0, c_fine = 0.0;
    int placed = 0;
    for (std::uint64_t i = 0; placed < 50 && i < 100000; ++i) {
      auto rng = stream(kSeed + 4, i);
      const Point w = mc.point_at(unit(rng) * mc.length());
      const double r = r_lo * std::pow(r_hi / r_lo, unit(rng));
      if (dist(w, d.basepoint) - d.inner_radius <= 4.0 * r) continue;
      ++placed;
      const Lemma23Triple a = lemma23_check(fx.field(p, kSnowH), d, mc, w, r);
      const Lemma23Triple b = lemma23_check(fx.field(p, kSnowFineH), d, mf, w, r);
      c_coarse = std::max({c_coarse, a.left / a.mid, a.mid / a.right});
      c_fine = std::max({c_fine, b.left / b.mid, b.mid / b.right});
    }
    const double ratio = c_fine / c_coarse;
    v.check(placed == 50 && c_coarse <= 100.0 && c_fine <= 100.0 && ratio >= 0.5 && ratio <= 2.0,
            "p=" + fmt(p) + ": c " + fmt(c_coarse) + " (h " + fmt(kSnowH) + "), " + fmt(c_fine) + " (h " +
                fmt(kSnowFineH) + ")");
  }
  return v;
}

double median_for(Fixtures& fx, double p, std::size_t* count = nullptr) {
  const BoundaryMeasure& mu = fx.measure(p, kSnowH);
  const double r_min = 4.01 * mu.resolution(), r_max = fx.snow.boundary.diameter() / 8.0;
  const DimensionReport rep = hdim_estimate(local_dimension_profile(mu, 500, r_min, r_max, kSeed));
  if (count) *count = rep.samples.size();
  return rep.weighted_median;
}

Verdict harmonic_baseline(Fixtures& fx) {
  Verdict v;
  std::size_t n = 0;
  const double m = median_for(fx, 2.0, &n);
  v.check(m >= 0.85 && m <= 1.15 && n >= 300, "p=2 weighted median " + fmt(m) + " over " + std::to_string(n) + " samples");
  return v;
}

Verdict dichotomy(Fixtures& fx) {
  Verdict v;
  const double lo = median_for(fx, 1.5), mid = median_for(fx, 2.0), hi = median_for(fx, 3.0);
  v.check(lo - hi >= 0.05, "median p=1.5 " + fmt(lo) + " minus p=3 " + fmt(hi) + " = " + fmt(lo - hi));
  // "Touch" allows 0.01 of slack on either side of the p = 2 value.
  v.check(hi <= mid + 0.01 && lo >= mid - 0.01, "p=2 median " + fmt(mid) + " lies between them");
  return v;
}

Verdict conformal_gates(Fixtures& fx) {
  Verdict v;
  const HalfPlaneMap& m = fx.map(kMapN);
  std::vector<Complex> probes = {{0.0, 0.0}};
  for (std::uint64_t i = 1; i < 200; ++i) {
    auto rng = stream(kSeed + 7, i);
    probes.push_back(std::polar(0.95 * std::sqrt(unit(rng)), 2.0 * std::numbers::pi * unit(rng)));
  }
  const KoebeReport k = koebe_check(m, probes);
  v.check(koebe_pass(k), "Koebe ratios in [" + fmt(k.min) + ", " + fmt(k.max) + "] over " + std::to_string(k.count));

  const double res = fx.snow.boundary.diameter() / 200.0;
  const QuasihyperbolicGraph graph(fx.snow, res);
  const auto pts = ring_points(fx.snow, 40, kSeed + 8, [&](Point z) { return fx.snow.distance_to_boundary(z) >= 8.0 * res; });
  double lo = 1e300, hi = 0.0;
  bool ok = pts.size() == 40;
  for (std::size_t i = 0; i + 1 < pts.size(); i += 2) {
    const double rho = hyperbolic_distance(m, pts[i], pts[i + 1]), q = graph.distance(pts[i], pts[i + 1]);
    ok = ok && rho <= q && q <= 4.0 * rho * 1.2;
    lo = std::min(lo, q / rho);
    hi = std::max(hi, q / rho);
  }
  v.check(ok, "metric sandwich Q/rho in [" + fmt(lo) + ", " + fmt(hi) + "] on 20 pairs");

  const AreaIntegral a = lemma420_integral(m, {0.0, 1.0}, 0.0, false);
  v.check(std::isfinite(a.value) && a.tail_change <= 0.05,
          "area integral " + fmt(a.value) + " at R=" + fmt(a.r_cut) + ", " + fmt(a.value_half) + " at R/2, change " +
              fmt(100 * a.tail_change, 3) + "% (weighted form " + fmt(a.weighted_value) + ")");
  return v;
}

Verdict constructions(Fixtures& fx) {
  Verdict v;
  const Complex a{0.0, 1.0};
  const CigarPath p = build_cigar_path(fx.map(kMapN), a, 0.2, 8);
  const CigarPath q = build_cigar_path(fx.map(2 * kMapN), a, 0.2, 8);
  const double worst = p.decay.empty() ? 1.0 : *std::max_element(p.decay.begin(), p.decay.end());
  v.check(p.levels() >= 6 && worst <= 0.5,
          std::to_string(p.levels()) + " levels, worst decay " + fmt(worst) +
              (p.truncated.empty() ? "" : " (" + p.truncated + ")"));
  const double change = std::abs(q.cigar_constant - p.cigar_constant) / p.cigar_constant;
  v.check(std::isfinite(p.cigar_constant) && p.cigar_constant > 0.0 && change <= 0.3,
          "C3 " + fmt(p.cigar_constant) + " (N " + std::to_string(kMapN) + "), " + fmt(q.cigar_constant) + " (N " +
              std::to_string(2 * kMapN) + ")");
  const ShiftedBox b = shifted_box(fx.map(kMapN), a, 0.2);
  v.check(b.length_ratio <= 20.0 && b.w0_distance_ratio >= 1e-3,
          "shifted box H1(sigma)/d " + fmt(b.length_ratio) + ", d(w0, sigma)/d " + fmt(b.w0_distance_ratio));
  return v;
}

Verdict lemma47(Fixtures& fx) {
  Verdict v;
  for (double p : {1.5, 3.0}) {
    const PHField& fc = fx.field(p, kSnowH);
    const PHField& ff = fx.field(p, kSnowFineH);
    // Margins inside (0.05, 0.5) keep every z1 admissible on both meshes.
    auto u_ok = [](const PHField& f, Point z) {
      if (f.locator->find(z) < 0) return false;
      const double u = evaluate(f, z).value;
      return u > 0.06 && u < 0.45;
    };
    const auto z1s = ring_points(fx.snow, 20, kSeed + 9, [&](Point z) {
      return dist(z, fx.snow.basepoint) >= 1.5 * fx.snow.inner_radius && u_ok(fc, z) && u_ok(ff, z);
    });
    double c_coarse = 0.0, c_fine = 0.0;
    int failures = 20 - static_cast<int>(z1s.size());
    for (Point z1 : z1s) {
      try {
        c_coarse = std::max(c_coarse, lemma47_verify(fc, fx.map(kMapN), z1).rho);
        c_fine = std::max(c_fine, lemma47_verify(ff, fx.map(2 * kMapN), z1).rho);
      } catch (const Error&) {
        ++failures;
      }
    }
    const double change = std::abs(c_fine - c_coarse) / c_coarse;
    v.check(failures == 0 && std::isfinite(c_coarse) && change <= 0.3,
            "p=" + fmt(p) + ": " + std::to_string(failures) + " failures, C_hat " + fmt(c_coarse) + " (h " + fmt(kSnowH) +
                ", N " + std::to_string(kMapN) + "), " + fmt(c_fine) + " (h " + fmt(kSnowFineH) + ", N " +
                std::to_string(2 * kMapN) + ")");
  }
  return v;
}

// Numbers in text (JSON, CSV, binary headers) and raw 8-byte words of binary bodies.
std::vector<double> numbers_of(const std::string& bytes, std::string* text) {
  std::string head = bytes, body;
  const bool binary = bytes.find('\0') != std::string::npos;
  if (binary) {
    const std::size_t nl = bytes.find('\n');
    head = bytes.substr(0, nl);
    body = bytes.substr(nl + 1);
  }
  static const std::regex hash("[0-9a-f]{16}");
  head = std::regex_replace(head, hash, "#");
  static const std::regex num(R"([-+]?(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?)");
  std::vector<double> out;
  for (auto it = std::sregex_iterator(head.begin(), head.end(), num); it != std::sregex_iterator(); ++it)
    out.push_back(std::stod(it->str()));
  *text = std::regex_replace(head, num, "0");
  for (std::size_t i = 0; i + 8 <= body.size(); i += 8) {
    double x;
    std::memcpy(&x, body.data() + i, 8);
    out.push_back(x);
  }
  return out;
}

Verdict determinism(Fixtures&) {
  Verdict v;
  const fs::path root = fs::temp_directory_path() / "pml_acceptance_determinism";
  fs::remove_all(root);
  auto pipeline = [&](const std::string& tag, int threads) {
    const fs::path dir = root / tag;
    fs::create_directories(dir);
    auto f = [&](const char* name) { return (dir / name).string(); };
    const std::string t = std::to_string(threads);
    const std::vector<std::vector<std::string>> steps = {
        {"domain", "--kind", "koch", "--level", "3", "--out", f("dom.json")},
        {"solve", "--domain", f("dom.json"), "--p", "1.5", "--out", f("field.phf")},
        {"measure", "--field", f("field.phf"), "--out", f("mu.csv")},
        {"dimension", "--measure", f("mu.csv"), "--seed", "11", "--out", f("dim.json")},
        {"conformal", "--domain", f("dom.json"), "--resolution", "2048", "--out", f("map.cmf")},
        {"verify", "koebe", "--domain", f("dom.json"), "--map", f("map.cmf"), "--seed", "11", "--out", f("koebe.json")},
        {"verify", "theorem2", "--field", f("field.phf"), "--seed", "11", "--out", f("t2.json")},
    };
    std::ostringstream sink;
    auto* old = std::cout.rdbuf(sink.rdbuf());
    int code = 0;
    for (auto args : steps) {
      args.insert(args.begin(), {"--threads", t});
      code = std::max(code, cli::run(args));
    }
    std::cout.rdbuf(old);
    set_thread_count(1);
    return code;
  };
  const int c1 = pipeline("a", 1), c2 = pipeline("b", 1), c3 = pipeline("c", 4);
  v.check(c1 == 0 && c2 == 0 && c3 == 0, "pipeline exit codes " + std::to_string(c1) + ", " + std::to_string(c2) + ", " +
                                             std::to_string(c3));
  const std::vector<std::string> files = {"dom.json", "field.phf", "mu.csv", "dim.json", "map.cmf", "koebe.json", "t2.json"};
  int identical = 0;
  double worst = 0.0;
  bool shape = true;
  for (const auto& name : files) {
    const std::string a = read_file((root / "a" / name).string());
    identical += a == read_file((root / "b" / name).string());
    std::string ta, tc;
    const auto na = numbers_of(a, &ta), nc = numbers_of(read_file((root / "c" / name).string()), &tc);
    if (ta != tc || na.size() != nc.size()) {
      shape = false;
      continue;
    }
    for (std::size_t i = 0; i < na.size(); ++i) {
      if (std::memcmp(&na[i], &nc[i], 8) == 0) continue;
      worst = std::max(worst, std::abs(na[i] - nc[i]) / std::max(std::abs(na[i]), 1e-300));
    }
  }
  v.check(identical == static_cast<int>(files.size()),
          std::to_string(identical) + "/" + std::to_string(files.size()) + " single-thread outputs byte-identical");
  v.check(shape && worst <= 1e-10, "4 threads vs 1: worst relative difference " + fmt(worst, 3));
  fs::remove_all(root);
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria 1-10"};
  std::vector<int> only;
  int threads = 1;
  app.add_option("--only", only, "run only these criteria")->delimiter(',');
  app.add_option("--threads", threads, "worker threads")->capture_default_str();
  CLI11_PARSE(app, argc, argv);
  set_thread_count(threads);

  const std::vector<std::pair<std::string, std::function<Verdict(Fixtures&)>>> criteria = {
      {"radial oracle suite", radial_oracles},
      {"gradient ratio", theorem2},
      {"flux conservation", conservation},
      {"ball comparability", comparability},
      {"harmonic baseline", harmonic_baseline},
      {"dichotomy direction", dichotomy},
      {"conformal gates", conformal_gates},
      {"constructions", constructions},
      {"half-level search constant", lemma47},
      {"determinism", determinism},
  };
  Fixtures fx;
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto t0 = Clock::now();
    Verdict v;
    try {
      v = criteria[i].second(fx);
    } catch (const std::exception& e) {
      v.check(false, std::string("error: ") + e.what());
    }
    failures += !v.pass;
    std::cout << "criterion " << id << " " << (v.pass ? "PASS" : "FAIL") << " " << criteria[i].first << " ("
              << fmt(seconds_since(t0), 3) << " s)";
    for (std::size_t k = 0; k < v.notes.size(); ++k) std::cout << (k ? "; " : ": ") << v.notes[k];
    std::cout << std::endl;
  }
  return failures;
}
