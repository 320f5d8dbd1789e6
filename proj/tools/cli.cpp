#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>
#include <numbers>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "pml/artifacts.hpp"
#include "pml/conformal.hpp"
#include "pml/dimension.hpp"
#include "pml/error.hpp"
#include "pml/io.hpp"
#include "pml/measure.hpp"
#include "pml/mesh.hpp"
#include "pml/parallel.hpp"
#include "pml/random.hpp"

namespace pml::cli {

using nlohmann::ordered_json;

namespace {

Point parse_point(const std::string& s) {
  Point p;
  char comma = 0;
  std::istringstream in(s);
  if (!(in >> p.x >> comma >> p.y) || comma != ',') throw PreconditionError("expected a point 'x,y', got '" + s + "'");
  return p;
}

std::vector<Point> parse_points(const std::string& s) {
  std::vector<Point> out;
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) out.push_back(parse_point(tok));
  return out;
}

ordered_json pt(Point p) { return ordered_json::array({p.x, p.y}); }
ordered_json pt(Complex z) { return ordered_json::array({z.real(), z.imag()}); }

void emit(const std::string& path, const ordered_json& j) { atomic_write(path, j.dump(1) + "\n"); }

Gauge parse_gauge(const std::string& s) {
  const auto colon = s.find(':');
  const std::string name = s.substr(0, colon);
  const double v = colon == std::string::npos ? 1.0 : std::stod(s.substr(colon + 1));
  if (name == "power") return Gauge::power(v);
  if (name == "loglog") return Gauge::loglog(v);
  if (name == "logloglog") return Gauge::logloglog(v);
  throw PreconditionError("unknown gauge '" + s + "' (power:a, loglog:A, logloglog:A)");
}

struct Loaded {
  FieldSnapshot snap;
  std::uint64_t domain = 0;
};

Loaded load_field(const std::string& path) {
  Loaded l{read_field_snapshot(path), 0};
  l.domain = domain_hash(l.snap.domain);
  return l;
}

HalfPlaneMap load_map(const std::string& path, const Domain& domain) {
  return HalfPlaneMap::deserialize(read_file(path), domain);
}

std::uint64_t file_hash(const std::string& path) { return fnv1a(read_file(path)); }

// Rejection sample in the ring; `accept` adds further conditions.
template <class Accept>
std::vector<Point> ring_samples(const Domain& d, int count, std::uint64_t seed, Accept&& accept) {
  const BoundingBox& bb = d.boundary.bbox();
  std::vector<Point> out;
  for (int i = 0; i < count; ++i) {
    auto rng = stream(seed, static_cast<std::uint64_t>(i));
    bool found = false;
    for (int attempt = 0; attempt < 100000 && !found; ++attempt) {
      const Point z{bb.lo.x + unit(rng) * bb.width(), bb.lo.y + unit(rng) * bb.height()};
      if (d.in_ring(z) && accept(z)) {
        out.push_back(z);
        found = true;
      }
    }
    if (!found) throw ResolutionError("could not place sample " + std::to_string(i) + " in the admissible region");
  }
  return out;
}

// ---------------------------------------------------------------------------

struct DomainArgs {
  std::string kind = "koch";
  int level = 3;
  double side = 1.0;
  int n = 0;
  double radius = 1.0;
  std::string vertices;
  std::string basepoint;
  std::string out = "dom.json";
};

void cmd_domain(const DomainArgs& a) {
  DomainSpec s;
  s.kind = a.kind;
  s.level = a.level;
  s.side = a.side;
  s.n = a.n;
  s.radius = a.radius;
  if (!a.vertices.empty()) s.vertices = parse_points(a.vertices);
  if (!a.basepoint.empty()) s.basepoint = parse_point(a.basepoint);
  const Domain d = s.build();
  atomic_write(a.out, s.to_json(&d));
  std::cout << "domain " << a.kind << ": " << d.boundary.size() << " vertices, perimeter "
            << format_double(d.boundary.perimeter()) << ", diameter " << format_double(d.boundary.diameter())
            << ", inner radius " << format_double(d.inner_radius) << ", hash " << hex64(domain_hash(d)) << "\n";
}

struct SolveArgs {
  std::string domain = "dom.json";
  double p = 2.0;
  double h = 0.02;
  double grading = 0.5;
  double epsilon = 1e-8;
  std::string out = "field.phf";
};

void cmd_solve(const SolveArgs& a) {
  const DomainSpec s = read_domain_spec(a.domain);
  const Domain d = s.build();
  auto mesh = std::make_shared<const Mesh>(build_ring_mesh(d, a.h, a.grading));
  SolverConfig cfg;
  cfg.epsilon = a.epsilon;
  const PHField f = solve_p_capacitary(mesh, a.p, cfg);
  atomic_write(a.out, field_snapshot_bytes(s, d, a.h, a.grading, f));
  std::cout << "solved p = " << format_double(a.p) << " on " << mesh->node_count() << " nodes, "
            << mesh->triangle_count() << " triangles; residual " << f.residual << " after " << f.newton_iterations
            << " Newton steps; field " << hex64(field_hash(f)) << "\n";
}

struct MeasureArgs {
  std::string field = "field.phf";
  int arcs = 4096;
  std::string out = "mu.csv";
};

void cmd_measure(const MeasureArgs& a) {
  const Loaded l = load_field(a.field);
  const BoundaryMeasure mu = extract_boundary_measure(l.snap.field, l.snap.domain, a.arcs);
  write_measure_csv(a.out, mu);
  std::cout << "measure: " << mu.size() << " arcs, total " << format_double(mu.total) << ", clipped " << mu.clipped
            << " (mass " << mu.clipped_mass << ")\n";
}

struct DimensionArgs {
  std::string measure = "mu.csv";
  int samples = 500;
  std::uint64_t seed = 0;
  double r_min = 0.0;
  double r_max = 0.0;
  std::vector<std::string> gauges;
  std::string out = "dim.json";
};

void cmd_dimension(const DimensionArgs& a) {
  const BoundaryMeasure mu = read_measure_csv(a.measure);
  const double r_min = a.r_min > 0.0 ? a.r_min : 4.01 * mu.resolution();
  const double r_max = a.r_max > 0.0 ? a.r_max : path_diameter(mu) / 8.0;
  std::size_t resampled = 0;
  const auto samples = local_dimension_profile(mu, a.samples, r_min, r_max, a.seed, &resampled);
  DimensionReport r = hdim_estimate(samples);
  r.p = mu.p;
  r.measure_provenance = mu.provenance;
  r.resampled = resampled;
  for (const std::string& g : a.gauges) r.gauge_verdicts.push_back(gauge_comparison(mu, parse_gauge(g), a.samples, a.seed));
  ordered_json j = ordered_json::parse(dimension_report_json(r, a.seed));
  j["r_min"] = r_min;
  j["r_max"] = r_max;
  j["provenance"]["domain"] = hex64(mu.domain);
  emit(a.out, j);
  std::cout << "dimension: p = " << format_double(r.p) << ", " << samples.size() << " samples, weighted median "
            << format_double(r.weighted_median) << "\n";
}

struct ConformalArgs {
  std::string domain = "dom.json";
  int resolution = 4096;
  std::string out = "map.cmf";
};

void cmd_conformal(const ConformalArgs& a) {
  const Domain d = read_domain_spec(a.domain).build();
  const HalfPlaneMap m = build_riemann_map(d, a.resolution);
  atomic_write(a.out, m.serialize());
  std::cout << "map: " << m.resolution() << " boundary points, accuracy " << m.accuracy() << ", domain "
            << hex64(m.domain_hash()) << "\n";
}

// ---------------------------------------------------------------------------
// verify

struct VerifyArgs {
  std::string field = "field.phf";
  std::string map = "map.cmf";
  std::string domain = "dom.json";
  std::string measure;
  int samples = 20;
  std::uint64_t seed = 0;
  double delta = 0.2;
  int levels = 12;
  std::string a = "0,1";
  std::string t_levels = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9";
  double qh_resolution = 0.0;
  bool no_box = false;
  std::string out;
};

void verify_lemma47(const VerifyArgs& a) {
  const Loaded l = load_field(a.field);
  const HalfPlaneMap map = load_map(a.map, l.snap.domain);
  const Domain& d = l.snap.domain;
  const PHField& f = l.snap.field;
  const auto z1s = ring_samples(d, a.samples, a.seed, [&](Point z) {
    if (dist(z, d.basepoint) < 1.5 * d.inner_radius || f.locator->find(z) < 0) return false;
    const double u = evaluate(f, z).value;
    return u > 0.05 && u < 0.5;
  });
  ordered_json rows = ordered_json::array();
  double c_hat = 0.0;
  std::size_t failures = 0;
  for (Point z1 : z1s) {
    ordered_json r;
    r["z1"] = pt(z1);
    try {
      const Lemma47Result res = lemma47_verify(f, map, z1, a.delta, a.levels);
      r["u1"] = res.u1;
      r["z_star"] = pt(res.z_star);
      r["u_star"] = res.u_star;
      r["rho"] = res.rho;
      r["levels"] = res.levels;
      c_hat = std::max(c_hat, res.rho);
    } catch (const Error& e) {
      ++failures;
      r["error"] = e.what();
      r["exit_code"] = e.exit_code();
    }
    rows.push_back(r);
  }
  ordered_json j;
  j["kind"] = "lemma47";
  j["p"] = f.p;
  j["delta"] = a.delta;
  j["max_levels"] = a.levels;
  j["seed"] = a.seed;
  j["samples"] = rows;
  j["failures"] = failures;
  j["C_hat"] = c_hat;
  j["provenance"] = {{"domain", hex64(l.domain)}, {"field", hex64(l.snap.hash)}, {"map", hex64(file_hash(a.map))}};
  emit(a.out.empty() ? "lemma47.json" : a.out, j);
  std::cout << "lemma47: " << z1s.size() - failures << "/" << z1s.size() << " searches succeeded, C_hat = "
            << format_double(c_hat) << "\n";
}

void verify_koebe(const VerifyArgs& a) {
  const Domain d = read_domain_spec(a.domain).build();
  const HalfPlaneMap map = load_map(a.map, d);
  std::vector<Complex> samples = {{0.0, 0.0}};
  for (int i = 1; i < a.samples; ++i) {
    auto rng = stream(a.seed, static_cast<std::uint64_t>(i));
    const double r = 0.95 * std::sqrt(unit(rng));
    samples.push_back(std::polar(r, 2.0 * std::numbers::pi * unit(rng)));
  }
  const KoebeReport rep = koebe_check(map, samples);
  ordered_json pts = ordered_json::array();
  for (std::size_t i = 0; i < rep.samples.size(); ++i) pts.push_back({pt(rep.samples[i]), rep.ratios[i]});
  ordered_json j;
  j["kind"] = "koebe";
  j["min"] = rep.min;
  j["max"] = rep.max;
  j["slack"] = kKoebeSlack;
  j["pass"] = koebe_pass(rep);
  j["samples"] = pts;
  j["provenance"] = {{"domain", hex64(map.domain_hash())}, {"map", hex64(file_hash(a.map))}};
  emit(a.out.empty() ? "koebe.json" : a.out, j);
  std::cout << "koebe: ratios in [" << format_double(rep.min) << ", " << format_double(rep.max) << "] over "
            << rep.count << " samples: " << (koebe_pass(rep) ? "PASS" : "FAIL") << "\n";
}

void verify_sandwich(const VerifyArgs& a) {
  const Domain d = read_domain_spec(a.domain).build();
  const HalfPlaneMap map = load_map(a.map, d);
  const double res = a.qh_resolution > 0.0 ? a.qh_resolution : d.boundary.diameter() / 200.0;
  const QuasihyperbolicGraph graph(d, res);
  // Pairs away from the boundary, where the grid resolves the quasihyperbolic density.
  const double floor = 8.0 * res;
  auto pts = ring_samples(d, 2 * a.samples, a.seed, [&](Point z) { return d.distance_to_boundary(z) >= floor; });
  ordered_json rows = ordered_json::array();
  bool pass = true;
  double worst_upper = 0.0, worst_lower = std::numeric_limits<double>::infinity();
  for (int i = 0; i < a.samples; ++i) {
    const Point z1 = pts[2 * i], z2 = pts[2 * i + 1];
    const double rho = hyperbolic_distance(map, z1, z2);
    const double q = graph.distance(z1, z2);
    const bool ok = rho <= q && q <= 4.0 * rho * 1.2;
    pass = pass && ok;
    worst_lower = std::min(worst_lower, q / rho);
    worst_upper = std::max(worst_upper, q / rho);
    rows.push_back({{"z1", pt(z1)}, {"z2", pt(z2)}, {"rho", rho}, {"Q", q}, {"pass", ok}});
  }
  ordered_json j;
  j["kind"] = "sandwich";
  j["qh_resolution"] = res;
  j["min_Q_over_rho"] = worst_lower;
  j["max_Q_over_rho"] = worst_upper;
  j["pass"] = pass;
  j["pairs"] = rows;
  j["provenance"] = {{"domain", hex64(map.domain_hash())}, {"map", hex64(file_hash(a.map))}};
  emit(a.out.empty() ? "sandwich.json" : a.out, j);
  std::cout << "sandwich: Q/rho in [" << format_double(worst_lower) << ", " << format_double(worst_upper) << "]: "
            << (pass ? "PASS" : "FAIL") << "\n";
}

ordered_json path_json(const CigarPath& p) {
  ordered_json j;
  j["levels"] = p.levels();
  j["delta"] = p.delta;
  j["delta_star"] = p.delta_star;
  j["delta_star_used"] = p.delta_star_used;
  j["C_star_hat"] = p.C_star_hat;
  ordered_json anchors = ordered_json::array();
  for (Complex a : p.anchors) anchors.push_back(pt(a));
  j["anchors"] = anchors;
  j["distances"] = p.distances;
  j["decay"] = p.decay;
  j["level_integrals"] = p.level_integrals;
  j["level_bounds"] = p.level_bounds;
  j["cigar_constant"] = p.cigar_constant;
  j["truncated"] = p.truncated;
  j["x0"] = p.x0;
  j["w0"] = pt(p.w0);
  ordered_json image = ordered_json::array();
  for (Complex z : p.image) image.push_back(pt(z));
  j["image"] = image;
  return j;
}

void verify_cigar(const VerifyArgs& a) {
  const Domain d = read_domain_spec(a.domain).build();
  const HalfPlaneMap map = load_map(a.map, d);
  const Point ap = parse_point(a.a);
  const Complex a0(ap.x, ap.y);
  const CigarPath path = build_cigar_path(map, a0, a.delta, a.levels);
  ordered_json j;
  j["kind"] = "cigar";
  j["a"] = pt(a0);
  j["path"] = path_json(path);
  if (!a.no_box) {
    const ShiftedBox box = shifted_box(map, a0, a.delta);
    ordered_json b;
    b["x1"] = box.x1;
    b["x2"] = box.x2;
    b["x3"] = box.x3;
    b["d_fa"] = box.d_fa;
    b["length_ratio"] = box.length_ratio;
    b["separation"] = box.separation;
    b["w0"] = pt(box.w0);
    b["w0_distance_ratio"] = box.w0_distance_ratio;
    ordered_json sigma = ordered_json::array();
    for (Complex z : box.sigma) sigma.push_back(pt(z));
    b["sigma"] = sigma;
    j["shifted_box"] = b;
  }
  ordered_json outline = ordered_json::array();
  for (Point v : d.boundary.vertices()) outline.push_back(pt(v));
  j["outline"] = outline;
  j["provenance"] = {{"domain", hex64(map.domain_hash())}, {"map", hex64(file_hash(a.map))}};
  emit(a.out.empty() ? "cigar.json" : a.out, j);
  std::cout << "cigar: " << path.levels() << " levels, C3 = " << format_double(path.cigar_constant);
  if (!path.decay.empty())
    std::cout << ", worst decay " << format_double(*std::max_element(path.decay.begin(), path.decay.end()));
  if (!path.truncated.empty()) std::cout << " (" << path.truncated << ")";
  if (j.contains("shifted_box"))
    std::cout << "; box length ratio " << format_double(j["shifted_box"]["length_ratio"].get<double>())
              << ", w0 distance ratio " << format_double(j["shifted_box"]["w0_distance_ratio"].get<double>());
  std::cout << "\n";
}

void verify_theorem2(const VerifyArgs& a) {
  const Loaded l = load_field(a.field);
  const Domain& d = l.snap.domain;
  const auto pts = ring_samples(d, a.samples, a.seed, [](Point) { return true; });
  const RatioStats st = theorem2_ratio(l.snap.field, d, pts);
  ordered_json j;
  j["kind"] = "theorem2";
  j["p"] = l.snap.field.p;
  j["retained"] = st.retained;
  j["discarded"] = st.discarded;
  j["min"] = st.min;
  j["max"] = st.max;
  j["quantiles"] = st.quantiles;
  j["values"] = st.values;
  j["provenance"] = {{"domain", hex64(l.domain)}, {"field", hex64(l.snap.hash)}};
  emit(a.out.empty() ? "theorem2.json" : a.out, j);
  std::cout << "theorem2: " << st.retained << " retained, R in [" << format_double(st.min) << ", "
            << format_double(st.max) << "], max/min " << format_double(st.max / st.min) << "\n";
}

void verify_flux(const VerifyArgs& a) {
  const Loaded l = load_field(a.field);
  std::vector<double> ts;
  {
    std::string s = a.t_levels;
    std::replace(s.begin(), s.end(), ',', ' ');
    std::istringstream in(s);
    double t;
    while (in >> t) ts.push_back(t);
  }
  if (ts.empty()) throw PreconditionError("no levels given");
  std::vector<double> flux;
  for (double t : ts) flux.push_back(level_flux(l.snap.field, t));
  ordered_json j;
  j["kind"] = "flux";
  j["p"] = l.snap.field.p;
  j["t"] = ts;
  j["flux"] = flux;
  const auto [lo, hi] = std::minmax_element(flux.begin(), flux.end());
  const double mean = std::accumulate(flux.begin(), flux.end(), 0.0) / flux.size();
  j["spread"] = (*hi - *lo) / mean;
  ordered_json prov = {{"domain", hex64(l.domain)}, {"field", hex64(l.snap.hash)}};
  if (!a.measure.empty()) {
    const BoundaryMeasure mu = read_measure_csv(a.measure);
    if (mu.provenance != l.snap.hash) throw PreconditionError("measure was not extracted from this field");
    j["measure_total"] = mu.total;
    j["total_deviation"] = std::abs(mean - mu.total) / mu.total;
    prov["measure"] = hex64(fnv1a(read_file(a.measure)));
  }
  j["provenance"] = prov;
  emit(a.out.empty() ? "flux.json" : a.out, j);
  std::cout << "flux: spread " << format_double(j["spread"].get<double>());
  if (j.contains("total_deviation")) std::cout << ", deviation from total " << format_double(j["total_deviation"].get<double>());
  std::cout << "\n";
}

int dispatch(CLI::App& app, int argc, const char* const* argv) {
  int threads = 0;
  app.set_config("--config", "", "key = value configuration file");
  app.add_option("--threads", threads, "worker threads (default 1)")->envname("PML_THREADS")->check(CLI::NonNegativeNumber);
  app.require_subcommand(1, 1);
  app.fallthrough();

  DomainArgs da;
  auto* domain = app.add_subcommand("domain", "write a domain spec");
  domain->add_option("--kind", da.kind, "koch, polygon or regular_ngon")
      ->check(CLI::IsMember({"koch", "polygon", "regular_ngon"}))
      ->capture_default_str();
  domain->add_option("--level", da.level, "snowflake level")->capture_default_str();
  domain->add_option("--side", da.side, "snowflake side length")->capture_default_str();
  domain->add_option("--n", da.n, "regular polygon vertex count");
  domain->add_option("--radius", da.radius, "regular polygon circumradius")->capture_default_str();
  domain->add_option("--vertices", da.vertices, "polygon vertices 'x,y x,y ...' (counterclockwise)");
  domain->add_option("--basepoint", da.basepoint, "basepoint 'x,y' (default: vertex centroid)");
  domain->add_option("--out", da.out)->capture_default_str();

  SolveArgs sa;
  auto* solve = app.add_subcommand("solve", "solve the p-capacitary problem");
  solve->add_option("--domain", sa.domain)->capture_default_str();
  solve->add_option("--p", sa.p, "exponent p > 1")->capture_default_str();
  solve->add_option("--h", sa.h, "mesh size")->capture_default_str();
  solve->add_option("--grading", sa.grading, "boundary grading in [0.5, 1]")->capture_default_str();
  solve->add_option("--epsilon", sa.epsilon, "final regularization")->capture_default_str();
  solve->add_option("--out", sa.out)->capture_default_str();

  MeasureArgs ma;
  auto* measure = app.add_subcommand("measure", "extract the boundary measure");
  measure->add_option("--field", ma.field)->capture_default_str();
  measure->add_option("--arcs", ma.arcs)->capture_default_str();
  measure->add_option("--out", ma.out)->capture_default_str();

  DimensionArgs dma;
  auto* dimension = app.add_subcommand("dimension", "local dimension profile and weighted median");
  dimension->add_option("--measure", dma.measure)->capture_default_str();
  dimension->add_option("--samples", dma.samples)->capture_default_str();
  dimension->add_option("--seed", dma.seed)->envname("PML_SEED")->capture_default_str();
  dimension->add_option("--r-min", dma.r_min, "smallest radius (default 4.01 x measure resolution)");
  dimension->add_option("--r-max", dma.r_max, "largest radius (default diam/8)");
  dimension->add_option("--gauge", dma.gauges, "gauge trend check, e.g. power:1 or loglog:1 (repeatable)");
  dimension->add_option("--out", dma.out)->capture_default_str();

  ConformalArgs ca;
  auto* conformal = app.add_subcommand("conformal", "build the half-plane map");
  conformal->add_option("--domain", ca.domain)->capture_default_str();
  conformal->add_option("--resolution", ca.resolution, "densified boundary points")->capture_default_str();
  conformal->add_option("--out", ca.out)->capture_default_str();

  auto* verify = app.add_subcommand("verify", "run a diagnostic and write its JSON record");
  verify->require_subcommand(1, 1);
  auto common = [](CLI::App* c, VerifyArgs& v, bool field, bool map, int samples) {
    v.samples = samples;
    if (field) c->add_option("--field", v.field)->capture_default_str();
    if (map) {
      c->add_option("--map", v.map)->capture_default_str();
      if (!field) c->add_option("--domain", v.domain)->capture_default_str();
    }
    if (samples > 0) c->add_option("--samples", v.samples)->capture_default_str();
    c->add_option("--seed", v.seed)->envname("PML_SEED")->capture_default_str();
    c->add_option("--out", v.out);
  };
  VerifyArgs vl, vk, vs, vc, vt, vf;
  auto* lemma47 = verify->add_subcommand("lemma47", "half-level points along cigar paths");
  common(lemma47, vl, true, true, 20);
  lemma47->add_option("--delta", vl.delta)->capture_default_str();
  lemma47->add_option("--levels", vl.levels, "maximum cigar levels")->capture_default_str();
  auto* koebe = verify->add_subcommand("koebe", "Koebe distortion ratios");
  common(koebe, vk, false, true, 200);
  auto* sandwich = verify->add_subcommand("sandwich", "hyperbolic vs quasihyperbolic distance");
  common(sandwich, vs, false, true, 20);
  sandwich->add_option("--qh-resolution", vs.qh_resolution, "grid spacing (default diam/200)");
  auto* cigar = verify->add_subcommand("cigar", "cigar path and shifted box from a");
  common(cigar, vc, false, true, 0);
  vc.levels = 8;
  cigar->add_option("--a", vc.a, "start point 'x,y' in the half-plane")->capture_default_str();
  cigar->add_option("--delta", vc.delta)->capture_default_str();
  cigar->add_option("--levels", vc.levels)->capture_default_str();
  cigar->add_flag("--no-box", vc.no_box, "skip the shifted box");
  auto* theorem2 = verify->add_subcommand("theorem2", "gradient ratio |grad u| d / u");
  common(theorem2, vt, true, false, 2000);
  auto* flux = verify->add_subcommand("flux", "level-set flux against the measure total");
  common(flux, vf, true, false, 0);
  flux->add_option("--levels", vf.t_levels, "comma separated levels t")->capture_default_str();
  flux->add_option("--measure", vf.measure, "measure file for the total");

  std::string report_dir, report_out;
  auto* report = app.add_subcommand("report", "SVG and CSV bundle from a directory of artifacts");
  report->add_option("--all", report_dir, "directory searched recursively")->required();
  report->add_option("--out", report_out, "bundle directory (default <dir>/report)");

  app.parse(argc, argv);
  if (threads > 0) set_thread_count(threads);

  if (*domain) cmd_domain(da);
  else if (*solve) cmd_solve(sa);
  else if (*measure) cmd_measure(ma);
  else if (*dimension) cmd_dimension(dma);
  else if (*conformal) cmd_conformal(ca);
  else if (*lemma47) verify_lemma47(vl);
  else if (*koebe) verify_koebe(vk);
  else if (*sandwich) verify_sandwich(vs);
  else if (*cigar) verify_cigar(vc);
  else if (*theorem2) verify_theorem2(vt);
  else if (*flux) verify_flux(vf);
  else if (*report) build_report(report_dir, report_out.empty() ? report_dir + "/report" : report_out);
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"p-harmonic measure and conformal geometry experiments", "pml"};
  // -h is taken by the mesh size flag.
  app.set_help_flag("--help", "print this help and exit");
  try {
    return dispatch(app, argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ErrorCategory::kUsage);
  } catch (const Error& e) {
    std::cerr << "pml: error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "pml: internal error: " << e.what() << "\n";
    return static_cast<int>(ErrorCategory::kInternal);
  }
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv = {"pml"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace pml::cli
