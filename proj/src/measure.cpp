#include "pml/measure.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <unordered_map>

#include "pml/error.hpp"
#include "pml/io.hpp"
#include "pml/parallel.hpp"

namespace pml {

// ---------------------------------------------------------------------------
// BoundaryMeasure

double BoundaryMeasure::length() const { return cum.empty() ? 0.0 : cum.back(); }

double BoundaryMeasure::resolution() const {
  double arc = 0.0;
  for (std::size_t j = 0; j < size(); ++j) arc = std::max(arc, s_end[j] - s_start[j]);
  return std::max(arc, mesh_spacing);
}

Point BoundaryMeasure::point_at(double s) const {
  const double L = length();
  const std::size_t n = path.size();
  if (closed) {
    s = std::fmod(s, L);
    if (s < 0) s += L;
  } else {
    s = std::clamp(s, 0.0, L);
  }
  const std::size_t segs = closed ? n : n - 1;
  std::size_t i = static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), s) - cum.begin());
  i = std::min(i == 0 ? 0 : i - 1, segs - 1);
  const Point a = path[i], b = path[(i + 1) % n];
  const double len = cum[i + 1] - cum[i];
  return len > 0 ? a + (b - a) * ((s - cum[i]) / len) : a;
}

void BoundaryMeasure::finalize() {
  const std::size_t n = path.size();
  if (n < 2) throw PreconditionError("measure path needs at least two vertices");
  if (s_start.size() != weights.size() || s_end.size() != weights.size() || weights.empty())
    throw PreconditionError("measure arcs and weights differ in length");
  const std::size_t segs = closed ? n : n - 1;
  cum.assign(segs + 1, 0.0);
  for (std::size_t i = 0; i < segs; ++i) cum[i + 1] = cum[i] + dist(path[i], path[(i + 1) % n]);
  const double L = cum.back();
  total = 0.0;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    if (!(s_end[j] > s_start[j])) throw PreconditionError("measure arc with nonpositive length");
    if (j > 0 && std::abs(s_start[j] - s_end[j - 1]) > 1e-9 * L) throw PreconditionError("measure arcs leave a gap");
    if (!(weights[j] >= 0.0) || !std::isfinite(weights[j])) throw PreconditionError("measure weight must be nonnegative");
    total += weights[j];
  }
  if (std::abs(s_start.front()) > 1e-9 * L || std::abs(s_end.back() - L) > 1e-9 * L)
    throw PreconditionError("measure arcs do not partition the path");
  arc_points.assign(weights.size(), {});
  arc_bounds.assign(weights.size(), {});
  for (std::size_t j = 0; j < weights.size(); ++j) {
    auto& pts = arc_points[j];
    pts.push_back(point_at(s_start[j]));
    for (std::size_t i = 1; i < segs + (closed ? 0 : 1); ++i)
      if (cum[i] > s_start[j] && cum[i] < s_end[j]) pts.push_back(path[i % n]);
    pts.push_back(j + 1 == weights.size() && closed ? path[0] : point_at(s_end[j]));
    BoundingBox b;
    for (const Point& q : pts) b.extend(q);
    const Point c = (b.lo + b.hi) * 0.5;
    double rad = 0.0;
    for (const Point& q : pts) rad = std::max(rad, dist(q, c));
    arc_bounds[j] = {c, rad};
  }
}

BoundaryMeasure BoundaryMeasure::uniform_arcs(std::vector<Point> path, bool closed, std::vector<double> weights) {
  BoundaryMeasure m;
  m.path = std::move(path);
  m.closed = closed;
  const std::size_t n = m.path.size();
  double L = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) L += dist(m.path[i], m.path[i + 1]);
  if (closed && n > 1) L += dist(m.path[n - 1], m.path[0]);
  const std::size_t k = weights.size();
  m.weights = std::move(weights);
  for (std::size_t j = 0; j < k; ++j) {
    m.s_start.push_back(L * static_cast<double>(j) / static_cast<double>(k));
    m.s_end.push_back(j + 1 == k ? L : L * static_cast<double>(j + 1) / static_cast<double>(k));
  }
  m.finalize();
  return m;
}

// ---------------------------------------------------------------------------
// Extraction

namespace {

// Integral over [x0, x1] of the tent rising linearly from 0 at a to 1 at b (a < b), or falling when a > b.
double ramp_integral(double a, double b, double x0, double x1) {
  const double lo = std::max(x0, std::min(a, b)), hi = std::min(x1, std::max(a, b));
  if (hi <= lo) return 0.0;
  const double L = std::abs(b - a);
  auto F = [&](double x) {
    const double s = (x - a) / (b - a);
    return 0.5 * s * s * L;
  };
  return a < b ? F(hi) - F(lo) : F(lo) - F(hi);
}

}  // namespace

BoundaryMeasure extract_boundary_measure(const PHField& field, const Domain& domain, int arc_count) {
  if (arc_count < 16) throw PreconditionError("arc_count must be at least 16");
  const Mesh& m = field.m();
  const double p = field.p;
  const std::size_t nb = m.outer_loop.size();
  if (nb < 3) throw GeometryError("mesh has no outer boundary loop");
  std::vector<int> pos(m.node_count(), -1);
  for (std::size_t k = 0; k < nb; ++k) pos[m.outer_loop[k]] = static_cast<int>(k);

  // Nodal Riesz weights from the weak form with the unregularized flux.
  std::vector<double> reaction(nb, 0.0);
  for (std::size_t t = 0; t < m.triangle_count(); ++t) {
    const auto& T = m.triangles[t];
    if (pos[T[0]] < 0 && pos[T[1]] < 0 && pos[T[2]] < 0) continue;
    const Point g = field.grad[t];
    const double s = norm(g);
    if (s == 0.0) continue;
    const double coef = m.area(t) * std::pow(s, p - 2.0);
    const double A2 = 2.0 * m.area(t);
    for (int k = 0; k < 3; ++k) {
      if (pos[T[k]] < 0) continue;
      const Point a = m.nodes[T[(k + 1) % 3]], b = m.nodes[T[(k + 2) % 3]];
      const Point grad_phi = Point{a.y - b.y, b.x - a.x} / A2;
      reaction[pos[T[k]]] -= coef * dot(g, grad_phi);
    }
  }

  const double P = domain.boundary.perimeter();
  const double arc = P / arc_count;
  BoundaryMeasure mu;
  mu.path = domain.boundary.vertices();
  mu.closed = true;
  mu.p = p;
  mu.weights.assign(static_cast<std::size_t>(arc_count), 0.0);
  for (int j = 0; j < arc_count; ++j) {
    mu.s_start.push_back(arc * j);
    mu.s_end.push_back(j + 1 == arc_count ? P : arc * (j + 1));
  }
  const auto& s = m.outer_arclength;
  double spacing = 0.0;
  for (std::size_t k = 0; k < nb; ++k) {
    const double left = k == 0 ? s[0] + P - s[nb - 1] : s[k] - s[k - 1];
    const double right = k + 1 == nb ? s[0] + P - s[k] : s[k + 1] - s[k];
    spacing = std::max(spacing, right);
    const double mass = 0.5 * (left + right);
    const double lo = s[k] - left, hi = s[k] + right;
    const long j0 = static_cast<long>(std::floor(lo / arc)), j1 = static_cast<long>(std::floor(hi / arc));
    for (long j = j0; j <= j1; ++j) {
      const double x0 = arc * static_cast<double>(j), x1 = x0 + arc;
      const double share = ramp_integral(lo, s[k], x0, x1) + ramp_integral(hi, s[k], x0, x1);
      long jj = j % arc_count;
      if (jj < 0) jj += arc_count;
      mu.weights[static_cast<std::size_t>(jj)] += reaction[k] * share / mass;
    }
  }
  mu.mesh_spacing = spacing;
  double total = 0.0;
  for (double w : mu.weights) total += w;
  const double tol = 1e-10 * std::abs(total);
  for (std::size_t j = 0; j < mu.weights.size(); ++j) {
    double& w = mu.weights[j];
    if (w < -10.0 * tol) {
      std::ostringstream os;
      os << "negative weight " << w << " on arc " << j << " [" << mu.s_start[j] << ", " << mu.s_end[j]
         << "]; refine the mesh near that arc";
      throw ResolutionError(os.str());
    }
    if (w < 0.0) {
      ++mu.clipped;
      mu.clipped_mass += -w;
      w = 0.0;
    }
  }
  mu.provenance = field_hash(field);
  mu.domain = domain_hash(domain);
  mu.finalize();
  return mu;
}

// ---------------------------------------------------------------------------
// Ball masses

namespace {

// Length of the part of segment [a, b] inside the open disk B(c, r).
double inside_length(Point a, Point b, Point c, double r) {
  const Point d = b - a, f = a - c;
  const double A = dot(d, d);
  if (A == 0.0) return 0.0;
  const double B = 2.0 * dot(f, d), C = dot(f, f) - r * r;
  const double disc = B * B - 4.0 * A * C;
  if (disc <= 0.0) return 0.0;
  const double sq = std::sqrt(disc);
  const double t0 = std::max(0.0, (-B - sq) / (2.0 * A)), t1 = std::min(1.0, (-B + sq) / (2.0 * A));
  return t1 > t0 ? (t1 - t0) * std::sqrt(A) : 0.0;
}

}  // namespace

double ball_mass(const BoundaryMeasure& m, Point w, double r) {
  if (m.arc_points.size() != m.weights.size()) throw InternalError("measure used before finalize()");
  if (!(r > 2.0 * m.resolution())) {
    std::ostringstream os;
    os << "ball radius " << r << " is below twice the measure resolution " << m.resolution();
    throw ResolutionError(os.str());
  }
  double mass = 0.0;
  for (std::size_t j = 0; j < m.weights.size(); ++j) {
    if (m.weights[j] == 0.0) continue;
    const Ball& b = m.arc_bounds[j];
    const double dc = dist(w, b.center);
    if (dc >= r + b.radius) continue;
    if (dc + b.radius < r) {
      mass += m.weights[j];
      continue;
    }
    const auto& pts = m.arc_points[j];
    double inside = 0.0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) inside += inside_length(pts[i], pts[i + 1], w, r);
    const double len = m.s_end[j] - m.s_start[j];
    mass += m.weights[j] * std::min(1.0, inside / len);
  }
  return mass;
}

Lemma23Triple lemma23_check(const PHField& field, const Domain& domain, const BoundaryMeasure& m, Point w, double r) {
  if (!(r > 0.0)) throw DomainError("radius must be positive");
  if (domain.distance_to_boundary(w) > 1e-9 * domain.boundary.diameter())
    throw PreconditionError("measure vs sup check needs w on the boundary");
  if (dist(w, domain.basepoint) - domain.inner_radius <= 4.0 * r)
    throw PreconditionError("B(w, 4r) reaches the inner circle");
  const double scale = std::pow(r, field.p - 2.0);
  Lemma23Triple out;
  out.left = scale * ball_mass(m, w, r / 2.0);
  out.mid = std::pow(max_over_ball(field, w, r), field.p - 1.0);
  out.right = scale * ball_mass(m, w, 2.0 * r);
  return out;
}

// ---------------------------------------------------------------------------
// Level sets

LevelSet trace_level_set(const PHField& field, double t) {
  if (!(t >= 0.02 && t <= 0.98)) throw DomainError("level must lie in [0.02, 0.98]");
  const Mesh& m = field.m();
  const auto& u = field.u;
  struct Seg {
    std::uint64_t end;
    int tri;
    Point start;
  };
  auto key = [](int a, int b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
  };
  auto cross_point = [&](int a, int b) {
    if (a > b) std::swap(a, b);
    const double lam = (t - u[a]) / (u[b] - u[a]);
    return m.nodes[a] + (m.nodes[b] - m.nodes[a]) * lam;
  };
  std::unordered_map<std::uint64_t, Seg> from;
  std::vector<std::uint64_t> order;
  for (std::size_t tri = 0; tri < m.triangle_count(); ++tri) {
    const auto& T = m.triangles[tri];
    bool above[3];
    for (int k = 0; k < 3; ++k) above[k] = u[T[k]] >= t;
    if (above[0] == above[1] && above[1] == above[2]) continue;
    std::uint64_t s = 0, e = 0;
    Point sp;
    for (int k = 0; k < 3; ++k) {
      const int a = T[k], b = T[(k + 1) % 3];
      if (above[k] && !above[(k + 1) % 3]) {
        s = key(a, b);
        sp = cross_point(a, b);
      } else if (!above[k] && above[(k + 1) % 3]) {
        e = key(a, b);
      }
    }
    if (from.count(s)) throw GeometryError("level set edge crossed twice; mesh is not conforming");
    from.emplace(s, Seg{e, static_cast<int>(tri), sp});
    order.push_back(s);
  }
  LevelSet ls;
  ls.t = t;
  std::unordered_map<std::uint64_t, bool> used;
  for (std::uint64_t first : order) {
    if (used[first]) continue;
    std::vector<Point> chain;
    std::vector<int> tris;
    std::uint64_t cur = first;
    while (true) {
      used[cur] = true;
      auto it = from.find(cur);
      if (it == from.end()) throw GeometryError("open level-set chain; mesh defect");
      chain.push_back(it->second.start);
      tris.push_back(it->second.tri);
      cur = it->second.end;
      if (cur == first) break;
      if (used[cur]) throw GeometryError("level-set chain merges into another chain; mesh defect");
    }
    for (std::size_t k = 0; k < chain.size(); ++k) ls.total_length += dist(chain[k], chain[(k + 1) % chain.size()]);
    ls.polylines.push_back(std::move(chain));
    ls.triangles.push_back(std::move(tris));
  }
  return ls;
}

namespace {

template <class F>
void for_each_segment(const LevelSet& ls, F&& f) {
  for (std::size_t c = 0; c < ls.polylines.size(); ++c) {
    const auto& ch = ls.polylines[c];
    for (std::size_t k = 0; k < ch.size(); ++k) f(ls.triangles[c][k], dist(ch[k], ch[(k + 1) % ch.size()]));
  }
}

}  // namespace

double level_flux(const PHField& field, double t) {
  const LevelSet ls = trace_level_set(field, t);
  double flux = 0.0;
  for_each_segment(ls, [&](int tri, double len) { flux += std::pow(norm(field.grad[tri]), field.p - 1.0) * len; });
  return flux;
}

LevelSetDiagnostic makarov_diagnostic(const PHField& field, const Domain& domain, double t, double c_plus) {
  if (!(t > 0.0 && t < 0.1)) throw DomainError("makarov diagnostic needs 0 < t < 0.1");
  if (!(c_plus > 0.0)) throw DomainError("c_plus must be positive");
  const LevelSet ls = trace_level_set(field, t);
  const double p = field.p;
  const double tau = domain.inner_radius;
  const double L = std::log(1.0 / t);
  LevelSetDiagnostic d;
  d.t = t;
  d.c_plus = c_plus;
  d.xi = 2.0 * std::sqrt(c_plus * L * std::log(L));
  d.weighted_bound = 2.0 * c_plus;
  d.F_bound = 2.0 * c_plus / (L * L);
  for_each_segment(ls, [&](int tri, double len) {
    // Coordinates with z0 = 0 and inner radius 1.
    const double g = tau * norm(field.grad[tri]);
    const double piece = std::pow(g, p - 1.0) * len / tau;
    double v = 0.0;
    if (p < 2.0) v = std::max(std::log(g), 0.0);
    if (p > 2.0) v = std::max(-std::log(g), 0.0);
    d.flux += piece;
    d.weighted_flux += piece * std::exp(v * v / (2.0 * c_plus * L));
    if (v >= d.xi) d.F_flux += piece;
  });
  return d;
}

// ---------------------------------------------------------------------------
// CSV

void write_measure_csv(const std::string& path, const BoundaryMeasure& m) {
  std::ostringstream os;
  os << "# pml boundary measure\n";
  os << "# p=" << format_double(m.p) << "\n";
  os << "# provenance=" << hex64(m.provenance) << "\n";
  if (m.domain) os << "# domain=" << hex64(m.domain) << "\n";
  os << "# closed=" << (m.closed ? 1 : 0) << "\n";
  os << "# mesh_spacing=" << format_double(m.mesh_spacing) << "\n";
  os << "# clipped=" << m.clipped << " clipped_mass=" << format_double(m.clipped_mass) << "\n";
  for (const Point& v : m.path) os << "# vertex," << format_double(v.x) << "," << format_double(v.y) << "\n";
  os << "arc_id,s_start,s_end,weight\n";
  for (std::size_t j = 0; j < m.size(); ++j)
    os << j << "," << format_double(m.s_start[j]) << "," << format_double(m.s_end[j]) << ","
       << format_double(m.weights[j]) << "\n";
  atomic_write(path, os.str());
}

BoundaryMeasure read_measure_csv(const std::string& path) {
  std::istringstream in(read_file(path));
  BoundaryMeasure m;
  std::string line;
  bool header = false;
  auto bad = [&path](const std::string& why) { return PreconditionError("malformed measure file " + path + ": " + why); };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::string body = line.substr(line.find_first_not_of("# "));
      if (body.rfind("p=", 0) == 0) m.p = std::stod(body.substr(2));
      else if (body.rfind("provenance=", 0) == 0) m.provenance = parse_hex64(body.substr(11));
      else if (body.rfind("domain=", 0) == 0) m.domain = parse_hex64(body.substr(7));
      else if (body.rfind("closed=", 0) == 0) m.closed = body.substr(7) == "1";
      else if (body.rfind("mesh_spacing=", 0) == 0) m.mesh_spacing = std::stod(body.substr(13));
      else if (body.rfind("clipped=", 0) == 0) {
        std::istringstream ss(body.substr(8));
        std::string rest;
        ss >> m.clipped >> rest;
        if (rest.rfind("clipped_mass=", 0) == 0) m.clipped_mass = std::stod(rest.substr(13));
      } else if (body.rfind("vertex,", 0) == 0) {
        const std::string xy = body.substr(7);
        const auto comma = xy.find(',');
        if (comma == std::string::npos) throw bad("vertex line");
        m.path.push_back({std::stod(xy.substr(0, comma)), std::stod(xy.substr(comma + 1))});
      }
      continue;
    }
    if (!header) {
      if (line != "arc_id,s_start,s_end,weight") throw bad("missing column header");
      header = true;
      continue;
    }
    std::istringstream ss(line);
    std::string f[4];
    for (auto& x : f)
      if (!std::getline(ss, x, ',')) throw bad("short row");
    if (static_cast<std::size_t>(std::stoul(f[0])) != m.weights.size()) throw bad("arc ids out of order");
    m.s_start.push_back(std::stod(f[1]));
    m.s_end.push_back(std::stod(f[2]));
    m.weights.push_back(std::stod(f[3]));
  }
  if (!header) throw bad("missing column header");
  m.finalize();
  return m;
}

}  // namespace pml
