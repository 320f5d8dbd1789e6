#include "pml/geometry.hpp"

#include <algorithm>
#include <numbers>
#include <queue>
#include <sstream>

#include "pml/error.hpp"
#include "pml/io.hpp"

namespace pml {

double segment_distance(Point p, Point a, Point b, double* t) {
  const Point ab = b - a;
  const double len2 = dot(ab, ab);
  double s = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
  s = std::clamp(s, 0.0, 1.0);
  if (t) *t = s;
  return dist(p, a + ab * s);
}

void BoundingBox::extend(Point p) {
  lo.x = std::min(lo.x, p.x);
  lo.y = std::min(lo.y, p.y);
  hi.x = std::max(hi.x, p.x);
  hi.y = std::max(hi.y, p.y);
}

// ---------------------------------------------------------------------------
// SegmentIndex

SegmentIndex::SegmentIndex(std::span<const Point> pts, bool closed)
    : pts_(pts.begin(), pts.end()), closed_(closed) {
  for (const Point& p : pts_) box_.extend(p);
  const std::size_t m = segment_count();
  const double extent = std::max({box_.width(), box_.height(), 1e-300});
  // About one segment per cell along the longer side.
  const double cells_per_side = std::max(1.0, std::sqrt(static_cast<double>(m)) * 1.5);
  cell_ = extent / cells_per_side;
  nx_ = std::max(1, static_cast<int>(std::ceil(box_.width() / cell_)) + 1);
  ny_ = std::max(1, static_cast<int>(std::ceil(box_.height() / cell_)) + 1);
  cells_.assign(static_cast<std::size_t>(nx_) * ny_, {});
  for (std::size_t i = 0; i < m; ++i) {
    const Point a = pts_[i];
    const Point b = pts_[(i + 1) % pts_.size()];
    const int x0 = cell_x(std::min(a.x, b.x)), x1 = cell_x(std::max(a.x, b.x));
    const int y0 = cell_y(std::min(a.y, b.y)), y1 = cell_y(std::max(a.y, b.y));
    for (int iy = y0; iy <= y1; ++iy)
      for (int ix = x0; ix <= x1; ++ix)
        cells_[static_cast<std::size_t>(iy) * nx_ + ix].push_back(static_cast<std::uint32_t>(i));
  }
}

int SegmentIndex::cell_x(double x) const {
  return std::clamp(static_cast<int>(std::floor((x - box_.lo.x) / cell_)), 0, nx_ - 1);
}

int SegmentIndex::cell_y(double y) const {
  return std::clamp(static_cast<int>(std::floor((y - box_.lo.y) / cell_)), 0, ny_ - 1);
}

double SegmentIndex::nearest(Point p, std::size_t* segment, double* t) const {
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_i = 0;
  double best_t = 0.0;
  if (pts_.size() < 2) return best;
  const int cx = cell_x(p.x), cy = cell_y(p.y);
  const int max_ring = std::max(nx_, ny_);
  for (int k = 0; k <= max_ring; ++k) {
    for (int iy = cy - k; iy <= cy + k; ++iy) {
      if (iy < 0 || iy >= ny_) continue;
      const bool edge_row = (iy == cy - k || iy == cy + k);
      for (int ix = cx - k; ix <= cx + k; ix += (edge_row ? 1 : 2 * k)) {
        if (ix >= 0 && ix < nx_) {
          for (std::uint32_t s : cells_[static_cast<std::size_t>(iy) * nx_ + ix]) {
            double ts = 0.0;
            const double d = segment_distance(p, pts_[s], pts_[(s + 1) % pts_.size()], &ts);
            if (d < best || (d == best && s < best_i)) {
              best = d;
              best_i = s;
              best_t = ts;
            }
          }
        }
        if (k == 0) break;
      }
    }
    // Every segment not yet seen lies outside the window of visited cells.
    const double wx0 = box_.lo.x + (cx - k) * cell_, wx1 = box_.lo.x + (cx + k + 1) * cell_;
    const double wy0 = box_.lo.y + (cy - k) * cell_, wy1 = box_.lo.y + (cy + k + 1) * cell_;
    double bound = std::numeric_limits<double>::infinity();
    if (cx - k > 0) bound = std::min(bound, p.x - wx0);
    if (cx + k < nx_ - 1) bound = std::min(bound, wx1 - p.x);
    if (cy - k > 0) bound = std::min(bound, p.y - wy0);
    if (cy + k < ny_ - 1) bound = std::min(bound, wy1 - p.y);
    if (best <= bound) break;
  }
  if (segment) *segment = best_i;
  if (t) *t = best_t;
  return best;
}

void SegmentIndex::query_box(const BoundingBox& box, std::vector<std::size_t>& out) const {
  out.clear();
  if (box.hi.x < box_.lo.x || box.lo.x > box_.hi.x || box.hi.y < box_.lo.y || box.lo.y > box_.hi.y)
    return;
  const int x0 = cell_x(box.lo.x), x1 = cell_x(box.hi.x);
  const int y0 = cell_y(box.lo.y), y1 = cell_y(box.hi.y);
  for (int iy = y0; iy <= y1; ++iy)
    for (int ix = x0; ix <= x1; ++ix)
      for (std::uint32_t s : cells_[static_cast<std::size_t>(iy) * nx_ + ix]) out.push_back(s);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
}

// ---------------------------------------------------------------------------
// JordanCurve

namespace {

int orientation(Point a, Point b, Point c) {
  const double v = cross(b - a, c - a);
  return (v > 0.0) - (v < 0.0);
}

bool on_segment(Point a, Point b, Point p) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
         p.y <= std::max(a.y, b.y);
}

bool segments_touch(Point a, Point b, Point c, Point d) {
  const int o1 = orientation(a, b, c), o2 = orientation(a, b, d);
  const int o3 = orientation(c, d, a), o4 = orientation(c, d, b);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(a, b, c)) return true;
  if (o2 == 0 && on_segment(a, b, d)) return true;
  if (o3 == 0 && on_segment(c, d, a)) return true;
  if (o4 == 0 && on_segment(c, d, b)) return true;
  return false;
}

std::vector<Point> convex_hull(std::vector<Point> p) {
  std::sort(p.begin(), p.end(), [](Point a, Point b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  if (p.size() < 3) return p;
  std::vector<Point> h(2 * p.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    while (k >= 2 && cross(h[k - 1] - h[k - 2], p[i] - h[k - 2]) <= 0) --k;
    h[k++] = p[i];
  }
  for (std::size_t i = p.size() - 1, t = k + 1; i > 0; --i) {
    while (k >= t && cross(h[k - 1] - h[k - 2], p[i - 1] - h[k - 2]) <= 0) --k;
    h[k++] = p[i - 1];
  }
  h.resize(k - 1);
  return h;
}

std::string describe(std::size_t i, Point p) {
  std::ostringstream os;
  os << "vertex " << i << " (" << p.x << ", " << p.y << ")";
  return os.str();
}

}  // namespace

JordanCurve::JordanCurve(std::vector<Point> vertices) : v_(std::move(vertices)) {
  const std::size_t n = v_.size();
  if (n < 3) throw GeometryError("Jordan curve needs at least 3 vertices");
  for (std::size_t i = 0; i < n; ++i) {
    if (!is_finite(v_[i])) throw GeometryError("non-finite coordinate at " + describe(i, v_[i]));
    if (v_[i] == v_[(i + 1) % n])
      throw GeometryError("repeated consecutive vertex at " + describe(i, v_[i]));
    box_.extend(v_[i]);
  }
  cum_.resize(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) cum_[i + 1] = cum_[i] + dist(v_[i], v_[(i + 1) % n]);

  index_ = SegmentIndex(v_, true);

  // Simplicity: non-adjacent segments must not touch; adjacent ones must not fold back.
  std::vector<std::size_t> cand;
  for (std::size_t i = 0; i < n; ++i) {
    const Point a = v_[i], b = v_[(i + 1) % n];
    const Point c = v_[(i + 2) % n];
    if (orientation(a, b, c) == 0 && dot(b - a, c - b) < 0.0)
      throw GeometryError("curve folds back at " + describe((i + 1) % n, b));
    BoundingBox bb;
    bb.extend(a);
    bb.extend(b);
    index_.query_box(bb, cand);
    for (std::size_t j : cand) {
      if (j == i || j == (i + 1) % n || (j + 1) % n == i) continue;
      if (segments_touch(a, b, v_[j], v_[(j + 1) % n]))
        throw GeometryError("self-intersection between segments at " + describe(i, a) + " and " +
                            describe(j, v_[j]));
    }
  }
  // Orientation only means something once the curve is known to be simple.
  if (signed_area() <= 0.0) throw GeometryError("Jordan curve must be counterclockwise");

  const std::vector<Point> hull = convex_hull(v_);
  for (std::size_t i = 0; i < hull.size(); ++i)
    for (std::size_t j = i + 1; j < hull.size(); ++j) diameter_ = std::max(diameter_, dist(hull[i], hull[j]));
}

double JordanCurve::signed_area() const {
  double a = 0.0;
  for (std::size_t i = 0; i < v_.size(); ++i) a += cross(v_[i], v_[(i + 1) % v_.size()]);
  return 0.5 * a;
}

Point JordanCurve::at_arclength(double s) const {
  const double L = perimeter();
  s = std::fmod(s, L);
  if (s < 0.0) s += L;
  auto it = std::upper_bound(cum_.begin(), cum_.end(), s);
  std::size_t i = static_cast<std::size_t>(std::distance(cum_.begin(), it)) - 1;
  i = std::min(i, v_.size() - 1);
  const double len = cum_[i + 1] - cum_[i];
  const double t = len > 0.0 ? (s - cum_[i]) / len : 0.0;
  const Point a = v_[i], b = v_[(i + 1) % v_.size()];
  return a + (b - a) * t;
}

double JordanCurve::project(Point p) const {
  std::size_t seg = 0;
  double t = 0.0;
  index_.nearest(p, &seg, &t);
  return cum_[seg] + t * (cum_[seg + 1] - cum_[seg]);
}

bool JordanCurve::contains(Point p) const {
  if (p.x <= box_.lo.x || p.x >= box_.hi.x || p.y <= box_.lo.y || p.y >= box_.hi.y) return false;
  BoundingBox ray;
  ray.extend(p);
  ray.extend({box_.hi.x, p.y});
  std::vector<std::size_t> cand;
  index_.query_box(ray, cand);
  bool inside = false;
  const std::size_t n = v_.size();
  for (std::size_t i : cand) {
    const Point a = v_[i], b = v_[(i + 1) % n];
    if (segment_distance(p, a, b) == 0.0) return false;
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (x > p.x) inside = !inside;
    }
  }
  return inside;
}

// ---------------------------------------------------------------------------
// Domain and constructions

Domain Domain::create(JordanCurve boundary, Point basepoint) {
  if (!is_finite(basepoint)) throw GeometryError("basepoint must be finite");
  if (!boundary.contains(basepoint)) throw GeometryError("basepoint must lie strictly inside the boundary");
  Domain d;
  d.inner_radius = boundary.distance(basepoint) / 2.0;
  d.boundary = std::move(boundary);
  d.basepoint = basepoint;
  return d;
}

double distance_to_boundary(const Domain& domain, Point z) { return domain.distance_to_boundary(z); }

JordanCurve koch_snowflake(int level, double side) {
  if (level < 0) throw DomainError("snowflake level must be nonnegative");
  if (level > 8) throw ResourceError("snowflake level above 8 exceeds the vertex budget 3*4^8");
  if (!(side > 0.0) || !std::isfinite(side)) throw DomainError("snowflake side must be positive");
  const double h = side * std::sqrt(3.0) / 2.0;
  std::vector<Point> pts{{0.0, 0.0}, {side, 0.0}, {side / 2.0, h}};
  const double c = 0.5, s = -std::sqrt(3.0) / 2.0;  // rotation by -60 degrees points outward for CCW
  for (int l = 0; l < level; ++l) {
    std::vector<Point> next;
    next.reserve(pts.size() * 4);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const Point a = pts[i], b = pts[(i + 1) % pts.size()];
      const Point d = (b - a) / 3.0;
      const Point p1 = a + d, p3 = a + d * 2.0;
      const Point peak = p1 + Point{c * d.x - s * d.y, s * d.x + c * d.y};
      next.insert(next.end(), {a, p1, peak, p3});
    }
    pts = std::move(next);
  }
  return JordanCurve(std::move(pts));
}

JordanCurve regular_ngon(int n, double radius, Point center) {
  if (n < 3) throw DomainError("regular polygon needs at least 3 sides");
  if (!(radius > 0.0)) throw DomainError("regular polygon radius must be positive");
  std::vector<Point> pts(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    const double th = 2.0 * std::numbers::pi * k / n;
    pts[static_cast<std::size_t>(k)] = center + Point{radius * std::cos(th), radius * std::sin(th)};
  }
  return JordanCurve(std::move(pts));
}

Point vertex_centroid(const JordanCurve& c) {
  Point s;
  for (const Point& p : c.vertices()) s = s + p;
  return s / static_cast<double>(c.size());
}

// ---------------------------------------------------------------------------
// Gauges

Gauge Gauge::power(double alpha) {
  if (!(alpha > 0.0)) throw DomainError("power gauge exponent must be positive");
  return {Kind::kPower, alpha, std::numeric_limits<double>::infinity()};
}

Gauge Gauge::loglog(double a) { return {Kind::kLogLog, a, kLogGaugeCutoff}; }
Gauge Gauge::logloglog(double a) { return {Kind::kLogLogLog, a, kLogGaugeCutoff}; }

std::string Gauge::name() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::kPower: os << "power(" << parameter << ")"; break;
    case Kind::kLogLog: os << "loglog(" << parameter << ")"; break;
    case Kind::kLogLogLog: os << "logloglog(" << parameter << ")"; break;
  }
  return os.str();
}

double gauge_eval(const Gauge& g, double r) {
  if (!(r > 0.0) || !(r < g.valid_below)) {
    std::ostringstream os;
    os << "radius " << r << " outside the valid range (0, " << g.valid_below << ") of gauge " << g.name();
    throw DomainError(os.str());
  }
  const double L = std::log(1.0 / r);
  switch (g.kind) {
    case Gauge::Kind::kPower: return std::pow(r, g.parameter);
    case Gauge::Kind::kLogLog: return r * std::exp(g.parameter * std::sqrt(L * std::log(L)));
    case Gauge::Kind::kLogLogLog:
      return r * std::exp(g.parameter * std::sqrt(L * std::log(std::log(L))));
  }
  throw InternalError("unknown gauge kind");
}

double covering_sum(const Gauge& g, std::span<const Ball> balls) {
  double s = 0.0;
  for (const Ball& b : balls) s += gauge_eval(g, b.radius);
  return s;
}

// ---------------------------------------------------------------------------
// Quasihyperbolic graph

QuasihyperbolicGraph::QuasihyperbolicGraph(const Domain& domain, double resolution)
    : domain_(domain), h_(resolution) {
  if (!(resolution > 0.0)) throw DomainError("quasihyperbolic resolution must be positive");
  const BoundingBox& bb = domain_.boundary.bbox();
  origin_ = bb.lo;
  nx_ = static_cast<int>(std::ceil(bb.width() / h_)) + 1;
  ny_ = static_cast<int>(std::ceil(bb.height() / h_)) + 1;
  if (static_cast<double>(nx_) * ny_ > 5e7) throw ResourceError("quasihyperbolic grid too fine");
  node_of_cell_.assign(static_cast<std::size_t>(nx_) * ny_, -1);
  for (int j = 0; j < ny_; ++j)
    for (int i = 0; i < nx_; ++i) {
      const Point p = origin_ + Point{i * h_, j * h_};
      if (!domain_.contains(p)) continue;
      const double d = domain_.distance_to_boundary(p);
      if (!(d > 0.0)) continue;
      node_of_cell_[static_cast<std::size_t>(j) * nx_ + i] = static_cast<int>(nodes_.size());
      nodes_.push_back(p);
      dist_.push_back(d);
    }
  // Connected components over admissible 8-neighbour edges.
  component_.assign(nodes_.size(), -1);
  int comp = 0;
  for (std::size_t s = 0; s < nodes_.size(); ++s) {
    if (component_[s] >= 0) continue;
    std::vector<int> stack{static_cast<int>(s)};
    component_[s] = comp;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      const int ui = static_cast<int>(std::lround((nodes_[u].x - origin_.x) / h_));
      const int uj = static_cast<int>(std::lround((nodes_[u].y - origin_.y) / h_));
      for (int dj = -1; dj <= 1; ++dj)
        for (int di = -1; di <= 1; ++di) {
          if (!di && !dj) continue;
          const int i = ui + di, j = uj + dj;
          if (i < 0 || j < 0 || i >= nx_ || j >= ny_) continue;
          const int v = node_of_cell_[static_cast<std::size_t>(j) * nx_ + i];
          if (v < 0 || component_[v] >= 0) continue;
          if (dist_[u] + dist_[v] <= h_ * std::hypot(di, dj)) continue;
          component_[v] = comp;
          stack.push_back(v);
        }
    }
    ++comp;
  }
}

void QuasihyperbolicGraph::attach(Point z, std::vector<std::pair<int, double>>& out) const {
  out.clear();
  const double dz = domain_.distance_to_boundary(z);
  const int ci = static_cast<int>(std::floor((z.x - origin_.x) / h_));
  const int cj = static_cast<int>(std::floor((z.y - origin_.y) / h_));
  for (int j = cj - 1; j <= cj + 2; ++j)
    for (int i = ci - 1; i <= ci + 2; ++i) {
      if (i < 0 || j < 0 || i >= nx_ || j >= ny_) continue;
      const int v = node_of_cell_[static_cast<std::size_t>(j) * nx_ + i];
      if (v < 0) continue;
      const double len = dist(z, nodes_[v]);
      if (len > 1.5 * h_ || dz + dist_[v] <= len) continue;
      out.emplace_back(v, len / std::min(dz, dist_[v]));
    }
}

double QuasihyperbolicGraph::distance(Point z1, Point z2) const {
  if (!domain_.contains(z1) || !domain_.contains(z2))
    throw DomainError("quasihyperbolic distance needs points strictly inside the domain");
  if (z1 == z2) return 0.0;
  const double d1 = domain_.distance_to_boundary(z1), d2 = domain_.distance_to_boundary(z2);
  double direct = std::numeric_limits<double>::infinity();
  const double len = dist(z1, z2);
  if (d1 + d2 > len && len <= 1.5 * h_) direct = len / std::min(d1, d2);

  std::vector<std::pair<int, double>> src, dst;
  attach(z1, src);
  attach(z2, dst);
  if (src.empty() || dst.empty()) {
    if (std::isfinite(direct)) return direct;
    throw ResolutionError("quasihyperbolic graph too coarse to attach the query points");
  }
  std::vector<double> target(nodes_.size(), std::numeric_limits<double>::infinity());
  for (auto [v, w] : dst) target[v] = std::min(target[v], w);

  std::vector<double> best(nodes_.size(), std::numeric_limits<double>::infinity());
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  for (auto [v, w] : src)
    if (w < best[v]) {
      best[v] = w;
      pq.emplace(w, v);
    }
  double answer = direct;
  while (!pq.empty()) {
    auto [du, u] = pq.top();
    pq.pop();
    if (du > best[u]) continue;
    if (du >= answer) break;
    if (std::isfinite(target[u])) answer = std::min(answer, du + target[u]);
    const int ui = static_cast<int>(std::lround((nodes_[u].x - origin_.x) / h_));
    const int uj = static_cast<int>(std::lround((nodes_[u].y - origin_.y) / h_));
    for (int dj = -1; dj <= 1; ++dj)
      for (int di = -1; di <= 1; ++di) {
        if (!di && !dj) continue;
        const int i = ui + di, j = uj + dj;
        if (i < 0 || j < 0 || i >= nx_ || j >= ny_) continue;
        const int v = node_of_cell_[static_cast<std::size_t>(j) * nx_ + i];
        if (v < 0) continue;
        const double l = h_ * std::hypot(di, dj);
        if (dist_[u] + dist_[v] <= l) continue;
        const double nd = du + l / std::min(dist_[u], dist_[v]);
        if (nd < best[v]) {
          best[v] = nd;
          pq.emplace(nd, v);
        }
      }
  }
  if (!std::isfinite(answer))
    throw ResolutionError("quasihyperbolic graph disconnected between the query points at this resolution");
  return answer;
}

double quasihyperbolic_distance(const Domain& domain, Point z1, Point z2, double resolution) {
  if (!domain.contains(z1) || !domain.contains(z2))
    throw DomainError("quasihyperbolic distance needs points strictly inside the domain");
  if (z1 == z2) return 0.0;
  return QuasihyperbolicGraph(domain, resolution).distance(z1, z2);
}

std::uint64_t domain_hash(const Domain& domain) {
  std::uint64_t h = fnv1a("pml-domain");
  for (const Point& v : domain.boundary.vertices()) {
    h = fnv1a(std::string_view(reinterpret_cast<const char*>(&v.x), sizeof(double)), h);
    h = fnv1a(std::string_view(reinterpret_cast<const char*>(&v.y), sizeof(double)), h);
  }
  h = fnv1a(std::string_view(reinterpret_cast<const char*>(&domain.basepoint.x), sizeof(double)), h);
  h = fnv1a(std::string_view(reinterpret_cast<const char*>(&domain.basepoint.y), sizeof(double)), h);
  return h;
}

}  // namespace pml
