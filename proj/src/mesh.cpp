#include "pml/mesh.hpp"

#include <algorithm>
#include <deque>
#include <numbers>
#include <sstream>
#include <unordered_map>

#include "pml/error.hpp"

namespace pml {

double Mesh::area(std::size_t t) const {
  const auto& T = triangles[t];
  return 0.5 * cross(nodes[T[1]] - nodes[T[0]], nodes[T[2]] - nodes[T[0]]);
}

double Mesh::diameter(std::size_t t) const {
  const auto& T = triangles[t];
  return std::max({dist(nodes[T[0]], nodes[T[1]]), dist(nodes[T[1]], nodes[T[2]]),
                   dist(nodes[T[2]], nodes[T[0]])});
}

Point Mesh::centroid(std::size_t t) const {
  const auto& T = triangles[t];
  return (nodes[T[0]] + nodes[T[1]] + nodes[T[2]]) / 3.0;
}

double Mesh::min_angle_degrees() const {
  double best = 180.0;
  for (const auto& T : triangles)
    for (int k = 0; k < 3; ++k) {
      const Point a = nodes[T[k]], b = nodes[T[(k + 1) % 3]], c = nodes[T[(k + 2) % 3]];
      const double ang = std::atan2(std::abs(cross(b - a, c - a)), dot(b - a, c - a));
      best = std::min(best, ang * 180.0 / std::numbers::pi);
    }
  return best;
}

std::uint64_t Mesh::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
  };
  for (const Point& p : nodes) {
    mix(&p.x, sizeof(double));
    mix(&p.y, sizeof(double));
  }
  for (const auto& T : triangles) mix(T.data(), sizeof(int) * 3);
  return h;
}

double mesh_size_target(const Domain& domain, const MeshOptions& opt, Point z) {
  if (opt.grading >= 1.0) return opt.h;
  const double d = domain.distance_to_boundary(z);
  const double rel = std::pow(std::max(d, 0.0) / domain.boundary.diameter(), 1.0 - opt.grading);
  return opt.h * std::clamp(rel, opt.min_size_fraction, 1.0);
}

namespace {

using Real = long double;

Real orient(Point a, Point b, Point c) {
  return (static_cast<Real>(b.x) - a.x) * (static_cast<Real>(c.y) - a.y) -
         (static_cast<Real>(b.y) - a.y) * (static_cast<Real>(c.x) - a.x);
}

// > 0 when d lies inside the circumcircle of the CCW triangle abc.
Real incircle(Point a, Point b, Point c, Point d) {
  const Real adx = static_cast<Real>(a.x) - d.x, ady = static_cast<Real>(a.y) - d.y;
  const Real bdx = static_cast<Real>(b.x) - d.x, bdy = static_cast<Real>(b.y) - d.y;
  const Real cdx = static_cast<Real>(c.x) - d.x, cdy = static_cast<Real>(c.y) - d.y;
  const Real ad = adx * adx + ady * ady, bd = bdx * bdx + bdy * bdy, cd = cdx * cdx + cdy * cdy;
  return adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx);
}

Point circumcenter(Point a, Point b, Point c) {
  const Real bx = static_cast<Real>(b.x) - a.x, by = static_cast<Real>(b.y) - a.y;
  const Real cx = static_cast<Real>(c.x) - a.x, cy = static_cast<Real>(c.y) - a.y;
  const Real d = 2 * (bx * cy - by * cx);
  const Real b2 = bx * bx + by * by, c2 = cx * cx + cy * cy;
  return {static_cast<double>(a.x + (cy * b2 - by * c2) / d),
          static_cast<double>(a.y + (bx * c2 - cx * b2) / d)};
}

std::uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
}

struct Tri {
  std::array<int, 3> v{};
  std::array<int, 3> n{-1, -1, -1};  // n[i] is across the edge opposite v[i]
  bool alive = true;
};

enum class SegKind { kOuter, kInner };

struct Seg {
  int a = 0, b = 0;
  SegKind kind = SegKind::kOuter;
  double ca = 0.0, cb = 0.0;  // arclength (outer) or angle (inner) of the endpoints, cb > ca
};

enum class VKind : std::uint8_t { kSuper, kInterior, kInner, kOuter };

class Refiner {
 public:
  Refiner(const Domain& domain, const MeshOptions& opt) : dom_(domain), opt_(opt) {}

  Mesh run();

 private:
  const Domain& dom_;
  MeshOptions opt_;
  std::vector<Point> pts_;
  std::vector<VKind> kind_;
  std::vector<double> coord_;
  std::vector<Tri> tris_;
  std::vector<int> vtri_;
  std::vector<std::uint32_t> mark_;
  std::uint32_t stamp_ = 0;
  std::unordered_map<std::uint64_t, Seg> segs_;
  std::deque<std::uint64_t> segq_;
  std::deque<int> triq_;
  std::vector<int> cav_;
  double quality_ratio_ = 0.0;

  int locate(Point p, int start) const;
  void build_cavity(Point p, int t0);
  int insert(Point p, VKind kind, double coord, int start);
  bool find_edge(int a, int b, int* t_left, int* t_right) const;
  bool encroached(const Seg& s) const;
  void split(const Seg& s);
  bool in_region(int t) const;
  bool is_bad(int t) const;
  void add_segment(int a, int b, SegKind kind, double ca, double cb);
  Mesh extract() const;
};

int Refiner::locate(Point p, int start) const {
  int t = start;
  std::size_t steps = 0;
  while (true) {
    const Tri& T = tris_[t];
    bool moved = false;
    for (int k = 0; k < 3; ++k) {
      const int i = static_cast<int>((k + steps) % 3);
      const Point a = pts_[T.v[(i + 1) % 3]], b = pts_[T.v[(i + 2) % 3]];
      if (orient(a, b, p) < 0) {
        t = T.n[i];
        if (t < 0) return -1;
        moved = true;
        break;
      }
    }
    if (!moved) return t;
    if (++steps > 4 * tris_.size() + 100) throw InternalError("point location walk did not terminate");
  }
}

void Refiner::build_cavity(Point p, int t0) {
  if (mark_.size() < tris_.size()) mark_.resize(tris_.size() + tris_.size() / 2 + 16, 0);
  ++stamp_;
  cav_.clear();
  std::vector<int> stack{t0};
  mark_[t0] = stamp_;
  while (!stack.empty()) {
    const int t = stack.back();
    stack.pop_back();
    cav_.push_back(t);
    const Tri& T = tris_[t];
    for (int i = 0; i < 3; ++i) {
      const int nb = T.n[i];
      if (nb < 0 || mark_[nb] == stamp_) continue;
      const Tri& N = tris_[nb];
      bool take = incircle(pts_[N.v[0]], pts_[N.v[1]], pts_[N.v[2]], p) > 0;
      // p on an edge of the containing triangle: the neighbour must go too.
      if (!take && t == t0 && orient(pts_[T.v[(i + 1) % 3]], pts_[T.v[(i + 2) % 3]], p) <= 0) take = true;
      if (take) {
        mark_[nb] = stamp_;
        stack.push_back(nb);
      }
    }
  }
  // Keep the cavity star-shaped with respect to p.
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t k = 0; k < cav_.size() && !changed; ++k) {
      const int t = cav_[k];
      if (t == t0) continue;
      const Tri& T = tris_[t];
      for (int i = 0; i < 3; ++i) {
        const int nb = T.n[i];
        if (nb >= 0 && mark_[nb] == stamp_) continue;
        if (orient(pts_[T.v[(i + 1) % 3]], pts_[T.v[(i + 2) % 3]], p) <= 0) {
          mark_[t] = 0;
          cav_.erase(cav_.begin() + static_cast<std::ptrdiff_t>(k));
          changed = true;
          break;
        }
      }
    }
  }
}

int Refiner::insert(Point p, VKind kind, double coord, int start) {
  const int t0 = locate(p, start);
  if (t0 < 0) throw InternalError("point outside the working triangulation");
  build_cavity(p, t0);

  // Segments inside the cavity are destroyed; those on its rim need an encroachment check.
  for (int t : cav_) {
    const Tri& T = tris_[t];
    for (int i = 0; i < 3; ++i) {
      const std::uint64_t key = edge_key(T.v[(i + 1) % 3], T.v[(i + 2) % 3]);
      if (segs_.count(key)) segq_.push_back(key);
    }
  }

  const int vid = static_cast<int>(pts_.size());
  pts_.push_back(p);
  kind_.push_back(kind);
  coord_.push_back(coord);
  vtri_.push_back(-1);

  struct Rim {
    int a, b, outer;
  };
  std::vector<Rim> rim;
  for (int t : cav_) {
    const Tri& T = tris_[t];
    for (int i = 0; i < 3; ++i) {
      const int nb = T.n[i];
      if (nb >= 0 && mark_[nb] == stamp_) continue;
      rim.push_back({T.v[(i + 1) % 3], T.v[(i + 2) % 3], nb});
    }
  }
  for (int t : cav_) tris_[t].alive = false;

  std::unordered_map<int, int> starts, ends;
  std::vector<int> created;
  created.reserve(rim.size());
  for (const Rim& r : rim) {
    Tri T;
    T.v = {r.a, r.b, vid};
    T.n[2] = r.outer;
    const int id = static_cast<int>(tris_.size());
    tris_.push_back(T);
    created.push_back(id);
    if (r.outer >= 0) {
      Tri& O = tris_[r.outer];
      for (int j = 0; j < 3; ++j)
        if (O.v[(j + 1) % 3] == r.b && O.v[(j + 2) % 3] == r.a) O.n[j] = id;
    }
    starts[r.a] = id;
    ends[r.b] = id;
  }
  for (int id : created) {
    Tri& T = tris_[id];
    T.n[0] = starts.at(T.v[1]);
    T.n[1] = ends.at(T.v[0]);
    vtri_[T.v[0]] = id;
    vtri_[T.v[1]] = id;
    vtri_[vid] = id;
    triq_.push_back(id);
  }
  return vid;
}

bool Refiner::find_edge(int a, int b, int* t_left, int* t_right) const {
  const int start = vtri_[a];
  if (start < 0) return false;
  int t = start;
  bool found = false;
  for (std::size_t guard = 0; guard < 4096; ++guard) {
    const Tri& T = tris_[t];
    int i = 0;
    while (T.v[i] != a) ++i;
    const int b1 = T.v[(i + 1) % 3], b2 = T.v[(i + 2) % 3];
    if (b1 == b) {
      if (t_left) *t_left = t;
      if (t_right) *t_right = T.n[(i + 2) % 3];
      found = true;
      break;
    }
    if (b2 == b) {
      if (t_right) *t_right = t;
      if (t_left) *t_left = T.n[(i + 1) % 3];
      found = true;
      break;
    }
    t = T.n[(i + 1) % 3];  // across edge (a, b2)
    if (t < 0 || t == start) break;
  }
  return found;
}

bool Refiner::encroached(const Seg& s) const {
  int tl = -1, tr = -1;
  if (!find_edge(s.a, s.b, &tl, &tr)) return true;
  const Point pa = pts_[s.a], pb = pts_[s.b];
  for (int t : {tl, tr}) {
    if (t < 0) continue;
    const Tri& T = tris_[t];
    for (int v : T.v) {
      if (v == s.a || v == s.b || kind_[v] == VKind::kSuper) continue;
      if (dot(pa - pts_[v], pb - pts_[v]) < 0.0) return true;
    }
  }
  return false;
}

void Refiner::add_segment(int a, int b, SegKind kind, double ca, double cb) {
  const std::uint64_t key = edge_key(a, b);
  segs_[key] = Seg{a, b, kind, ca, cb};
  segq_.push_back(key);
}

void Refiner::split(const Seg& s) {
  segs_.erase(edge_key(s.a, s.b));
  const double cm = 0.5 * (s.ca + s.cb);
  Point m;
  VKind kind;
  double coord = cm;
  if (s.kind == SegKind::kOuter) {
    m = (pts_[s.a] + pts_[s.b]) * 0.5;
    kind = VKind::kOuter;
    if (coord >= dom_.boundary.perimeter()) coord -= dom_.boundary.perimeter();
  } else {
    m = dom_.basepoint + Point{dom_.inner_radius * std::cos(cm), dom_.inner_radius * std::sin(cm)};
    kind = VKind::kInner;
  }
  const int vm = insert(m, kind, coord, vtri_[s.a]);
  add_segment(s.a, vm, s.kind, s.ca, cm);
  add_segment(vm, s.b, s.kind, cm, s.cb);
}

bool Refiner::in_region(int t) const {
  const Tri& T = tris_[t];
  int inner = 0, outer = 0;
  for (int v : T.v) {
    if (kind_[v] == VKind::kSuper) return false;
    inner += kind_[v] == VKind::kInner;
    outer += kind_[v] == VKind::kOuter;
  }
  if (inner == 3) return false;
  if (outer == 3) {
    const Point c = (pts_[T.v[0]] + pts_[T.v[1]] + pts_[T.v[2]]) / 3.0;
    return dom_.contains(c);
  }
  return true;
}

bool Refiner::is_bad(int t) const {
  const Tri& T = tris_[t];
  const Point a = pts_[T.v[0]], b = pts_[T.v[1]], c = pts_[T.v[2]];
  const double la = dist(b, c), lb = dist(c, a), lc = dist(a, b);
  const double area2 = std::abs(cross(b - a, c - a));
  if (area2 <= 0.0) return true;
  const double R = la * lb * lc / (2.0 * area2);
  const double shortest = std::min({la, lb, lc});
  if (R / shortest > quality_ratio_) return true;
  const double target = mesh_size_target(dom_, opt_, (a + b + c) / 3.0);
  return R > target / std::sqrt(3.0);
}

Mesh Refiner::run() {
  const JordanCurve& curve = dom_.boundary;
  quality_ratio_ = 1.0 / (2.0 * std::sin(opt_.min_angle_degrees * std::numbers::pi / 180.0));

  // Super triangle.
  const BoundingBox& bb = curve.bbox();
  const Point mid = (bb.lo + bb.hi) * 0.5;
  const double span = 20.0 * std::max(bb.width(), bb.height());
  for (Point p : {mid + Point{-span, -span}, mid + Point{span, -span}, mid + Point{0.0, span}}) {
    pts_.push_back(p);
    kind_.push_back(VKind::kSuper);
    coord_.push_back(0.0);
    vtri_.push_back(0);
  }
  tris_.push_back(Tri{{0, 1, 2}, {-1, -1, -1}, true});

  // Outer boundary, densified to the boundary size target.
  const double P = curve.perimeter();
  std::vector<int> outer_ids;
  std::vector<double> outer_s;
  int last = 0;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    const Point a = curve[i], b = curve[(i + 1) % curve.size()];
    const double len = dist(a, b);
    const double target = mesh_size_target(dom_, opt_, a);
    const int pieces = std::max(1, static_cast<int>(std::ceil(len / target)));
    for (int k = 0; k < pieces; ++k) {
      const double t = static_cast<double>(k) / pieces;
      const Point p = a + (b - a) * t;
      const double s = curve.arclength(i) + t * len;
      const int id = insert(p, VKind::kOuter, s, vtri_[last] >= 0 ? vtri_[last] : 0);
      outer_ids.push_back(id);
      outer_s.push_back(s);
      last = id;
    }
  }
  // Inner circle.
  const double r = dom_.inner_radius;
  const double circle_target =
      mesh_size_target(dom_, opt_, dom_.basepoint + Point{r, 0.0});
  const int nc = std::max(16, static_cast<int>(std::ceil(2.0 * std::numbers::pi * r / circle_target)));
  std::vector<int> inner_ids;
  for (int k = 0; k < nc; ++k) {
    const double th = 2.0 * std::numbers::pi * k / nc;
    const Point p = dom_.basepoint + Point{r * std::cos(th), r * std::sin(th)};
    const int id = insert(p, VKind::kInner, th, vtri_[last]);
    inner_ids.push_back(id);
    last = id;
  }
  segq_.clear();
  triq_.clear();
  for (std::size_t k = 0; k < outer_ids.size(); ++k) {
    const std::size_t k1 = (k + 1) % outer_ids.size();
    add_segment(outer_ids[k], outer_ids[k1], SegKind::kOuter, outer_s[k], k1 == 0 ? P : outer_s[k1]);
  }
  for (int k = 0; k < nc; ++k) {
    const int k1 = (k + 1) % nc;
    add_segment(inner_ids[k], inner_ids[k1], SegKind::kInner, 2.0 * std::numbers::pi * k / nc,
                2.0 * std::numbers::pi * (k + 1) / nc);
  }
  for (std::size_t t = 0; t < tris_.size(); ++t)
    if (tris_[t].alive) triq_.push_back(static_cast<int>(t));

  std::vector<std::uint64_t> hits;
  while (true) {
    if (pts_.size() > opt_.max_nodes) throw GeometryError("mesh refinement exceeded the node budget");
    if (!segq_.empty()) {
      const std::uint64_t key = segq_.front();
      segq_.pop_front();
      auto it = segs_.find(key);
      if (it == segs_.end()) continue;
      if (encroached(it->second)) split(Seg(it->second));
      continue;
    }
    if (triq_.empty()) break;
    const int t = triq_.front();
    triq_.pop_front();
    if (!tris_[t].alive || !in_region(t) || !is_bad(t)) continue;
    const Tri& T = tris_[t];
    const Point c = circumcenter(pts_[T.v[0]], pts_[T.v[1]], pts_[T.v[2]]);
    const int tc = locate(c, t);
    if (tc < 0) continue;
    build_cavity(c, tc);
    hits.clear();
    for (int ct : cav_) {
      const Tri& C = tris_[ct];
      for (int i = 0; i < 3; ++i) {
        const int a = C.v[(i + 1) % 3], b = C.v[(i + 2) % 3];
        auto it = segs_.find(edge_key(a, b));
        if (it != segs_.end() && dot(pts_[a] - c, pts_[b] - c) < 0.0) hits.push_back(it->first);
      }
    }
    if (!hits.empty()) {
      std::sort(hits.begin(), hits.end());
      hits.erase(std::unique(hits.begin(), hits.end()), hits.end());
      for (std::uint64_t key : hits) {
        auto it = segs_.find(key);
        if (it != segs_.end()) split(Seg(it->second));
      }
      triq_.push_back(t);
      continue;
    }
    if (!dom_.in_ring(c)) continue;
    insert(c, VKind::kInterior, 0.0, tc);
  }

  for (const auto& [key, s] : segs_)
    if (!find_edge(s.a, s.b, nullptr, nullptr)) {
      std::ostringstream os;
      os << "boundary segment near (" << pts_[s.a].x << ", " << pts_[s.a].y << ") not recovered";
      throw GeometryError(os.str());
    }
  return extract();
}

Mesh Refiner::extract() const {
  Mesh m;
  std::vector<int> remap(pts_.size(), -1);
  for (std::size_t t = 0; t < tris_.size(); ++t) {
    if (!tris_[t].alive || !in_region(static_cast<int>(t))) continue;
    std::array<int, 3> T{};
    for (int k = 0; k < 3; ++k) {
      const int v = tris_[t].v[k];
      if (remap[v] < 0) remap[v] = 0;
      T[k] = v;
    }
    m.triangles.push_back(T);
  }
  // Number nodes in insertion order for reproducibility.
  int next = 0;
  for (std::size_t v = 0; v < pts_.size(); ++v) {
    if (remap[v] < 0) continue;
    remap[v] = next++;
    m.nodes.push_back(pts_[v]);
    m.tags.push_back(kind_[v] == VKind::kOuter   ? NodeTag::kOuterBoundary
                     : kind_[v] == VKind::kInner ? NodeTag::kInnerCircle
                                                 : NodeTag::kInterior);
  }
  for (auto& T : m.triangles)
    for (int& v : T) v = remap[v];
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    if (!(m.area(t) > 0.0)) throw GeometryError("degenerate triangle in ring mesh");
    m.h_max = std::max(m.h_max, m.diameter(t));
  }
  std::vector<std::pair<double, int>> loop;
  for (std::size_t v = 0; v < pts_.size(); ++v)
    if (remap[v] >= 0 && kind_[v] == VKind::kOuter) loop.emplace_back(coord_[v], remap[v]);
  std::sort(loop.begin(), loop.end());
  for (auto [s, id] : loop) {
    m.outer_loop.push_back(id);
    m.outer_arclength.push_back(s);
  }
  const double angle = m.min_angle_degrees();
  if (angle < 20.0) {
    std::ostringstream os;
    os << "ring mesh minimum angle " << angle << " degrees is below 20";
    throw GeometryError(os.str());
  }
  return m;
}

}  // namespace

Mesh build_ring_mesh(const Domain& domain, const MeshOptions& options) {
  if (!(options.h > 0.0) || !(options.h < domain.inner_radius / 4.0)) {
    std::ostringstream os;
    os << "mesh size h = " << options.h << " must satisfy 0 < h < inner_radius/4 = " << domain.inner_radius / 4.0;
    throw PreconditionError(os.str());
  }
  if (!(options.grading >= 0.5 && options.grading <= 1.0))
    throw PreconditionError("mesh grading must lie in [0.5, 1]");
  return Refiner(domain, options).run();
}

Mesh build_ring_mesh(const Domain& domain, double h, double grading) {
  MeshOptions opt;
  opt.h = h;
  opt.grading = grading;
  return build_ring_mesh(domain, opt);
}

}  // namespace pml
