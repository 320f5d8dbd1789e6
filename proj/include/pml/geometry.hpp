#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace pml {

struct Point {
  double x = 0.0;
  double y = 0.0;

  Point operator+(Point o) const { return {x + o.x, y + o.y}; }
  Point operator-(Point o) const { return {x - o.x, y - o.y}; }
  Point operator*(double s) const { return {x * s, y * s}; }
  Point operator/(double s) const { return {x / s, y / s}; }
  bool operator==(const Point&) const = default;
};

inline double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point a, Point b) { return a.x * b.y - a.y * b.x; }
inline double norm(Point a) { return std::hypot(a.x, a.y); }
inline double dist(Point a, Point b) { return norm(a - b); }
inline bool is_finite(Point p) { return std::isfinite(p.x) && std::isfinite(p.y); }

/// Distance from p to the closed segment [a, b]; `t` receives the projection parameter.
double segment_distance(Point p, Point a, Point b, double* t = nullptr);

struct BoundingBox {
  Point lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  Point hi{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};

  void extend(Point p);
  double width() const { return hi.x - lo.x; }
  double height() const { return hi.y - lo.y; }
};

struct Ball {
  Point center;
  double radius = 0.0;
};

/// Uniform-grid bucket of polyline segments for nearest-segment queries.
class SegmentIndex {
 public:
  SegmentIndex() = default;
  /// Segment i joins pts[i] and pts[(i + 1) % n] when closed.
  SegmentIndex(std::span<const Point> pts, bool closed);

  /// Exact distance to the nearest segment; `segment` receives its index.
  double nearest(Point p, std::size_t* segment = nullptr, double* t = nullptr) const;

  /// Indices of segments whose bounding boxes meet the given box.
  void query_box(const BoundingBox& box, std::vector<std::size_t>& out) const;

 private:
  std::vector<Point> pts_;
  bool closed_ = true;
  BoundingBox box_;
  double cell_ = 1.0;
  int nx_ = 0;
  int ny_ = 0;
  std::vector<std::vector<std::uint32_t>> cells_;

  std::size_t segment_count() const { return closed_ ? pts_.size() : pts_.size() - 1; }
  int cell_x(double x) const;
  int cell_y(double y) const;
};

/// Closed, simple, counterclockwise polygon.
class JordanCurve {
 public:
  JordanCurve() = default;
  /// Validates the invariants; throws GeometryError naming the offending vertex.
  explicit JordanCurve(std::vector<Point> vertices);

  const std::vector<Point>& vertices() const { return v_; }
  std::size_t size() const { return v_.size(); }
  const Point& operator[](std::size_t i) const { return v_[i]; }

  double perimeter() const { return cum_.back(); }
  /// Arclength from vertex 0 to vertex i along the orientation.
  double arclength(std::size_t i) const { return cum_[i]; }
  Point at_arclength(double s) const;
  /// Arclength coordinate of the point on the curve nearest to p.
  double project(Point p) const;

  double diameter() const { return diameter_; }
  double signed_area() const;
  const BoundingBox& bbox() const { return box_; }

  /// Strict interior test (points on the curve are outside).
  bool contains(Point p) const;
  double distance(Point p) const { return index_.nearest(p); }

  const SegmentIndex& index() const { return index_; }

 private:
  std::vector<Point> v_;
  std::vector<double> cum_;
  BoundingBox box_;
  double diameter_ = 0.0;
  SegmentIndex index_;
};

/// Polygonal domain with basepoint z0. The capacitary ring is the domain
/// minus the closed disk of radius inner_radius about the basepoint.
struct Domain {
  JordanCurve boundary;
  Point basepoint;
  double inner_radius = 0.0;

  /// Computes inner_radius = d(basepoint, boundary)/2; the basepoint must lie strictly inside.
  static Domain create(JordanCurve boundary, Point basepoint);

  double distance_to_boundary(Point z) const { return boundary.distance(z); }
  bool contains(Point z) const { return boundary.contains(z); }
  /// True for points of the ring D = Omega minus the closed inner disk.
  bool in_ring(Point z) const { return contains(z) && dist(z, basepoint) > inner_radius; }
};

// ---------------------------------------------------------------------------
// Constructions

/// Outward von Koch prefractal on the equilateral triangle with the given side,
/// 3 * 4^level vertices, first vertex at the origin.
JordanCurve koch_snowflake(int level, double side);
JordanCurve regular_ngon(int n, double radius, Point center = {0.0, 0.0});
/// Vertex average (the centroid for the symmetric constructions used here).
Point vertex_centroid(const JordanCurve& c);

double distance_to_boundary(const Domain& domain, Point z);

/// FNV-1a over the boundary vertices and the basepoint; identifies a domain in artifacts.
std::uint64_t domain_hash(const Domain& domain);

// ---------------------------------------------------------------------------
// Gauge functions

struct Gauge {
  enum class Kind { kPower, kLogLog, kLogLogLog };

  Kind kind = Kind::kPower;
  /// Exponent alpha for power gauges, A for the logarithmic ones.
  double parameter = 1.0;
  double valid_below = std::numeric_limits<double>::infinity();

  static Gauge power(double alpha);
  static Gauge loglog(double a);
  static Gauge logloglog(double a);

  std::string name() const;
};

/// Cutoff imposed on the logarithmic gauges.
inline constexpr double kLogGaugeCutoff = 1e-6;

double gauge_eval(const Gauge& g, double r);
double covering_sum(const Gauge& g, std::span<const Ball> balls);

// ---------------------------------------------------------------------------
// Quasihyperbolic metric

/// Interior grid graph with 8-neighbour connectivity; edge weight is length
/// over the smaller endpoint boundary distance. Path values bound the
/// quasihyperbolic distance from above up to the sub-edge variation of d.
class QuasihyperbolicGraph {
 public:
  QuasihyperbolicGraph(const Domain& domain, double resolution);

  double distance(Point z1, Point z2) const;
  std::size_t node_count() const { return nodes_.size(); }
  double resolution() const { return h_; }

 private:
  Domain domain_;
  double h_;
  Point origin_;
  int nx_ = 0;
  int ny_ = 0;
  std::vector<int> node_of_cell_;
  std::vector<Point> nodes_;
  std::vector<double> dist_;
  std::vector<int> component_;

  void attach(Point z, std::vector<std::pair<int, double>>& out) const;
};

double quasihyperbolic_distance(const Domain& domain, Point z1, Point z2, double resolution);

}  // namespace pml
