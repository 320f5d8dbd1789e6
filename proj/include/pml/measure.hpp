#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pml/fem.hpp"
#include "pml/geometry.hpp"

namespace pml {

/// Nonnegative weights on a partition of a boundary path into arcs
/// [s_start, s_end] of arclength.
struct BoundaryMeasure {
  /// Boundary path; closed paths wrap from the last vertex to the first.
  std::vector<Point> path;
  bool closed = true;
  std::vector<double> s_start;
  std::vector<double> s_end;
  std::vector<double> weights;
  double total = 0.0;
  double p = 2.0;
  /// Hash of the field (or synthetic source) that produced the weights.
  std::uint64_t provenance = 0;
  /// domain_hash of the domain the field lives on; 0 when unknown.
  std::uint64_t domain = 0;
  /// Longest boundary mesh edge behind the weights; 0 for synthetic measures.
  double mesh_spacing = 0.0;
  std::size_t clipped = 0;
  double clipped_mass = 0.0;

  /// Geometry caches filled by finalize().
  std::vector<double> cum;
  std::vector<std::vector<Point>> arc_points;
  std::vector<Ball> arc_bounds;

  /// Validates the partition, recomputes total and rebuilds the caches.
  void finalize();

  std::size_t size() const { return weights.size(); }
  double length() const;
  /// Smallest radius the measure can resolve: max(longest arc, mesh spacing).
  double resolution() const;
  Point point_at(double s) const;
  /// Builds arcs of equal arclength with the given weights; recomputes total.
  static BoundaryMeasure uniform_arcs(std::vector<Point> path, bool closed, std::vector<double> weights);
};

BoundaryMeasure extract_boundary_measure(const PHField& field, const Domain& domain, int arc_count);

/// Sum of arc weights prorated by the fraction of each arc's length inside B(w, r).
double ball_mass(const BoundaryMeasure& m, Point w, double r);

struct Lemma23Triple {
  double left = 0.0;
  double mid = 0.0;
  double right = 0.0;
};

/// (r^{p-2} mu(B(w,r/2)), max_{B(w,r)} u^{p-1}, r^{p-2} mu(B(w,2r))).
Lemma23Triple lemma23_check(const PHField& field, const Domain& domain, const BoundaryMeasure& m, Point w, double r);

struct LevelSet {
  double t = 0.0;
  /// Closed chains; the first vertex is not repeated.
  std::vector<std::vector<Point>> polylines;
  /// Triangle carrying the segment from vertex k to vertex k+1 of each chain.
  std::vector<std::vector<int>> triangles;
  double total_length = 0.0;
};

/// Marching triangles on {u = t}; the superlevel set lies to the left of each chain.
LevelSet trace_level_set(const PHField& field, double t);

/// Integral of |grad u|^{p-1} over {u = t} by the segment midpoint rule.
double level_flux(const PHField& field, double t);

struct LevelSetDiagnostic {
  double t = 0.0;
  double flux = 0.0;
  double weighted_flux = 0.0;
  double F_flux = 0.0;
  double c_plus = 0.0;
  double xi = 0.0;
  /// Right-hand sides 2 c+ and 2 c+ log(1/t)^{-2} of the two level-set inequalities.
  double weighted_bound = 0.0;
  double F_bound = 0.0;
};

/// Level-set integrals in the coordinates where z0 = 0 and the inner radius is 1.
LevelSetDiagnostic makarov_diagnostic(const PHField& field, const Domain& domain, double t, double c_plus);

void write_measure_csv(const std::string& path, const BoundaryMeasure& m);
BoundaryMeasure read_measure_csv(const std::string& path);

}  // namespace pml
