#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "pml/geometry.hpp"

namespace pml {

enum class NodeTag : std::uint8_t { kInterior = 0, kInnerCircle = 1, kOuterBoundary = 2 };

/// Conforming triangulation of the capacitary ring. Triangles are CCW.
struct Mesh {
  std::vector<Point> nodes;
  std::vector<std::array<int, 3>> triangles;
  std::vector<NodeTag> tags;
  /// Longest edge.
  double h_max = 0.0;
  /// Outer boundary nodes in CCW order and their arclength coordinates on the domain curve.
  std::vector<int> outer_loop;
  std::vector<double> outer_arclength;

  std::size_t node_count() const { return nodes.size(); }
  std::size_t triangle_count() const { return triangles.size(); }

  double area(std::size_t t) const;
  double diameter(std::size_t t) const;
  Point centroid(std::size_t t) const;
  double min_angle_degrees() const;
  /// FNV-1a over node coordinates and connectivity.
  std::uint64_t hash() const;
};

struct MeshOptions {
  double h = 0.05;
  /// 1 gives uniform size h; smaller values grade towards the outer boundary.
  double grading = 1.0;
  /// Quality target for Delaunay refinement.
  double min_angle_degrees = 25.0;
  /// Size floor as a fraction of h when grading.
  double min_size_fraction = 1.0 / 16.0;
  std::size_t max_nodes = 4'000'000;
};

/// Triangulates D = Omega minus the closed inner disk. Throws
/// PreconditionError for h >= inner_radius/4 or grading outside [0.5, 1] and
/// GeometryError when refinement cannot meet the quality contract.
Mesh build_ring_mesh(const Domain& domain, double h, double grading = 1.0);
Mesh build_ring_mesh(const Domain& domain, const MeshOptions& options);

/// Target edge length used by the mesher at z.
double mesh_size_target(const Domain& domain, const MeshOptions& options, Point z);

}  // namespace pml
