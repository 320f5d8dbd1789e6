#include <cmath>
#include <map>

#include "doctest.h"
#include "pml/error.hpp"
#include "pml/mesh.hpp"

using namespace pml;

namespace {

void check_invariants(const Domain& dom, const Mesh& m) {
  REQUIRE(m.triangle_count() > 0);
  CHECK(m.min_angle_degrees() >= 20.0);
  for (std::size_t t = 0; t < m.triangle_count(); ++t) CHECK(m.area(t) > 0.0);
  // Conformity: each interior edge shared by exactly two triangles with opposite orientation.
  std::map<std::pair<int, int>, int> edges;
  for (const auto& T : m.triangles)
    for (int k = 0; k < 3; ++k) ++edges[{T[k], T[(k + 1) % 3]}];
  std::size_t boundary_edges = 0;
  for (const auto& [e, c] : edges) {
    CHECK(c == 1);
    if (!edges.count({e.second, e.first})) {
      ++boundary_edges;
      CHECK(m.tags[e.first] != NodeTag::kInterior);
      CHECK(m.tags[e.second] != NodeTag::kInterior);
    }
  }
  CHECK(boundary_edges == m.outer_loop.size() + std::count(m.tags.begin(), m.tags.end(), NodeTag::kInnerCircle));
  double area = 0.0;
  for (std::size_t t = 0; t < m.triangle_count(); ++t) area += m.area(t);
  for (std::size_t i = 0; i < m.node_count(); ++i) {
    if (m.tags[i] == NodeTag::kOuterBoundary) CHECK(dom.distance_to_boundary(m.nodes[i]) <= 1e-12);
    if (m.tags[i] == NodeTag::kInnerCircle)
      CHECK(std::abs(dist(m.nodes[i], dom.basepoint) - dom.inner_radius) <= m.h_max * m.h_max);
  }
  for (std::size_t k = 1; k < m.outer_arclength.size(); ++k) CHECK(m.outer_arclength[k] > m.outer_arclength[k - 1]);
}

}  // namespace

TEST_CASE("ring mesh of a disk") {
  const Domain disk = Domain::create(regular_ngon(256, 1.0), {0, 0});
  const Mesh m = build_ring_mesh(disk, 0.05);
  check_invariants(disk, m);
  double area = 0.0;
  for (std::size_t t = 0; t < m.triangle_count(); ++t) area += m.area(t);
  const double exact = std::abs(disk.boundary.signed_area()) - std::numbers::pi * disk.inner_radius * disk.inner_radius;
  CHECK(area == doctest::Approx(exact).epsilon(0.01));
  CHECK(m.h_max < 0.1);
  CHECK(m.hash() == build_ring_mesh(disk, 0.05).hash());
}

TEST_CASE("graded ring mesh") {
  const Domain disk = Domain::create(regular_ngon(256, 1.0), {0, 0});
  const Mesh m = build_ring_mesh(disk, 0.05, 0.5);
  check_invariants(disk, m);
  double boundary_diam = 0.0, interior_diam = 0.0;
  int nb = 0, ni = 0;
  for (std::size_t t = 0; t < m.triangle_count(); ++t) {
    const double d = disk.distance_to_boundary(m.centroid(t));
    if (d < 0.01) {
      boundary_diam += m.diameter(t);
      ++nb;
    } else if (d > 0.3) {
      interior_diam += m.diameter(t);
      ++ni;
    }
  }
  REQUIRE(nb > 0);
  REQUIRE(ni > 0);
  CHECK(interior_diam / ni >= 4.0 * boundary_diam / nb);
}

TEST_CASE("ring mesh preconditions") {
  const Domain disk = Domain::create(regular_ngon(64, 1.0), {0, 0});
  CHECK_THROWS_AS(build_ring_mesh(disk, disk.inner_radius), PreconditionError);
  CHECK_THROWS_AS(build_ring_mesh(disk, 0.05, 0.2), PreconditionError);
}

TEST_CASE("ring mesh of a snowflake") {
  const JordanCurve k = koch_snowflake(3, 1.0);
  const Domain dom = Domain::create(k, vertex_centroid(k));
  const Mesh m = build_ring_mesh(dom, 0.02);
  check_invariants(dom, m);
  CHECK(m.outer_loop.size() >= k.size());
}
