#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pml/fem.hpp"
#include "pml/geometry.hpp"

namespace pml {

/// Domain spec file: {"kind": "koch" | "polygon" | "regular_ngon", ...}.
/// koch uses level and side, regular_ngon uses n and radius, polygon uses
/// vertices. Without a basepoint the vertex centroid is used.
struct DomainSpec {
  std::string kind = "koch";
  int level = 3;
  double side = 1.0;
  int n = 0;
  double radius = 1.0;
  std::vector<Point> vertices;
  std::optional<Point> basepoint;

  Domain build() const;
  /// Canonical JSON text; the resolved basepoint and domain hash are included
  /// when `domain` is given.
  std::string to_json(const Domain* domain = nullptr) const;
  static DomainSpec parse(const std::string& text);
};

DomainSpec read_domain_spec(const std::string& path);

/// Field snapshot: a one-line JSON header, then the nodal values as
/// little-endian doubles. The mesh is rebuilt from the domain spec and the
/// mesher settings in the header and must reproduce the recorded hash.
struct FieldSnapshot {
  DomainSpec spec;
  Domain domain;
  double h = 0.0;
  double grading = 1.0;
  PHField field;
  std::uint64_t hash = 0;
};

std::string field_snapshot_bytes(const DomainSpec& spec, const Domain& domain, double h, double grading,
                                 const PHField& field);
FieldSnapshot read_field_snapshot(const std::string& path);

/// Reads the JSON header line of a field or map snapshot.
std::string snapshot_header(const std::string& bytes);

}  // namespace pml
