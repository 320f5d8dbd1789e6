#include "pml/artifacts.hpp"

#include <bit>
#include <cstring>
#include <memory>

#include "json.hpp"
#include "pml/error.hpp"
#include "pml/io.hpp"
#include "pml/mesh.hpp"

namespace pml {

using nlohmann::ordered_json;

namespace {

static_assert(std::endian::native == std::endian::little, "snapshots are written in native little-endian order");

ordered_json point_json(Point p) { return ordered_json::array({p.x, p.y}); }

Point json_point(const nlohmann::json& j, const char* what) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw PreconditionError(std::string(what) + " must be [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace

Domain DomainSpec::build() const {
  JordanCurve curve;
  if (kind == "koch") {
    curve = koch_snowflake(level, side);
  } else if (kind == "regular_ngon") {
    if (n < 3) throw PreconditionError("regular_ngon needs n >= 3");
    if (!(radius > 0.0)) throw PreconditionError("regular_ngon needs radius > 0");
    curve = regular_ngon(n, radius);
  } else if (kind == "polygon") {
    curve = JordanCurve(vertices);
  } else {
    throw PreconditionError("unknown domain kind '" + kind + "'");
  }
  const Point z0 = basepoint ? *basepoint : vertex_centroid(curve);
  return Domain::create(std::move(curve), z0);
}

std::string DomainSpec::to_json(const Domain* domain) const {
  ordered_json j;
  j["kind"] = kind;
  if (kind == "koch") {
    j["level"] = level;
    j["side"] = side;
  } else if (kind == "regular_ngon") {
    j["n"] = n;
    j["radius"] = radius;
  } else {
    ordered_json v = ordered_json::array();
    for (Point p : vertices) v.push_back(point_json(p));
    j["vertices"] = v;
  }
  if (domain) {
    j["basepoint"] = point_json(domain->basepoint);
    j["domain_hash"] = hex64(domain_hash(*domain));
  } else if (basepoint) {
    j["basepoint"] = point_json(*basepoint);
  }
  return j.dump(1) + "\n";
}

DomainSpec DomainSpec::parse(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw PreconditionError(std::string("domain spec is not JSON: ") + e.what());
  }
  if (!j.is_object()) throw PreconditionError("domain spec must be a JSON object");
  DomainSpec s;
  try {
    s.kind = j.value("kind", std::string("koch"));
    s.level = j.value("level", 3);
    s.side = j.value("side", 1.0);
    s.n = j.value("n", 0);
    s.radius = j.value("radius", 1.0);
  } catch (const nlohmann::json::exception& e) {
    throw PreconditionError(std::string("domain spec: ") + e.what());
  }
  if (j.contains("vertices")) {
    if (!j["vertices"].is_array()) throw PreconditionError("vertices must be a list of [x, y]");
    for (const auto& v : j["vertices"]) s.vertices.push_back(json_point(v, "vertex"));
  }
  if (j.contains("basepoint")) s.basepoint = json_point(j["basepoint"], "basepoint");
  return s;
}

DomainSpec read_domain_spec(const std::string& path) { return DomainSpec::parse(read_file(path)); }

std::string snapshot_header(const std::string& bytes) {
  const auto nl = bytes.find('\n');
  if (nl == std::string::npos) throw PreconditionError("snapshot has no header line");
  return bytes.substr(0, nl);
}

std::string field_snapshot_bytes(const DomainSpec& spec, const Domain& domain, double h, double grading,
                                 const PHField& field) {
  ordered_json j;
  j["format"] = "pml-field";
  j["p"] = field.p;
  j["epsilon"] = field.epsilon;
  j["residual"] = field.residual;
  j["h"] = h;
  j["grading"] = grading;
  j["nodes"] = field.u.size();
  j["mesh_hash"] = hex64(field.m().hash());
  j["field_hash"] = hex64(field_hash(field));
  j["domain_hash"] = hex64(domain_hash(domain));
  j["domain"] = nlohmann::ordered_json::parse(spec.to_json(&domain));
  std::string out = j.dump() + "\n";
  const std::size_t at = out.size();
  out.resize(at + field.u.size() * sizeof(double));
  std::memcpy(out.data() + at, field.u.data(), field.u.size() * sizeof(double));
  return out;
}

FieldSnapshot read_field_snapshot(const std::string& path) {
  const std::string bytes = read_file(path);
  const std::string header = snapshot_header(bytes);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw PreconditionError("field snapshot " + path + ": bad header: " + e.what());
  }
  if (j.value("format", "") != "pml-field") throw PreconditionError(path + " is not a field snapshot");
  FieldSnapshot snap;
  snap.spec = DomainSpec::parse(j.at("domain").dump());
  snap.domain = snap.spec.build();
  snap.h = j.at("h").get<double>();
  snap.grading = j.at("grading").get<double>();
  const std::size_t n = j.at("nodes").get<std::size_t>();
  if (bytes.size() != header.size() + 1 + n * sizeof(double))
    throw PreconditionError("field snapshot " + path + " is truncated");
  std::vector<double> u(n);
  std::memcpy(u.data(), bytes.data() + header.size() + 1, n * sizeof(double));
  auto mesh = std::make_shared<const Mesh>(build_ring_mesh(snap.domain, snap.h, snap.grading));
  if (hex64(mesh->hash()) != j.at("mesh_hash").get<std::string>())
    throw PreconditionError("field snapshot " + path + ": rebuilt mesh does not match the recorded mesh hash");
  snap.field = field_from_values(std::move(mesh), j.at("p").get<double>(), j.at("epsilon").get<double>(),
                                 j.at("residual").get<double>(), std::move(u));
  snap.hash = field_hash(snap.field);
  if (hex64(snap.hash) != j.at("field_hash").get<std::string>())
    throw PreconditionError("field snapshot " + path + ": field hash mismatch");
  return snap;
}

}  // namespace pml
