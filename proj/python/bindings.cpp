#include <pybind11/complex.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>

#include "json.hpp"
#include "pml/artifacts.hpp"
#include "pml/conformal.hpp"
#include "pml/dimension.hpp"
#include "pml/error.hpp"
#include "pml/fem.hpp"
#include "pml/io.hpp"
#include "pml/measure.hpp"
#include "pml/mesh.hpp"
#include "pml/parallel.hpp"
#ifdef PML_WITH_CLI
#include "cli.hpp"
#endif

namespace py = pybind11;
using namespace pml;

namespace {

struct PyDomain {
  DomainSpec spec;
  Domain domain;
};

struct PyField {
  DomainSpec spec;
  Domain domain;
  double h = 0.0;
  double grading = 1.0;
  std::shared_ptr<const PHField> field;
};

PyDomain make_domain(DomainSpec s, std::optional<std::pair<double, double>> basepoint) {
  if (basepoint) s.basepoint = Point{basepoint->first, basepoint->second};
  PyDomain d{s, s.build()};
  return d;
}

py::array_t<double> points_array(const std::vector<Point>& pts) {
  py::array_t<double> a({static_cast<py::ssize_t>(pts.size()), py::ssize_t{2}});
  auto r = a.mutable_unchecked<2>();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    r(i, 0) = pts[i].x;
    r(i, 1) = pts[i].y;
  }
  return a;
}

py::array_t<double> vector_array(const std::vector<double>& v) { return py::array_t<double>(v.size(), v.data()); }

py::object json_to_py(const std::string& text) { return py::module_::import("json").attr("loads")(text); }

Point to_pt(std::pair<double, double> p) { return {p.first, p.second}; }

py::dict cigar_dict(const CigarPath& p) {
  py::dict d;
  d["levels"] = p.levels();
  d["delta_star"] = p.delta_star;
  d["delta_star_used"] = p.delta_star_used;
  d["anchors"] = p.anchors;
  d["distances"] = p.distances;
  d["decay"] = p.decay;
  d["level_integrals"] = p.level_integrals;
  d["cigar_constant"] = p.cigar_constant;
  d["truncated"] = p.truncated;
  d["image"] = p.image;
  d["w0"] = p.w0;
  return d;
}

}  // namespace

PYBIND11_MODULE(_pml, m) {
  m.doc() = "p-harmonic measure, boundary dimension and conformal diagnostics";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<DomainError>(m, "DomainError", base);
  py::register_exception<PreconditionError>(m, "PreconditionError", base);
  py::register_exception<ResourceError>(m, "ResourceError", base);
  py::register_exception<GeometryError>(m, "GeometryError", base);
  py::register_exception<SolverError>(m, "SolverError", base);
  py::register_exception<ResolutionError>(m, "ResolutionError", base);
  py::register_exception<InternalError>(m, "InternalError", base);

  m.def("set_threads", &set_thread_count, py::arg("n"));
  m.def("threads", &thread_count);

  py::class_<PyDomain>(m, "Domain")
      .def_static(
          "koch",
          [](int level, double side, std::optional<std::pair<double, double>> basepoint) {
            DomainSpec s;
            s.kind = "koch";
            s.level = level;
            s.side = side;
            return make_domain(s, basepoint);
          },
          py::arg("level") = 3, py::arg("side") = 1.0, py::arg("basepoint") = py::none())
      .def_static(
          "regular_ngon",
          [](int n, double radius, std::optional<std::pair<double, double>> basepoint) {
            DomainSpec s;
            s.kind = "regular_ngon";
            s.n = n;
            s.radius = radius;
            return make_domain(s, basepoint);
          },
          py::arg("n"), py::arg("radius") = 1.0, py::arg("basepoint") = py::none())
      .def_static(
          "polygon",
          [](const std::vector<std::pair<double, double>>& vertices, std::optional<std::pair<double, double>> basepoint) {
            DomainSpec s;
            s.kind = "polygon";
            for (auto v : vertices) s.vertices.push_back(to_pt(v));
            return make_domain(s, basepoint);
          },
          py::arg("vertices"), py::arg("basepoint") = py::none())
      .def_static("load", [](const std::string& path) { return make_domain(read_domain_spec(path), std::nullopt); })
      .def("save", [](const PyDomain& d, const std::string& path) { atomic_write(path, d.spec.to_json(&d.domain)); })
      .def("to_json", [](const PyDomain& d) { return d.spec.to_json(&d.domain); })
      .def_property_readonly("basepoint", [](const PyDomain& d) { return std::make_pair(d.domain.basepoint.x, d.domain.basepoint.y); })
      .def_property_readonly("inner_radius", [](const PyDomain& d) { return d.domain.inner_radius; })
      .def_property_readonly("diameter", [](const PyDomain& d) { return d.domain.boundary.diameter(); })
      .def_property_readonly("perimeter", [](const PyDomain& d) { return d.domain.boundary.perimeter(); })
      .def_property_readonly("vertices", [](const PyDomain& d) { return points_array(d.domain.boundary.vertices()); })
      .def_property_readonly("hash", [](const PyDomain& d) { return hex64(domain_hash(d.domain)); })
      .def("distance_to_boundary", [](const PyDomain& d, std::pair<double, double> z) { return d.domain.distance_to_boundary(to_pt(z)); })
      .def("contains", [](const PyDomain& d, std::pair<double, double> z) { return d.domain.contains(to_pt(z)); })
      .def("in_ring", [](const PyDomain& d, std::pair<double, double> z) { return d.domain.in_ring(to_pt(z)); })
      .def("quasihyperbolic_distance",
           [](const PyDomain& d, std::pair<double, double> a, std::pair<double, double> b, double resolution) {
             return quasihyperbolic_distance(d.domain, to_pt(a), to_pt(b), resolution);
           },
           py::arg("z1"), py::arg("z2"), py::arg("resolution"));

  py::class_<PyField>(m, "Field")
      .def_static(
          "solve",
          [](const PyDomain& d, double p, double h, double grading, double epsilon) {
            py::gil_scoped_release release;
            auto mesh = std::make_shared<const Mesh>(build_ring_mesh(d.domain, h, grading));
            SolverConfig cfg;
            cfg.epsilon = epsilon;
            auto f = std::make_shared<const PHField>(solve_p_capacitary(mesh, p, cfg));
            return PyField{d.spec, d.domain, h, grading, f};
          },
          py::arg("domain"), py::arg("p") = 2.0, py::arg("h") = 0.02, py::arg("grading") = 0.5,
          py::arg("epsilon") = 1e-8)
      .def_static("load",
                  [](const std::string& path) {
                    FieldSnapshot s = read_field_snapshot(path);
                    return PyField{s.spec, s.domain, s.h, s.grading, std::make_shared<const PHField>(std::move(s.field))};
                  })
      .def("save",
           [](const PyField& f, const std::string& path) {
             atomic_write(path, field_snapshot_bytes(f.spec, f.domain, f.h, f.grading, *f.field));
           })
      .def_property_readonly("p", [](const PyField& f) { return f.field->p; })
      .def_property_readonly("domain", [](const PyField& f) { return PyDomain{f.spec, f.domain}; })
      .def_property_readonly("residual", [](const PyField& f) { return f.field->residual; })
      .def_property_readonly("newton_iterations", [](const PyField& f) { return f.field->newton_iterations; })
      .def_property_readonly("u", [](const PyField& f) { return vector_array(f.field->u); })
      .def_property_readonly("nodes", [](const PyField& f) { return points_array(f.field->m().nodes); })
      .def_property_readonly("hash", [](const PyField& f) { return hex64(field_hash(*f.field)); })
      .def(
          "evaluate",
          [](const PyField& f, std::pair<double, double> z) {
            const FieldSample s = evaluate(*f.field, to_pt(z));
            return py::make_tuple(s.value, py::make_tuple(s.gradient.x, s.gradient.y));
          },
          py::arg("z"), "Value and gradient at z.")
      .def(
          "theorem2_ratio",
          [](const PyField& f, const std::vector<std::pair<double, double>>& pts) {
            std::vector<Point> v;
            for (auto p : pts) v.push_back(to_pt(p));
            const RatioStats s = theorem2_ratio(*f.field, f.domain, v);
            py::dict d;
            d["retained"] = s.retained;
            d["discarded"] = s.discarded;
            d["min"] = s.min;
            d["max"] = s.max;
            d["values"] = vector_array(s.values);
            return d;
          },
          py::arg("points"))
      .def("level_flux", [](const PyField& f, double t) { return level_flux(*f.field, t); }, py::arg("t"))
      .def(
          "measure",
          [](const PyField& f, int arcs) { return extract_boundary_measure(*f.field, f.domain, arcs); },
          py::arg("arcs") = 4096, "Boundary measure on equal-arclength arcs.");

  py::class_<BoundaryMeasure>(m, "BoundaryMeasure")
      .def_static("load", &read_measure_csv)
      .def("save", [](const BoundaryMeasure& mu, const std::string& path) { write_measure_csv(path, mu); })
      .def_readonly("p", &BoundaryMeasure::p)
      .def_readonly("total", &BoundaryMeasure::total)
      .def_property_readonly("weights", [](const BoundaryMeasure& mu) { return vector_array(mu.weights); })
      .def_property_readonly("resolution", &BoundaryMeasure::resolution)
      .def_property_readonly("length", &BoundaryMeasure::length)
      .def_property_readonly("provenance", [](const BoundaryMeasure& mu) { return hex64(mu.provenance); })
      .def("__len__", &BoundaryMeasure::size)
      .def("ball_mass", [](const BoundaryMeasure& mu, std::pair<double, double> w, double r) { return ball_mass(mu, to_pt(w), r); })
      .def(
          "dimension",
          [](const BoundaryMeasure& mu, int samples, std::uint64_t seed, double r_min, double r_max) {
            if (!(r_min > 0.0)) r_min = 4.01 * mu.resolution();
            if (!(r_max > 0.0)) r_max = path_diameter(mu) / 8.0;
            std::size_t resampled = 0;
            DimensionReport r;
            {
              py::gil_scoped_release release;
              r = hdim_estimate(local_dimension_profile(mu, samples, r_min, r_max, seed, &resampled));
            }
            r.p = mu.p;
            r.measure_provenance = mu.provenance;
            r.resampled = resampled;
            py::dict d = json_to_py(dimension_report_json(r, seed));
            d["r_min"] = r_min;
            d["r_max"] = r_max;
            return d;
          },
          py::arg("samples") = 500, py::arg("seed") = 0, py::arg("r_min") = 0.0, py::arg("r_max") = 0.0,
          "Local dimension profile and weighted summary, as written by `pml dimension`.");

  py::class_<HalfPlaneMap>(m, "HalfPlaneMap")
      .def_static(
          "build",
          [](const PyDomain& d, int resolution) {
            py::gil_scoped_release release;
            return build_riemann_map(d.domain, resolution);
          },
          py::arg("domain"), py::arg("resolution") = 4096)
      .def_static("load",
                  [](const std::string& path, const PyDomain& d) { return HalfPlaneMap::deserialize(read_file(path), d.domain); })
      .def("save", [](const HalfPlaneMap& h, const std::string& path) { atomic_write(path, h.serialize()); })
      .def("__call__", [](const HalfPlaneMap& h, Complex w) { return h.f(w); }, py::arg("w"))
      .def(
          "derivative",
          [](const HalfPlaneMap& h, Complex w) {
            Complex d;
            h.f(w, &d);
            return d;
          },
          py::arg("w"))
      .def("preimage", [](const HalfPlaneMap& h, Complex z) { return h.preimage(to_point(z)); }, py::arg("z"))
      .def("boundary_distance", &HalfPlaneMap::boundary_distance, py::arg("z"))
      .def_property_readonly("accuracy", &HalfPlaneMap::accuracy)
      .def_property_readonly("resolution", &HalfPlaneMap::resolution)
      .def_property_readonly("domain_hash", [](const HalfPlaneMap& h) { return hex64(h.domain_hash()); })
      .def("hyperbolic_distance",
           [](const HalfPlaneMap& h, Complex a, Complex b) { return hyperbolic_distance(h, to_point(a), to_point(b)); })
      .def(
          "koebe",
          [](const HalfPlaneMap& h, const std::vector<Complex>& disk) {
            const KoebeReport r = koebe_check(h, disk);
            py::dict d;
            d["min"] = r.min;
            d["max"] = r.max;
            d["pass"] = koebe_pass(r);
            d["ratios"] = vector_array(r.ratios);
            return d;
          },
          py::arg("disk_samples"))
      .def(
          "cigar",
          [](const HalfPlaneMap& h, Complex a, double delta, int levels) {
            CigarPath p;
            {
              py::gil_scoped_release release;
              p = build_cigar_path(h, a, delta, levels);
            }
            return cigar_dict(p);
          },
          py::arg("a") = Complex(0.0, 1.0), py::arg("delta") = 0.2, py::arg("levels") = 8)
      .def(
          "lemma47",
          [](const HalfPlaneMap& h, const PyField& f, std::pair<double, double> z1, double delta, int levels) {
            Lemma47Result r;
            {
              py::gil_scoped_release release;
              r = lemma47_verify(*f.field, h, to_pt(z1), delta, levels);
            }
            py::dict d;
            d["z_star"] = std::make_pair(r.z_star.x, r.z_star.y);
            d["u1"] = r.u1;
            d["u_star"] = r.u_star;
            d["rho"] = r.rho;
            d["levels"] = r.levels;
            return d;
          },
          py::arg("field"), py::arg("z1"), py::arg("delta") = 0.2, py::arg("levels") = 30,
          "Search for the point on the cigar path from z1 where u falls to u(z1)/2.");

  m.def("halfplane_distance", &halfplane_distance, py::arg("w1"), py::arg("w2"));

#ifdef PML_WITH_CLI
  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        py::gil_scoped_release release;
        return cli::run(args);
      },
      py::arg("args"), "Runs `pml` with the given arguments and returns its exit status.");
#endif
}
