#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "doctest.h"
#include "oracles.hpp"
#include "pml/error.hpp"
#include "pml/measure.hpp"

using namespace pml;

TEST_CASE("annulus boundary measure") {
  const Domain dom = oracle::annulus();
  const auto mesh = oracle::mesh(dom, 0.02);
  for (double p : {1.5, 2.0, 3.0}) {
    CAPTURE(p);
    const PHField f = solve_p_capacitary(mesh, p);
    const BoundaryMeasure mu = extract_boundary_measure(f, dom, 64);
    CHECK(mu.total == doctest::Approx(oracle::radial_total(p)).epsilon(0.01));
    const auto [lo, hi] = std::minmax_element(mu.weights.begin(), mu.weights.end());
    CHECK(*hi / *lo <= 1.02);
    double arcs = 0.0;
    for (std::size_t j = 0; j < mu.size(); ++j) arcs += mu.s_end[j] - mu.s_start[j];
    CHECK(arcs == doctest::Approx(dom.boundary.perimeter()).epsilon(1e-12));
  }
  CHECK(oracle::radial_total(2.0) == doctest::Approx(2.0 * std::numbers::pi / std::log(2.0)));
  CHECK(oracle::radial_total(1.5) == doctest::Approx(4.0 * std::numbers::pi / std::sqrt(2.0)));
}

TEST_CASE("ball masses") {
  const Domain dom = oracle::annulus();
  const PHField f = solve_p_capacitary(oracle::mesh(dom, 0.04), 2.0);
  const BoundaryMeasure mu = extract_boundary_measure(f, dom, 256);
  CHECK(ball_mass(mu, {2.0, 0.0}, 10.0) == doctest::Approx(mu.total));
  CHECK(ball_mass(mu, {0.0, 0.0}, 2.0 * std::sqrt(2.0) / std::sqrt(2.0) + 1e-9) >= 0.0);
  // Ball centered on the boundary with radius 2 sqrt(2) cuts the circle at the two quarter points.
  CHECK(ball_mass(mu, {2.0, 0.0}, 2.0 * std::sqrt(2.0)) == doctest::Approx(mu.total / 2.0).epsilon(0.02));
  CHECK(ball_mass(mu, {10.0, 0.0}, 1.0) == 0.0);
  double prev = 0.0;
  for (double r = 0.2; r < 4.5; r += 0.1) {
    const double m = ball_mass(mu, {0.0, 2.0}, r);
    CHECK(m >= prev);
    prev = m;
  }
  CHECK_THROWS_AS(ball_mass(mu, {2.0, 0.0}, mu.resolution()), ResolutionError);
}

TEST_CASE("uniform measure is additive over disjoint arcs") {
  const BoundaryMeasure m = BoundaryMeasure::uniform_arcs({{0, 0}, {1, 0}}, false, std::vector<double>(100, 0.01));
  CHECK(m.total == doctest::Approx(1.0));
  const double a = ball_mass(m, {0.2, 0.0}, 0.1), b = ball_mass(m, {0.6, 0.0}, 0.1);
  CHECK(ball_mass(m, {0.2, 0.0}, 0.1) == doctest::Approx(0.2));
  CHECK(a + b == doctest::Approx(0.4));
}

TEST_CASE("harmonic measure of a disk from its center is arclength") {
  const Domain disk = Domain::create(regular_ngon(256, 1.0), {0, 0});
  const PHField f = solve_p_capacitary(oracle::mesh(disk, 0.02), 2.0);
  const BoundaryMeasure mu = extract_boundary_measure(f, disk, 128);
  for (double w : mu.weights) CHECK(w / (mu.total / 128.0) == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("measure, sup and boundary mass comparison triple") {
  const Domain dom = oracle::annulus();
  const PHField f = solve_p_capacitary(oracle::mesh(dom, 0.02), 2.0);
  const BoundaryMeasure mu = extract_boundary_measure(f, dom, 1024);
  const Point w = dom.boundary[40];
  const Lemma23Triple t = lemma23_check(f, dom, mu, w, 0.2);
  CHECK(t.left <= 20.0 * t.mid);
  CHECK(t.mid <= 20.0 * t.right);
  CHECK(t.left == doctest::Approx(ball_mass(mu, w, 0.1)));
  CHECK(t.right == doctest::Approx(ball_mass(mu, w, 0.4)));
  const PHField f3 = solve_p_capacitary(oracle::mesh(dom, 0.02), 3.0);
  const BoundaryMeasure mu3 = extract_boundary_measure(f3, dom, 1024);
  const Lemma23Triple a = lemma23_check(f3, dom, mu3, w, 0.1), b = lemma23_check(f3, dom, mu3, w, 0.2);
  CHECK(a.left / ball_mass(mu3, w, 0.05) == doctest::Approx(0.1));
  CHECK(b.right / ball_mass(mu3, w, 0.4) == doctest::Approx(0.2));
  CHECK_THROWS_AS(lemma23_check(f, dom, mu, w, 0.3), PreconditionError);
}

TEST_CASE("level sets") {
  const Domain dom = oracle::annulus();
  const PHField f = solve_p_capacitary(oracle::mesh(dom, 0.02), 2.0);
  const LevelSet ls = trace_level_set(f, 0.5);
  REQUIRE(ls.polylines.size() == 1);
  const double r = 2.0 * std::pow(dom.inner_radius / 2.0, 0.5);
  CHECK(ls.total_length == doctest::Approx(2.0 * std::numbers::pi * r).epsilon(0.01));
  for (const Point& z : ls.polylines[0]) CHECK(std::abs(evaluate(f, z).value - 0.5) <= 1e-9);
  // Superlevel set on the left: the chain runs counterclockwise around the inner circle.
  double area = 0.0;
  const auto& c = ls.polylines[0];
  for (std::size_t k = 0; k < c.size(); ++k) area += cross(c[k], c[(k + 1) % c.size()]);
  CHECK(area > 0.0);
  const LevelSet lo = trace_level_set(f, 0.3);
  double rmin = 1e9;
  for (const Point& z : lo.polylines[0]) rmin = std::min(rmin, norm(z));
  double rmax = 0.0;
  for (const Point& z : ls.polylines[0]) rmax = std::max(rmax, norm(z));
  CHECK(rmax < rmin);
  CHECK_THROWS_AS(trace_level_set(f, 0.01), DomainError);
}

TEST_CASE("level flux conservation on the annulus") {
  const Domain dom = oracle::annulus();
  const auto mesh = oracle::mesh(dom, 0.02);
  const PHField f = solve_p_capacitary(mesh, 2.0);
  const double total = extract_boundary_measure(f, dom, 256).total;
  for (double t : {0.2, 0.5, 0.8}) {
    CAPTURE(t);
    const double flux = level_flux(f, t);
    CHECK(flux == doctest::Approx(2.0 * std::numbers::pi / std::log(2.0)).epsilon(0.01));
    CHECK(flux == doctest::Approx(total).epsilon(0.02));
  }
}

TEST_CASE("makarov diagnostic") {
  const Domain dom = oracle::annulus();
  const PHField f = solve_p_capacitary(oracle::mesh(dom, 0.02), 3.0);
  for (double c : {1.0, 2.0, 4.0, 8.0}) {
    const LevelSetDiagnostic d = makarov_diagnostic(f, dom, 0.05, c);
    CHECK(d.weighted_flux >= d.flux);
    CHECK(d.F_flux <= d.flux);
    CHECK(d.F_flux == 0.0);
    CHECK(d.xi == doctest::Approx(2.0 * std::sqrt(c * std::log(20.0) * std::log(std::log(20.0)))));
  }
  // The inner radius is ~1, so normalized and raw flux agree.
  CHECK(makarov_diagnostic(f, dom, 0.05, 1.0).flux == doctest::Approx(level_flux(f, 0.05)).epsilon(1e-3));
  CHECK_THROWS_AS(makarov_diagnostic(f, dom, 0.2, 1.0), DomainError);
  CHECK_THROWS_AS(makarov_diagnostic(f, dom, 0.05, 0.0), DomainError);
}

TEST_CASE("measure csv round trip") {
  const BoundaryMeasure m =
      BoundaryMeasure::uniform_arcs({{0, 0}, {1, 0}, {0, 1}}, true, {0.1, 0.2, 1.0 / 3.0, 0.0});
  const std::string path = "measure_roundtrip_test.csv";
  write_measure_csv(path, m);
  const BoundaryMeasure r = read_measure_csv(path);
  std::remove(path.c_str());
  CHECK(r.weights == m.weights);
  CHECK(r.s_start == m.s_start);
  CHECK(r.s_end == m.s_end);
  CHECK(r.path == m.path);
  CHECK(r.closed);
}
