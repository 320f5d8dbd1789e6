#include <cmath>
#include <numbers>

#include "doctest.h"
#include "pml/error.hpp"
#include "pml/geometry.hpp"

using namespace pml;

namespace {

// Independent long-double evaluation of r*exp(A*sqrt(log(1/r)*log(log(1/r)))).
long double loglog_oracle(long double a, long double r) {
  const long double l = std::log(1.0L / r);
  return r * std::exp(a * std::sqrt(l * std::log(l)));
}

JordanCurve unit_square() { return JordanCurve({{0, 0}, {1, 0}, {1, 1}, {0, 1}}); }

}  // namespace

TEST_CASE("koch snowflake counts and perimeter") {
  const JordanCurve k0 = koch_snowflake(0, 1.0);
  CHECK(k0.size() == 3);
  CHECK(k0.perimeter() == doctest::Approx(3.0));
  const JordanCurve k2 = koch_snowflake(2, 1.0);
  CHECK(k2.size() == 48);
  CHECK(k2.perimeter() == doctest::Approx(16.0 / 3.0));
  const JordanCurve k1 = koch_snowflake(1, 3.0);
  CHECK(k1.size() == 12);
  CHECK(k1.perimeter() == doctest::Approx(12.0));
  for (int level = 0; level <= 4; ++level) {
    const JordanCurve k = koch_snowflake(level, 1.0);
    CHECK(k.size() == 3u * (1u << (2 * level)));
    const double edge = std::pow(3.0, -level);
    for (std::size_t i = 0; i < k.size(); ++i)
      CHECK(dist(k[i], k[(i + 1) % k.size()]) == doctest::Approx(edge).epsilon(1e-9));
    CHECK(k.signed_area() > 0.0);
  }
  CHECK_THROWS_AS(koch_snowflake(9, 1.0), ResourceError);
}

TEST_CASE("distance to boundary") {
  const Domain disk = Domain::create(regular_ngon(256, 1.0), {0, 0});
  CHECK(std::abs(distance_to_boundary(disk, {0, 0}) - 1.0) <= 2e-4);
  CHECK(distance_to_boundary(disk, {0, 0}) == doctest::Approx(std::cos(std::numbers::pi / 256)));
  CHECK(distance_to_boundary(disk, disk.boundary[17]) == 0.0);
  CHECK(disk.inner_radius == distance_to_boundary(disk, {0, 0}) / 2.0);

  const Domain sq = Domain::create(unit_square(), {0.5, 0.5});
  CHECK(distance_to_boundary(sq, {0.5, 0.25}) == doctest::Approx(0.25));
  CHECK(distance_to_boundary(sq, {2.0, 0.5}) == doctest::Approx(1.0));

  const JordanCurve k = koch_snowflake(3, 1.0);
  const Domain dk = Domain::create(k, vertex_centroid(k));
  for (int i = 0; i < 50; ++i) {
    const Point z = dk.basepoint + Point{0.3 * std::cos(i * 0.7), 0.3 * std::sin(i * 1.3)};
    if (!dk.contains(z)) continue;
    const double d = distance_to_boundary(dk, z);
    for (const Point& v : k.vertices()) CHECK(d <= dist(z, v) + 1e-15);
  }
}

TEST_CASE("jordan curve validation") {
  CHECK_THROWS_AS(JordanCurve({{0, 0}, {1, 0}}), GeometryError);
  CHECK_THROWS_AS(JordanCurve({{0, 0}, {0, 1}, {1, 1}, {1, 0}}), GeometryError);  // clockwise
  CHECK_THROWS_AS(JordanCurve({{0, 0}, {2, 0}, {0, 1}, {2, 1}}), GeometryError);  // bow tie
  CHECK_THROWS_WITH_AS(JordanCurve({{0, 0}, {1, 1}, {1, 0}, {0, 1}}), doctest::Contains("self-intersection"),
                       GeometryError);
  CHECK_THROWS_AS(JordanCurve({{0, 0}, {1, 0}, {1, 0}, {0, 1}}), GeometryError);
  CHECK_THROWS_AS(Domain::create(unit_square(), {2, 2}), GeometryError);
}

TEST_CASE("containment and arclength") {
  const JordanCurve sq = unit_square();
  CHECK(sq.contains({0.5, 0.5}));
  CHECK_FALSE(sq.contains({1.5, 0.5}));
  CHECK_FALSE(sq.contains({1.0, 0.5}));
  CHECK(sq.perimeter() == doctest::Approx(4.0));
  const Point p = sq.at_arclength(2.5);
  CHECK(p.x == doctest::Approx(0.5));
  CHECK(p.y == doctest::Approx(1.0));
  CHECK(sq.project({0.5, 1.2}) == doctest::Approx(2.5));
}

TEST_CASE("gauge evaluation") {
  CHECK(gauge_eval(Gauge::power(1.0), 1e-3) == doctest::Approx(1e-3));
  for (double r : {1e-7, 1e-9, 1e-12}) CHECK(gauge_eval(Gauge::loglog(0.0), r) == doctest::Approx(r));
  const double expected = static_cast<double>(loglog_oracle(1.0L, 1e-6L * (1 - 1e-15L)));
  CHECK(gauge_eval(Gauge::loglog(1.0), 1e-6 * (1 - 1e-15)) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(expected == doctest::Approx(4.128e-4).epsilon(1e-3));
  CHECK_THROWS_AS(gauge_eval(Gauge::loglog(1.0), 2e-6), DomainError);
  CHECK_THROWS_AS(gauge_eval(Gauge::power(1.0), 0.0), DomainError);
  CHECK(Gauge::loglog(1.0).valid_below <= 1e-6);
  CHECK(Gauge::logloglog(-2.0).valid_below <= 1e-6);
}

TEST_CASE("loglog gauge monotone on the valid range") {
  // Strict monotonicity on (0, 1e-6) holds for A up to about 3.3; larger A
  // turns the gauge over near the cutoff.
  for (double a : {-10.0, -3.0, -1.0, 0.0, 1.0, 2.0, 3.3}) {
    double prev = 0.0;
    for (int k = 0; k <= 2000; ++k) {
      const double r = 1e-6 * std::pow(10.0, -40.0 * (2000 - k) / 2000.0) * (1 - 1e-12);
      const double v = gauge_eval(Gauge::loglog(a), r);
      CHECK(v > prev);
      CHECK(std::isfinite(v));
      prev = v;
    }
  }
}

TEST_CASE("covering sums") {
  const Ball two[] = {{{0, 0}, 0.5e-6}, {{1, 0}, 0.5e-6}};
  CHECK(covering_sum(Gauge::power(1.0), two) == doctest::Approx(1e-6));
  CHECK(covering_sum(Gauge::power(1.0), std::span<const Ball>{}) == 0.0);
  const double r = 1e-6 * (1 - 1e-15);
  const Ball one[] = {{{0, 0}, r}};
  CHECK(covering_sum(Gauge::loglog(1.0), one) == doctest::Approx(gauge_eval(Gauge::loglog(1.0), r)));
  const Ball big[] = {{{0, 0}, 1e-3}};
  CHECK_THROWS_AS(covering_sum(Gauge::loglog(1.0), big), DomainError);
}

TEST_CASE("quasihyperbolic distance on the disk") {
  const double R = 1.0;
  const Domain disk = Domain::create(regular_ngon(512, R), {0, 0});
  CHECK(quasihyperbolic_distance(disk, {0.1, 0.2}, {0.1, 0.2}, 0.02) == 0.0);
  const double r = 0.5;
  const double oracle = std::log(R / (R - r));
  const double q = quasihyperbolic_distance(disk, {0, 0}, {r, 0}, 0.0025);
  CHECK(q == doctest::Approx(oracle).epsilon(0.02));
  const double q12 = quasihyperbolic_distance(disk, {0.1, 0.3}, {-0.4, -0.2}, 0.01);
  const double q21 = quasihyperbolic_distance(disk, {-0.4, -0.2}, {0.1, 0.3}, 0.01);
  CHECK(q12 == doctest::Approx(q21).epsilon(1e-12));
  CHECK_THROWS_AS(quasihyperbolic_distance(disk, {0, 0}, {2, 0}, 0.01), DomainError);
}

TEST_CASE("quasihyperbolic distance refines downward") {
  const JordanCurve k = koch_snowflake(3, 1.0);
  const Domain dom = Domain::create(k, vertex_centroid(k));
  const Point a = dom.basepoint + Point{-0.2, 0.05}, b = dom.basepoint + Point{0.25, 0.1};
  double prev = 1e300;
  for (double res : {0.04, 0.02, 0.01, 0.005}) {
    const double q = quasihyperbolic_distance(dom, a, b, res);
    CHECK(q <= prev * 1.05);
    prev = q;
  }
}
