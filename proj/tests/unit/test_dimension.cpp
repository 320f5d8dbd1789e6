#include <cmath>
#include <numbers>

#include "doctest.h"
#include "oracles.hpp"
#include "pml/dimension.hpp"
#include "pml/error.hpp"

using namespace pml;

namespace {

// Middle-thirds Cantor measure on [0, 1] at generation n: weight 2^-n on each surviving triadic interval.
BoundaryMeasure cantor_measure(int n) {
  const int cells = static_cast<int>(std::pow(3, n));
  std::vector<double> w(static_cast<std::size_t>(cells), 0.0);
  for (int i = 0; i < cells; ++i) {
    int x = i;
    bool keep = true;
    for (int k = 0; k < n; ++k, x /= 3) keep = keep && (x % 3 != 1);
    if (keep) w[static_cast<std::size_t>(i)] = std::pow(2.0, -n);
  }
  return BoundaryMeasure::uniform_arcs({{0, 0}, {1, 0}}, false, w);
}

BoundaryMeasure circle_uniform(int arcs, double radius = 1.0) {
  return BoundaryMeasure::uniform_arcs(regular_ngon(4096, radius).vertices(), true,
                                       std::vector<double>(static_cast<std::size_t>(arcs), 1.0 / arcs));
}

BoundaryMeasure point_mass(int arcs, int where, double mass, double background) {
  std::vector<double> w(static_cast<std::size_t>(arcs), background / arcs);
  w[static_cast<std::size_t>(where)] += mass;
  return BoundaryMeasure::uniform_arcs({{0, 0}, {1, 0}}, false, w);
}

}  // namespace

TEST_CASE("uniform measure has local dimension one") {
  const BoundaryMeasure m = circle_uniform(8192);
  const auto samples = local_dimension_profile(m, 200, 0.004, 0.45, 7);
  int good = 0;
  for (const auto& s : samples) good += std::abs(s.slope - 1.0) <= 0.05;
  CHECK(good >= 180);
  const DimensionReport r = hdim_estimate(samples);
  CHECK(r.weighted_median >= 0.95);
  CHECK(r.weighted_median <= 1.05);
}

TEST_CASE("disk harmonic measure") {
  const Domain disk = Domain::create(regular_ngon(256, 1.0), {0, 0});
  const PHField f = solve_p_capacitary(oracle::mesh(disk, 0.02, 0.5), 2.0);
  const BoundaryMeasure mu = extract_boundary_measure(f, disk, 4096);
  const auto samples = local_dimension_profile(mu, 200, 4.01 * mu.resolution(), 0.45, 11);
  int good = 0;
  for (const auto& s : samples) good += std::abs(s.slope - 1.0) <= 0.05;
  CHECK(good >= 180);
  const DimensionReport r = hdim_estimate(samples);
  CHECK(r.weighted_median == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("cantor measure") {
  const BoundaryMeasure m = cantor_measure(9);
  const double rmin = 4.01 * m.resolution();
  const auto samples = local_dimension_profile(m, 300, rmin, 0.24, 3);
  const DimensionReport r = hdim_estimate(samples);
  CHECK(r.weighted_median == doctest::Approx(std::log(2.0) / std::log(3.0)).epsilon(0.05 / 0.631));
}

TEST_CASE("point mass has dimension zero") {
  const BoundaryMeasure m = point_mass(1000, 500, 1.0, 0.0);
  const auto samples = local_dimension_profile(m, 40, 0.005, 0.2, 1);
  for (const auto& s : samples) CHECK(std::abs(s.slope) <= 1e-9);
  const DimensionReport r = hdim_estimate(samples);
  CHECK(std::abs(r.weighted_median) <= 1e-9);
}

TEST_CASE("weighted median of a mixture") {
  const BoundaryMeasure m = point_mass(1000, 500, 0.9, 0.1);
  const DimensionReport r = hdim_estimate(local_dimension_profile(m, 200, 0.005, 0.2, 5));
  CHECK(std::abs(r.weighted_median) <= 0.1);
}

TEST_CASE("all slopes equal") {
  std::vector<LocalDimSample> s(30);
  for (auto& x : s) {
    x.slope = 1.0;
    x.weight = 0.5;
  }
  CHECK(hdim_estimate(s).weighted_median == 1.0);
  s.pop_back();
  CHECK_THROWS_AS(hdim_estimate(s), PreconditionError);
}

TEST_CASE("seed determinism and scale invariance") {
  const BoundaryMeasure m = cantor_measure(7);
  const double rmin = 4.01 * m.resolution();
  const auto a = local_dimension_profile(m, 50, rmin, 0.24, 42);
  const auto b = local_dimension_profile(m, 50, rmin, 0.24, 42);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].slope == b[i].slope);
    CHECK(a[i].masses == b[i].masses);
  }
  const double s = 7.5;
  BoundaryMeasure big = m;
  for (auto& p : big.path) p = p * s;
  for (auto& x : big.s_start) x *= s;
  for (auto& x : big.s_end) x *= s;
  big.finalize();
  const auto c = local_dimension_profile(big, 50, rmin * s, 0.24 * s, 42);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(c[i].slope == doctest::Approx(a[i].slope).epsilon(1e-6));
}

TEST_CASE("gauge comparison trends") {
  const BoundaryMeasure disk = circle_uniform(8192);
  const GaugeVerdict flat = gauge_comparison(disk, Gauge::power(1.0), 100, 1);
  CHECK(flat.flat >= 0.9);
  const GaugeVerdict dec = gauge_comparison(disk, Gauge::power(0.5), 100, 1);
  CHECK(dec.decreasing >= 0.9);
  const GaugeVerdict inc = gauge_comparison(point_mass(1000, 500, 1.0, 0.0), Gauge::power(1.0), 50, 1);
  CHECK(inc.increasing == doctest::Approx(1.0));
  // Mesh-scale measures cannot reach the logarithmic gauges.
  const GaugeVerdict sub = gauge_comparison(disk, Gauge::loglog(1.0), 50, 1);
  CHECK(sub.substituted);
  // A tiny synthetic segment can.
  const BoundaryMeasure tiny =
      BoundaryMeasure::uniform_arcs({{0, 0}, {4e-6, 0}}, false, std::vector<double>(4000, 1.0 / 4000));
  const GaugeVerdict ll = gauge_comparison(tiny, Gauge::loglog(-2.0), 50, 1);
  CHECK_FALSE(ll.substituted);
  CHECK(ll.samples == 50);
}

TEST_CASE("spearman") {
  CHECK(spearman({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0));
  CHECK(spearman({1, 2, 3, 4}, {4, 3, 2, 1}) == doctest::Approx(-1.0));
  CHECK(spearman({1, 1, 1}, {1, 2, 3}) == 0.0);
}
