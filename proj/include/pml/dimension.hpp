#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pml/geometry.hpp"
#include "pml/measure.hpp"

namespace pml {

struct LocalDimSample {
  Point z;
  /// Arclength coordinate of z on the measure path.
  double s = 0.0;
  std::vector<double> r_values;
  std::vector<double> masses;
  double slope = 0.0;
  double fit_residual = 0.0;
  /// mu(B(z, r_min)); the weight used by the summary statistics.
  double weight = 0.0;
};

struct GaugeVerdict {
  std::string gauge;
  /// True when the requested gauge was out of reach and Power(1) was used instead.
  bool substituted = false;
  double increasing = 0.0;
  double decreasing = 0.0;
  double flat = 0.0;
  std::size_t samples = 0;
};

struct DimensionReport {
  std::vector<LocalDimSample> samples;
  double weighted_median = 0.0;
  /// Pairs (level, value) for levels 0.1, 0.25, 0.5, 0.75, 0.9.
  std::vector<std::pair<double, double>> weighted_quantiles;
  std::vector<GaugeVerdict> gauge_verdicts;
  double p = 0.0;
  std::uint64_t measure_provenance = 0;
  std::size_t resampled = 0;
};

struct ProfileOptions {
  int sample_count = 500;
  double r_min = 0.0;
  double r_max = 0.0;
  std::uint64_t seed = 0;
};

/// Radii r_min * 2^k up to r_max (at least two).
std::vector<double> dyadic_ladder(double r_min, double r_max);

/// mu-proportional samples with least-squares slopes of log mu(B(z, r)) against log r.
/// `resampled` receives the number of redrawn zero-mass windows.
std::vector<LocalDimSample> local_dimension_profile(const BoundaryMeasure& m, int sample_count, double r_min,
                                                    double r_max, std::uint64_t seed,
                                                    std::size_t* resampled = nullptr);

/// Weighted median and quantiles of the slopes; needs at least 30 samples.
DimensionReport hdim_estimate(const std::vector<LocalDimSample>& samples);

/// Trend of mu(B(z, r_k)) / lambda(r_k) as r_k decreases, classified per sample
/// by Spearman correlation (+-0.5) with a 5% flatness guard. Defaults for the
/// ladder: r_min = 4.01 x resolution, r_max just below diam/4.
GaugeVerdict gauge_comparison(const BoundaryMeasure& m, const Gauge& g, int sample_count, std::uint64_t seed,
                              double r_min = 0.0, double r_max = 0.0);

double spearman(const std::vector<double>& a, const std::vector<double>& b);
double weighted_quantile(std::vector<std::pair<double, double>> value_weight, double q);

/// Diameter of the measure path.
double path_diameter(const BoundaryMeasure& m);

std::string dimension_report_json(const DimensionReport& r, std::uint64_t seed);

}  // namespace pml
