#include "pml/dimension.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "json.hpp"
#include "pml/error.hpp"
#include "pml/random.hpp"
#include "pml/io.hpp"
#include "pml/parallel.hpp"

namespace pml {

namespace {

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&v](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

struct Draw {
  double s;
  Point z;
};

// mu-proportional boundary point from a per-sample generator.
Draw draw(const BoundaryMeasure& m, const std::vector<double>& cumw, std::mt19937_64& rng) {
  const double x = unit(rng) * cumw.back();
  std::size_t j = static_cast<std::size_t>(std::upper_bound(cumw.begin(), cumw.end(), x) - cumw.begin());
  j = std::min(j, cumw.size() - 1);
  while (m.weights[j] == 0.0 && j + 1 < cumw.size()) ++j;
  const double s = m.s_start[j] + unit(rng) * (m.s_end[j] - m.s_start[j]);
  return {s, m.point_at(s)};
}

void fit(LocalDimSample& d) {
  const std::size_t n = d.r_values.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double x = std::log(d.r_values[k]), y = std::log(d.masses[k]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double dn = static_cast<double>(n);
  d.slope = (dn * sxy - sx * sy) / (dn * sxx - sx * sx);
  const double icept = (sy - d.slope * sx) / dn;
  double ss = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double e = std::log(d.masses[k]) - icept - d.slope * std::log(d.r_values[k]);
    ss += e * e;
  }
  d.fit_residual = std::sqrt(ss / dn);
}

}  // namespace

double path_diameter(const BoundaryMeasure& m) {
  double d = 0.0;
  for (std::size_t i = 0; i < m.path.size(); ++i)
    for (std::size_t j = i + 1; j < m.path.size(); ++j) d = std::max(d, dist(m.path[i], m.path[j]));
  return d;
}

std::vector<double> dyadic_ladder(double r_min, double r_max) {
  std::vector<double> r;
  for (double x = r_min; x <= r_max * (1 + 1e-12); x *= 2.0) r.push_back(x);
  if (r.size() < 2) throw PreconditionError("radius ladder needs r_max >= 2 r_min");
  return r;
}

std::vector<LocalDimSample> local_dimension_profile(const BoundaryMeasure& m, int sample_count, double r_min,
                                                    double r_max, std::uint64_t seed, std::size_t* resampled) {
  if (sample_count < 1) throw PreconditionError("sample_count must be positive");
  if (!(r_min > 4.0 * m.resolution())) {
    std::ostringstream os;
    os << "r_min = " << r_min << " must exceed 4 x measure resolution = " << 4.0 * m.resolution();
    throw PreconditionError(os.str());
  }
  const double diam = path_diameter(m);
  if (!(r_max < diam / 4.0)) throw PreconditionError("r_max must be below diam/4");
  if (!(r_max / r_min >= 16.0)) throw PreconditionError("r_max / r_min must be at least 16");
  if (!(m.total > 0.0)) throw PreconditionError("measure has zero total mass");
  const std::vector<double> ladder = dyadic_ladder(r_min, r_max);
  std::vector<double> cumw(m.size());
  std::partial_sum(m.weights.begin(), m.weights.end(), cumw.begin());

  std::vector<LocalDimSample> out(static_cast<std::size_t>(sample_count));
  std::vector<std::size_t> redraws(out.size(), 0);
  parallel_for(out.size(), [&](std::size_t i) {
    std::mt19937_64 rng(splitmix64(seed ^ splitmix64(i)));
    for (int attempt = 0;; ++attempt) {
      if (attempt >= 100) throw ResolutionError("could not draw a sample with positive mass windows");
      const Draw d = draw(m, cumw, rng);
      LocalDimSample s;
      s.z = d.z;
      s.s = d.s;
      s.r_values = ladder;
      bool ok = true;
      for (double r : ladder) {
        const double mass = ball_mass(m, d.z, r);
        if (!(mass > 0.0)) ok = false;
        if (!s.masses.empty() && mass < s.masses.back() * (1.0 - 1e-12))
          throw InternalError("ball masses decreased with the radius");
        // Absorb roundoff so the stored masses are nondecreasing.
        s.masses.push_back(s.masses.empty() ? mass : std::max(mass, s.masses.back()));
      }
      if (!ok) {
        ++redraws[i];
        continue;
      }
      s.weight = s.masses.front();
      fit(s);
      out[i] = std::move(s);
      break;
    }
  });
  if (resampled) *resampled = std::accumulate(redraws.begin(), redraws.end(), std::size_t{0});
  return out;
}

double weighted_quantile(std::vector<std::pair<double, double>> vw, double q) {
  if (vw.empty()) throw PreconditionError("weighted quantile of an empty set");
  std::stable_sort(vw.begin(), vw.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  double total = 0.0;
  for (const auto& [v, w] : vw) total += w;
  if (!(total > 0.0)) throw PreconditionError("weighted quantile with zero total weight");
  double acc = 0.0;
  for (const auto& [v, w] : vw) {
    acc += w / total;
    if (acc >= q - 1e-12) return v;
  }
  return vw.back().first;
}

DimensionReport hdim_estimate(const std::vector<LocalDimSample>& samples) {
  std::vector<std::pair<double, double>> vw;
  for (const auto& s : samples)
    if (std::isfinite(s.slope) && s.weight > 0.0) vw.emplace_back(s.slope, s.weight);
  if (vw.size() < 30) {
    std::ostringstream os;
    os << "dimension statistics need at least 30 valid samples, got " << vw.size();
    throw PreconditionError(os.str());
  }
  DimensionReport r;
  r.samples = samples;
  for (double q : {0.1, 0.25, 0.5, 0.75, 0.9}) r.weighted_quantiles.emplace_back(q, weighted_quantile(vw, q));
  r.weighted_median = r.weighted_quantiles[2].second;
  return r;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw PreconditionError("spearman needs two equal series of length >= 2");
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n, mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

GaugeVerdict gauge_comparison(const BoundaryMeasure& m, const Gauge& g, int sample_count, std::uint64_t seed,
                              double r_min, double r_max) {
  if (r_min <= 0.0) r_min = 4.01 * m.resolution();
  if (r_max <= 0.0) r_max = path_diameter(m) / 4.0 * (1.0 - 1e-9);
  GaugeVerdict v;
  Gauge used = g;
  if (!(r_min < g.valid_below)) {
    used = Gauge::power(1.0);
    v.substituted = true;
  } else {
    r_max = std::min(r_max, g.valid_below * (1.0 - 1e-9));
  }
  v.gauge = used.name();
  const auto samples = local_dimension_profile(m, sample_count, r_min, r_max, seed);
  double total = 0.0;
  for (const auto& s : samples) {
    std::vector<double> q, neg_r;
    for (std::size_t k = 0; k < s.r_values.size(); ++k) {
      q.push_back(s.masses[k] / gauge_eval(used, s.r_values[k]));
      neg_r.push_back(-s.r_values[k]);
    }
    const auto [lo, hi] = std::minmax_element(q.begin(), q.end());
    const double mean = std::accumulate(q.begin(), q.end(), 0.0) / static_cast<double>(q.size());
    total += s.weight;
    if ((*hi - *lo) <= 0.05 * mean) {
      v.flat += s.weight;
      continue;
    }
    const double rho = spearman(q, neg_r);
    if (rho > 0.5) v.increasing += s.weight;
    else if (rho < -0.5) v.decreasing += s.weight;
    else v.flat += s.weight;
  }
  v.samples = samples.size();
  if (total > 0.0) {
    v.increasing /= total;
    v.decreasing /= total;
    v.flat /= total;
  }
  return v;
}

std::string dimension_report_json(const DimensionReport& r, std::uint64_t seed) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["p"] = r.p;
  j["seed"] = seed;
  j["weighted_median"] = r.weighted_median;
  ordered_json q = ordered_json::object();
  for (const auto& [level, value] : r.weighted_quantiles) q[format_double(level)] = value;
  j["weighted_quantiles"] = q;
  ordered_json verdicts = ordered_json::array();
  for (const auto& v : r.gauge_verdicts)
    verdicts.push_back({{"gauge", v.gauge},
                        {"substituted", v.substituted},
                        {"increasing", v.increasing},
                        {"decreasing", v.decreasing},
                        {"flat", v.flat},
                        {"samples", v.samples}});
  j["gauge_verdicts"] = verdicts;
  j["resampled"] = r.resampled;
  ordered_json samples = ordered_json::array();
  for (const auto& s : r.samples)
    samples.push_back({{"z", {s.z.x, s.z.y}},
                       {"s", s.s},
                       {"slope", s.slope},
                       {"fit_residual", s.fit_residual},
                       {"weight", s.weight},
                       {"r_values", s.r_values},
                       {"masses", s.masses}});
  j["samples"] = samples;
  j["provenance"] = {{"measure", hex64(r.measure_provenance)}};
  return j.dump(1) + "\n";
}

}  // namespace pml
