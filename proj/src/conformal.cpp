#include "pml/conformal.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <numeric>

#include <boost/math/quadrature/gauss.hpp>
#include "json.hpp"

#include "pml/error.hpp"
#include "pml/io.hpp"
#include "pml/parallel.hpp"

namespace pml {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kInf = std::numeric_limits<double>::infinity();
const Complex kI{0.0, 1.0};

// The library complex division and sqrt guard against overflow and NaN operands
// at several times the cost; the zipper frames keep every operand moderate.
inline Complex cdiv(Complex a, Complex b) {
  const double n = b.real() * b.real() + b.imag() * b.imag();
  return {(a.real() * b.real() + a.imag() * b.imag()) / n, (a.imag() * b.real() - a.real() * b.imag()) / n};
}

/// Square root in the closed upper half-plane; on the real axis the sign follows `hint`.
inline Complex root_up(Complex x, double hint) {
  const double a = x.real(), b = x.imag();
  const double t = std::sqrt(0.5 * (std::sqrt(a * a + b * b) + std::abs(a)));
  if (t == 0.0) return {0.0, 0.0};
  Complex r = a >= 0.0 ? Complex(t, 0.5 * b / t) : Complex(0.5 * std::abs(b) / t, std::copysign(t, b));
  if (r.imag() < 0.0 || (r.imag() == 0.0 && r.real() * hint < 0.0)) r = -r;
  return r;
}

/// Real-axis action of the slit map with parameters (ib, c). Exactly 0 is the slit
/// tip, which goes to the interior (negative) side.
inline double slit_real(double x, double ib, double c) {
  double m;
  if (std::isinf(x)) {
    if (ib == 0.0) return x;
    m = -1.0 / ib;
  } else {
    if (x == 0.0) return -c;
    const double den = 1.0 - x * ib;
    if (den == 0.0) return kInf;
    m = x / den;
  }
  if (std::isinf(m)) return m;
  return std::copysign(std::sqrt(m * m + c * c), m);
}

/// Gauss-Legendre rule on [-1, 1].
template <unsigned N>
struct Rule {
  std::array<double, N> x{};
  std::array<double, N> w{};
  Rule() {
    using G = boost::math::quadrature::gauss<double, N>;
    const auto& a = G::abscissa();
    const auto& wt = G::weights();
    unsigned k = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i] == 0.0) {
        x[k] = 0.0;
        w[k++] = wt[i];
      } else {
        x[k] = a[i];
        w[k++] = wt[i];
        x[k] = -a[i];
        w[k++] = wt[i];
      }
    }
  }
};

const Rule<8>& rule8() {
  static const Rule<8> r;
  return r;
}
const Rule<16>& rule16() {
  static const Rule<16> r;
  return r;
}

double boundary_distance(const HalfPlaneMap& map, Complex z) { return map.boundary_distance(z); }

}  // namespace

double halfplane_distance(Complex w1, Complex w2) {
  const double num = std::abs(w1 - w2);
  if (num == 0.0) return 0.0;
  return std::atanh(std::min(num / std::abs(w1 - std::conj(w2)), 1.0 - 1e-16));
}

// ---------------------------------------------------------------------------
// Map evaluation

Complex HalfPlaneMap::f(Complex w, Complex* df) const {
  // Rotation about i.
  const Complex den = -rs_ * w + rc_;
  const Complex z = base(Complex((rc_ * w + rs_) / den), df);
  if (df) *df /= den * den;
  return z;
}

Complex HalfPlaneMap::base(Complex wt, Complex* df) const {
  const Complex wp = wt * scale_ + shift_;
  Complex d = scale_;
  const Complex q = root_up(sign_ * wp, qhint_);
  d *= sign_ / (2.0 * q);
  Complex zeta = q + tip_end_;
  for (std::size_t j = ib_.size(); j-- > 0;) {
    zeta = zeta * sc_[j] + sh_[j];
    const Complex e = 1.0 + zeta * ix_[j];
    zeta = cdiv(zeta, e);
    const Complex r = root_up(zeta * zeta - c_[j] * c_[j], zeta.real());
    const Complex h = 1.0 + r * ib_[j];
    d *= cdiv(sc_[j] * zeta, e * e * r * h * h);
    zeta = cdiv(r, h) + tip_[j];
  }
  const Complex q1 = -zeta * zeta;
  d *= -2.0 * zeta;
  const Complex one_minus = 1.0 - q1;
  const Complex z = (p1_ - q1 * p0_) / one_minus;
  d *= (p1_ - p0_) / (one_minus * one_minus);
  if (df) *df = d;
  return z;
}

Complex HalfPlaneMap::forward(Complex z) const {
  Complex zeta = kI * std::sqrt((z - p1_) / (z - p0_));
  for (std::size_t j = 0; j < ib_.size(); ++j) {
    zeta -= tip_[j];
    const Complex m = zeta / (1.0 - zeta * ib_[j]);
    zeta = root_up(m * m + c_[j] * c_[j], m.real());
    zeta /= 1.0 - zeta * ix_[j];
    zeta = (zeta - sh_[j]) / sc_[j];
  }
  const Complex q = zeta - tip_end_;
  const Complex wt = (sign_ * q * q - shift_) / scale_;
  return (rc_ * wt - rs_) / (rs_ * wt + rc_);
}

Complex HalfPlaneMap::newton(Complex z, Complex w0, bool* ok) const {
  const double tol = 1e-12 * std::max(1.0, domain_.boundary.diameter());
  Complex w = w0;
  Complex d;
  Complex r = f(w, &d) - z;
  double err = std::abs(r);
  *ok = false;
  for (int it = 0; it < 80; ++it) {
    if (!std::isfinite(err)) return w;
    if (err <= tol) {
      *ok = true;
      return w;
    }
    const Complex step = r / d;
    double lam = 1.0;
    bool moved = false;
    for (int k = 0; k < 40; ++k, lam *= 0.5) {
      const Complex wn = w - lam * step;
      if (!(wn.imag() > 0.0)) continue;
      Complex dn;
      const Complex rn = f(wn, &dn) - z;
      const double en = std::abs(rn);
      if (en < err) {
        w = wn;
        r = rn;
        d = dn;
        err = en;
        moved = true;
        break;
      }
    }
    if (!moved) {
      *ok = err <= 1e3 * tol;
      return w;
    }
  }
  *ok = err <= 1e3 * tol;
  return w;
}

Complex HalfPlaneMap::preimage(Point zp) const {
  const Complex z = to_complex(zp);
  bool ok = false;
  const Complex w0 = forward(z);
  if (std::isfinite(w0.real()) && std::isfinite(w0.imag()) && w0.imag() > 0.0) {
    const Complex w = newton(z, w0, &ok);
    if (ok) return w;
  }
  // Multistart from the nearest entries of the coarse table.
  std::vector<std::size_t> order(seed_z_.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t k = std::min<std::size_t>(8, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      const double da = std::abs(seed_z_[a] - z), db = std::abs(seed_z_[b] - z);
                      return da < db || (da == db && a < b);
                    });
  for (std::size_t i = 0; i < k; ++i) {
    const Complex wt = seed_w_[order[i]];
    const Complex start = (rc_ * wt - rs_) / (rs_ * wt + rc_);
    const Complex w = newton(z, start, &ok);
    if (ok) return w;
  }
  throw ResolutionError("inversion error: no preimage found for (" + format_double(zp.x) + ", " +
                        format_double(zp.y) + ")");
}

HalfPlaneMap HalfPlaneMap::normalized_at(Point z1) const {
  HalfPlaneMap m = *this;
  m.rc_ = 1.0;
  m.rs_ = 0.0;
  const Complex a = m.preimage(z1);
  const Complex zeta = (a - kI) / (a + kI);
  // Rotation of the disk by theta about 0 is w -> (c w + s)/(-s w + c) with angle theta/2.
  const double theta = std::arg(zeta) - kPi;
  m.rc_ = std::cos(theta / 2.0);
  m.rs_ = std::sin(theta / 2.0);
  return m;
}

double HalfPlaneMap::arc_distance(std::size_t k, Complex z) const {
  const std::size_t n = pts_.size();
  if (k == 0 || k == n - 1) {
    // Unbounded intervals: the arcs at point 0 are straight to working precision.
    return segment_distance(to_point(z), pts_[k], pts_[(k + 1) % n]);
  }
  const double a = prev_[k], b = prev_[k + 1];
  constexpr int kSamples = 8;
  int best = 0;
  double best_d = kInf;
  for (int i = 0; i <= kSamples; ++i) {
    const double x = a + (b - a) * i / kSamples;
    const double d = std::abs(base(Complex(x, 0.0)) - z);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  // Golden-section search on the bracketing sample cells.
  double lo = a + (b - a) * std::max(0, best - 1) / kSamples;
  double hi = a + (b - a) * std::min(kSamples, best + 1) / kSamples;
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
  double f1 = std::abs(base(Complex(x1, 0.0)) - z), f2 = std::abs(base(Complex(x2, 0.0)) - z);
  for (int it = 0; it < 24; ++it) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - g * (hi - lo);
      f1 = std::abs(base(Complex(x1, 0.0)) - z);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + g * (hi - lo);
      f2 = std::abs(base(Complex(x2, 0.0)) - z);
    }
  }
  double x = f1 < f2 ? x1 : x2;
  double d = std::min(f1, f2);
  // Gauss-Newton polish: the bracket alone leaves an error quadratic in its width,
  // which dominates once z is much closer to the curve than to the polygon.
  for (int it = 0; it < 6 && d > 0.0; ++it) {
    Complex df;
    const Complex r = base(Complex(x, 0.0), &df) - z;
    const double jj = std::norm(df);
    if (!(jj > 0.0)) break;
    const double xn = std::clamp(x - (std::conj(df) * r).real() / jj, a, b);
    const double dn = std::abs(base(Complex(xn, 0.0)) - z);
    if (!(dn < d)) break;
    x = xn;
    d = dn;
  }
  // f is quantized along the real axis, so the polish stalls a few quanta from the foot
  // point. Below that scale the curve is its tangent line.
  Complex df;
  const Complex r = base(Complex(x, 0.0), &df) - z;
  const double jn = std::abs(df);
  if (jn > 0.0 && std::abs((std::conj(df) * r).real()) / jn <= 1e-6 * dist(pts_[k + 1], pts_[k]))
    d = std::min(d, std::abs((std::conj(df) * r).imag()) / jn);
  return std::min(best_d, d);
}

double HalfPlaneMap::boundary_distance(Complex z) const {
  const Point p = to_point(z);
  const double d_poly = point_index_.nearest(p);
  if (d_poly > 1e3 * accuracy_) return d_poly;
  const double r = d_poly + 2.0 * accuracy_;
  BoundingBox box;
  box.extend({p.x - r, p.y - r});
  box.extend({p.x + r, p.y + r});
  std::vector<std::size_t> cand;
  point_index_.query_box(box, cand);
  std::vector<std::pair<double, std::size_t>> order;
  order.reserve(cand.size());
  for (std::size_t k : cand) order.emplace_back(segment_distance(p, pts_[k], pts_[(k + 1) % pts_.size()]), k);
  std::sort(order.begin(), order.end());
  double best = kInf;
  for (auto [sd, k] : order) {
    if (sd - 2.0 * dev_[k] >= best) continue;
    // Arcs far closer to their chord than to z: the chord distance is exact to 1e-3.
    const double d = dev_[k] <= 1e-3 * sd ? sd : arc_distance(k, z);
    best = std::min(best, d);
  }
  return std::isfinite(best) ? best : d_poly;
}

std::vector<double> HalfPlaneMap::boundary_prevertices() const {
  std::vector<double> out;
  out.reserve(vertex_point_.size());
  for (std::size_t v : vertex_point_) out.push_back(prev_[v]);
  return out;
}

void HalfPlaneMap::finish() {
  domain_hash_ = pml::domain_hash(domain_);
  const std::size_t n = pts_.size();
  // Boundary placement: images of prevertex midpoints against the polygon.
  // Interval k joins points k and k + 1; the two unbounded intervals meet at point 0.
  dev_.assign(n, 0.0);
  parallel_for(n >= 3 ? n - 2 : 0, [&](std::size_t i) {
    const std::size_t k = i + 1;
    const double mid = 0.5 * (prev_[k] + prev_[k + 1]);
    const double d = domain_.distance_to_boundary(to_point(base(Complex(mid, 0.0))));
    dev_[k] = std::isfinite(d) ? d : kInf;
  });
  if (n >= 3) {
    double d0 = 0.0, dl = 0.0;
    for (double step : {1.0, 4.0, 16.0}) {
      d0 = std::max(d0, domain_.distance_to_boundary(to_point(base(prev_[1] - step * (prev_[2] - prev_[1])))));
      dl = std::max(dl, domain_.distance_to_boundary(to_point(base(prev_[n - 1] + step * (prev_[n - 1] - prev_[n - 2])))));
    }
    dev_[0] = d0;
    dev_[n - 1] = dl;
  }
  accuracy_ = *std::max_element(dev_.begin(), dev_.end());
  accuracy_ = std::max(accuracy_, std::abs(f(kI) - to_complex(domain_.basepoint)));
  point_index_ = SegmentIndex(pts_, true);

  seed_w_.clear();
  for (int k = -12; k <= 12; ++k) {
    const double y = std::pow(10.0, k / 4.0);
    for (int j = 0; j < 24; ++j) {
      const double x = y * std::tan(kPi * (j + 0.5) / 24.0 - kPi / 2.0);
      seed_w_.emplace_back(x, y);
    }
  }
  seed_z_.assign(seed_w_.size(), Complex(kInf, kInf));
  parallel_for(seed_w_.size(), [&](std::size_t i) { seed_z_[i] = f(seed_w_[i]); });
  std::vector<Complex> sw, sz;
  for (std::size_t i = 0; i < seed_w_.size(); ++i) {
    if (std::isfinite(seed_z_[i].real()) && std::isfinite(seed_z_[i].imag())) {
      sw.push_back(seed_w_[i]);
      sz.push_back(seed_z_[i]);
    }
  }
  seed_w_ = std::move(sw);
  seed_z_ = std::move(sz);
}

// ---------------------------------------------------------------------------
// Construction

HalfPlaneMap build_riemann_map(const Domain& domain, int resolution) {
  const auto& V = domain.boundary.vertices();
  const std::size_t nv = V.size();
  if (nv > 100000) throw PreconditionError("boundary has more than 1e5 vertices");
  if (resolution < static_cast<int>(nv) || resolution < 8)
    throw PreconditionError("resolution must be at least the vertex count and at least 8");

  HalfPlaneMap m;
  m.domain_ = domain;
  const double per = domain.boundary.perimeter();
  // Densify each edge, clustering points towards both corners. The edge midpoint
  // is always a point, so the composition can start on a flat stretch.
  std::vector<Point> pts;
  std::vector<std::size_t> first;
  std::size_t longest = 0;
  for (std::size_t i = 0; i < nv; ++i) {
    const Point a = V[i], b = V[(i + 1) % nv];
    const double len = dist(a, b);
    if (len > dist(V[longest], V[(longest + 1) % nv])) longest = i;
    const long cnt = 2 * std::max(1L, std::lround(0.5 * resolution * len / per));
    first.push_back(pts.size());
    for (long j = 0; j < cnt; ++j) {
      const double t = static_cast<double>(j) / static_cast<double>(cnt);
      const double g = 0.5 * t + 0.25 * (1.0 - std::cos(kPi * t));
      pts.push_back(a + (b - a) * g);
    }
  }
  const std::size_t n = pts.size();
  // Point 0 goes to infinity: the midpoint of the longest edge.
  const std::size_t start = (first[longest] + (longest + 1 < nv ? first[longest + 1] : n)) / 2;
  m.pts_.resize(n);
  for (std::size_t k = 0; k < n; ++k) m.pts_[k] = pts[(k + start) % n];
  for (std::size_t i = 0; i < nv; ++i) m.vertex_point_.push_back((first[i] + n - start) % n);
  auto vertex_of = [&](std::size_t j) {
    const std::size_t orig = (j + start) % n;
    const auto it = std::upper_bound(first.begin(), first.end(), orig);
    return static_cast<std::size_t>(it - first.begin()) - 1;
  };

  m.p0_ = to_complex(m.pts_[0]);
  m.p1_ = to_complex(m.pts_[1]);
  std::vector<Complex> zeta(n);
  for (std::size_t k = 2; k < n; ++k) zeta[k] = kI * std::sqrt((to_complex(m.pts_[k]) - m.p1_) / (to_complex(m.pts_[k]) - m.p0_));
  std::vector<double> prev(n, 0.0);
  prev[0] = kInf;
  prev[1] = 0.0;
  Complex zb = kI * std::sqrt((to_complex(domain.basepoint) - m.p1_) / (to_complex(domain.basepoint) - m.p0_));

  m.tip_.reserve(n);
  m.ib_.reserve(n);
  m.c_.reserve(n);
  m.ix_.reserve(n);
  m.sh_.reserve(n);
  m.sc_.reserve(n);
  // Each step keeps point 0 at infinity and the basepoint image at i, the frame
  // in which the unzipped prevertices stay well separated.
  double tip = 0.0;
  for (std::size_t j = 2; j < n; ++j) {
    const Complex a = zeta[j] - tip;
    if (!(a.imag() > 0.0) || !std::isfinite(a.real()) || !std::isfinite(a.imag())) {
      throw GeometryError("map construction breaks down at boundary point " + std::to_string(j) +
                          " (edge from vertex " + std::to_string(vertex_of(j)) + ")");
    }
    const double aa = std::norm(a);
    const double ib = a.real() / aa;
    const double c = aa / a.imag();
    const double xinf = slit_real(kInf, ib, c);
    const double ix = std::isinf(xinf) ? 0.0 : 1.0 / xinf;
    auto slit = [&](Complex z) {
      z -= tip;
      const Complex mm = z / (1.0 - z * ib);
      const Complex r = root_up(mm * mm + c * c, mm.real());
      return r / (1.0 - r * ix);
    };
    const Complex zb1 = slit(zb);
    const double sh = zb1.real(), sc = zb1.imag();
    if (!(sc > 0.0) || !std::isfinite(sc)) {
      throw GeometryError("map construction breaks down at boundary point " + std::to_string(j) +
                          " (edge from vertex " + std::to_string(vertex_of(j)) + ")");
    }
    m.tip_.push_back(tip);
    m.ib_.push_back(ib);
    m.c_.push_back(c);
    m.ix_.push_back(ix);
    m.sh_.push_back(sh);
    m.sc_.push_back(sc);
    zb = Complex(0.0, 1.0);
    for (std::size_t k = j + 1; k < n; ++k) zeta[k] = (slit(zeta[k]) - sh) / sc;
    for (std::size_t k = 1; k < j; ++k) {
      const double x = slit_real(prev[k] - tip, ib, c);
      const double den = 1.0 - x * ix;
      const double y = std::isinf(x) ? (ix == 0.0 ? x : -1.0 / ix) : (den == 0.0 ? kInf : x / den);
      prev[k] = (y - sh) / sc;
    }
    tip = -sh / sc;
    prev[j] = tip;
  }
  // The last edge is the vertical line through the tip; squaring opens it.
  m.tip_end_ = tip;
  const Complex qb = zb - tip;
  m.qhint_ = qb.real() >= 0.0 ? 1.0 : -1.0;
  const Complex q2 = qb * qb;
  m.sign_ = q2.imag() > 0.0 ? 1.0 : -1.0;
  const Complex wb = m.sign_ * q2;
  if (!(wb.imag() > 0.0) || !std::isfinite(wb.imag()))
    throw GeometryError("map construction failed to separate the basepoint from the boundary");
  m.scale_ = wb.imag();
  m.shift_ = wb.real();

  m.prev_.assign(n, kInf);
  for (std::size_t k = 1; k < n; ++k) {
    const double q = prev[k] - tip;
    m.prev_[k] = (m.sign_ * q * q - m.shift_) / m.scale_;
  }
  for (std::size_t k = 2; k < n; ++k) {
    if (!(m.prev_[k] > m.prev_[k - 1])) {
      throw GeometryError("prevertices out of order at boundary point " + std::to_string(k) + " (edge from vertex " +
                          std::to_string(vertex_of(k)) + ")");
    }
  }
  m.finish();
  return m;
}

// ---------------------------------------------------------------------------
// Snapshot

namespace {

template <class T>
void put(std::string& out, const T* data, std::size_t count) {
  out.append(reinterpret_cast<const char*>(data), sizeof(T) * count);
}

template <class T>
void get(const std::string& in, std::size_t& pos, T* data, std::size_t count) {
  const std::size_t bytes = sizeof(T) * count;
  if (pos + bytes > in.size()) throw PreconditionError("map snapshot is truncated");
  std::memcpy(data, in.data() + pos, bytes);
  pos += bytes;
}

}  // namespace

std::string HalfPlaneMap::serialize() const {
  nlohmann::ordered_json h;
  h["format"] = "pml-map";
  h["version"] = 1;
  h["domain_hash"] = hex64(domain_hash_);
  h["accuracy"] = accuracy_;
  h["points"] = pts_.size();
  h["vertices"] = vertex_point_.size();
  h["p0"] = {p0_.real(), p0_.imag()};
  h["p1"] = {p1_.real(), p1_.imag()};
  h["tip"] = tip_end_;
  h["sign"] = sign_;
  h["root_hint"] = qhint_;
  h["scale"] = scale_;
  h["shift"] = shift_;
  std::string out = h.dump() + "\n";
  for (const Point& p : pts_) {
    put(out, &p.x, 1);
    put(out, &p.y, 1);
  }
  put(out, prev_.data(), prev_.size());
  for (const auto* v : {&tip_, &ib_, &c_, &ix_, &sh_, &sc_}) put(out, v->data(), v->size());
  for (std::size_t v : vertex_point_) {
    const std::uint64_t x = v;
    put(out, &x, 1);
  }
  return out;
}

HalfPlaneMap HalfPlaneMap::deserialize(const std::string& bytes, const Domain& domain) {
  const std::size_t nl = bytes.find('\n');
  if (nl == std::string::npos) throw PreconditionError("map snapshot has no header");
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(bytes.substr(0, nl));
  } catch (const nlohmann::json::exception& e) {
    throw PreconditionError(std::string("map snapshot header: ") + e.what());
  }
  if (h.value("format", "") != "pml-map") throw PreconditionError("not a map snapshot");
  HalfPlaneMap m;
  m.domain_ = domain;
  if (h.at("domain_hash").get<std::string>() != hex64(pml::domain_hash(domain)))
    throw PreconditionError("map snapshot was built for a different domain");
  const std::size_t n = h.at("points").get<std::size_t>();
  const std::size_t nv = h.at("vertices").get<std::size_t>();
  if (n < 3 || nv != domain.boundary.size()) throw PreconditionError("map snapshot sizes do not match the domain");
  m.p0_ = {h.at("p0")[0].get<double>(), h.at("p0")[1].get<double>()};
  m.p1_ = {h.at("p1")[0].get<double>(), h.at("p1")[1].get<double>()};
  m.tip_end_ = h.at("tip").get<double>();
  m.sign_ = h.at("sign").get<double>();
  m.qhint_ = h.at("root_hint").get<double>();
  m.scale_ = h.at("scale").get<double>();
  m.shift_ = h.at("shift").get<double>();
  std::size_t pos = nl + 1;
  m.pts_.resize(n);
  for (Point& p : m.pts_) {
    get(bytes, pos, &p.x, 1);
    get(bytes, pos, &p.y, 1);
  }
  m.prev_.resize(n);
  get(bytes, pos, m.prev_.data(), n);
  for (auto* v : {&m.tip_, &m.ib_, &m.c_, &m.ix_, &m.sh_, &m.sc_}) {
    v->resize(n - 2);
    get(bytes, pos, v->data(), n - 2);
  }
  m.vertex_point_.resize(nv);
  for (std::size_t& v : m.vertex_point_) {
    std::uint64_t x;
    get(bytes, pos, &x, 1);
    v = static_cast<std::size_t>(x);
  }
  if (pos != bytes.size()) throw PreconditionError("map snapshot has trailing bytes");
  m.finish();
  return m;
}

// ---------------------------------------------------------------------------
// Distortion checks

KoebeReport koebe_check(const HalfPlaneMap& map, const std::vector<Complex>& disk_samples) {
  KoebeReport r;
  for (const Complex& s : disk_samples) {
    if (!(std::abs(s) < 1.0)) throw DomainError("Koebe sample outside the unit disk");
  }
  r.ratios.assign(disk_samples.size(), 0.0);
  parallel_for(disk_samples.size(), [&](std::size_t i) {
    const Complex zeta = disk_samples[i];
    const Complex w = kI * (1.0 + zeta) / (1.0 - zeta);
    const Complex dw = 2.0 * kI / ((1.0 - zeta) * (1.0 - zeta));
    Complex df;
    const Complex z = map.f(w, &df);
    const double dg = std::abs(df * dw);
    r.ratios[i] = boundary_distance(map, z) / (dg * (1.0 - std::norm(zeta)));
  });
  r.samples = disk_samples;
  r.count = r.ratios.size();
  if (r.count) {
    r.min = *std::min_element(r.ratios.begin(), r.ratios.end());
    r.max = *std::max_element(r.ratios.begin(), r.ratios.end());
  }
  return r;
}

double hyperbolic_distance(const HalfPlaneMap& map, Point z1, Point z2) {
  if (!map.domain().contains(z1) || !map.domain().contains(z2))
    throw DomainError("hyperbolic distance needs interior points");
  if (z1 == z2) return 0.0;
  return halfplane_distance(map.preimage(z1), map.preimage(z2));
}

double cauchy_riemann_residual(const HalfPlaneMap& map, const std::vector<Complex>& probes) {
  std::vector<double> res(probes.size(), 0.0);
  parallel_for(probes.size(), [&](std::size_t i) {
    const Complex w = probes[i];
    const double h = 1e-4 * w.imag();
    const Complex fx = (map.f(w + h) - map.f(w - h)) / (2.0 * h);
    const Complex fy = (map.f(w + kI * h) - map.f(w - kI * h)) / (2.0 * h);
    res[i] = std::abs(fy - kI * fx) / std::abs(fx);
  });
  return res.empty() ? 0.0 : *std::max_element(res.begin(), res.end());
}

double distortion_constant(const HalfPlaneMap& map, const std::vector<Complex>& points, double rho_max) {
  std::vector<double> mod(points.size());
  parallel_for(points.size(), [&](std::size_t i) {
    Complex d;
    map.f(points[i], &d);
    mod[i] = std::abs(d);
  });
  double worst = 1.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      if (halfplane_distance(points[i], points[j]) <= rho_max)
        worst = std::max(worst, std::max(mod[i] / mod[j], mod[j] / mod[i]));
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Area integral

namespace {

struct RayPanel {
  double lo, hi;
};

/// Splits [lo, hi] into panels at most doubling in radius, optionally graded towards hi.
void radial_panels(double lo, double hi, double scale, bool grade_end, std::vector<RayPanel>& out) {
  if (!(hi > lo)) return;
  std::vector<RayPanel> pieces;
  double a = lo;
  if (a == 0.0) {
    const double first = std::min(hi, 0.5 * scale);
    pieces.push_back({0.0, first});
    a = first;
  }
  while (a < hi) {
    const double b = std::min(hi, 2.0 * a);
    pieces.push_back({a, b});
    a = b;
  }
  if (grade_end) {
    const RayPanel last = pieces.back();
    pieces.pop_back();
    const double len = last.hi - last.lo;
    double s = last.lo;
    for (int k = 1; k <= 10; ++k) {
      const double e = last.hi - len * std::ldexp(1.0, -k);
      pieces.push_back({s, e});
      s = e;
    }
    pieces.push_back({s, last.hi});
  }
  out.insert(out.end(), pieces.begin(), pieces.end());
}

struct RaySums {
  double full = 0.0;
  double half = 0.0;
  double box = 0.0;
  double weighted = 0.0;
};

}  // namespace

AreaIntegral lemma420_integral(const HalfPlaneMap& map, Complex b, double r_cut, bool strict) {
  const double y = b.imag();
  if (!(y > 0.0)) throw DomainError("area integral needs Im b > 0");
  if (r_cut <= 0.0) r_cut = 64.0 * std::max({y, std::abs(b.real()), 1.0});
  if (r_cut <= 2.0 * y) throw PreconditionError("truncation radius must exceed 2 Im b");
  const Complex fb = map.f(b);
  const auto& g8 = rule8();

  // A ray from b in direction phi, radial extent rho_max (clipped at r_cut),
  // box extent rho_box, angular weight wphi.
  struct Ray {
    double phi, rho_max, rho_box, wphi;
    bool hits_axis;
  };
  std::vector<Ray> rays;
  auto add_rays = [&](double lo, double hi, int panels, auto&& make) {
    for (int p = 0; p < panels; ++p) {
      const double a = lo + (hi - lo) * p / panels, c = lo + (hi - lo) * (p + 1) / panels;
      for (unsigned k = 0; k < 8; ++k) make(0.5 * (a + c) + 0.5 * (c - a) * g8.x[k], 0.5 * (c - a) * g8.w[k]);
    }
  };
  // Upper half: phi in [0, pi], never reaches the axis.
  add_rays(0.0, kPi, 16, [&](double phi, double w) { rays.push_back({phi, r_cut, 0.0, w, false}); });
  // Lower half hitting the axis, parameterized by the hit abscissa Re b + y sinh(u).
  const double u_full = std::asinh(std::sqrt(r_cut * r_cut - y * y) / y);
  const double u_half = std::asinh(std::sqrt(0.25 * r_cut * r_cut - y * y) / y);
  auto lower = [&](double u, double w) {
    const double xi = y * std::sinh(u);
    double phi = std::atan2(-y, xi);
    if (phi < 0.0) phi += 2.0 * kPi;
    const double rho_max = y * std::cosh(u);
    const double rho_box = std::abs(xi) <= y ? rho_max : y * std::cosh(u) / std::abs(std::sinh(u));
    rays.push_back({phi, rho_max, rho_box, w / std::cosh(u), true});
  };
  add_rays(-u_full, -u_half, 4, lower);
  add_rays(-u_half, u_half, 16, lower);
  add_rays(u_half, u_full, 4, lower);
  // Thin sectors next to the axis direction where the ray ends on the cut circle.
  const double phi1 = kPi + std::asin(y / r_cut);
  const double phi2 = 2.0 * kPi - std::asin(y / r_cut);
  auto sector = [&](double phi, double w) {
    const double rho_box = y / std::abs(std::cos(phi));
    rays.push_back({phi, r_cut, rho_box, w, false});
  };
  add_rays(kPi, phi1, 1, sector);
  add_rays(phi2, 2.0 * kPi, 1, sector);

  std::vector<RaySums> sums(rays.size());
  parallel_for(rays.size(), [&](std::size_t i) {
    const Ray& ray = rays[i];
    const Complex dir = std::polar(1.0, ray.phi);
    const double rho_end = std::min(ray.rho_max, r_cut);
    std::vector<RayPanel> panels;
    std::vector<double> breaks = {0.0};
    if (ray.rho_box > 0.0 && ray.rho_box < rho_end) breaks.push_back(ray.rho_box);
    if (0.5 * r_cut < rho_end) breaks.push_back(0.5 * r_cut);
    std::sort(breaks.begin(), breaks.end());
    breaks.push_back(rho_end);
    for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
      const bool last = k + 2 == breaks.size();
      radial_panels(breaks[k], breaks[k + 1], y, last && ray.hits_axis && ray.rho_max <= r_cut, panels);
    }
    RaySums s;
    for (const RayPanel& p : panels) {
      const double mid = 0.5 * (p.lo + p.hi), half = 0.5 * (p.hi - p.lo);
      double acc = 0.0, accw = 0.0;
      for (unsigned k = 0; k < 8; ++k) {
        const double rho = mid + half * g8.x[k];
        const Complex w = b + rho * dir;
        if (!(w.imag() > 0.0)) continue;
        Complex d;
        const Complex z = map.f(w, &d);
        const double g = std::abs(d) / std::abs(z - fb) * rho * g8.w[k] * half;
        if (!std::isfinite(g)) continue;
        acc += g;
        accw += g * 2.0 * y / std::norm(w - std::conj(b));
      }
      s.full += acc;
      s.weighted += accw;
      if (p.hi <= 0.5 * r_cut * (1.0 + 1e-14)) s.half += acc;
      if (ray.rho_box > 0.0 && p.hi <= ray.rho_box * (1.0 + 1e-14)) s.box += acc;
    }
    s.full *= ray.wphi;
    s.half *= ray.wphi;
    s.box *= ray.wphi;
    s.weighted *= ray.wphi;
    sums[i] = s;
  });
  AreaIntegral out;
  out.r_cut = r_cut;
  for (const RaySums& s : sums) {
    out.value += s.full;
    out.value_half += s.half;
    out.box_value += s.box;
    out.weighted_value += s.weighted;
  }
  out.value /= y;
  out.value_half /= y;
  out.box_value /= y;
  out.tail_change = std::abs(out.value - out.value_half) / out.value;
  out.converged = out.tail_change <= kAreaTailTolerance;
  if (strict && !out.converged) {
    throw ResolutionError("area integral tail did not converge: " + format_double(out.value) + " at radius " +
                          format_double(r_cut) + " vs " + format_double(out.value_half) + " at half radius");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Vertical integrals and abscissas

BoxSpec BoxSpec::make(Complex b) {
  if (!(b.imag() > 0.0)) throw DomainError("box needs Im b > 0");
  return BoxSpec{b};
}

namespace {

/// Composite 16-point rule in s with y = height s^3, which absorbs the corner
/// singularities of |f'| at the axis.
double vertical_rule(const HalfPlaneMap& map, double x, double height, int panels) {
  const auto& g = rule16();
  double sum = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double a = static_cast<double>(p) / panels, c = static_cast<double>(p + 1) / panels;
    const double mid = 0.5 * (a + c), half = 0.5 * (c - a);
    for (unsigned k = 0; k < 16; ++k) {
      const double s = mid + half * g.x[k];
      const double yv = height * s * s * s;
      Complex d;
      map.f(Complex(x, yv), &d);
      sum += std::abs(d) * 3.0 * height * s * s * g.w[k] * half;
    }
  }
  return sum;
}

}  // namespace

double vertical_integral(const HalfPlaneMap& map, double x, double height, bool* ok) {
  if (!(height > 0.0)) throw DomainError("vertical integral needs a positive height");
  const double coarse = vertical_rule(map, x, height, 2);
  const double fine = vertical_rule(map, x, height, 4);
  const bool good = std::isfinite(fine) && std::abs(fine - coarse) <= 1e-2 * std::abs(fine);
  if (ok) *ok = good;
  return fine;
}

AbscissaSample good_abscissas(const HalfPlaneMap& map, Complex b, int grid) {
  if (grid < 64) throw PreconditionError("good_abscissas needs grid >= 64");
  AbscissaSample out;
  out.box = BoxSpec::make(b);
  out.d_fb = boundary_distance(map, map.f(b));
  out.grid.resize(static_cast<std::size_t>(grid));
  out.integrals.assign(out.grid.size(), 0.0);
  const double step = out.box.length() / grid;
  for (int k = 0; k < grid; ++k) out.grid[static_cast<std::size_t>(k)] = out.box.lo() + (k + 0.5) * step;
  std::vector<char> ok(out.grid.size(), 0);
  parallel_for(out.grid.size(), [&](std::size_t k) {
    bool good = false;
    out.integrals[k] = vertical_integral(map, out.grid[k], b.imag(), &good);
    ok[k] = good;
  });
  std::vector<double> valid;
  for (std::size_t k = 0; k < out.grid.size(); ++k) {
    if (ok[k]) {
      valid.push_back(out.integrals[k]);
    } else {
      out.integrals[k] = std::numeric_limits<double>::quiet_NaN();
      ++out.failed;
    }
  }
  if (valid.empty()) throw ResolutionError("vertical quadrature failed at every abscissa");
  std::sort(valid.begin(), valid.end());
  const std::size_t rank = static_cast<std::size_t>(std::ceil(0.99 * valid.size())) - 1;
  const double threshold = valid[rank];
  out.C_star_hat = threshold / out.d_fb;
  for (std::size_t k = 0; k < out.grid.size(); ++k) {
    if (ok[k] && out.integrals[k] <= threshold) out.E_sample.push_back(out.grid[k]);
  }
  return out;
}

ScaleRefinement refine_scale(const HalfPlaneMap& map, Complex b, double x, double delta, double c_star, int grid) {
  const BoxSpec box = BoxSpec::make(b);
  if (x < box.lo() || x > box.hi()) throw PreconditionError("refine_scale needs x in I(b)");
  if (!(delta > 0.0 && delta < 0.5)) throw DomainError("delta must lie in (0, 0.5)");
  if (!(c_star > 0.0)) throw DomainError("C* must be positive");
  const double d_b = boundary_distance(map, map.f(b));
  const double target = delta / c_star * d_b;
  if (target < 1e-11 * map.domain().boundary.diameter())
    throw ResolutionError("stopping level " + format_double(target) + " is below floating-point resolution");
  auto D = [&](double yv) { return boundary_distance(map, map.f(Complex(x, yv))); };
  double hi = b.imag();
  double lo = hi;
  ScaleRefinement out;
  if (D(hi) <= target) {
    out.y1 = hi;
  } else {
    const double floor = 1e-14 * b.imag();
    for (;;) {
      lo = hi * std::pow(2.0, -0.25);
      if (lo < floor) throw ResolutionError("stopping level not reached above the resolution floor");
      if (D(lo) <= target) break;
      hi = lo;
    }
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (D(mid) <= target) lo = mid;
      else hi = mid;
    }
    out.y1 = hi;
  }
  out.J_lo = x - out.y1;
  out.J_hi = x + out.y1;
  out.y1_floor = std::exp(-4.0 * c_star * c_star / delta) * b.imag();
  if (out.y1 < out.y1_floor) throw InternalError("refined height fell below its guaranteed floor");
  const double bound = c_star * D(out.y1);
  const double step = 2.0 * out.y1 / grid;
  std::vector<double> ts(static_cast<std::size_t>(grid)), vals(ts.size());
  std::vector<char> ok(ts.size(), 0);
  for (int k = 0; k < grid; ++k) ts[static_cast<std::size_t>(k)] = out.J_lo + (k + 0.5) * step;
  parallel_for(ts.size(), [&](std::size_t k) {
    bool good = false;
    vals[k] = vertical_integral(map, ts[k], out.y1, &good);
    ok[k] = good;
  });
  for (std::size_t k = 0; k < ts.size(); ++k) {
    if (ok[k] && vals[k] <= bound) {
      out.F_sample.push_back(ts[k]);
      out.F_integrals.push_back(vals[k]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cigar paths

namespace {

/// First admissible abscissa of I(t + i s) scanning outwards from the center
/// (left before right): the vertical integral up to `height` must not exceed `bound`.
bool pick_abscissa(const HalfPlaneMap& map, double t, double s, double height, double bound, double* out,
                   double* integral) {
  constexpr int kHalf = 32;
  for (int j = 0; j <= kHalf; ++j) {
    for (int sgn : {-1, 1}) {
      if (j == 0 && sgn == 1) continue;
      const double x = t + sgn * j * s / kHalf;
      bool ok = false;
      const double v = vertical_integral(map, x, height, &ok);
      if (ok && v <= bound) {
        *out = x;
        *integral = v;
        return true;
      }
    }
  }
  return false;
}

void sample_segment(std::vector<Complex>& out, Complex a, Complex b, int count) {
  for (int k = 1; k <= count; ++k) out.push_back(a + (b - a) * (static_cast<double>(k) / count));
}

/// Vertical samples from height y0 down to y1 > 0, geometric.
void sample_vertical(std::vector<Complex>& out, double x, double y0, double y1, int per_octave) {
  const double octaves = std::log2(y0 / y1);
  const int count = std::max(2, static_cast<int>(std::ceil(octaves * per_octave)));
  for (int k = 1; k <= count; ++k) out.emplace_back(x, y0 * std::pow(y1 / y0, static_cast<double>(k) / count));
}

// Refined stopping height at the grid abscissa nearest Re a, from the 64-point
// sample. Every level of a cigar path started at a uses the same ratio to Im a.
double level_height(const HalfPlaneMap& map, Complex a, double delta, const AbscissaSample& E) {
  double x_ref = a.real();
  if (!E.E_sample.empty()) {
    x_ref = *std::min_element(E.E_sample.begin(), E.E_sample.end(), [&](double u, double v) {
      const double du = std::abs(u - a.real()), dv = std::abs(v - a.real());
      return du < dv || (du == dv && u < v);
    });
  }
  return refine_scale(map, a, x_ref, delta, E.C_star_hat).y1;
}

}  // namespace

CigarPath build_cigar_path(const HalfPlaneMap& map, Complex a, double delta, int max_levels,
                           const double* first_abscissa, const std::function<bool(Complex)>& stop) {
  if (!(a.imag() > 0.0)) throw DomainError("cigar path needs Im a > 0");
  if (!(delta > 0.0 && delta < 0.5)) throw DomainError("delta must lie in (0, 0.5)");
  if (max_levels < 1 || max_levels > 30) throw PreconditionError("max_levels must lie in [1, 30]");
  CigarPath path;
  path.delta = delta;
  const AbscissaSample E = good_abscissas(map, a, 64);
  path.C_star_hat = E.C_star_hat;
  path.c_star = 4.0 * E.C_star_hat * E.C_star_hat;
  path.delta_star = std::exp(-path.c_star / delta);
  path.delta_star_used = level_height(map, a, delta, E) / a.imag();

  path.anchors.push_back(a);
  path.distances.push_back(boundary_distance(map, map.f(a)));
  for (int k = 1; k <= max_levels; ++k) {
    const Complex prev = path.anchors.back();
    const double s = prev.imag() * path.delta_star_used;
    const double bound = delta * path.distances.back();
    double t = 0.0, v = 0.0;
    if (k == 1 && first_abscissa) {
      t = *first_abscissa;
      bool ok = false;
      v = vertical_integral(map, t, s, &ok);
      if (!ok || v > bound) throw ResolutionError("forced first abscissa violates the level bound");
    } else if (!pick_abscissa(map, prev.real(), prev.imag(), s, bound, &t, &v)) {
      path.truncated = "no admissible abscissa at level " + std::to_string(k);
      break;
    }
    const double dk = boundary_distance(map, map.f(Complex(t, s)));
    if (dk < 1e-11 * map.domain().boundary.diameter()) {
      path.truncated = "level " + std::to_string(k) + " is below floating-point resolution";
      break;
    }
    path.anchors.emplace_back(t, s);
    path.level_integrals.push_back(v);
    path.level_bounds.push_back(bound);
    path.decay.push_back(dk / path.distances.back());
    path.distances.push_back(dk);
    if (stop && stop(map.f(path.anchors.back()))) break;
  }

  // lambda: horizontal to t_k at height s_{k-1}, then down to s_k; finally down to the axis.
  path.lambda.push_back(a);
  for (std::size_t k = 1; k < path.anchors.size(); ++k) {
    const Complex p = path.anchors[k - 1], q = path.anchors[k];
    sample_segment(path.lambda, p, Complex(q.real(), p.imag()), 32);
    sample_vertical(path.lambda, q.real(), p.imag(), q.imag(), 8);
  }
  const Complex last = path.anchors.back();
  path.x0 = last.real();
  sample_vertical(path.lambda, path.x0, last.imag(), last.imag() * 1e-6, 4);
  path.lambda.emplace_back(path.x0, 0.0);
  path.image.resize(path.lambda.size());
  parallel_for(path.lambda.size(), [&](std::size_t i) { path.image[i] = map.f(path.lambda[i]); });
  path.w0 = path.image.back();

  std::vector<double> len(path.image.size(), 0.0);
  for (std::size_t i = 1; i < len.size(); ++i) len[i] = len[i - 1] + std::abs(path.image[i] - path.image[i - 1]);
  const double total = len.back();
  for (std::size_t i = 0; i + 1 < len.size(); ++i) {
    const double d = boundary_distance(map, path.image[i]);
    // Below this the value of f is roundoff.
    if (d < 1e-10 * map.domain().boundary.diameter()) continue;
    path.cigar_constant = std::max(path.cigar_constant, std::min(len[i], total - len[i]) / d);
  }
  return path;
}

// ---------------------------------------------------------------------------
// Shifted box

ShiftedBox shifted_box(const HalfPlaneMap& map, Complex a, double delta, int grid) {
  if (!(delta > 0.0 && delta < 0.5)) throw DomainError("delta must lie in (0, 0.5)");
  ShiftedBox box;
  box.a = a;
  const double s = a.imag(), c = a.real();
  const AbscissaSample E = good_abscissas(map, a, grid);
  box.d_fa = E.d_fb;
  // Same first level as the cigar path from a, so x3 can start it.
  const double height = level_height(map, a, delta, good_abscissas(map, a, 64));
  const double bound = delta * boundary_distance(map, map.f(a));

  std::vector<double> cand(E.E_sample);
  std::vector<double> vals(cand.size());
  std::vector<char> ok(cand.size());
  parallel_for(cand.size(), [&](std::size_t k) {
    bool good = false;
    vals[k] = vertical_integral(map, cand[k], height, &good);
    ok[k] = good && vals[k] <= bound;
  });
  std::vector<double> admissible;
  for (std::size_t k = 0; k < cand.size(); ++k)
    if (ok[k]) admissible.push_back(cand[k]);

  auto in = [&](double lo, double hi) {
    std::vector<double> out;
    for (double x : admissible)
      if (x > c + lo && x < c + hi) out.push_back(x);
    if (out.empty()) {
      throw ResolutionError("no admissible abscissa in (" + format_double(c + lo) + ", " + format_double(c + hi) + ")");
    }
    return out;
  };
  auto image = [&](double x) { return map.f(Complex(x, 0.0)); };
  {
    const auto xs = in(-s / 8.0, s / 8.0);
    box.x3 = *std::min_element(xs.begin(), xs.end(), [&](double u, double v) {
      const double du = std::abs(u - c), dv = std::abs(v - c);
      return du < dv || (du == dv && u < v);
    });
  }
  box.w3 = image(box.x3);
  // Greedy max-min separation; candidates ascend, so strict improvement keeps the leftmost tie.
  auto best = [&](const std::vector<double>& xs, auto&& score) {
    double arg = xs.front(), val = -1.0;
    for (double x : xs) {
      const double v = score(image(x));
      if (v > val) {
        val = v;
        arg = x;
      }
    }
    return arg;
  };
  box.x1 = best(in(-s, -s / 2.0), [&](Complex w) { return std::abs(w - box.w3); });
  box.w1 = image(box.x1);
  box.x2 = best(in(s / 2.0, s), [&](Complex w) { return std::min(std::abs(w - box.w3), std::abs(w - box.w1)); });
  box.w2 = image(box.x2);
  box.separation =
      std::min({std::abs(box.w1 - box.w3), std::abs(box.w2 - box.w3), std::abs(box.w1 - box.w2)}) / box.d_fa;

  // xi: up from x1, across at height s, down to x2.
  box.xi_path.emplace_back(box.x1, 0.0);
  std::vector<Complex> up;
  sample_vertical(up, box.x1, s, s * 1e-6, 8);
  std::reverse(up.begin(), up.end());
  box.xi_path.insert(box.xi_path.end(), up.begin(), up.end());
  box.xi_path.emplace_back(box.x1, s);
  sample_segment(box.xi_path, Complex(box.x1, s), Complex(box.x2, s), 128);
  sample_vertical(box.xi_path, box.x2, s, s * 1e-6, 8);
  box.xi_path.emplace_back(box.x2, 0.0);
  box.sigma.resize(box.xi_path.size());
  parallel_for(box.xi_path.size(), [&](std::size_t i) { box.sigma[i] = map.f(box.xi_path[i]); });
  double length = 0.0;
  for (std::size_t i = 1; i < box.sigma.size(); ++i) length += std::abs(box.sigma[i] - box.sigma[i - 1]);
  box.length_ratio = length / box.d_fa;

  box.path = build_cigar_path(map, a, delta, 12, &box.x3);
  box.w0 = box.path.w0;
  double dmin = kInf;
  for (std::size_t i = 0; i + 1 < box.sigma.size(); ++i) {
    dmin = std::min(dmin, segment_distance(to_point(box.w0), to_point(box.sigma[i]), to_point(box.sigma[i + 1])));
  }
  box.w0_distance_ratio = dmin / box.d_fa;
  return box;
}

// ---------------------------------------------------------------------------
// Half-level walk along cigar paths

namespace {

/// u extended by 1 on the inner disk and 0 outside the ring.
double extended_value(const PHField& field, const Domain& domain, Complex z) {
  const Point p = to_point(z);
  const int t = field.locator->find(p);
  if (t >= 0) {
    const auto& tri = field.m().triangles[static_cast<std::size_t>(t)];
    const auto bc = field.locator->barycentric(t, p);
    return bc[0] * field.u[static_cast<std::size_t>(tri[0])] + bc[1] * field.u[static_cast<std::size_t>(tri[1])] +
           bc[2] * field.u[static_cast<std::size_t>(tri[2])];
  }
  return dist(p, domain.basepoint) <= domain.inner_radius ? 1.0 : 0.0;
}

}  // namespace

Lemma47Result lemma47_verify(const PHField& field, const HalfPlaneMap& map, Point z1, double delta, int max_levels) {
  const Domain& domain = map.domain();
  if (!domain.in_ring(z1)) throw PreconditionError("z1 must lie in the ring D");
  if (dist(z1, domain.basepoint) < 1.5 * domain.inner_radius)
    throw PreconditionError("z1 must lie outside B(z0, 3 d(z0)/4)");
  Lemma47Result res;
  res.z1 = z1;
  res.u1 = evaluate(field, z1).value;
  if (!(res.u1 > 0.05 && res.u1 < 0.5)) throw PreconditionError("u(z1) must lie in (0.05, 0.5)");
  // Rotate about i so that z1 has a purely imaginary preimage below i.
  const HalfPlaneMap rot = map.normalized_at(z1);
  const Complex a = rot.preimage(z1);
  const double half = 0.5 * res.u1;
  // Levels below the first anchor under u(z1)/2 cannot move the crossing.
  const CigarPath path = build_cigar_path(rot, a, delta, max_levels, nullptr, [&](Complex w) {
    return extended_value(field, domain, w) < half;
  });
  res.levels = path.levels();
  std::vector<double> U(path.image.size());
  for (std::size_t i = 0; i < U.size(); ++i) U[i] = extended_value(field, domain, path.image[i]);
  std::size_t last = U.size();
  for (std::size_t i = U.size(); i-- > 0;) {
    if (U[i] >= half) {
      last = i;
      break;
    }
  }
  if (last + 1 >= U.size()) throw ResolutionError("level u(z1)/2 not attained on the truncated path; extend max_levels");
  Complex lo = path.lambda[last], hi = path.lambda[last + 1];
  for (int it = 0; it < 60; ++it) {
    const Complex mid = 0.5 * (lo + hi);
    if (extended_value(field, domain, rot.f(mid)) >= half) lo = mid;
    else hi = mid;
  }
  res.z_star = to_point(rot.f(lo));
  res.u_star = extended_value(field, domain, to_complex(res.z_star));
  res.rho = halfplane_distance(a, lo);
  return res;
}

}  // namespace pml
