#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pml/fem.hpp"
#include "pml/geometry.hpp"

namespace pml {

using Complex = std::complex<double>;

inline Complex to_complex(Point p) { return {p.x, p.y}; }
inline Point to_point(Complex z) { return {z.real(), z.imag()}; }

/// Conformal map f from the upper half-plane onto a polygonal domain,
/// normalized by f(i) = basepoint and f(infinity) = midpoint of the longest edge.
///
/// The map is a composition of elementary slit maps (geodesic zipper) built
/// from a densified copy of the boundary. Its image is the domain bounded by
/// the densified points joined by the arcs the elementary maps use, which
/// differs from the polygon by at most accuracy().
class HalfPlaneMap {
 public:
  HalfPlaneMap() = default;

  /// f(w) for Im w >= 0; `df` receives f'(w).
  Complex f(Complex w, Complex* df = nullptr) const;
  /// The inverse composition applied to z; no validity check.
  Complex forward(Complex z) const;
  /// f^{-1}(z) refined by Newton; ResolutionError when inversion fails.
  Complex preimage(Point z) const;

  const Domain& domain() const { return domain_; }
  /// Densified boundary points; point 0 is the midpoint of the longest edge.
  const std::vector<Point>& points() const { return pts_; }
  /// Prevertex of each densified point; point 0 sits at +infinity.
  const std::vector<double>& point_prevertices() const { return prev_; }
  /// Prevertices of the polygon vertices, in vertex order.
  std::vector<double> boundary_prevertices() const;
  /// Largest distance from f(midpoint of consecutive prevertices) to the polygon.
  double accuracy() const { return accuracy_; }
  /// Distance to the boundary of the image f(H). Away from the boundary this is
  /// the polygon distance; within reach of the arcs between densified points the
  /// arcs themselves are measured, so that the value is consistent with f at
  /// every scale.
  double boundary_distance(Complex z) const;
  int resolution() const { return static_cast<int>(pts_.size()); }
  /// Hash of the domain polygon and basepoint.
  std::uint64_t domain_hash() const { return domain_hash_; }

  /// Same map precomposed with the rotation about i that gives z1 a purely
  /// imaginary preimage i s with s <= 1. Prevertex accessors keep referring
  /// to the unrotated map.
  HalfPlaneMap normalized_at(Point z1) const;

  /// Binary snapshot with a one-line JSON header.
  std::string serialize() const;
  static HalfPlaneMap deserialize(const std::string& bytes, const Domain& domain);

  friend HalfPlaneMap build_riemann_map(const Domain& domain, int resolution);

 private:
  Domain domain_;
  std::vector<Point> pts_;
  std::vector<std::size_t> vertex_point_;
  std::vector<double> prev_;
  // Step j: z -> z - tip, the slit map z -> sqrt((z / (1 - z ib))^2 + c^2),
  // z -> z / (1 - z ix) returning point 0 to infinity, then z -> (z - sh) / sc
  // returning the basepoint image to i.
  std::vector<double> tip_, ib_, c_, ix_, sh_, sc_;
  Complex p0_, p1_;
  // Closing map z -> sign (z - tip_end)^2.
  double tip_end_ = 0.0;
  double sign_ = 1.0;
  double qhint_ = 1.0;
  // Precomposed rotation about i.
  double rc_ = 1.0;
  double rs_ = 0.0;
  // Final real affine normalization w -> (w - shift) / scale.
  double scale_ = 1.0;
  double shift_ = 0.0;
  double accuracy_ = 0.0;
  std::uint64_t domain_hash_ = 0;
  std::vector<double> dev_;
  SegmentIndex point_index_;
  // Coarse preimage table for Newton restarts.
  std::vector<Complex> seed_w_;
  std::vector<Complex> seed_z_;

  void finish();
  double arc_distance(std::size_t k, Complex z) const;
  /// f without the rotation about i; prevertices live in this frame.
  Complex base(Complex wt, Complex* df = nullptr) const;
  Complex newton(Complex z, Complex w0, bool* ok) const;
};

/// Builds the map from the boundary densified to about `resolution` points,
/// graded towards the polygon corners. GeometryError names the vertex where
/// the composition breaks down.
HalfPlaneMap build_riemann_map(const Domain& domain, int resolution);

/// Hyperbolic distance in the upper half-plane for the metric |dw| / (2 Im w),
/// the normalization under which the unit-disk density is 1 / (1 - |z|^2).
double halfplane_distance(Complex w1, Complex w2);

// ---------------------------------------------------------------------------
// Distortion checks

struct KoebeReport {
  double min = 0.0;
  double max = 0.0;
  std::size_t count = 0;
  std::vector<double> ratios;
  /// Disk samples the ratios belong to.
  std::vector<Complex> samples;
};

/// d(g(z), boundary) / (|g'(z)| (1 - |z|^2)) for g = f composed with the Cayley
/// map of the unit disk onto the half-plane (0 -> i).
KoebeReport koebe_check(const HalfPlaneMap& map, const std::vector<Complex>& disk_samples);

inline constexpr double kKoebeSlack = 0.1;
inline bool koebe_pass(const KoebeReport& r) {
  return r.min >= 0.25 * (1.0 - kKoebeSlack) && r.max <= 1.0 + kKoebeSlack;
}

/// Hyperbolic distance of the domain between two interior points.
double hyperbolic_distance(const HalfPlaneMap& map, Point z1, Point z2);

/// Largest relative Cauchy-Riemann residual of finite differences of f at the probes.
double cauchy_riemann_residual(const HalfPlaneMap& map, const std::vector<Complex>& probes);

/// Largest |f'(w2)| / |f'(w1)| over pairs of the given half-plane points
/// within hyperbolic distance `rho_max` of each other.
double distortion_constant(const HalfPlaneMap& map, const std::vector<Complex>& points, double rho_max = 1.0);

// ---------------------------------------------------------------------------
// Area integral

struct AreaIntegral {
  /// Integral of |f'(w)| / |f(w) - f(b)| over the half-plane inside |w - b| <= r_cut, over Im b.
  double value = 0.0;
  /// Same with r_cut / 2.
  double value_half = 0.0;
  double r_cut = 0.0;
  /// |value - value_half| / value.
  double tail_change = 0.0;
  bool converged = false;
  /// Over the box Q(b) only, divided by Im b.
  double box_value = 0.0;
  /// With the conformal weight 2 Im b / |w - conj b|^2, i.e. the unit-disk form
  /// of the integral; bounded for every univalent map. Not divided by Im b.
  double weighted_value = 0.0;
};

inline constexpr double kAreaTailTolerance = 0.05;

/// r_cut <= 0 selects 64 max(Im b, |Re b|, 1). With `strict`, a tail change
/// above 5% raises ResolutionError reporting both values.
AreaIntegral lemma420_integral(const HalfPlaneMap& map, Complex b, double r_cut = 0.0, bool strict = true);

// ---------------------------------------------------------------------------
// Boxes, abscissas and paths

struct BoxSpec {
  Complex b;

  double lo() const { return b.real() - b.imag(); }
  double hi() const { return b.real() + b.imag(); }
  double length() const { return 2.0 * b.imag(); }
  static BoxSpec make(Complex b);
};

/// Integral of |f'(x + iy)| over 0 < y < height.
double vertical_integral(const HalfPlaneMap& map, double x, double height, bool* ok = nullptr);

struct AbscissaSample {
  BoxSpec box;
  std::vector<double> grid;
  /// Vertical integral up to Im b at each grid abscissa (NaN where flagged).
  std::vector<double> integrals;
  std::vector<double> E_sample;
  double C_star_hat = 0.0;
  double d_fb = 0.0;
  std::size_t failed = 0;
};

/// Grid abscissas at cell midpoints of I(b); grid >= 64.
AbscissaSample good_abscissas(const HalfPlaneMap& map, Complex b, int grid);

struct ScaleRefinement {
  double y1 = 0.0;
  double J_lo = 0.0;
  double J_hi = 0.0;
  /// Abscissas of J whose vertical integral up to y1 is at most c_star d(f(x + i y1)).
  std::vector<double> F_sample;
  std::vector<double> F_integrals;
  /// e^{-4 c_star^2 / delta} Im b, the guaranteed lower bound for y1 (may underflow to 0).
  double y1_floor = 0.0;
};

ScaleRefinement refine_scale(const HalfPlaneMap& map, Complex b, double x, double delta, double c_star,
                             int grid = 64);

struct CigarPath {
  /// a_0 = a, a_k = t_k + i s_k.
  std::vector<Complex> anchors;
  double delta = 0.2;
  /// e^{-c*/delta} with c* = 4 C*^2 (usually underflows).
  double delta_star = 0.0;
  /// Ratio s_k / s_{k-1} actually used: the first refined stopping height over Im a.
  double delta_star_used = 0.0;
  double c_star = 0.0;
  double C_star_hat = 0.0;
  /// d(f(a_k), boundary) per anchor.
  std::vector<double> distances;
  /// distances[k + 1] / distances[k].
  std::vector<double> decay;
  /// Vertical integral of each level and its bound delta d(f(a_{k-1})).
  std::vector<double> level_integrals;
  std::vector<double> level_bounds;
  /// Half-plane polyline lambda and its image tau.
  std::vector<Complex> lambda;
  std::vector<Complex> image;
  double x0 = 0.0;
  Complex w0;
  double cigar_constant = 0.0;
  /// Set when the path stopped before max_levels; names the reason.
  std::string truncated;

  std::size_t levels() const { return anchors.empty() ? 0 : anchors.size() - 1; }
};

/// `first_abscissa` forces t_1 (it must satisfy the level-1 bound). `stop`, when set,
/// sees the image of each new anchor and ends the path early by returning true.
CigarPath build_cigar_path(const HalfPlaneMap& map, Complex a, double delta, int max_levels,
                           const double* first_abscissa = nullptr,
                           const std::function<bool(Complex)>& stop = nullptr);

struct ShiftedBox {
  Complex a;
  double x1 = 0.0, x2 = 0.0, x3 = 0.0;
  std::vector<Complex> xi_path;
  std::vector<Complex> sigma;
  Complex w1, w2, w3;
  double d_fa = 0.0;
  double length_ratio = 0.0;
  /// min(|w1 - w3|, |w2 - w3|, |w1 - w2|) / d(f(a)).
  double separation = 0.0;
  Complex w0;
  double w0_distance_ratio = 0.0;
  CigarPath path;
};

ShiftedBox shifted_box(const HalfPlaneMap& map, Complex a, double delta, int grid = 128);

struct Lemma47Result {
  Point z1;
  Point z_star;
  double u1 = 0.0;
  double u_star = 0.0;
  double rho = 0.0;
  std::size_t levels = 0;
};

/// Walks the cigar path from the preimage of z1 and returns the last point
/// where u drops to u(z1) / 2.
Lemma47Result lemma47_verify(const PHField& field, const HalfPlaneMap& map, Point z1, double delta = 0.2,
                             int max_levels = 12);

}  // namespace pml
