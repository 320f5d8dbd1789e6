#pragma once

#include <array>
#include <memory>
#include <vector>

#include "pml/geometry.hpp"
#include "pml/mesh.hpp"

namespace pml {

struct SolverConfig {
  /// Final regularization; the solver continues from 1e-2 down to this value.
  double epsilon = 1e-8;
  /// Max-norm of the free-node energy gradient (energy divided by p).
  double newton_tol = 1e-10;
  int max_iters = 100;
  /// Step reduction factor of the backtracking line search.
  double damping = 0.5;
  /// Number of epsilon stages between 1e-2 and epsilon; 0 means one per decade.
  int continuation_steps = 0;
};

/// Bucket grid over triangles. Point queries return the lowest-index
/// triangle containing the point.
class TriangleLocator {
 public:
  explicit TriangleLocator(const Mesh& mesh);

  /// -1 when the point is outside the mesh.
  int find(Point z) const;
  /// Barycentric coordinates of z in triangle t.
  std::array<double, 3> barycentric(int t, Point z) const;
  /// Triangles whose bounding boxes meet the disk B(c, r), in increasing index order.
  void query_disk(Point c, double r, std::vector<int>& out) const;

 private:
  const Mesh* mesh_;
  BoundingBox box_;
  double cell_ = 1.0;
  int nx_ = 1;
  int ny_ = 1;
  std::vector<std::vector<int>> cells_;
};

struct PHField {
  std::shared_ptr<const Mesh> mesh;
  std::shared_ptr<const TriangleLocator> locator;
  double p = 2.0;
  double epsilon = 0.0;
  /// Final Newton residual (max-norm, energy / p).
  double residual = 0.0;
  /// Regularized energy sum_T area (eps^2 + |grad u|^2)^{p/2}.
  double energy = 0.0;
  int newton_iterations = 0;
  std::vector<double> u;
  std::vector<Point> grad;

  const Mesh& m() const { return *mesh; }
};

/// Minimizes the regularized p-Dirichlet energy with capacitary data
/// (u = 1 on the inner circle, 0 on the outer boundary).
PHField solve_p_capacitary(std::shared_ptr<const Mesh> mesh, double p, const SolverConfig& cfg = {});

/// Rebuilds gradients, energy and the locator from nodal values (snapshot loading).
PHField field_from_values(std::shared_ptr<const Mesh> mesh, double p, double epsilon, double residual,
                          std::vector<double> u);

struct FieldSample {
  double value = 0.0;
  Point gradient;
  int triangle = -1;
};

/// FNV-1a over the mesh hash and the nodal values.
std::uint64_t field_hash(const PHField& field);

/// Piecewise-linear value and per-triangle gradient; DomainError outside the mesh.
FieldSample evaluate(const PHField& field, Point z);

struct RatioStats {
  std::size_t retained = 0;
  std::size_t discarded = 0;
  double min = 0.0;
  double max = 0.0;
  /// Quantiles at 0.1, 0.25, 0.5, 0.75, 0.9.
  std::array<double, 5> quantiles{};
  std::vector<double> values;
};

inline constexpr std::array<double, 5> kSummaryLevels = {0.1, 0.25, 0.5, 0.75, 0.9};

/// R(z) = |grad u| d(z) / u over samples at least two local mesh sizes from the boundary.
RatioStats theorem2_ratio(const PHField& field, const Domain& domain, const std::vector<Point>& samples);

/// max u / min u over the closed ball; requires B(center, 2 radius) inside D.
double harnack_ratio(const PHField& field, const Domain& domain, const Ball& ball);

/// Least-squares slope of log max_{B(w,s)} u against log s for s in [r/8, r].
double boundary_decay_probe(const PHField& field, const Domain& domain, Point w, double r);

/// Maximum of u over the closed ball intersected with the mesh (nodes plus
/// interpolated samples on the circle). Returns 0 when the ball misses D.
double max_over_ball(const PHField& field, Point c, double r);

}  // namespace pml
