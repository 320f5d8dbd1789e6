#include "pml/fem.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "pml/error.hpp"
#include "pml/io.hpp"
#include "pml/parallel.hpp"

namespace pml {

// ---------------------------------------------------------------------------
// Locator

TriangleLocator::TriangleLocator(const Mesh& mesh) : mesh_(&mesh) {
  for (const Point& p : mesh.nodes) box_.extend(p);
  const std::size_t nt = std::max<std::size_t>(1, mesh.triangle_count());
  const double area = std::max(box_.width() * box_.height(), 1e-300);
  cell_ = std::max(std::sqrt(area / static_cast<double>(nt)) * 2.0, 1e-12);
  nx_ = std::max(1, static_cast<int>(std::ceil(box_.width() / cell_)));
  ny_ = std::max(1, static_cast<int>(std::ceil(box_.height() / cell_)));
  cells_.assign(static_cast<std::size_t>(nx_) * ny_, {});
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    BoundingBox b;
    for (int v : mesh.triangles[t]) b.extend(mesh.nodes[v]);
    const int x0 = std::clamp(static_cast<int>((b.lo.x - box_.lo.x) / cell_), 0, nx_ - 1);
    const int x1 = std::clamp(static_cast<int>((b.hi.x - box_.lo.x) / cell_), 0, nx_ - 1);
    const int y0 = std::clamp(static_cast<int>((b.lo.y - box_.lo.y) / cell_), 0, ny_ - 1);
    const int y1 = std::clamp(static_cast<int>((b.hi.y - box_.lo.y) / cell_), 0, ny_ - 1);
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) cells_[static_cast<std::size_t>(y) * nx_ + x].push_back(static_cast<int>(t));
  }
}

std::array<double, 3> TriangleLocator::barycentric(int t, Point z) const {
  const auto& T = mesh_->triangles[t];
  const Point a = mesh_->nodes[T[0]], b = mesh_->nodes[T[1]], c = mesh_->nodes[T[2]];
  const double twice = cross(b - a, c - a);
  return {cross(b - z, c - z) / twice, cross(c - z, a - z) / twice, cross(a - z, b - z) / twice};
}

int TriangleLocator::find(Point z) const {
  if (!is_finite(z)) return -1;
  const double slack = 1e-12 * cell_;
  if (z.x < box_.lo.x - slack || z.x > box_.hi.x + slack || z.y < box_.lo.y - slack || z.y > box_.hi.y + slack)
    return -1;
  const int x = std::clamp(static_cast<int>((z.x - box_.lo.x) / cell_), 0, nx_ - 1);
  const int y = std::clamp(static_cast<int>((z.y - box_.lo.y) / cell_), 0, ny_ - 1);
  for (int t : cells_[static_cast<std::size_t>(y) * nx_ + x]) {
    const auto l = barycentric(t, z);
    if (l[0] >= -1e-12 && l[1] >= -1e-12 && l[2] >= -1e-12) return t;
  }
  return -1;
}

void TriangleLocator::query_disk(Point c, double r, std::vector<int>& out) const {
  out.clear();
  const int x0 = std::clamp(static_cast<int>(std::floor((c.x - r - box_.lo.x) / cell_)), 0, nx_ - 1);
  const int x1 = std::clamp(static_cast<int>(std::floor((c.x + r - box_.lo.x) / cell_)), 0, nx_ - 1);
  const int y0 = std::clamp(static_cast<int>(std::floor((c.y - r - box_.lo.y) / cell_)), 0, ny_ - 1);
  const int y1 = std::clamp(static_cast<int>(std::floor((c.y + r - box_.lo.y) / cell_)), 0, ny_ - 1);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const auto& cell = cells_[static_cast<std::size_t>(y) * nx_ + x];
      out.insert(out.end(), cell.begin(), cell.end());
    }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
}

// ---------------------------------------------------------------------------
// Solver

namespace {

struct Element {
  double area;
  std::array<Point, 3> grad_phi;
};

std::vector<Element> element_data(const Mesh& m) {
  std::vector<Element> e(m.triangle_count());
  for (std::size_t t = 0; t < e.size(); ++t) {
    const auto& T = m.triangles[t];
    const double A = m.area(t);
    e[t].area = A;
    for (int k = 0; k < 3; ++k) {
      const Point a = m.nodes[T[(k + 1) % 3]], b = m.nodes[T[(k + 2) % 3]];
      e[t].grad_phi[k] = Point{a.y - b.y, b.x - a.x} / (2.0 * A);
    }
  }
  return e;
}

Point element_gradient(const Mesh& m, const Element& e, std::size_t t, const std::vector<double>& u) {
  const auto& T = m.triangles[t];
  return e.grad_phi[0] * u[T[0]] + e.grad_phi[1] * u[T[1]] + e.grad_phi[2] * u[T[2]];
}

class Newton {
 public:
  Newton(const Mesh& m, const SolverConfig& cfg) : m_(m), cfg_(cfg), elems_(element_data(m)) {
    free_.assign(m.node_count(), -1);
    for (std::size_t i = 0; i < m.node_count(); ++i)
      if (m.tags[i] == NodeTag::kInterior) free_[i] = nfree_++;
    if (nfree_ == 0) throw GeometryError("ring mesh has no interior nodes");
    build_pattern();
  }

  double energy(const std::vector<double>& u, double p, double eps) const {
    std::vector<double> per(elems_.size());
    parallel_for(elems_.size(), [&](std::size_t t) {
      const Point g = element_gradient(m_, elems_[t], t, u);
      per[t] = elems_[t].area * std::pow(eps * eps + dot(g, g), 0.5 * p);
    });
    double sum = 0.0;
    for (double v : per) sum += v;
    return sum;
  }

  // Returns the max-norm residual; fills the gradient and Hessian values.
  double assemble(const std::vector<double>& u, double p, double eps, Eigen::VectorXd& G) {
    const std::size_t nt = elems_.size();
    local_g_.resize(nt * 3);
    local_h_.resize(nt * 9);
    parallel_for(nt, [&](std::size_t t) {
      const Element& e = elems_[t];
      const Point g = element_gradient(m_, e, t, u);
      const double w = eps * eps + dot(g, g);
      const double a = std::pow(w, 0.5 * p - 1.0);
      const double b = (p - 2.0) * std::pow(w, 0.5 * p - 2.0);
      double gd[3];
      for (int k = 0; k < 3; ++k) {
        gd[k] = dot(g, e.grad_phi[k]);
        local_g_[t * 3 + k] = e.area * a * gd[k];
      }
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l)
          local_h_[t * 9 + k * 3 + l] = e.area * (a * dot(e.grad_phi[k], e.grad_phi[l]) + b * gd[k] * gd[l]);
    });
    G.setZero(nfree_);
    double* vals = H_.valuePtr();
    std::fill(vals, vals + H_.nonZeros(), 0.0);
    for (std::size_t t = 0; t < nt; ++t) {
      const auto& T = m_.triangles[t];
      for (int k = 0; k < 3; ++k) {
        const int i = free_[T[k]];
        if (i < 0) continue;
        G[i] += local_g_[t * 3 + k];
        for (int l = 0; l < 3; ++l) {
          const int slot = slots_[t * 9 + k * 3 + l];
          if (slot >= 0) vals[slot] += local_h_[t * 9 + k * 3 + l];
        }
      }
    }
    return G.lpNorm<Eigen::Infinity>();
  }

  // Runs Newton at fixed (p, eps) until the residual drops below tol.
  double run(std::vector<double>& u, double p, double eps, double tol, int* iterations) {
    Eigen::VectorXd G;
    double residual = assemble(u, p, eps, G);
    for (int it = 0; it < cfg_.max_iters; ++it) {
      if (residual <= tol) return residual;
      solver_.factorize(H_);
      if (solver_.info() != Eigen::Success) throw SolverError("Hessian factorization failed", residual);
      const Eigen::VectorXd step = solver_.solve(-G);
      const double e0 = energy(u, p, eps);
      std::vector<double> trial(u);
      double t = 1.0;
      bool accepted = false;
      for (int k = 0; k < 60; ++k) {
        for (std::size_t i = 0; i < u.size(); ++i)
          if (free_[i] >= 0) trial[i] = u[i] + t * step[free_[i]];
        const double e1 = energy(trial, p, eps);
        if (std::isfinite(e1) && e1 <= e0 + 1e-15 * std::abs(e0)) {
          accepted = true;
          break;
        }
        t *= cfg_.damping;
      }
      if (!accepted) {
        std::ostringstream os;
        os << "line search stalled at p = " << p << ", eps = " << eps;
        throw SolverError(os.str(), residual);
      }
      u.swap(trial);
      ++*iterations;
      residual = assemble(u, p, eps, G);
    }
    if (residual <= tol) return residual;
    std::ostringstream os;
    os << "Newton did not converge in " << cfg_.max_iters << " iterations at p = " << p << ", eps = " << eps
       << " (residual " << residual << ")";
    throw SolverError(os.str(), residual);
  }

 private:
  const Mesh& m_;
  SolverConfig cfg_;
  std::vector<Element> elems_;
  std::vector<int> free_;
  int nfree_ = 0;
  Eigen::SparseMatrix<double> H_;
  std::vector<int> slots_;
  std::vector<double> local_g_, local_h_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower> solver_;

  void build_pattern() {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(m_.triangle_count() * 9);
    for (const auto& T : m_.triangles)
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l)
          if (free_[T[k]] >= 0 && free_[T[l]] >= 0) trip.emplace_back(free_[T[k]], free_[T[l]], 1.0);
    H_.resize(nfree_, nfree_);
    H_.setFromTriplets(trip.begin(), trip.end());
    H_.makeCompressed();
    slots_.assign(m_.triangle_count() * 9, -1);
    const int* outer = H_.outerIndexPtr();
    const int* inner = H_.innerIndexPtr();
    for (std::size_t t = 0; t < m_.triangle_count(); ++t) {
      const auto& T = m_.triangles[t];
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l) {
          const int row = free_[T[k]], col = free_[T[l]];
          if (row < 0 || col < 0) continue;
          const int* pos = std::lower_bound(inner + outer[col], inner + outer[col + 1], row);
          slots_[t * 9 + k * 3 + l] = static_cast<int>(pos - inner);
        }
    }
    solver_.analyzePattern(H_);
  }
};

std::vector<Point> all_gradients(const Mesh& m, const std::vector<double>& u) {
  const auto elems = element_data(m);
  std::vector<Point> g(m.triangle_count());
  for (std::size_t t = 0; t < g.size(); ++t) g[t] = element_gradient(m, elems[t], t, u);
  return g;
}

}  // namespace

PHField field_from_values(std::shared_ptr<const Mesh> mesh, double p, double epsilon, double residual,
                          std::vector<double> u) {
  if (u.size() != mesh->node_count()) throw PreconditionError("field values do not match the mesh node count");
  PHField f;
  f.p = p;
  f.epsilon = epsilon;
  f.residual = residual;
  f.u = std::move(u);
  f.grad = all_gradients(*mesh, f.u);
  for (std::size_t t = 0; t < f.grad.size(); ++t)
    f.energy += mesh->area(t) * std::pow(epsilon * epsilon + dot(f.grad[t], f.grad[t]), 0.5 * p);
  f.locator = std::make_shared<TriangleLocator>(*mesh);
  f.mesh = std::move(mesh);
  return f;
}

PHField solve_p_capacitary(std::shared_ptr<const Mesh> mesh, double p, const SolverConfig& cfg) {
  if (!(p > 1.0) || !std::isfinite(p)) throw DomainError("exponent p must satisfy 1 < p < infinity");
  if (!(cfg.epsilon >= 1e-10 && cfg.epsilon <= 1e-2)) throw PreconditionError("epsilon must lie in [1e-10, 1e-2]");
  if (!(cfg.newton_tol > 0.0)) throw PreconditionError("newton_tol must be positive");
  if (!(cfg.damping > 0.0 && cfg.damping < 1.0)) throw PreconditionError("damping must lie in (0, 1)");
  if (cfg.max_iters < 1) throw PreconditionError("max_iters must be positive");
  const Mesh& m = *mesh;
  std::vector<double> u(m.node_count(), 0.0);
  for (std::size_t i = 0; i < u.size(); ++i)
    if (m.tags[i] == NodeTag::kInnerCircle) u[i] = 1.0;

  Newton newton(m, cfg);
  int iterations = 0;
  const double eps0 = 1e-2;
  const double loose = std::max(cfg.newton_tol, 1e-7);
  // The p = 2 problem is linear; it seeds every continuation.
  newton.run(u, 2.0, eps0, loose, &iterations);
  if (std::abs(p - 2.0) > 0.5) {
    const double dir = p > 2.0 ? 1.0 : -1.0;
    for (double q = 2.0 + 0.25 * dir; dir * (p - q) > 1e-12; q += 0.25 * dir)
      newton.run(u, q, eps0, loose, &iterations);
  }
  int stages = cfg.continuation_steps;
  if (stages <= 0) stages = std::max(1, static_cast<int>(std::ceil(std::log10(eps0 / cfg.epsilon) - 1e-9)));
  double residual = 0.0;
  for (int k = 0; k <= stages; ++k) {
    const double eps = k == stages ? cfg.epsilon : eps0 * std::pow(cfg.epsilon / eps0, static_cast<double>(k) / stages);
    residual = newton.run(u, p, eps, k == stages ? cfg.newton_tol : loose, &iterations);
  }
  PHField f = field_from_values(std::move(mesh), p, cfg.epsilon, residual, std::move(u));
  f.newton_iterations = iterations;
  return f;
}

std::uint64_t field_hash(const PHField& field) {
  std::uint64_t h = field.m().hash();
  for (double v : field.u) h = fnv1a(std::string_view(reinterpret_cast<const char*>(&v), sizeof v), h);
  return h;
}

// ---------------------------------------------------------------------------
// Diagnostics

FieldSample evaluate(const PHField& field, Point z) {
  const int t = field.locator->find(z);
  if (t < 0) {
    std::ostringstream os;
    os << "point (" << z.x << ", " << z.y << ") is outside the ring mesh";
    throw DomainError(os.str());
  }
  const auto l = field.locator->barycentric(t, z);
  const auto& T = field.m().triangles[t];
  FieldSample s;
  s.triangle = t;
  s.gradient = field.grad[t];
  // Exact nodal values at vertices.
  for (int k = 0; k < 3; ++k)
    if (field.m().nodes[T[k]] == z) {
      s.value = field.u[T[k]];
      return s;
    }
  s.value = l[0] * field.u[T[0]] + l[1] * field.u[T[1]] + l[2] * field.u[T[2]];
  return s;
}

namespace {

double sorted_quantile(const std::vector<double>& v, double q) {
  if (v.empty()) return 0.0;
  const double pos = q * static_cast<double>(v.size() - 1);
  const std::size_t i = static_cast<std::size_t>(pos);
  if (i + 1 >= v.size()) return v.back();
  return v[i] + (pos - static_cast<double>(i)) * (v[i + 1] - v[i]);
}

struct Extrema {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  std::size_t count = 0;
};

Extrema ball_extrema(const PHField& field, Point c, double r) {
  Extrema e;
  auto take = [&e](double v) {
    e.lo = std::min(e.lo, v);
    e.hi = std::max(e.hi, v);
    ++e.count;
  };
  std::vector<int> tris;
  field.locator->query_disk(c, r, tris);
  const Mesh& m = field.m();
  std::vector<int> nodes;
  for (int t : tris)
    for (int v : m.triangles[t])
      if (dist(m.nodes[v], c) <= r) nodes.push_back(v);
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  for (int v : nodes) take(field.u[v]);
  constexpr int kCircle = 64;
  for (int k = 0; k < kCircle; ++k) {
    const double th = 2.0 * std::numbers::pi * k / kCircle;
    const Point z = c + Point{r * std::cos(th), r * std::sin(th)};
    const int t = field.locator->find(z);
    if (t < 0) continue;
    const auto l = field.locator->barycentric(t, z);
    const auto& T = m.triangles[t];
    take(l[0] * field.u[T[0]] + l[1] * field.u[T[1]] + l[2] * field.u[T[2]]);
  }
  return e;
}

}  // namespace

double max_over_ball(const PHField& field, Point c, double r) {
  const Extrema e = ball_extrema(field, c, r);
  return e.count == 0 ? 0.0 : std::max(0.0, e.hi);
}

RatioStats theorem2_ratio(const PHField& field, const Domain& domain, const std::vector<Point>& samples) {
  RatioStats s;
  for (const Point& z : samples) {
    if (!domain.in_ring(z)) {
      ++s.discarded;
      continue;
    }
    const int t = field.locator->find(z);
    if (t < 0) {
      ++s.discarded;
      continue;
    }
    const double d = domain.distance_to_boundary(z);
    if (d < 2.0 * field.m().diameter(t)) {
      ++s.discarded;
      continue;
    }
    const FieldSample f = evaluate(field, z);
    if (!(f.value > 0.0)) {
      ++s.discarded;
      continue;
    }
    const double R = norm(f.gradient) * d / f.value;
    if (!std::isfinite(R) || !(R > 0.0)) {
      ++s.discarded;
      continue;
    }
    s.values.push_back(R);
  }
  s.retained = s.values.size();
  if (s.values.empty()) throw ResolutionError("no sample lies at least two mesh sizes from the boundary");
  std::vector<double> sorted(s.values);
  std::sort(sorted.begin(), sorted.end());
  s.min = sorted.front();
  s.max = sorted.back();
  for (std::size_t k = 0; k < kSummaryLevels.size(); ++k) s.quantiles[k] = sorted_quantile(sorted, kSummaryLevels[k]);
  return s;
}

double harnack_ratio(const PHField& field, const Domain& domain, const Ball& ball) {
  if (!(ball.radius > 0.0)) throw DomainError("ball radius must be positive");
  const double room = std::min(domain.distance_to_boundary(ball.center),
                               dist(ball.center, domain.basepoint) - domain.inner_radius);
  if (!domain.in_ring(ball.center) || room < 2.0 * ball.radius)
    throw PreconditionError("Harnack ball: B(center, 2 radius) must lie in the ring");
  const Extrema e = ball_extrema(field, ball.center, ball.radius);
  if (e.count == 0 || !(e.lo > 0.0)) throw ResolutionError("Harnack ball contains no positive samples");
  return e.hi / e.lo;
}

double boundary_decay_probe(const PHField& field, const Domain& domain, Point w, double r) {
  if (!(r > 0.0)) throw DomainError("probe radius must be positive");
  if (dist(w, domain.basepoint) - domain.inner_radius <= 4.0 * r)
    throw PreconditionError("probe ball B(w, 4r) reaches the inner circle");
  std::vector<int> tris;
  field.locator->query_disk(w, r / 8.0, tris);
  double local = 0.0;
  for (int t : tris) {
    bool near = false;
    for (int v : field.m().triangles[t]) near = near || dist(field.m().nodes[v], w) <= r / 8.0;
    if (near) local = std::max(local, field.m().diameter(t));
  }
  if (local == 0.0 || r / 8.0 < 2.0 * local) {
    std::ostringstream os;
    os << "probe window r/8 = " << r / 8.0 << " is below twice the local mesh size " << local;
    throw ResolutionError(os.str());
  }
  constexpr int kLevels = 7;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int k = 0; k < kLevels; ++k) {
    const double s = r * std::pow(2.0, -3.0 * k / (kLevels - 1));
    const double mx = max_over_ball(field, w, s);
    if (!(mx > 0.0)) throw ResolutionError("probe ball carries no positive values");
    const double x = std::log(s), y = std::log(mx);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double slope = (kLevels * sxy - sx * sy) / (kLevels * sxx - sx * sx);
  if (!std::isfinite(slope) || !(slope > 0.0)) throw ResolutionError("decay probe produced a nonpositive exponent");
  return slope;
}

}  // namespace pml
