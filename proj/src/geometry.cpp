#include "patchkit/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>

namespace patchkit {

namespace {
constexpr double kEps = 1e-12;

// Enumerates k-subsets of {0..m-1} in lexicographic order.
void for_each_subset(int m, int k, const std::function<void(const std::vector<int>&)>& fn) {
  if (k == 0) {
    std::vector<int> none;
    fn(none);
    return;
  }
  std::vector<int> idx(k);
  for (int i = 0; i < k; ++i) idx[i] = i;
  while (true) {
    fn(idx);
    int i = k - 1;
    while (i >= 0 && idx[i] == m - k + i) --i;
    if (i < 0) break;
    ++idx[i];
    for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

Vec rot90(const Vec& v) {
  Vec r(2);
  r << -v[1], v[0];
  return r;
}
}  // namespace

double Rng::gaussian() {
  // Box-Muller on the deterministic stream.
  double u1 = std::max(next_double(), 1e-300);
  double u2 = next_double();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Vec Rng::unit_vector(int dim) {
  Vec v(dim);
  do {
    for (int i = 0; i < dim; ++i) v[i] = gaussian();
  } while (v.norm() < 1e-9);
  return v / v.norm();
}

Vec Rng::in_ball(int dim) {
  Vec v = unit_vector(dim);
  double r = std::pow(next_double(), 1.0 / dim);
  return r * v;
}

// ---------------------------------------------------------------------------
// Cone

bool Cone::pointed() const {
  if (generators.empty()) return true;
  const int d = static_cast<int>(generators.front().size());
  if (d == 2) {
    std::vector<double> ang;
    ang.reserve(generators.size());
    for (const Vec& g : generators) ang.push_back(std::atan2(g[1], g[0]));
    std::sort(ang.begin(), ang.end());
    double max_gap = 2.0 * std::numbers::pi - (ang.back() - ang.front());
    for (std::size_t i = 1; i < ang.size(); ++i)
      max_gap = std::max(max_gap, ang[i] - ang[i - 1]);
    // Pointed iff all generators fit in an open half-plane.
    return max_gap > std::numbers::pi + 1e-7;
  }
  // d >= 3: search for a direction c with c.p > 0 for all generators by
  // projected subgradient on min_i c.p_i. Approximate but deterministic.
  Vec c = Vec::Zero(d);
  for (const Vec& g : generators) c += g;
  if (c.norm() < 1e-9) return false;
  c.normalize();
  for (int it = 1; it <= 500; ++it) {
    int worst = 0;
    double worst_dot = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < generators.size(); ++i) {
      double dot = c.dot(generators[i]);
      if (dot < worst_dot) {
        worst_dot = dot;
        worst = static_cast<int>(i);
      }
    }
    if (worst_dot > 1e-4) return true;
    c += (0.5 / std::sqrt(static_cast<double>(it))) * generators[worst];
    if (c.norm() < 1e-9) return false;
    c.normalize();
  }
  double worst = std::numeric_limits<double>::infinity();
  for (const Vec& g : generators) worst = std::min(worst, c.dot(g));
  return worst > 1e-6;
}

// ---------------------------------------------------------------------------
// Wedge

// Signed distance to conv({0} u B(L*axis_hat, rho)) in the reduced (axial t,
// radial q) plane; the construction in Region/Wedge maps world points here.
static double round_cone_sdf(double t, double q, double L, double rho) {
  if (L <= rho + kEps) {
    // Apex inside the end ball: the hull is the ball itself.
    return std::hypot(t - L, q) - rho;
  }
  const double a2 = L * L - rho * rho;
  const double k = -rho * rho * q * q;
  const double z = t - L;
  const double sz = (z > 0) ? 1.0 : ((z < 0) ? -1.0 : 0.0);
  if (sz * a2 * z * z > k) return std::hypot(z, q) - rho;  // spherical cap
  const double st = (t > 0) ? 1.0 : ((t < 0) ? -1.0 : 0.0);
  if (st * a2 * t * t < k) return std::hypot(t, q);  // apex corner
  return (q * std::sqrt(a2) - t * rho) / L;          // lateral surface
}

double Wedge::signed_distance(const Vec& p) const {
  const Vec rel = p - base;
  const double anorm = axis.norm();
  const double L = radius * anorm;
  const double rho = radius * radius;
  if (anorm < kEps) return rel.norm() - rho;
  const Vec ah = axis / anorm;
  const double t = rel.dot(ah);
  const double q = (rel - t * ah).norm();
  return round_cone_sdf(t, q, L, rho);
}

bool Wedge::contains(const Vec& p) const { return signed_distance(p) <= 1e-9; }

std::vector<Vec> Wedge::lower_boundary(int n) const {
  if (n < 1) throw std::invalid_argument("lower_boundary: n >= 1 required");
  const int d = static_cast<int>(axis.size());
  const double anorm = axis.norm();
  if (anorm < kEps) throw std::invalid_argument("lower_boundary: zero axis");
  const Vec ah = axis / anorm;
  std::vector<Vec> out;
  out.reserve(n);
  if (d == 2) {
    const Vec perp = rot90(ah);
    for (int k = 0; k < n; ++k) {
      double phi = -std::numbers::pi / 2 + (k + 0.5) * std::numbers::pi / n;
      Vec nk = std::cos(phi) * ah + std::sin(phi) * perp;
      out.push_back(base + radius * (axis + radius * nk));
    }
    return out;
  }
  // Deterministic hemisphere sample {n_hat . axis >= 0}.
  Rng rng(0xd1f5u);
  out.push_back(base + radius * (axis + radius * ah));
  while (static_cast<int>(out.size()) < n) {
    Vec u = rng.unit_vector(d);
    if (u.dot(ah) < 0) u = -u;
    out.push_back(base + radius * (axis + radius * u));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Small LP by vertex enumeration

std::optional<Vec> enumerate_lp(const Eigen::MatrixXd& A, const Vec& b, const Vec& c) {
  const int m = static_cast<int>(A.rows());
  const int n = static_cast<int>(A.cols());
  if (m < n) return std::nullopt;
  std::optional<Vec> best;
  double best_val = -std::numeric_limits<double>::infinity();
  for_each_subset(m, n, [&](const std::vector<int>& idx) {
    Eigen::MatrixXd As(n, n);
    Vec bs(n);
    for (int i = 0; i < n; ++i) {
      As.row(i) = A.row(idx[i]);
      bs[i] = b[idx[i]];
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(As);
    if (!lu.isInvertible()) return;
    Vec z = lu.solve(bs);
    if (((A * z - b).array() > 1e-9).any()) return;
    double val = c.dot(z);
    if (val > best_val + kEps) {
      best_val = val;
      best = z;
    }
  });
  return best;
}

// ---------------------------------------------------------------------------
// Region construction

Region Region::polytope(std::vector<Halfspace> faces) {
  if (faces.empty()) throw std::invalid_argument("polytope: no faces");
  for (auto& f : faces) {
    double n = f.normal.norm();
    if (n < kEps) throw std::invalid_argument("polytope: zero normal");
    f.offset /= n;
    f.normal /= n;
  }
  return Region(HPolytope{std::move(faces)});
}

Region Region::box(const Vec& lo, const Vec& hi) {
  const int d = static_cast<int>(lo.size());
  std::vector<Halfspace> faces;
  faces.reserve(2 * d);
  for (int i = 0; i < d; ++i) {
    Vec n = Vec::Zero(d);
    n[i] = 1.0;
    faces.push_back({n, hi[i]});
    faces.push_back({-n, -lo[i]});
  }
  return polytope(std::move(faces));
}

Region Region::ball(Vec center, double radius) {
  if (radius < 0) throw std::invalid_argument("ball: negative radius");
  return Region(BallSet{std::move(center), radius});
}

Region Region::oracle(std::function<double(const Vec&)> sdf, double resolution,
                      Vec box_lo, Vec box_hi) {
  return Region(SdfOracle{std::move(sdf), resolution, std::move(box_lo), std::move(box_hi)});
}

Region Region::empty(int dim) { return Region(EmptySet{dim}); }

int Region::dim() const {
  if (is_polytope()) return static_cast<int>(as_polytope().faces.front().normal.size());
  if (is_ball()) return static_cast<int>(as_ball().center.size());
  if (is_oracle()) return static_cast<int>(as_oracle().box_lo.size());
  return std::get<EmptySet>(rep_).dim;
}

// ---------------------------------------------------------------------------
// Distances and projections

// Projection of an exterior point onto a convex H-polytope by KKT active-set
// enumeration (exact for the small systems used here).
static std::pair<Vec, double> project_onto_polytope(const HPolytope& poly, const Vec& x) {
  const int m = static_cast<int>(poly.faces.size());
  const int d = static_cast<int>(x.size());
  Vec best = x;
  double best_dist = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= d; ++k) {
    for_each_subset(m, k, [&](const std::vector<int>& idx) {
      Eigen::MatrixXd A(k, d);
      Vec bs(k);
      for (int i = 0; i < k; ++i) {
        A.row(i) = poly.faces[idx[i]].normal.transpose();
        bs[i] = poly.faces[idx[i]].offset;
      }
      Eigen::MatrixXd G = A * A.transpose();
      Eigen::FullPivLU<Eigen::MatrixXd> lu(G);
      if (!lu.isInvertible()) return;
      Vec lambda = lu.solve(A * x - bs);
      if ((lambda.array() < -1e-10).any()) return;
      Vec z = x - A.transpose() * lambda;
      for (const auto& f : poly.faces)
        if (f.normal.dot(z) > f.offset + 1e-9) return;
      double dist = (x - z).norm();
      if (dist < best_dist - kEps) {
        best_dist = dist;
        best = z;
      }
    });
  }
  return {best, best_dist};
}

double Region::signed_distance(const Vec& x) const {
  if (is_empty()) return std::numeric_limits<double>::infinity();
  if (is_ball()) {
    const auto& b = as_ball();
    return (x - b.center).norm() - b.radius;
  }
  if (is_oracle()) return as_oracle().sdf(x);
  const auto& poly = as_polytope();
  double min_slack = std::numeric_limits<double>::infinity();
  bool inside = true;
  for (const auto& f : poly.faces) {
    double slack = f.offset - f.normal.dot(x);
    min_slack = std::min(min_slack, slack);
    if (slack < 0) inside = false;
  }
  if (inside) return -min_slack;
  return project_onto_polytope(poly, x).second;
}

std::pair<Vec, double> Region::project_to_complement(const Vec& x) const {
  if (is_empty()) throw std::runtime_error("project_to_complement: empty set");
  if (is_ball()) {
    const auto& b = as_ball();
    Vec rel = x - b.center;
    double n = rel.norm();
    Vec dir;
    if (n < kEps) {
      dir = Vec::Zero(dim());
      dir[0] = 1.0;  // deterministic tie break at the center
    } else {
      dir = rel / n;
    }
    return {b.center + b.radius * dir, b.radius - n};
  }
  if (is_polytope()) {
    const auto& poly = as_polytope();
    int best = 0;
    double best_slack = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < poly.faces.size(); ++i) {
      double slack = poly.faces[i].offset - poly.faces[i].normal.dot(x);
      if (slack < best_slack - kEps) {  // ties keep the lowest face index
        best_slack = slack;
        best = static_cast<int>(i);
      }
    }
    return {x + best_slack * poly.faces[best].normal, best_slack};
  }
  // Oracle: march along the finite-difference gradient, then refine the
  // crossing along that ray. Accuracy is resolution-limited.
  const auto& orc = as_oracle();
  const double h = std::max(orc.resolution * 0.25, 1e-6);
  const int d = dim();
  Vec g(d);
  for (int i = 0; i < d; ++i) {
    Vec e = Vec::Zero(d);
    e[i] = h;
    g[i] = (orc.sdf(x + e) - orc.sdf(x - e)) / (2 * h);
  }
  double gn = g.norm();
  if (gn < kEps) {
    Vec e = Vec::Zero(d);
    e[0] = 1.0;
    g = e;
    gn = 1.0;
  }
  g /= gn;
  double depth = std::max(0.0, -orc.sdf(x));
  double lo = 0.0, hi = std::max(depth * 1.5, orc.resolution);
  int guard = 0;
  while (orc.sdf(x + hi * g) < 0 && guard++ < 60) hi *= 1.5;
  for (int it = 0; it < 60; ++it) {
    double mid = 0.5 * (lo + hi);
    (orc.sdf(x + mid * g) < 0 ? lo : hi) = mid;
  }
  double t = 0.5 * (lo + hi);
  return {x + t * g, t};
}

Vec Region::project_to_boundary(const Vec& x) const {
  if (is_empty()) throw std::runtime_error("project_to_boundary: empty set");
  if (contains(x)) return project_to_complement(x).first;
  if (is_ball()) {
    const auto& b = as_ball();
    return b.center + b.radius * (x - b.center).normalized();
  }
  if (is_polytope()) return project_onto_polytope(as_polytope(), x).first;
  // Oracle: march along the gradient toward the zero level.
  const auto& orc = as_oracle();
  Vec p = x;
  const double h = std::max(orc.resolution * 0.25, 1e-6);
  for (int it = 0; it < 8; ++it) {
    double s = orc.sdf(p);
    if (std::abs(s) < 1e-9) break;
    Vec g(dim());
    for (int i = 0; i < dim(); ++i) {
      Vec e = Vec::Zero(dim());
      e[i] = h;
      g[i] = (orc.sdf(p + e) - orc.sdf(p - e)) / (2 * h);
    }
    if (g.norm() < 1e-12) break;
    p -= s * g / g.squaredNorm();
  }
  return p;
}

Cone Region::normal_cone(const Vec& x, double tol_bd, double tol_act) const {
  if (std::abs(signed_distance(x)) > tol_bd)
    throw std::runtime_error("normal_cone: not a boundary point");
  Cone cone;
  if (is_ball()) {
    const auto& b = as_ball();
    Vec rel = x - b.center;
    cone.generators.push_back(rel / rel.norm());
    return cone;
  }
  if (is_polytope()) {
    const auto& poly = as_polytope();
    for (const auto& f : poly.faces) {
      double slack = f.offset - f.normal.dot(x);
      if (slack <= tol_act) cone.generators.push_back(f.normal);
    }
    return cone;
  }
  // Oracle estimator: exterior samples within the resolution radius are
  // projected back; normalized offsets whose projections land near x are the
  // sampled perpendiculars of the limit definition. Experimental for merely
  // wedged (non-polytopal) sets.
  const auto& orc = as_oracle();
  const int d = dim();
  const double h = orc.resolution;
  Rng rng(0xace5u);
  std::vector<Vec> dirs;
  if (d == 2) {
    for (int k = 0; k < 64; ++k) {
      double a = 2 * std::numbers::pi * k / 64.0;
      Vec u(2);
      u << std::cos(a), std::sin(a);
      dirs.push_back(u);
    }
  } else {
    for (int k = 0; k < 192; ++k) dirs.push_back(rng.unit_vector(d));
  }
  for (const Vec& u : dirs) {
    for (double rho : {h, h * 0.5}) {
      Vec z = x + rho * u;
      if (orc.sdf(z) <= tol_bd) continue;
      Vec p = z;
      for (int it = 0; it < 4; ++it) {  // gradient marching toward the set
        double s = orc.sdf(p);
        if (s <= 0) break;
        Vec g(d);
        double fd = std::max(h * 0.25, 1e-6);
        for (int i = 0; i < d; ++i) {
          Vec e = Vec::Zero(d);
          e[i] = fd;
          g[i] = (orc.sdf(p + e) - orc.sdf(p - e)) / (2 * fd);
        }
        if (g.norm() < kEps) break;
        p -= s * g / g.norm();
      }
      if ((p - x).norm() > 2 * h) continue;
      Vec v = z - p;
      if (v.norm() < kEps) continue;
      v.normalize();
      bool dup = false;
      for (const Vec& g : cone.generators)
        if (g.dot(v) > 1.0 - 5e-3) {
          dup = true;
          break;
        }
      if (!dup) cone.generators.push_back(v);
    }
  }
  if (cone.generators.empty()) {
    Vec g(d);
    for (int i = 0; i < d; ++i) {
      Vec e = Vec::Zero(d);
      e[i] = h * 0.5;
      g[i] = (orc.sdf(x + e) - orc.sdf(x - e)) / h;
    }
    if (g.norm() > kEps) cone.generators.push_back(g.normalized());
  }
  return cone;
}

bool Region::tangent_cone_contains(const Vec& x, const Vec& v, double margin,
                                   double tol_bd, double tol_act) const {
  Cone cone = normal_cone(x, tol_bd, tol_act);
  for (const Vec& p : cone.generators)
    if (p.dot(v) > -margin + 1e-12) return false;
  return true;
}

bool Region::bouligand_contains(const Vec& x, const Vec& v) const {
  if (is_empty()) return false;
  double sd = signed_distance(x);
  if (sd < -tol::boundary) return true;  // interior point: every direction
  if (is_polytope()) {
    for (const auto& f : as_polytope().faces) {
      double slack = f.offset - f.normal.dot(x);
      if (slack <= tol::face_active && f.normal.dot(v) > 1e-9 * std::max(1.0, v.norm()))
        return false;
    }
    return true;
  }
  if (is_ball()) {
    const auto& b = as_ball();
    Vec rel = x - b.center;
    return rel.dot(v) <= 1e-9 * std::max(1.0, v.norm()) * std::max(rel.norm(), 1.0);
  }
  // Sampled liminf of d(x + t v, S)/t.
  const auto& orc = as_oracle();
  double t = orc.resolution;
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 8; ++k, t *= 0.5)
    best = std::min(best, std::max(orc.sdf(x + t * v), 0.0) / t);
  return best <= 0.05 * std::max(v.norm(), 1e-9) + 1e-9;
}

Region Region::eroded(double r) const {
  if (r < 0) throw std::invalid_argument("eroded: r >= 0 required");
  if (is_empty()) return *this;
  if (r == 0.0) return *this;
  if (is_ball()) {
    const auto& b = as_ball();
    if (b.radius - r < 0) return empty(dim());
    return ball(b.center, b.radius - r);
  }
  if (is_polytope()) {
    auto faces = as_polytope().faces;
    for (auto& f : faces) f.offset -= r;
    Region shifted = polytope(std::move(faces));
    if (shifted.chebyshev_radius() < -1e-12) return empty(dim());
    return shifted;
  }
  const auto& orc = as_oracle();
  auto base = orc.sdf;
  double shift = r;
  return oracle([base, shift](const Vec& x) { return base(x) + shift; }, orc.resolution,
                orc.box_lo, orc.box_hi);
}

double Region::chebyshev_radius() const {
  if (is_empty()) return -std::numeric_limits<double>::infinity();
  if (is_ball()) return as_ball().radius;
  if (is_oracle()) {
    return -signed_distance(interior_point());
  }
  const auto& poly = as_polytope();
  const int d = dim();
  const int m = static_cast<int>(poly.faces.size());
  double big = 1.0;
  for (const auto& f : poly.faces) big = std::max(big, std::abs(f.offset));
  Eigen::MatrixXd A(m + 1, d + 1);
  Vec b(m + 1), c = Vec::Zero(d + 1);
  for (int i = 0; i < m; ++i) {
    A.block(i, 0, 1, d) = poly.faces[i].normal.transpose();
    A(i, d) = 1.0;
    b[i] = poly.faces[i].offset;
  }
  A.row(m).setZero();
  A(m, d) = -1.0;  // keep the lifted LP pointed
  b[m] = 4 * big + 1;
  c[d] = 1.0;
  auto sol = enumerate_lp(A, b, c);
  if (!sol) return -std::numeric_limits<double>::infinity();
  return (*sol)[d];
}

Vec Region::interior_point() const {
  if (is_empty()) throw std::runtime_error("interior_point: empty set");
  if (is_ball()) return as_ball().center;
  if (is_polytope()) {
    const auto& poly = as_polytope();
    const int d = dim();
    const int m = static_cast<int>(poly.faces.size());
    double big = 1.0;
    for (const auto& f : poly.faces) big = std::max(big, std::abs(f.offset));
    Eigen::MatrixXd A(m + 1, d + 1);
    Vec b(m + 1), c = Vec::Zero(d + 1);
    for (int i = 0; i < m; ++i) {
      A.block(i, 0, 1, d) = poly.faces[i].normal.transpose();
      A(i, d) = 1.0;
      b[i] = poly.faces[i].offset;
    }
    A.row(m).setZero();
    A(m, d) = -1.0;
    b[m] = 4 * big + 1;
    c[d] = 1.0;
    auto sol = enumerate_lp(A, b, c);
    if (!sol) throw std::runtime_error("interior_point: infeasible polytope");
    return sol->head(d);
  }
  // Oracle: coarse grid scan of the bounding box for the deepest point.
  const auto& orc = as_oracle();
  const int d = dim();
  if (d != 2) throw std::runtime_error("interior_point: oracle sets supported in d=2 only");
  int n = 48;
  Vec best = 0.5 * (orc.box_lo + orc.box_hi);
  double best_sd = orc.sdf(best);
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j <= n; ++j) {
      Vec p(2);
      p << orc.box_lo[0] + (orc.box_hi[0] - orc.box_lo[0]) * i / n,
          orc.box_lo[1] + (orc.box_hi[1] - orc.box_lo[1]) * j / n;
      double sd = orc.sdf(p);
      if (sd < best_sd) {
        best_sd = sd;
        best = p;
      }
    }
  return best;
}

std::vector<Vec> Region::vertices() const {
  if (!is_polytope()) throw std::runtime_error("vertices: polytope only");
  const auto& poly = as_polytope();
  const int d = dim();
  if (d > 3) throw std::runtime_error("vertices: d <= 3 only");
  const int m = static_cast<int>(poly.faces.size());
  std::vector<Vec> verts;
  for_each_subset(m, d, [&](const std::vector<int>& idx) {
    Eigen::MatrixXd A(d, d);
    Vec b(d);
    for (int i = 0; i < d; ++i) {
      A.row(i) = poly.faces[idx[i]].normal.transpose();
      b[i] = poly.faces[idx[i]].offset;
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (!lu.isInvertible()) return;
    Vec v = lu.solve(b);
    for (const auto& f : poly.faces)
      if (f.normal.dot(v) > f.offset + 1e-9) return;
    for (const Vec& w : verts)
      if ((w - v).norm() < 1e-9) return;
    verts.push_back(v);
  });
  if (d == 2) {  // order counterclockwise
    Vec c = Vec::Zero(2);
    for (const Vec& v : verts) c += v;
    c /= static_cast<double>(verts.size());
    std::sort(verts.begin(), verts.end(), [&](const Vec& a, const Vec& b2) {
      return std::atan2(a[1] - c[1], a[0] - c[0]) < std::atan2(b2[1] - c[1], b2[0] - c[0]);
    });
  }
  return verts;
}

std::pair<Vec, Vec> Region::bounding_box() const {
  if (is_empty()) throw std::runtime_error("bounding_box: empty set");
  if (is_ball()) {
    const auto& b = as_ball();
    return {b.center.array() - b.radius, b.center.array() + b.radius};
  }
  if (is_oracle()) return {as_oracle().box_lo, as_oracle().box_hi};
  auto verts = vertices();
  Vec lo = verts.front(), hi = verts.front();
  for (const Vec& v : verts) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  return {lo, hi};
}

double Region::diameter() const {
  auto [lo, hi] = bounding_box();
  return (hi - lo).norm();
}

// ---------------------------------------------------------------------------
// Boundary ring (d == 2)

struct Region::RingCache {
  std::vector<Vec> pts;       // closed polyline, counterclockwise
  std::vector<double> arcs;   // cumulative arc length, arcs[i] at pts[i]
  std::vector<Vec> normals;   // outward normal per segment i -> i+1
  double perimeter = 0.0;
};

const Region::RingCache& Region::ring() const {
  if (ring_cache_) return *ring_cache_;
  if (dim() != 2) throw std::runtime_error("ring: d == 2 only");
  auto cache = std::make_shared<RingCache>();
  std::vector<Vec> pts;
  if (is_polytope()) {
    pts = vertices();
  } else if (is_ball()) {
    const auto& b = as_ball();
    int n = 512;
    for (int k = 0; k < n; ++k) {
      double a = 2 * std::numbers::pi * k / n;
      Vec p(2);
      p << b.center[0] + b.radius * std::cos(a), b.center[1] + b.radius * std::sin(a);
      pts.push_back(p);
    }
  } else if (is_oracle()) {
    // Star-shaped approximation: ray cast from the deepest interior point.
    Vec c = interior_point();
    const auto& orc = as_oracle();
    double reach = (orc.box_hi - orc.box_lo).norm();
    int n = 1024;
    for (int k = 0; k < n; ++k) {
      double a = 2 * std::numbers::pi * k / n;
      Vec u(2);
      u << std::cos(a), std::sin(a);
      double lo = 0.0, hi = reach;
      for (int it = 0; it < 48; ++it) {
        double mid = 0.5 * (lo + hi);
        (orc.sdf(c + mid * u) < 0 ? lo : hi) = mid;
      }
      pts.push_back(c + 0.5 * (lo + hi) * u);
    }
  } else {
    throw std::runtime_error("ring: empty set");
  }
  cache->pts = pts;
  cache->arcs.resize(pts.size() + 1);
  cache->arcs[0] = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Vec& a = pts[i];
    const Vec& b = pts[(i + 1) % pts.size()];
    double len = (b - a).norm();
    cache->arcs[i + 1] = cache->arcs[i] + len;
    Vec e = (b - a) / std::max(len, kEps);
    Vec n(2);
    n << e[1], -e[0];  // outward for a counterclockwise ring
    cache->normals.push_back(n);
  }
  cache->perimeter = cache->arcs.back();
  ring_cache_ = cache;
  return *ring_cache_;
}

double Region::ring_perimeter() const {
  if (is_ball()) return 2 * std::numbers::pi * as_ball().radius;
  return ring().perimeter;
}

Vec Region::ring_point(double arc) const {
  if (is_ball()) {
    const auto& b = as_ball();
    double a = arc / b.radius;
    Vec p(2);
    p << b.center[0] + b.radius * std::cos(a), b.center[1] + b.radius * std::sin(a);
    return p;
  }
  const auto& r = ring();
  double s = std::fmod(arc, r.perimeter);
  if (s < 0) s += r.perimeter;
  auto it = std::upper_bound(r.arcs.begin(), r.arcs.end(), s);
  std::size_t i = std::min<std::size_t>(std::distance(r.arcs.begin(), it) - 1, r.pts.size() - 1);
  double t = (s - r.arcs[i]) / std::max(r.arcs[i + 1] - r.arcs[i], kEps);
  return r.pts[i] + t * (r.pts[(i + 1) % r.pts.size()] - r.pts[i]);
}

Vec Region::ring_outward_normal(double arc) const {
  if (is_ball()) {
    const auto& b = as_ball();
    double a = arc / b.radius;
    Vec n(2);
    n << std::cos(a), std::sin(a);
    return n;
  }
  const auto& r = ring();
  double s = std::fmod(arc, r.perimeter);
  if (s < 0) s += r.perimeter;
  auto it = std::upper_bound(r.arcs.begin(), r.arcs.end(), s);
  std::size_t i = std::min<std::size_t>(std::distance(r.arcs.begin(), it) - 1, r.normals.size() - 1);
  return r.normals[i];
}

double Region::ring_arc_of(const Vec& x) const {
  if (is_ball()) {
    const auto& b = as_ball();
    double a = std::atan2(x[1] - b.center[1], x[0] - b.center[0]);
    if (a < 0) a += 2 * std::numbers::pi;
    return a * b.radius;
  }
  const auto& r = ring();
  double best_d = std::numeric_limits<double>::infinity();
  double best_arc = 0.0;
  for (std::size_t i = 0; i < r.pts.size(); ++i) {
    const Vec& a = r.pts[i];
    const Vec& b = r.pts[(i + 1) % r.pts.size()];
    Vec e = b - a;
    double len2 = e.squaredNorm();
    double t = len2 < kEps ? 0.0 : std::clamp((x - a).dot(e) / len2, 0.0, 1.0);
    Vec p = a + t * e;
    double d2 = (x - p).squaredNorm();
    if (d2 < best_d - kEps) {
      best_d = d2;
      best_arc = r.arcs[i] + t * std::sqrt(len2);
    }
  }
  return best_arc;
}

double Region::ring_arc_distance(double a, double b) const {
  double per = ring_perimeter();
  double d = std::fmod(std::abs(a - b), per);
  return std::min(d, per - d);
}

std::vector<Vec> Region::boundary_sample(int n) const {
  if (is_empty()) return {};
  const int d = dim();
  std::vector<Vec> out;
  if (is_oracle() && d == 2) {
    // Grid scan plus projection: keeps non-star-shaped features (pinch
    // points, reentrant corners) in the sample.
    const auto& orc = as_oracle();
    int g = std::max(24, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n)) * 3)));
    double cell = std::max((orc.box_hi - orc.box_lo).maxCoeff() / g, 1e-9);
    for (int i = 0; i <= g; ++i)
      for (int j = 0; j <= g; ++j) {
        Vec p(2);
        p << orc.box_lo[0] + (orc.box_hi[0] - orc.box_lo[0]) * i / g,
            orc.box_lo[1] + (orc.box_hi[1] - orc.box_lo[1]) * j / g;
        if (std::abs(orc.sdf(p)) > cell) continue;
        Vec b = project_to_boundary(p);
        if (std::abs(orc.sdf(b)) > orc.resolution) continue;
        bool dup = false;
        for (const Vec& q : out)
          if ((q - b).norm() < 0.25 * cell) {
            dup = true;
            break;
          }
        if (!dup) out.push_back(b);
      }
    return out;
  }
  if (d == 2) {
    double per = ring_perimeter();
    if (is_polytope())
      for (const Vec& v : vertices()) out.push_back(v);
    for (int k = 0; k < n; ++k) out.push_back(ring_point(per * k / n));
    return out;
  }
  // Ray casting from the interior point (convex/star-shaped sets).
  Vec c = interior_point();
  double reach = diameter();
  Rng rng(0xb0da5u);
  while (static_cast<int>(out.size()) < n) {
    Vec u = rng.unit_vector(d);
    double lo = 0.0, hi = reach;
    if (signed_distance(c + hi * u) < 0) continue;
    for (int it = 0; it < 48; ++it) {
      double mid = 0.5 * (lo + hi);
      (signed_distance(c + mid * u) < 0 ? lo : hi) = mid;
    }
    out.push_back(c + 0.5 * (lo + hi) * u);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Wedge certificate

static bool certificate_holds(const Region& set, const Vec& x, const Vec& axis, double eps,
                              const CertificateConfig& cfg) {
  Rng rng(cfg.seed);
  const int d = static_cast<int>(x.size());
  std::vector<Vec> bases;
  bases.push_back(x);
  int attempts = 0;
  while (static_cast<int>(bases.size()) < cfg.n_base && attempts++ < 6 * cfg.n_base) {
    Vec y = x + eps * rng.in_ball(d);
    if (set.contains(y, tol::boundary)) bases.push_back(y);
  }
  std::vector<Vec> axes;
  axes.push_back(axis);
  for (int i = 1; i < cfg.n_axis; ++i) axes.push_back(axis + eps * rng.in_ball(d));
  for (const Vec& y : bases)
    for (const Vec& w : axes)
      for (int j = 1; j <= cfg.n_scale; ++j) {
        double s = eps * j / cfg.n_scale;
        if (set.signed_distance(y + s * w) > 1e-9) return false;
      }
  return true;
}

std::optional<WedgeCertificate> wedge_certificate(const Region& set, const Vec& x,
                                                  const std::vector<Vec>& axis_candidates,
                                                  const CertificateConfig& cfg) {
  for (const Vec& v : axis_candidates) {
    if (v.norm() < 1e-12) continue;
    double eps = cfg.eps_max;
    for (int k = 0; k < cfg.halvings; ++k, eps *= 0.5)
      if (certificate_holds(set, x, v, eps, cfg)) return WedgeCertificate{v, eps};
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Hull distance

double distance_to_hull(const std::vector<Vec>& points, const Vec& q) {
  if (points.empty()) throw std::invalid_argument("distance_to_hull: no points");
  const int d = static_cast<int>(q.size());
  if (d == 2) {
    // Andrew monotone chain, then exact point-to-polygon distance.
    std::vector<Vec> pts = points;
    std::sort(pts.begin(), pts.end(), [](const Vec& a, const Vec& b) {
      return a[0] < b[0] || (a[0] == b[0] && a[1] < b[1]);
    });
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [](const Vec& a, const Vec& b) { return (a - b).norm() < 1e-12; }),
              pts.end());
    auto cross = [](const Vec& o, const Vec& a, const Vec& b) {
      return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    };
    const std::size_t np = pts.size();
    if (np == 1) return (q - pts[0]).norm();
    std::vector<Vec> hull(2 * np);
    std::size_t k = 0;
    for (std::size_t i = 0; i < np; ++i) {  // lower chain
      while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
      hull[k++] = pts[i];
    }
    for (std::size_t i = np - 1, t = k + 1; i-- > 0;) {  // upper chain
      while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
      hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    if (hull.size() == 1) return (q - hull[0]).norm();
    bool inside = true;
    double min_edge = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < hull.size(); ++i) {
      const Vec& a = hull[i];
      const Vec& b = hull[(i + 1) % hull.size()];
      if (cross(a, b, q) < 0) inside = false;
      Vec e = b - a;
      double len2 = e.squaredNorm();
      double t = len2 < kEps ? 0.0 : std::clamp((q - a).dot(e) / len2, 0.0, 1.0);
      min_edge = std::min(min_edge, (q - (a + t * e)).norm());
    }
    return inside ? 0.0 : min_edge;
  }
  // Frank-Wolfe on the simplex (approximate, deterministic).
  Vec z = points.front();
  for (int it = 1; it <= 4000; ++it) {
    Vec g = z - q;
    int best = 0;
    double best_dot = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < points.size(); ++i) {
      double dot = g.dot(points[i]);
      if (dot < best_dot) {
        best_dot = dot;
        best = static_cast<int>(i);
      }
    }
    Vec dir = points[best] - z;
    double denom = dir.squaredNorm();
    if (denom < 1e-18) break;
    double step = std::clamp(-g.dot(dir) / denom, 0.0, 1.0);
    if (step < 1e-14) break;
    z += step * dir;
  }
  return (z - q).norm();
}

}  // namespace patchkit
