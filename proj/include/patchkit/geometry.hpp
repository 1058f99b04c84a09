#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <variant>
#include <vector>

namespace patchkit {

using Vec = Eigen::VectorXd;

/// Default tolerances. Scenario files may override the boundary/activity
/// tolerances; these are the documented library defaults.
namespace tol {
inline constexpr double boundary = 1e-7;     // how far from the zero level set still counts as boundary
inline constexpr double face_active = 1e-7;  // halfspace activity slack
}  // namespace tol

/// Deterministic 64-bit generator (splitmix64). std::uniform_* distributions
/// are implementation-defined, so all randomized sampling in the library goes
/// through this to keep artifacts reproducible.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  /// Uniform in [0,1).
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * next_double(); }
  double gaussian();
  Vec unit_vector(int dim);
  /// Uniform in the closed unit ball.
  Vec in_ball(int dim);

 private:
  std::uint64_t state_;
};

struct Halfspace {
  Vec normal;     // unit norm
  double offset;  // normal . x <= offset
};

struct HPolytope {
  std::vector<Halfspace> faces;
};

struct BallSet {
  Vec center;
  double radius = 0.0;
};

/// Signed-distance oracle set: evaluator must be 1-Lipschitz, negative inside.
/// Only constructible in code; not serializable.
struct SdfOracle {
  std::function<double(const Vec&)> sdf;
  double resolution = 1e-2;
  Vec box_lo, box_hi;  // bounding box of the set (required)
};

struct EmptySet {
  int dim = 0;
};

/// Finitely generated cone. `generators` are unit vectors. A normal cone is
/// the set of nonnegative combinations of its generators; the corresponding
/// tangent cone is its polar.
struct Cone {
  std::vector<Vec> generators;
  bool pointed() const;  // no nonzero v with v and -v both in the cone
};

/// Blunted cone {s*w : w in axis + radius*B, s in [0, radius]} translated by
/// `base`. Equals the convex hull of {base} and the ball
/// B(base + radius*axis, radius^2), which gives a closed-form membership test
/// and an exact signed distance.
struct Wedge {
  Vec axis;
  double radius = 0.0;
  Vec base;

  Wedge(Vec axis_, double radius_, Vec base_)
      : axis(std::move(axis_)), radius(radius_), base(std::move(base_)) {}

  bool contains(const Vec& p) const;
  double signed_distance(const Vec& p) const;
  /// n samples of the "lower" boundary {radius*w : w in axis+radius*dB,
  /// (axis-w).axis <= 0} translated by base. Exact arc parameterization for
  /// d = 2, spherical spiral for d >= 3.
  std::vector<Vec> lower_boundary(int n) const;
};

/// Compact set representation: H-polytope (exact), ball (exact) or
/// signed-distance oracle (resolution-limited). Immutable after construction.
class Region {
 public:
  static Region polytope(std::vector<Halfspace> faces);
  static Region box(const Vec& lo, const Vec& hi);
  static Region ball(Vec center, double radius);
  static Region oracle(std::function<double(const Vec&)> sdf, double resolution,
                       Vec box_lo, Vec box_hi);
  static Region empty(int dim);

  int dim() const;
  bool is_empty() const { return std::holds_alternative<EmptySet>(rep_); }
  bool is_polytope() const { return std::holds_alternative<HPolytope>(rep_); }
  bool is_ball() const { return std::holds_alternative<BallSet>(rep_); }
  bool is_oracle() const { return std::holds_alternative<SdfOracle>(rep_); }
  const HPolytope& as_polytope() const { return std::get<HPolytope>(rep_); }
  const BallSet& as_ball() const { return std::get<BallSet>(rep_); }
  const SdfOracle& as_oracle() const { return std::get<SdfOracle>(rep_); }

  /// d(x, S) - d(x, closure of complement): negative inside, zero on the
  /// boundary. Exact for polytopes and balls.
  double signed_distance(const Vec& x) const;
  bool contains(const Vec& x, double slack = 0.0) const {
    return !is_empty() && signed_distance(x) <= slack;
  }
  /// r(x) = d(x, closure of complement), i.e. -signed_distance for interior
  /// points (clamped at 0 outside).
  double depth(const Vec& x) const { return std::max(0.0, -signed_distance(x)); }
  /// d(x, S) clamped at 0 (0 inside).
  double distance_to(const Vec& x) const { return std::max(0.0, signed_distance(x)); }

  /// Nearest point of the complement closure and its distance. Precondition:
  /// x in S. Ties broken by lowest face index.
  std::pair<Vec, double> project_to_complement(const Vec& x) const;

  /// Nearest boundary point from either side.
  Vec project_to_boundary(const Vec& x) const;

  /// Clarke (proximal) normal cone at a boundary point (|sdf| <= tol_bd).
  /// Polytopes: outward normals of active faces. Balls: the radial direction.
  /// Oracles: estimated from sampled exterior projections within the
  /// resolution radius (experimental for non-polytopal wedged sets).
  Cone normal_cone(const Vec& x, double tol_bd = tol::boundary,
                   double tol_act = tol::face_active) const;

  /// True iff p.v <= -margin*|p| for every generator p of the normal cone,
  /// i.e. v + margin*B lies in the Clarke tangent cone when margin > 0.
  bool tangent_cone_contains(const Vec& x, const Vec& v, double margin,
                             double tol_bd = tol::boundary,
                             double tol_act = tol::face_active) const;

  /// Bouligand tangent cone membership. Exact active-face test for polytopes
  /// and balls; sampled liminf of d(x+tv, S)/t for oracles.
  bool bouligand_contains(const Vec& x, const Vec& v) const;

  /// r-inner approximation {x : d(x, complement) >= r}. Polytope offsets
  /// shift inward; an oracle keeps its evaluator plus r. Returns the empty
  /// region when the erosion is infeasible.
  Region eroded(double r) const;

  /// Chebyshev-style interior point (deepest point for balls/oracles).
  Vec interior_point() const;
  /// Radius of the largest inscribed ball (negative if empty interior).
  double chebyshev_radius() const;
  std::pair<Vec, Vec> bounding_box() const;
  double diameter() const;

  /// Deterministic boundary sample of size >= n. For 2-D polytopes the sample
  /// is arc-length uniform and always includes the vertices; otherwise points
  /// come from ray casting out of the interior point.
  std::vector<Vec> boundary_sample(int n) const;

  /// Polytope vertices (d <= 3).
  std::vector<Vec> vertices() const;

  // Ring parameterization of the boundary, d == 2 only. Arc length measured
  // counterclockwise from a fixed reference point.
  double ring_perimeter() const;
  Vec ring_point(double arc) const;
  Vec ring_outward_normal(double arc) const;
  /// Arc position of the boundary projection of x.
  double ring_arc_of(const Vec& x) const;
  /// Cyclic arc distance.
  double ring_arc_distance(double a, double b) const;

 private:
  explicit Region(std::variant<HPolytope, BallSet, SdfOracle, EmptySet> rep)
      : rep_(std::move(rep)) {}
  struct RingCache;
  const RingCache& ring() const;

  std::variant<HPolytope, BallSet, SdfOracle, EmptySet> rep_;
  mutable std::shared_ptr<const RingCache> ring_cache_;
};

struct WedgeCertificate {
  Vec axis;
  double radius = 0.0;
};

struct CertificateConfig {
  double eps_max = 1.0;  // top of the halving grid
  int halvings = 12;     // grid {eps_max, eps_max/2, ...}
  int n_base = 64;       // base points y in (x + eps*B) cap S
  int n_axis = 32;       // axis perturbations w in axis + eps*B
  int n_scale = 16;      // scalars s in [0, eps]
  std::uint64_t seed = 0x51f0ull;
};

/// Searches candidate axes in order; for each one scans the halving grid and
/// returns the first (axis, largest grid eps) with y + W(axis, eps) inside
/// the set for all sampled y in (x + eps*B) cap S. Sampling-based check, not
/// a proof.
std::optional<WedgeCertificate> wedge_certificate(const Region& set, const Vec& x,
                                                  const std::vector<Vec>& axis_candidates,
                                                  const CertificateConfig& cfg = {});

/// Distance from a point to the convex hull of a finite point set.
double distance_to_hull(const std::vector<Vec>& points, const Vec& q);

/// Small dense LP max c.z s.t. A z <= b solved by vertex enumeration;
/// intended for the low-dimensional feasibility/Chebyshev problems in this
/// library. Returns nullopt when infeasible.
std::optional<Vec> enumerate_lp(const Eigen::MatrixXd& A, const Vec& b, const Vec& c);

}  // namespace patchkit
