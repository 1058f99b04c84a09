#pragma once

#include "patchkit/dynamics.hpp"
#include "patchkit/geometry.hpp"
#include "patchkit/hypotheses.hpp"
#include "patchkit/planner.hpp"

namespace patchkit {

// ---------------------------------------------------------------------------
// Patch domains

/// Shifted rescaled wedge apex + beta*W(axis, radius), clipped by removing
/// the clip_depth-erosion of the constraint set.
struct WedgeDomain {
  Vec apex;
  Vec axis;           // anchor velocity w(x)
  double radius = 0;  // wedge radius parameter (eps~/2)
  double beta = 1;    // rescale factor
  double clip_depth = 0;
};

/// Boundary band brick in the ring chart of the constraint set: points whose
/// outward-signed depth lies in (depth_lo, depth_hi) and whose boundary
/// projection stays within an arc window that widens with depth (tilted side
/// walls, slope wall_tilt).
struct SlabDomain {
  double arc_center = 0;
  double half_len = 0;   // arc half width at depth_lo
  double depth_lo = 0;   // may be negative (pokes outside the set)
  double depth_hi = 0;   // the clip seam
  double wall_tilt = 2;  // arc widening per unit depth
};

/// Union of balls along a reference trajectory piece (evaluated as the
/// sleeve interpolated between knots); radii strictly grow along the piece
/// so the lateral envelope is strictly inward under the piece's own control.
/// `times` carries the reference schedule for tracking diagnostics.
struct TubeDomain {
  std::vector<Vec> knots;
  std::vector<double> radii;
  std::vector<double> times;
};

struct BallDomain {
  Vec center;
  double radius = 0;
};

struct PatchDomain {
  std::variant<WedgeDomain, SlabDomain, TubeDomain, BallDomain> shape;

  /// Membership margin: positive inside, negative outside, approximately
  /// 1-Lipschitz (exactly for wedge/tube/ball; ring-chart distortion only for
  /// slabs on curved boundaries).
  double margin(const Region& S, const Vec& z) const;
  bool contains(const Region& S, const Vec& z) const { return margin(S, z) > 0.0; }
  std::pair<Vec, Vec> bounding_box(const Region& S) const;
  /// A point inside the domain (used as the ray-cast origin).
  Vec center_point(const Region& S) const;
  /// Boundary points with outward normals, located by ray casting from the
  /// center and refined by bisection; normals are finite-difference gradients
  /// of the margin (approximate near chart seams).
  std::vector<std::pair<Vec, Vec>> boundary_with_normals(const Region& S, int n,
                                                         std::uint64_t seed) const;
};

struct Patch {
  PatchDomain domain;
  int control_index = -1;
  int index = 0;  // 1-based position in the total order
  std::string provenance;
  Vec bbox_lo, bbox_hi;  // cached for fast membership rejection

  void cache_bbox(const Region& S);
  bool bbox_contains(const Vec& z) const;
};

/// Ordered patch family with the constraint geometry the domains reference.
/// Assembled feedbacks additionally exclude a neighborhood of the target.
class PatchyFeedback {
 public:
  PatchyFeedback(Region constraint, std::vector<Patch> patches);

  /// Highest patch index containing x, none outside the domain (or inside
  /// the target mask).
  std::optional<int> alpha_star(const Vec& x) const;
  /// Control value of the active patch; throws outside the domain.
  const Vec& control_at(const Vec& x, const ControlSystem& sys) const;
  const Patch& patch(int index) const { return patches_.at(index - 1); }
  const std::vector<Patch>& patches() const { return patches_; }
  int size() const { return static_cast<int>(patches_.size()); }
  const Region& constraint() const { return constraint_; }

  void set_target_mask(Region target, double radius);
  const std::optional<Region>& target_mask() const { return mask_; }
  double mask_radius() const { return mask_radius_; }

  // Synthesis metadata carried for reports and serialization.
  double crown_depth = 0.0;    // verified r~
  double inward_margin = 0.0;  // mu
  double gamma = 0.0;
  int n_boundary_patches = 0;

 private:
  void build_grid();
  Region constraint_;
  std::vector<Patch> patches_;
  std::optional<Region> mask_;
  double mask_radius_ = 0.0;
  // uniform spatial grid over the patch bboxes for O(1) candidate lookup
  Vec grid_lo_, grid_hi_;
  int grid_n_ = 0;
  std::vector<std::vector<int>> grid_cells_;  // descending patch ids per cell
};

// ---------------------------------------------------------------------------
// Boundary layer

struct BoundaryPatchParams {
  Vec anchor;
  int control_index = -1;
  double margin_mu = 0;     // mu_x
  Vec velocity;             // w(x) = f(x, u_x)
  double wedge_radius = 0;  // eps~
  double locality = 0;      // rho_x
  double rescale = 0;       // beta
  double separation = 0;    // R
  double shift = 0;         // alpha
  double diameter_cap = 0;  // lambda
};

/// Control value best aligned with the inward normal directions at a
/// boundary point of `level`, with its inward margin. Throws when no sampled
/// control points strictly inside.
std::pair<int, double> inward_control(const ControlSystem& sys, const Region& level,
                                      const Vec& x);

struct BoundaryPatchConfig {
  double lambda = 0.5;  // patch diameter cap
  CertificateConfig cert;
  int n_cone_samples = 40;  // locality-check samples per radius probe
  int bisections = 10;
  std::uint64_t seed = 0x60a7ull;
};

/// The wedge-shaped boundary patch at an anchor: inward control, wedge
/// certificate along the anchor velocity, locality radius by bisection,
/// rescale/shift from the midpoint of their admissible intervals, clipped by
/// the shift-erosion.
std::pair<Patch, BoundaryPatchParams> boundary_patch(const ControlSystem& sys, const Region& S,
                                                     const Vec& anchor,
                                                     const BoundaryPatchConfig& cfg);

enum class BoundaryStyle { Wedge, Slab };

struct BoundaryFeedbackConfig {
  double lambda = 0.5;
  BoundaryStyle style = BoundaryStyle::Slab;
  double depth_target = 0.1;     // total crown depth the layers must cover
  double band_thickness = 0.03;  // clip band per layer (slab style)
  double outer_reach = 0.02;     // how far slabs poke above their band
  double wall_tilt = 2.0;
  int n_boundary = 128;   // greedy walk sample per layer
  int max_patches = 4000;
  int n_inward_check = 64;  // construction-time wall samples
  CertificateConfig cert;
  std::uint64_t seed = 0x5a13ull;
};

struct BoundaryFeedback {
  std::vector<Patch> patches;  // ordered, 1-based indices assigned
  double r_tilde = 0.0;        // verified crown coverage depth
  double mu = 0.0;             // min over anchors of mu_x / 2
  int n_anchors = 0;
  int n_layers = 0;
};

/// Covers the crown of S with ordered boundary patches. Slab style stacks
/// bands of tilted bricks until depth_target is covered; wedge style places
/// the literal shifted-wedge patches on a boundary sample (their footprint is
/// too small to tile a deep crown, so wedge style is intended for
/// lemma-scale checks, not the full pipeline). Throws when the patch budget
/// is exhausted with uncovered witnesses.
BoundaryFeedback boundary_feedback(const ControlSystem& sys, const Region& S,
                                   const BoundaryFeedbackConfig& cfg);

// ---------------------------------------------------------------------------
// Tubes and assembly

struct TubeConfig {
  double radius_growth = 0.05;  // added to L_f in the radius schedule
  double knot_dt = 0.02;
  double min_radius = 1e-9;
  // Entry-over-exit radius ratio at piece junctions: each junction sphere
  // must lie strictly inside the next piece's entry ball, otherwise its
  // rear half is exposed effective boundary with outward velocity.
  double junction_jump = 0.04;
};

/// One patch per control piece of the reference; the domain of piece j is
/// the union of balls x(t) + rho(t)B over the piece with
/// rho(t) = (eps/2) exp(-(L_f + growth)(T - t)). Radii grow strictly so the
/// lateral envelope is strictly inward; consecutive pieces share their
/// junction ball. Throws "eps too small" when the entry radius underflows.
std::vector<Patch> tube_around(const ControlSystem& sys, const Trajectory& traj,
                               const OpenLoopControl& control, double eps,
                               const TubeConfig& cfg = {});

/// Concatenates boundary patches (lowest indices) and tube families in seed
/// order, assigns global 1-based indices, and masks the 3*gamma target
/// neighborhood out of the domain.
PatchyFeedback assemble_feedback(const Region& S, const BoundaryFeedback& boundary,
                                 const std::vector<std::vector<Patch>>& tube_families,
                                 const Region& target, double gamma);

/// Samples of `samples` outside the feedback domain (empty means covered).
std::vector<Vec> coverage_failures(const PatchyFeedback& fb, const std::vector<Vec>& samples);

struct InwardPatchStat {
  int index = 0;
  double max_dot = -std::numeric_limits<double>::infinity();
  int samples_used = 0;
};

struct InwardReport {
  std::vector<InwardPatchStat> per_patch;
  double worst = -std::numeric_limits<double>::infinity();
  bool pass = true;
};

/// Samples each patch's effective boundary (boundary points inside the
/// feedback domain and not inside any higher patch) and reports
/// max f(z, u_patch) . n(z); pass requires strictly negative maxima.
InwardReport check_inward_sampled(const ControlSystem& sys, const PatchyFeedback& fb,
                                  int n_per_patch, std::uint64_t seed = 0x1a2bull);

}  // namespace patchkit
