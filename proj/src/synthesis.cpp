#include "patchkit/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace patchkit {

namespace {

// Outward-signed depth: positive inside S, negative outside.
double ndepth(const Region& S, const Vec& z) { return -S.signed_distance(z); }

// Ring tangent (counterclockwise) from the outward normal.
Vec ring_tangent(const Vec& outward) {
  Vec t(2);
  t << -outward[1], outward[0];
  return t;
}

// Point at ring position `arc`, depth q below the boundary of S. The naive
// offset along the segment normal is wrong inside corner fans (it slides
// along the neighboring face at depth 0), so the depth is corrected by a few
// Newton steps along the true inward direction.
Vec chart_point(const Region& S, double arc, double q) {
  Vec n = S.ring_outward_normal(arc);
  Vec p = S.ring_point(arc) - q * n;
  for (int it = 0; it < 4; ++it) {
    double err = q - (-S.signed_distance(p));
    if (std::abs(err) < 1e-12) break;
    Vec b = S.project_to_boundary(p);
    Vec inward = S.contains(p) ? Vec(p - b) : Vec(b - p);
    double len = inward.norm();
    if (len > 1e-12) {
      inward /= len;
    } else {
      // p sits exactly on the boundary; head inward against the local cone
      Vec mean = Vec::Zero(p.size());
      try {
        for (const Vec& g : S.normal_cone(b, 1e-6, 1e-6).generators) mean += g;
      } catch (const std::exception&) {
      }
      inward = mean.norm() > 1e-12 ? Vec(-mean / mean.norm()) : Vec(-n);
    }
    p += err * inward;
  }
  return p;
}

}  // namespace

// ---------------------------------------------------------------------------
// Patch domains

double PatchDomain::margin(const Region& S, const Vec& z) const {
  if (const auto* w = std::get_if<WedgeDomain>(&shape)) {
    Wedge unit(w->axis, w->radius, Vec::Zero(w->apex.size()));
    double wedge_m = -w->beta * unit.signed_distance((z - w->apex) / w->beta);
    double clip_m = w->clip_depth - ndepth(S, z);
    return std::min(wedge_m, clip_m);
  }
  if (const auto* s = std::get_if<SlabDomain>(&shape)) {
    double q = ndepth(S, z);
    double adist = S.ring_arc_distance(S.ring_arc_of(z), s->arc_center);
    double halfw = s->half_len + s->wall_tilt * (q - s->depth_lo);
    double wall_m = (halfw - adist) / std::hypot(1.0, s->wall_tilt);
    return std::min({q - s->depth_lo, s->depth_hi - q, wall_m});
  }
  if (const auto* t = std::get_if<TubeDomain>(&shape)) {
    // Interpolated sleeve between knots: a plain knot-ball union leaves
    // scallops deeper than the envelope's inward margin, which makes grazing
    // membership flicker.
    double best = -std::numeric_limits<double>::infinity();
    if (t->knots.size() == 1) return t->radii[0] - (z - t->knots[0]).norm();
    for (std::size_t i = 0; i + 1 < t->knots.size(); ++i) {
      Vec e = t->knots[i + 1] - t->knots[i];
      double len2 = e.squaredNorm();
      double s = len2 < 1e-18 ? 0.0 : std::clamp((z - t->knots[i]).dot(e) / len2, 0.0, 1.0);
      double rho = t->radii[i] + s * (t->radii[i + 1] - t->radii[i]);
      best = std::max(best, rho - (z - (t->knots[i] + s * e)).norm());
    }
    return best;
  }
  const auto& b = std::get<BallDomain>(shape);
  return b.radius - (z - b.center).norm();
}

std::pair<Vec, Vec> PatchDomain::bounding_box(const Region& S) const {
  if (const auto* w = std::get_if<WedgeDomain>(&shape)) {
    double reach = w->beta * w->radius * (w->axis.norm() + w->radius) + 1e-9;
    return {w->apex.array() - reach, w->apex.array() + reach};
  }
  if (const auto* s = std::get_if<SlabDomain>(&shape)) {
    double span = s->depth_hi - s->depth_lo;
    double max_halfw = s->half_len + s->wall_tilt * span;
    Vec lo, hi;
    bool first = true;
    int n = std::max(32, static_cast<int>(max_halfw / 0.01));
    for (int i = 0; i <= n; ++i) {
      double arc = s->arc_center + max_halfw * (2.0 * i / n - 1.0);
      for (double q : {s->depth_lo, 0.5 * (s->depth_lo + s->depth_hi), s->depth_hi}) {
        Vec p = chart_point(S, arc, q);
        if (first) {
          lo = p;
          hi = p;
          first = false;
        } else {
          lo = lo.cwiseMin(p);
          hi = hi.cwiseMax(p);
        }
      }
    }
    double pad = 0.25 * span + 0.05 * max_halfw + 1e-6;
    return {lo.array() - pad, hi.array() + pad};
  }
  if (const auto* t = std::get_if<TubeDomain>(&shape)) {
    Vec lo = t->knots.front(), hi = t->knots.front();
    for (std::size_t i = 0; i < t->knots.size(); ++i) {
      lo = lo.cwiseMin((t->knots[i].array() - t->radii[i]).matrix());
      hi = hi.cwiseMax((t->knots[i].array() + t->radii[i]).matrix());
    }
    return {lo, hi};
  }
  const auto& b = std::get<BallDomain>(shape);
  return {b.center.array() - b.radius, b.center.array() + b.radius};
}

Vec PatchDomain::center_point(const Region& S) const {
  if (const auto* w = std::get_if<WedgeDomain>(&shape)) {
    for (double frac : {0.3, 0.15, 0.5, 0.05, 0.7}) {
      Vec c = w->apex + w->beta * w->radius * frac * w->axis;
      if (margin(S, c) > 0) return c;
    }
    return w->apex;
  }
  if (const auto* s = std::get_if<SlabDomain>(&shape)) {
    for (double frac : {0.5, 0.3, 0.7, 0.1, 0.9}) {
      Vec c = chart_point(S, s->arc_center, s->depth_lo + frac * (s->depth_hi - s->depth_lo));
      if (margin(S, c) > 0) return c;
    }
    return chart_point(S, s->arc_center, 0.5 * (s->depth_lo + s->depth_hi));
  }
  if (const auto* t = std::get_if<TubeDomain>(&shape)) return t->knots[t->knots.size() / 2];
  return std::get<BallDomain>(shape).center;
}

std::vector<std::pair<Vec, Vec>> PatchDomain::boundary_with_normals(const Region& S, int n,
                                                                    std::uint64_t seed) const {
  std::vector<std::pair<Vec, Vec>> out;
  Vec c = center_point(S);
  if (margin(S, c) <= 0) return out;
  auto [lo, hi] = bounding_box(S);
  const double scale = (hi - lo).norm();
  const int d = static_cast<int>(c.size());
  Rng rng(seed);
  while (static_cast<int>(out.size()) < n) {
    Vec u = rng.unit_vector(d);
    double t_lo = 0.0, t_hi = scale * 0.02 + 1e-6;
    int guard = 0;
    while (margin(S, c + t_hi * u) > 0 && guard++ < 80) t_hi *= 1.4;
    if (guard >= 80) continue;
    for (int it = 0; it < 50; ++it) {
      double mid = 0.5 * (t_lo + t_hi);
      (margin(S, c + mid * u) > 0 ? t_lo : t_hi) = mid;
    }
    Vec z = c + 0.5 * (t_lo + t_hi) * u;
    const double h = std::max(1e-6, 1e-5 * scale);
    Vec g(d);
    for (int i = 0; i < d; ++i) {
      Vec e = Vec::Zero(d);
      e[i] = h;
      g[i] = (margin(S, z + e) - margin(S, z - e)) / (2 * h);
    }
    if (g.norm() < 1e-12) continue;
    out.emplace_back(z, Vec(-g / g.norm()));
  }
  return out;
}

void Patch::cache_bbox(const Region& S) {
  auto [lo, hi] = domain.bounding_box(S);
  bbox_lo = lo.array() - 1e-9;
  bbox_hi = hi.array() + 1e-9;
}

bool Patch::bbox_contains(const Vec& z) const {
  for (int i = 0; i < z.size(); ++i)
    if (z[i] < bbox_lo[i] || z[i] > bbox_hi[i]) return false;
  return true;
}

// ---------------------------------------------------------------------------
// PatchyFeedback

PatchyFeedback::PatchyFeedback(Region constraint, std::vector<Patch> patches)
    : constraint_(std::move(constraint)), patches_(std::move(patches)) {
  for (std::size_t i = 0; i < patches_.size(); ++i) {
    patches_[i].index = static_cast<int>(i) + 1;
    if (patches_[i].bbox_lo.size() == 0) patches_[i].cache_bbox(constraint_);
  }
  build_grid();
}

void PatchyFeedback::build_grid() {
  grid_n_ = 0;
  if (patches_.empty() || constraint_.dim() != 2) return;
  grid_lo_ = patches_.front().bbox_lo;
  grid_hi_ = patches_.front().bbox_hi;
  for (const Patch& p : patches_) {
    grid_lo_ = grid_lo_.cwiseMin(p.bbox_lo);
    grid_hi_ = grid_hi_.cwiseMax(p.bbox_hi);
  }
  grid_n_ = 64;
  grid_cells_.assign(grid_n_ * grid_n_, {});
  auto cell_of = [&](double v, int axis) {
    double w = grid_hi_[axis] - grid_lo_[axis];
    int c = static_cast<int>((v - grid_lo_[axis]) / std::max(w, 1e-12) * grid_n_);
    return std::clamp(c, 0, grid_n_ - 1);
  };
  for (int i = static_cast<int>(patches_.size()) - 1; i >= 0; --i) {
    const Patch& p = patches_[i];
    int x0 = cell_of(p.bbox_lo[0], 0), x1 = cell_of(p.bbox_hi[0], 0);
    int y0 = cell_of(p.bbox_lo[1], 1), y1 = cell_of(p.bbox_hi[1], 1);
    for (int cx = x0; cx <= x1; ++cx)
      for (int cy = y0; cy <= y1; ++cy) grid_cells_[cx * grid_n_ + cy].push_back(i);
  }
}

std::optional<int> PatchyFeedback::alpha_star(const Vec& x) const {
  if (mask_ && mask_->distance_to(x) <= mask_radius_) return std::nullopt;
  if (grid_n_ > 0) {
    for (int i = 0; i < 2; ++i)
      if (x[i] < grid_lo_[i] || x[i] > grid_hi_[i]) return std::nullopt;
    auto cell_of = [&](double v, int axis) {
      double w = grid_hi_[axis] - grid_lo_[axis];
      int c = static_cast<int>((v - grid_lo_[axis]) / std::max(w, 1e-12) * grid_n_);
      return std::clamp(c, 0, grid_n_ - 1);
    };
    const auto& cand = grid_cells_[cell_of(x[0], 0) * grid_n_ + cell_of(x[1], 1)];
    for (int i : cand) {  // descending patch order
      const Patch& p = patches_[i];
      if (p.bbox_contains(x) && p.domain.margin(constraint_, x) > 0) return p.index;
    }
    return std::nullopt;
  }
  for (int i = static_cast<int>(patches_.size()) - 1; i >= 0; --i) {
    const Patch& p = patches_[i];
    if (p.bbox_contains(x) && p.domain.margin(constraint_, x) > 0) return p.index;
  }
  return std::nullopt;
}

const Vec& PatchyFeedback::control_at(const Vec& x, const ControlSystem& sys) const {
  auto a = alpha_star(x);
  if (!a) throw std::runtime_error("eval_feedback: outside feedback domain");
  return sys.controls.at(patch(*a).control_index);
}

void PatchyFeedback::set_target_mask(Region target, double radius) {
  mask_ = std::move(target);
  mask_radius_ = radius;
}

// ---------------------------------------------------------------------------
// Boundary layer

std::pair<int, double> inward_control(const ControlSystem& sys, const Region& level,
                                      const Vec& x) {
  Cone cone = level.normal_cone(x, 1e-6, 1e-6);
  if (cone.generators.empty())
    throw std::runtime_error("inward_control: no normal directions at the anchor");
  int best = -1;
  double best_worst = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < sys.controls.size(); ++c) {
    Vec vel = sys.f(x, sys.controls[c]);
    double worst = -std::numeric_limits<double>::infinity();
    for (const Vec& p : cone.generators) worst = std::max(worst, vel.dot(p));
    if (worst < best_worst - 1e-15) {
      best_worst = worst;
      best = static_cast<int>(c);
    }
  }
  double mu = -best_worst;
  if (mu <= 0) throw std::runtime_error("inward_control: (S2) violated at boundary point");
  return {best, mu};
}

std::pair<Patch, BoundaryPatchParams> boundary_patch(const ControlSystem& sys, const Region& S,
                                                     const Vec& anchor,
                                                     const BoundaryPatchConfig& cfg) {
  auto [u_idx, mu] = inward_control(sys, S, anchor);
  Vec w = sys.f(anchor, sys.controls[u_idx]);
  if (w.norm() < 1e-12)
    throw std::runtime_error("boundary_patch: zero anchor velocity");
  auto cert = wedge_certificate(S, anchor, {w}, cfg.cert);
  if (!cert) throw std::runtime_error("boundary_patch: not wedged along anchor velocity");
  const double eps = cert->radius;
  const double M = std::max(sys.velocity_bound(S), w.norm());
  const int d = static_cast<int>(anchor.size());

  // locality radius: largest rho <= lambda/2 keeping the half-margin cone
  // inclusion and the velocity variation bound on sampled nearby states
  auto locality_ok = [&](double rho) {
    Rng rng(cfg.seed);
    int kept = 0, tries = 0;
    while (kept < cfg.n_cone_samples && tries++ < 8 * cfg.n_cone_samples) {
      Vec xi = anchor + rho * rng.in_ball(d);
      if (!S.contains(xi, 1e-9)) continue;
      ++kept;
      Vec vel = sys.f(xi, sys.controls[u_idx]);
      if ((vel - w).norm() >= eps / 4) return false;
      Region level = S.eroded(S.depth(xi));
      if (!level.tangent_cone_contains(xi, vel, mu / 2, 1e-6, 1e-6)) return false;
    }
    return true;
  };
  double rho = cfg.lambda / 2;
  if (!locality_ok(rho)) {
    double lo = 0.0, hi = rho;
    for (int it = 0; it < cfg.bisections; ++it) {
      double mid = 0.5 * (lo + hi);
      (locality_ok(mid) ? lo : hi) = mid;
    }
    rho = lo;
  }
  if (rho < 1e-6) throw std::runtime_error("boundary_patch: locality radius underflow");

  const double beta = 0.5 * std::min(1.0, 2 * rho / (2 * M * eps + eps * eps));
  Wedge big(w, eps, Vec::Zero(d));
  Wedge half(w, eps / 2, Vec::Zero(d));
  double R = std::numeric_limits<double>::infinity();
  for (const Vec& z : half.lower_boundary(32))
    R = std::min(R, -big.signed_distance(beta * z));
  R = std::max(R, 0.0);
  const double alpha = 0.5 * std::min({rho / 2, R / 2, beta / 2});
  if (alpha <= 0) throw std::runtime_error("boundary_patch: degenerate shift");

  Patch patch;
  patch.domain.shape = WedgeDomain{anchor - alpha * w.normalized(), w, eps / 2, beta, alpha};
  patch.control_index = u_idx;
  patch.provenance = "boundary:wedge";
  patch.cache_bbox(S);

  BoundaryPatchParams params;
  params.anchor = anchor;
  params.control_index = u_idx;
  params.margin_mu = mu;
  params.velocity = w;
  params.wedge_radius = eps;
  params.locality = rho;
  params.rescale = beta;
  params.separation = R;
  params.shift = alpha;
  params.diameter_cap = cfg.lambda;
  return {patch, params};
}

namespace {

// Slab-layer construction (d == 2). Bands of tilted bricks stacked from the
// boundary down to the requested depth; within a band, anchors are chosen
// greedily along the ring with polytope vertices seeded first so corner
// bricks carry diagonal controls.
struct SlabLayerBuilder {
  const ControlSystem& sys;
  const Region& S;
  const BoundaryFeedbackConfig& cfg;
  double perim;
  std::vector<double> vertex_arcs;

  SlabLayerBuilder(const ControlSystem& s, const Region& region,
                   const BoundaryFeedbackConfig& c)
      : sys(s), S(region), cfg(c), perim(region.ring_perimeter()) {
    if (region.is_polytope())
      for (const Vec& v : region.vertices()) vertex_arcs.push_back(region.ring_arc_of(v));
    std::sort(vertex_arcs.begin(), vertex_arcs.end());
  }

  // Cone inclusion with half margin plus strict wall inwardness, sampled
  // over the candidate slab extent.
  bool slab_ok(double arc, double half_len, double q_lo, double q_hi, int u_idx,
               double mu) const {
    const Vec u = sys.controls[u_idx];
    for (int ia = -6; ia <= 6; ++ia) {
      double a = arc + half_len * ia / 6.0;
      for (int iq = 0; iq <= 4; ++iq) {
        double q = q_lo + (q_hi - q_lo) * iq / 4.0;
        Vec xi = chart_point(S, a, std::max(q, 0.0));
        if (!S.contains(xi, 1e-9)) continue;
        Vec vel = sys.f(xi, u);
        // xi lies on the boundary of its own erosion level by construction
        Region level = S.eroded(S.depth(xi));
        if (!level.tangent_cone_contains(xi, vel, mu / 2, 1e-6, 1e-6)) return false;
      }
    }
    // wall inwardness at sampled wall points
    for (int side : {-1, 1}) {
      for (int iq = 0; iq <= 6; ++iq) {
        double q = q_lo + (q_hi - q_lo) * iq / 6.0;
        double aw = arc + side * (half_len + cfg.wall_tilt * (q - q_lo));
        Vec z = chart_point(S, aw, std::max(q, 0.0));
        Vec n_out = S.ring_outward_normal(S.ring_arc_of(z));
        Vec t = ring_tangent(n_out);
        Vec n_wall = (side * t + cfg.wall_tilt * n_out) /
                     std::hypot(1.0, cfg.wall_tilt);
        if (sys.f(z, u).dot(n_wall) >= -1e-3) return false;
      }
    }
    return true;
  }

  // Builds one band [c, c + band]; returns (patches, min mu/2).
  std::pair<std::vector<Patch>, double> build_band(double c, double band, int layer) const {
    std::vector<Patch> out;
    double mu_min = std::numeric_limits<double>::infinity();
    Region level = S.eroded(c);
    if (level.is_empty()) throw std::runtime_error("boundary_feedback: band erosion empty");
    const double q_lo = c - cfg.outer_reach;
    const double q_hi = c + band;
    const double arc_pitch = perim / cfg.n_boundary;

    // Arc coverage at mid-band depth with slack; depth coverage holds by
    // construction (every slab spans the full band).
    auto covered = [&](double arc) {
      for (const Patch& pt : out) {
        const auto& sd = std::get<SlabDomain>(pt.domain.shape);
        double halfw_mid = sd.half_len + sd.wall_tilt * ((c + band / 2) - sd.depth_lo);
        if (S.ring_arc_distance(arc, sd.arc_center) <= halfw_mid - 0.4 * arc_pitch) return true;
      }
      return false;
    };

    auto place = [&](double arc, bool at_vertex) {
      Vec anchor = c == 0.0 ? S.ring_point(arc)
                            : level.project_to_boundary(chart_point(S, arc, c));
      auto [u_idx, mu] = inward_control(sys, level, anchor);
      double lo = arc_pitch, hi = std::max(cfg.lambda / 2, arc_pitch);
      // The boundary projection of interior points is discontinuous on the
      // medial-axis fans rooted at polytope vertices, so the arc chart jumps
      // there. Vertex-anchored bricks see a continuous arc distance across
      // their own fan; every other brick must keep its window clear of fans.
      if (!at_vertex) {
        for (double va : vertex_arcs) {
          double d = S.ring_arc_distance(arc, va);
          double cap = d - q_hi - cfg.outer_reach - cfg.wall_tilt * (q_hi - q_lo);
          hi = std::min(hi, cap);
        }
        if (hi < lo) return false;  // the corner brick owns this stretch
      }
      double half_len = 0.0;
      if (slab_ok(arc, hi, q_lo, q_hi, u_idx, mu)) {
        half_len = hi;
      } else if (slab_ok(arc, lo, q_lo, q_hi, u_idx, mu)) {
        for (int it = 0; it < 9; ++it) {
          double mid = 0.5 * (lo + hi);
          (slab_ok(arc, mid, q_lo, q_hi, u_idx, mu) ? lo : hi) = mid;
        }
        half_len = lo;
      } else {
        return false;  // no admissible slab at this anchor
      }
      Patch patch;
      patch.domain.shape = SlabDomain{arc, half_len, q_lo, q_hi, cfg.wall_tilt};
      patch.control_index = u_idx;
      patch.provenance = "boundary:slab:layer=" + std::to_string(layer);
      patch.cache_bbox(S);
      out.push_back(std::move(patch));
      mu_min = std::min(mu_min, mu / 2);
      return true;
    };

    for (double va : vertex_arcs) place(va, true);
    for (int k = 0; k < cfg.n_boundary; ++k) {
      double arc = perim * k / cfg.n_boundary;
      if (covered(arc)) continue;
      if (!place(arc, false))
        throw std::runtime_error("boundary_feedback: no admissible slab at arc " +
                                 std::to_string(arc));
      if (static_cast<int>(out.size()) > cfg.max_patches)
        throw std::runtime_error("boundary_feedback: patch budget exhausted in a band");
    }
    // witnesses for the budget error contract
    for (int k = 0; k < cfg.n_boundary; ++k) {
      double arc = perim * k / cfg.n_boundary;
      Vec probe = chart_point(S, arc, 0.5 * (std::max(q_lo, 0.0) + q_hi));
      bool inside = false;
      for (const Patch& pt : out)
        if (pt.bbox_contains(probe) && pt.domain.margin(S, probe) > 0) inside = true;
      if (!inside)
        throw std::runtime_error("boundary_feedback: uncovered band witness at arc " +
                                 std::to_string(arc));
    }
    return {out, mu_min};
  }
};

double verify_crown_depth(const Region& S, const std::vector<Patch>& patches,
                          double candidate_hi) {
  const double perim = S.ring_perimeter();
  const int n_arc = std::max(256, static_cast<int>(perim / 0.01));
  auto covered_at = [&](double r) {
    for (int k = 0; k < n_arc; ++k) {
      double arc = perim * k / n_arc;
      for (int j = 0; j <= 6; ++j) {
        Vec p = chart_point(S, arc, r * j / 6.0);
        if (!S.contains(p, 1e-9)) continue;
        if (S.depth(p) > r + tol::boundary) continue;
        bool inside = false;
        for (const Patch& pt : patches)
          if (pt.bbox_contains(p) && pt.domain.margin(S, p) > 0) {
            inside = true;
            break;
          }
        if (!inside) return false;
      }
    }
    return true;
  };
  for (double r = candidate_hi; r > 1e-4; r *= 0.85)
    if (covered_at(r)) return r;
  return 0.0;
}

}  // namespace

BoundaryFeedback boundary_feedback(const ControlSystem& sys, const Region& S,
                                   const BoundaryFeedbackConfig& cfg) {
  if (S.dim() != 2)
    throw std::runtime_error("boundary_feedback: d == 2 only");
  BoundaryFeedback fb;
  if (cfg.style == BoundaryStyle::Wedge) {
    // Literal shifted-wedge patches anchored greedily on a boundary sample.
    auto samples = S.boundary_sample(cfg.n_boundary);
    std::sort(samples.begin(), samples.end(), [&](const Vec& a, const Vec& b) {
      return S.ring_arc_of(a) < S.ring_arc_of(b);
    });
    BoundaryPatchConfig pcfg;
    pcfg.lambda = cfg.lambda;
    pcfg.cert = cfg.cert;
    pcfg.seed = cfg.seed;
    std::vector<std::pair<Patch, BoundaryPatchParams>> built;
    for (const Vec& x : samples) {
      bool inside = false;
      for (const auto& [p, prm] : built)
        if (p.bbox_contains(x) && p.domain.margin(S, x) > 0) {
          inside = true;
          break;
        }
      if (inside) continue;
      built.push_back(boundary_patch(sys, S, x, pcfg));
      if (static_cast<int>(built.size()) > cfg.max_patches)
        throw std::runtime_error("boundary_feedback: patch budget exhausted");
    }
    // lexicographic order by (shift alpha, creation index)
    std::stable_sort(built.begin(), built.end(), [](const auto& a, const auto& b) {
      return a.second.shift < b.second.shift;
    });
    double mu = std::numeric_limits<double>::infinity();
    double max_alpha = 0.0;
    for (auto& [p, prm] : built) {
      mu = std::min(mu, prm.margin_mu / 2);
      max_alpha = std::max(max_alpha, prm.shift);
      fb.patches.push_back(std::move(p));
    }
    fb.mu = built.empty() ? 0.0 : mu;
    fb.n_anchors = static_cast<int>(built.size());
    fb.n_layers = 1;
    fb.r_tilde = verify_crown_depth(S, fb.patches, max_alpha);
  } else {
    SlabLayerBuilder builder(sys, S, cfg);
    double c = 0.0;
    double mu = std::numeric_limits<double>::infinity();
    int layer = 0;
    while (c < cfg.depth_target) {
      auto [band_patches, band_mu] = builder.build_band(c, cfg.band_thickness, layer);
      mu = std::min(mu, band_mu);
      fb.n_anchors += static_cast<int>(band_patches.size());
      for (auto& p : band_patches) fb.patches.push_back(std::move(p));
      if (static_cast<int>(fb.patches.size()) > cfg.max_patches)
        throw std::runtime_error("boundary_feedback: patch budget exhausted");
      c += cfg.band_thickness;
      ++layer;
    }
    fb.n_layers = layer;
    fb.mu = fb.patches.empty() ? 0.0 : mu;
    fb.r_tilde = verify_crown_depth(S, fb.patches, c - 0.25 * cfg.band_thickness);
  }
  for (std::size_t i = 0; i < fb.patches.size(); ++i)
    fb.patches[i].index = static_cast<int>(i) + 1;
  return fb;
}

// ---------------------------------------------------------------------------
// Tubes

std::vector<Patch> tube_around(const ControlSystem& sys, const Trajectory& traj,
                               const OpenLoopControl& control, double eps,
                               const TubeConfig& cfg) {
  OpenLoopControl pieces = control.merged();
  if (pieces.pieces() == 0) throw std::invalid_argument("tube_around: empty control");
  const double T = pieces.duration();
  const double L_eff = sys.lipschitz + cfg.radius_growth;
  auto rho = [&](double t) { return 0.5 * eps * std::exp(-L_eff * (T - t)); };
  if (rho(0.0) * std::pow(1.0 + cfg.junction_jump, 1 - control.merged().pieces()) <
      cfg.min_radius)
    throw std::runtime_error("tube_around: eps too small");
  std::vector<Patch> out;
  const int n_pieces = pieces.pieces();
  for (int j = 0; j < n_pieces; ++j) {
    double t0 = pieces.breakpoints[j], t1 = pieces.breakpoints[j + 1];
    // later pieces run a notch fatter so every junction sphere is interior
    // to its successor's entry ball
    double scale = std::pow(1.0 + cfg.junction_jump, j + 1 - n_pieces);
    TubeDomain dom;
    int steps = std::max(1, static_cast<int>(std::ceil((t1 - t0) / cfg.knot_dt)));
    for (int s = 0; s <= steps; ++s) {
      double t = t0 + (t1 - t0) * s / steps;
      dom.knots.push_back(traj.at(t));
      dom.radii.push_back(scale * rho(t));
      dom.times.push_back(t);
    }
    Patch patch;
    patch.domain.shape = std::move(dom);
    patch.control_index = pieces.control_indices[j];
    patch.provenance = "tube:piece=" + std::to_string(j);
    out.push_back(std::move(patch));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Assembly

PatchyFeedback assemble_feedback(const Region& S, const BoundaryFeedback& boundary,
                                 const std::vector<std::vector<Patch>>& tube_families,
                                 const Region& target, double gamma) {
  std::vector<Patch> all = boundary.patches;
  int seed_id = 0;
  for (const auto& family : tube_families) {
    for (const Patch& p : family) {
      all.push_back(p);
      all.back().provenance = "tube:seed=" + std::to_string(seed_id) + ";" + p.provenance;
    }
    ++seed_id;
  }
  PatchyFeedback fb(S, std::move(all));
  fb.set_target_mask(target, 3 * gamma);
  fb.crown_depth = boundary.r_tilde;
  fb.inward_margin = boundary.mu;
  fb.gamma = gamma;
  fb.n_boundary_patches = static_cast<int>(boundary.patches.size());
  return fb;
}

std::vector<Vec> coverage_failures(const PatchyFeedback& fb, const std::vector<Vec>& samples) {
  std::vector<Vec> failures;
  for (const Vec& x : samples)
    if (!fb.alpha_star(x)) failures.push_back(x);
  return failures;
}

InwardReport check_inward_sampled(const ControlSystem& sys, const PatchyFeedback& fb,
                                  int n_per_patch, std::uint64_t seed) {
  InwardReport report;
  for (const Patch& patch : fb.patches()) {
    InwardPatchStat stat;
    stat.index = patch.index;
    const Vec& u = sys.controls.at(patch.control_index);
    auto samples =
        patch.domain.boundary_with_normals(fb.constraint(), n_per_patch,
                                           seed + static_cast<std::uint64_t>(patch.index));
    for (const auto& [z, n] : samples) {
      auto a = fb.alpha_star(z);
      if (!a || *a > patch.index) continue;  // outside the domain or ceded to a higher patch
      ++stat.samples_used;
      stat.max_dot = std::max(stat.max_dot, sys.f(z, u).dot(n));
    }
    if (stat.samples_used > 0 && stat.max_dot >= 0) report.pass = false;
    if (stat.samples_used > 0) report.worst = std::max(report.worst, stat.max_dot);
    report.per_patch.push_back(stat);
  }
  return report;
}

}  // namespace patchkit
