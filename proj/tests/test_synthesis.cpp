#include <doctest.h>

#include <cmath>
#include <numbers>

#include "patchkit/synthesis.hpp"

using namespace patchkit;

namespace {

Vec v2(double x, double y) {
  Vec v(2);
  v << x, y;
  return v;
}

Region unit_square() { return Region::box(v2(-1, -1), v2(1, 1)); }

Patch ball_patch(const Vec& c, double r, int control) {
  Patch p;
  p.domain.shape = BallDomain{c, r};
  p.control_index = control;
  return p;
}

BoundaryFeedbackConfig slab_config() {
  BoundaryFeedbackConfig cfg;
  cfg.depth_target = 0.1;
  cfg.band_thickness = 0.03;
  cfg.outer_reach = 0.02;
  cfg.lambda = 0.5;
  cfg.n_boundary = 128;
  return cfg;
}

}  // namespace

TEST_CASE("inward_control picks the best-aligned compass direction") {
  ControlSystem sys = make_single_integrator(16, true);
  Region sq = unit_square();

  auto [u_face, mu_face] = inward_control(sys, sq, v2(1, 0.2));
  CHECK(sys.controls[u_face].dot(v2(-1, 0)) ==
        doctest::Approx(std::cos(std::numbers::pi / 16)));
  CHECK(mu_face == doctest::Approx(std::cos(std::numbers::pi / 16)));

  auto [u_corner, mu_corner] = inward_control(sys, sq, v2(1, 1));
  CHECK(mu_corner ==
        doctest::Approx(std::cos(std::numbers::pi / 4 + std::numbers::pi / 16)));
  CHECK(sys.controls[u_corner].dot(v2(-1, -1).normalized()) >= 0.98);

  ControlSystem outward = sys;
  outward.controls = {v2(1, 0)};
  CHECK_THROWS_AS((void)inward_control(outward, sq, v2(1, 0)), std::runtime_error);
}

TEST_CASE("boundary_patch builds the shifted wedge") {
  ControlSystem sys = make_single_integrator(16, true);
  Region sq = unit_square();
  BoundaryPatchConfig cfg;
  cfg.lambda = 0.5;
  auto [patch, params] = boundary_patch(sys, sq, v2(1, 0), cfg);

  CHECK(params.wedge_radius == doctest::Approx(0.5));  // certificate on the halving grid
  CHECK(params.margin_mu == doctest::Approx(std::cos(std::numbers::pi / 16)));
  CHECK(params.shift > 0);
  CHECK(params.rescale > 0);
  CHECK(params.rescale < 1);

  // the anchor itself belongs to the domain
  CHECK(patch.domain.contains(sq, v2(1, 0)));

  // domain stays within the locality ball of the anchor
  auto samples = patch.domain.boundary_with_normals(sq, 200, 7);
  for (const auto& [z, n] : samples) CHECK((z - params.anchor).norm() <= params.locality + 1e-6);

  // lower wedge boundary points keep depth above the clip level
  const auto& dom = std::get<WedgeDomain>(patch.domain.shape);
  Wedge half(params.velocity, params.wedge_radius / 2, Vec::Zero(2));
  for (const Vec& z_local : half.lower_boundary(32)) {
    Vec z = dom.apex + dom.beta * z_local;
    CHECK(sq.depth(z) > params.shift);
  }
}

TEST_CASE("boundary_patch respects the diameter cap") {
  ControlSystem sys = make_single_integrator(16, true);
  Region sq = unit_square();
  BoundaryPatchConfig cfg;
  cfg.lambda = 0.1;
  auto [patch, params] = boundary_patch(sys, sq, v2(1, 0), cfg);
  auto samples = patch.domain.boundary_with_normals(sq, 100, 3);
  for (std::size_t i = 0; i < samples.size(); ++i)
    for (std::size_t j = i + 1; j < samples.size(); ++j)
      CHECK((samples[i].first - samples[j].first).norm() <= 0.1 + 1e-6);
}

TEST_CASE("wedge-style boundary feedback covers the boundary sample") {
  ControlSystem sys = make_single_integrator(16, true);
  Region sq = unit_square();
  BoundaryFeedbackConfig cfg;
  cfg.style = BoundaryStyle::Wedge;
  cfg.lambda = 0.4;
  cfg.n_boundary = 64;
  BoundaryFeedback fb = boundary_feedback(sys, sq, cfg);
  // frozen regression bound from this cover: one patch per walk sample plus
  // the four vertices at most
  CHECK(fb.patches.size() <= 68);
  CHECK(fb.mu > 0);
  // every walk sample is inside some patch domain
  for (const Vec& x : sq.boundary_sample(64)) {
    bool inside = false;
    for (const Patch& p : fb.patches)
      if (p.bbox_contains(x) && p.domain.margin(sq, x) > 0) inside = true;
    CHECK(inside);
  }
}

TEST_CASE("slab boundary feedback covers the crown of the square") {
  ControlSystem sys = make_single_integrator(16, true);
  Region sq = unit_square();
  BoundaryFeedback fb = boundary_feedback(sys, sq, slab_config());
  CHECK(fb.n_layers == 4);
  CHECK(fb.patches.size() < 400);
  CHECK(fb.r_tilde >= 0.08);
  CHECK(fb.mu >= 0.25);

  // dense crown check at several depths, including the boundary itself
  Rng rng(42);
  for (int i = 0; i < 500; ++i) {
    double arc = rng.uniform(0, sq.ring_perimeter());
    double depth = rng.uniform(0, fb.r_tilde);
    Vec p = sq.ring_point(arc) - depth * sq.ring_outward_normal(arc);
    if (!sq.contains(p, 1e-9)) continue;
    if (sq.depth(p) > fb.r_tilde) continue;
    bool inside = false;
    for (const Patch& patch : fb.patches)
      if (patch.bbox_contains(p) && patch.domain.margin(sq, p) > 0) inside = true;
    CHECK(inside);
  }
}

TEST_CASE("slab boundary feedback covers the crown of the disk") {
  ControlSystem sys = make_linear_stable(16, true);
  Region disk = Region::ball(v2(0, 0), 1.0);
  BoundaryFeedback fb = boundary_feedback(sys, disk, slab_config());
  CHECK(fb.r_tilde >= 0.08);
  CHECK(fb.mu > 0.4);  // the drift term adds inward margin everywhere
}

TEST_CASE("slab seam points hand off to higher patches") {
  ControlSystem sys = make_single_integrator(16, true);
  Region sq = unit_square();
  BoundaryFeedback bf = boundary_feedback(sys, sq, slab_config());
  PatchyFeedback fb(sq, bf.patches);
  int checked = 0;
  for (const Patch& p : fb.patches()) {
    const auto* slab = std::get_if<SlabDomain>(&p.domain.shape);
    if (!slab || slab->depth_hi > 0.1) continue;  // seams of the last layer feed the tubes
    for (double off : {-0.3, 0.0, 0.3}) {
      double arc = slab->arc_center + off * slab->half_len;
      Vec z = sq.ring_point(arc) - (slab->depth_hi + 1e-9) * sq.ring_outward_normal(arc);
      // the straight normal offset is unfaithful in corner fans; only probe
      // where it lands at the intended depth just past the seam
      if (std::abs(sq.depth(z) - (slab->depth_hi + 1e-9)) > 1e-9) continue;
      auto a = fb.alpha_star(z);
      if (!a) continue;  // outside this slab's arc after the tilt
      CHECK(*a > p.index);
      ++checked;
    }
  }
  CHECK(checked > 50);
}

TEST_CASE("tube radius schedule and properties") {
  ControlSystem sys = make_single_integrator(16, true);
  Region sq = unit_square();
  // straight two-piece reference
  OpenLoopControl u;
  u.breakpoints = {0.0, 0.5, 1.0};
  int west = -1, north = -1;
  for (std::size_t i = 0; i < sys.controls.size(); ++i) {
    if (sys.controls[i].dot(v2(-1, 0)) > 0.98) west = static_cast<int>(i);
    if (sys.controls[i].dot(v2(0, 1)) > 0.98) north = static_cast<int>(i);
  }
  REQUIRE(west >= 0);
  REQUIRE(north >= 0);
  u.control_indices = {west, north};
  Trajectory traj = integrate_open_loop(sys, v2(0.5, -0.5), u, 0.01);

  SUBCASE("zero growth keeps the radius schedule constant") {
    TubeConfig cfg;
    cfg.radius_growth = 0.0;
    cfg.junction_jump = 0.0;
    auto tube = tube_around(sys, traj, u, 0.1, cfg);
    REQUIRE(tube.size() == 2);
    for (const Patch& p : tube) {
      const auto& dom = std::get<TubeDomain>(p.domain.shape);
      for (double r : dom.radii) CHECK(r == doctest::Approx(0.05));
    }
  }

  SUBCASE("junction spheres are interior to the successor piece") {
    TubeConfig cfg;
    auto tube = tube_around(sys, traj, u, 0.1, cfg);
    REQUIRE(tube.size() == 2);
    const auto& d0 = std::get<TubeDomain>(tube[0].domain.shape);
    for (int k = 0; k < 16; ++k) {
      double a = 2 * std::numbers::pi * k / 16;
      Vec z = d0.knots.back() + d0.radii.back() * v2(std::cos(a), std::sin(a));
      CHECK(tube[1].domain.margin(sq, z) > 0);
    }
  }

  SUBCASE("positive growth gives strictly increasing radii") {
    TubeConfig cfg;
    cfg.radius_growth = 0.05;
    auto tube = tube_around(sys, traj, u, 0.1, cfg);
    const auto& dom = std::get<TubeDomain>(tube[0].domain.shape);
    for (std::size_t i = 1; i < dom.radii.size(); ++i) CHECK(dom.radii[i] > dom.radii[i - 1]);
    // containment: tube points stay within eps of the reference
    for (const Patch& p : tube) {
      auto samples = p.domain.boundary_with_normals(sq, 60, 5);
      for (const auto& [z, n] : samples) {
        double dmin = std::numeric_limits<double>::infinity();
        for (const Vec& x : traj.states) dmin = std::min(dmin, (z - x).norm());
        CHECK(dmin <= 0.1 + 1e-6);
      }
    }
    // reference states are interior to the union
    for (std::size_t k = 0; k < traj.states.size(); k += 7) {
      double best = -1;
      for (const Patch& p : tube) best = std::max(best, p.domain.margin(sq, traj.states[k]));
      CHECK(best > 0);
    }
    // the junction ball of piece 0 belongs to piece 1's domain
    const auto& d1 = std::get<TubeDomain>(tube[1].domain.shape);
    Vec junction = d1.knots.front();
    double r_junction = d1.radii.front();
    for (int k = 0; k < 8; ++k) {
      double a = 2 * std::numbers::pi * k / 8;
      Vec z = junction + 0.8 * r_junction * v2(std::cos(a), std::sin(a));
      CHECK(tube[1].domain.contains(sq, z));
    }
  }

  SUBCASE("tiny eps is rejected") {
    TubeConfig cfg;
    cfg.min_radius = 1e-9;
    CHECK_THROWS_WITH_AS((void)tube_around(sys, traj, u, 1e-10, cfg),
                         "tube_around: eps too small", std::runtime_error);
  }
}

TEST_CASE("tube tracking: random starts in the first segment follow the reference") {
  ControlSystem sys = make_single_integrator(16, true);
  Region sq = unit_square();
  int west = -1;
  for (std::size_t i = 0; i < sys.controls.size(); ++i)
    if (sys.controls[i].dot(v2(-1, 0)) > 0.98) west = static_cast<int>(i);
  OpenLoopControl u = OpenLoopControl::from_dwells({west, west, west, west, west, west}, 0.2);
  Trajectory traj = integrate_open_loop(sys, v2(0.6, 0), u.merged(), 0.01);
  const double eps = 0.1;
  TubeConfig cfg;
  cfg.radius_growth = 0.05;
  auto tube = tube_around(sys, traj, u, eps, cfg);
  PatchyFeedback fb(sq, tube);

  Rng rng(99);
  const auto& first = std::get<TubeDomain>(fb.patches().front().domain.shape);
  int tracked = 0;
  for (int trial = 0; trial < 50; ++trial) {
    std::size_t ki = rng.next_u64() % first.knots.size();
    Vec y0 = first.knots[ki] + 0.8 * first.radii[ki] * rng.in_ball(2);
    if (!fb.alpha_star(y0)) continue;
    // simulate under the tube patches only
    Vec y = y0;
    double shift = traj.times[0];
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < traj.states.size(); ++k)
      if ((y0 - traj.states[k]).norm() < best) {
        best = (y0 - traj.states[k]).norm();
        shift = traj.times[k];
      }
    double worst_dev = 0;
    double t = 0;
    const double dt = 0.005;
    while (t < traj.duration() + 0.5) {
      auto a = fb.alpha_star(y);
      if (!a) break;
      const Vec& uc = sys.controls[fb.patch(*a).control_index];
      y = rk4_step([&](const Vec& z) { return sys.f(z, uc); }, y, dt);
      t += dt;
      double ref_t = std::min(shift + t, traj.duration());
      worst_dev = std::max(worst_dev, (y - traj.at(ref_t)).norm());
    }
    CHECK(worst_dev <= eps + 1e-6);
    CHECK((y - traj.final()).norm() <= eps + 1e-6);
    ++tracked;
  }
  CHECK(tracked >= 45);
}

TEST_CASE("alpha_star and eval on overlapping balls") {
  Region sq = unit_square();
  ControlSystem sys = make_single_integrator(4, false);
  std::vector<Patch> patches;
  patches.push_back(ball_patch(v2(0, 0), 1.0, 0));
  patches.push_back(ball_patch(v2(0.5, 0), 1.0, 1));
  PatchyFeedback fb(sq, patches);
  CHECK(fb.alpha_star(v2(0.6, 0)) == 2);
  CHECK(fb.alpha_star(v2(-0.5, 0)) == 1);
  CHECK_FALSE(fb.alpha_star(v2(5, 5)).has_value());
  CHECK(fb.control_at(v2(0.6, 0), sys) == sys.controls[1]);
  CHECK(fb.control_at(v2(-0.5, 0), sys) == sys.controls[0]);
  CHECK_THROWS_AS((void)fb.control_at(v2(5, 5), sys), std::runtime_error);
}

TEST_CASE("check_inward_sampled flags an outward patch") {
  Region sq = unit_square();
  ControlSystem sys = make_single_integrator(16, true);
  int east = -1, west = -1;
  for (std::size_t i = 0; i < sys.controls.size(); ++i) {
    if (sys.controls[i].dot(v2(1, 0)) > 0.98) east = static_cast<int>(i);
    if (sys.controls[i].dot(v2(-1, 0)) > 0.98) west = static_cast<int>(i);
  }
  std::vector<Patch> patches;
  patches.push_back(ball_patch(v2(0, 0), 0.9, west));
  patches.push_back(ball_patch(v2(0.2, 0), 0.5, east));  // boundary inside patch 1
  PatchyFeedback fb(sq, patches);
  auto report = check_inward_sampled(sys, fb, 100, 3);
  CHECK_FALSE(report.pass);
  CHECK(report.per_patch[1].max_dot > 0.5);
}

TEST_CASE("assembly concatenates indices with boundary patches lowest") {
  ControlSystem sys = make_single_integrator(16, true);
  Region sq = unit_square();
  BoundaryFeedback bf = boundary_feedback(sys, sq, slab_config());
  int west = 7;
  OpenLoopControl u = OpenLoopControl::from_dwells({west, west}, 0.2);
  Trajectory traj = integrate_open_loop(sys, v2(0.5, 0), u.merged(), 0.01);
  TubeConfig tcfg;
  auto tube = tube_around(sys, traj, u, 0.05, tcfg);
  std::size_t tube_size = tube.size();
  PatchyFeedback fb =
      assemble_feedback(sq, bf, {tube}, Region::ball(v2(0, 0), 0.0), 0.05);
  CHECK(fb.size() == static_cast<int>(bf.patches.size() + tube_size));
  // first tube patch sits right after the boundary block
  const Patch& first_tube = fb.patch(static_cast<int>(bf.patches.size()) + 1);
  CHECK(first_tube.provenance.rfind("tube", 0) == 0);
  // the mask hides the target neighborhood
  CHECK_FALSE(fb.alpha_star(v2(0.05, 0)).has_value());
}
