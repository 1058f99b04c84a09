#include <doctest.h>

#include <cmath>
#include <numbers>

#include "patchkit/dynamics.hpp"

using namespace patchkit;

namespace {

Vec v2(double x, double y) {
  Vec v(2);
  v << x, y;
  return v;
}

Region unit_square() { return Region::box(v2(-1, -1), v2(1, 1)); }

// index of the compass control nearest a direction
int nearest_control(const ControlSystem& sys, const Vec& dir) {
  int best = 0;
  double best_dot = -2;
  for (std::size_t i = 0; i < sys.controls.size(); ++i) {
    if (sys.controls[i].norm() < 0.5) continue;
    double dot = sys.controls[i].dot(dir) / sys.controls[i].norm();
    if (dot > best_dot) {
      best_dot = dot;
      best = static_cast<int>(i);
    }
  }
  return best;
}

}  // namespace

TEST_CASE("regularity report for the compass integrator") {
  ControlSystem sys = make_single_integrator(16, true);
  auto rep = verify_regularity(sys, 500, unit_square());
  CHECK(rep.max_lipschitz_ratio <= 1e-12);
  CHECK(rep.max_growth_ratio <= 1.0 + 1e-12);
  CHECK(rep.max_hull_distance <= std::sin(std::numbers::pi / 16) / 2 + 1e-9);
}

TEST_CASE("regularity report approaches the declared Lipschitz constant") {
  ControlSystem sys = make_linear_stable(16, true);
  auto rep = verify_regularity(sys, 4000, unit_square());
  CHECK(rep.max_lipschitz_ratio <= 1.0 + 1e-9);
  CHECK(rep.max_lipschitz_ratio >= 0.9);
}

TEST_CASE("open-loop integration") {
  ControlSystem sys = make_single_integrator(16, true);
  // constant velocity: exact displacement
  ControlSystem axis = sys;
  axis.controls = {v2(1, 0), v2(0, 1)};
  Trajectory t1 = integrate_open_loop(axis, v2(0, 0), OpenLoopControl::from_dwells({0}, 1.0), 0.01);
  CHECK((t1.final() - v2(1, 0)).norm() <= 1e-12);

  // two-piece control
  OpenLoopControl two;
  two.breakpoints = {0.0, 0.5, 1.0};
  two.control_indices = {0, 1};
  Trajectory t2 = integrate_open_loop(axis, v2(0, 0), two, 0.01);
  CHECK((t2.final() - v2(0.5, 0.5)).norm() <= 1e-12);

  // linear field: closed form e^{-1}
  ControlSystem lin = make_linear_stable(16, true);
  int zero = 16;  // the appended zero control
  Trajectory t3 =
      integrate_open_loop(lin, v2(1, 0), OpenLoopControl::from_dwells({zero}, 1.0), 0.01);
  CHECK((t3.final() - v2(std::exp(-1.0), 0)).norm() <= 1e-8);
  CHECK(t3.max_step_residual <= 1e-8);
}

TEST_CASE("rk4 halving gains at least a factor 8") {
  ControlSystem lin = make_linear_stable(16, true);
  int zero = 16;
  auto terminal_error = [&](double dt) {
    Trajectory t = integrate_open_loop(lin, v2(1, 0), OpenLoopControl::from_dwells({zero}, 1.0), dt);
    return (t.final() - v2(std::exp(-1.0), 0)).norm();
  };
  double e1 = terminal_error(0.1);
  double e2 = terminal_error(0.05);
  CHECK(e1 / e2 >= 8.0);
}

TEST_CASE("divergence guard") {
  ControlSystem expl;
  expl.f = [](const Vec& x, const Vec&) { return Vec(10.0 * x); };
  expl.controls = {v2(0, 0)};
  expl.state_dim = 2;
  CHECK_THROWS_WITH_AS(
      integrate_open_loop(expl, v2(1, 0), OpenLoopControl::from_dwells({0}, 5.0), 0.01),
      "integrate_open_loop: divergence", std::runtime_error);
}

TEST_CASE("reach_time") {
  ControlSystem sys = make_single_integrator(16, true);
  ControlSystem axis = sys;
  axis.controls = {v2(-1, 0)};
  Trajectory t = integrate_open_loop(axis, v2(0.9, 0), OpenLoopControl::from_dwells({0}, 1.0), 0.01);
  Region origin = Region::ball(v2(0, 0), 0.0);
  auto rt = reach_time(t, origin, 0.2);
  REQUIRE(rt.has_value());
  CHECK(*rt == doctest::Approx(0.7).epsilon(0.02));
  CHECK_FALSE(reach_time(t, Region::ball(v2(5, 5), 0.0), 0.2).has_value());
  CHECK(*reach_time(t, origin, 2.0) == doctest::Approx(0.0));
}

TEST_CASE("field extension") {
  ControlSystem lin;
  lin.f = [](const Vec& x, const Vec&) { return Vec(-x); };
  lin.controls = {v2(0, 0)};
  lin.state_dim = 2;
  lin.lipschitz = 1.0;
  lin.growth = 1.0;
  lin.domain = DomainTag::RestrictedToS;
  Region sq = unit_square();
  ControlSystem ext = extend_field(lin, sq, 0.01);

  // independent grid-minimization oracle at (2, 0)
  double oracle = std::numeric_limits<double>::infinity();
  for (double y1 = -1; y1 <= 1 + 1e-12; y1 += 0.01)
    for (double y2 = -1; y2 <= 1 + 1e-12; y2 += 0.01)
      oracle = std::min(oracle, -y1 + std::hypot(2 - y1, y2));
  CHECK(std::abs(oracle) <= 1e-9);  // attained at y = (1, 0)
  Vec val = ext.f(v2(2, 0), v2(0, 0));
  CHECK(std::abs(val[0] - oracle) <= 1e-2);

  // exact agreement on grid points of S (short-circuit)
  Vec grid_point = v2(-1.0, -1.0);
  CHECK(ext.f(grid_point, v2(0, 0)) == lin.f(grid_point, v2(0, 0)));

  // x-independent fields extend to themselves
  ControlSystem flat = make_single_integrator(4, false);
  flat.domain = DomainTag::RestrictedToS;
  flat.lipschitz = 0.0;
  ControlSystem flat_ext = extend_field(flat, sq, 0.05);
  CHECK((flat_ext.f(v2(7, -3), flat.controls[0]) - flat.controls[0]).norm() <= 1e-12);
}

TEST_CASE("extension is Lipschitz and agrees on the set") {
  ControlSystem lin;
  lin.f = [](const Vec& x, const Vec&) { return Vec(-x); };
  lin.controls = {v2(0, 0)};
  lin.state_dim = 2;
  lin.lipschitz = 1.0;
  lin.growth = 1.0;
  lin.domain = DomainTag::RestrictedToS;
  Region sq = unit_square();
  const double h = 0.05;
  ControlSystem ext = extend_field(lin, sq, h);
  Rng rng(11);
  // the inf-convolution is Lipschitz per component; the vector-norm constant
  // picks up a sqrt(d) factor, so the ratio is measured componentwise
  double max_ratio = 0.0;
  for (int i = 0; i < 800; ++i) {
    Vec a = v2(rng.uniform(-2, 2), rng.uniform(-2, 2));
    Vec b = v2(rng.uniform(-2, 2), rng.uniform(-2, 2));
    double d = (a - b).norm();
    if (d < 1e-6) continue;
    Vec diff = ext.f(a, v2(0, 0)) - ext.f(b, v2(0, 0));
    max_ratio = std::max(max_ratio, diff.cwiseAbs().maxCoeff() / d);
  }
  CHECK(max_ratio <= lin.lipschitz + 2 * lin.lipschitz * h);

  double max_dev = 0.0;
  for (int i = 0; i < 200; ++i) {
    Vec x = v2(rng.uniform(-1, 1), rng.uniform(-1, 1));
    max_dev = std::max(max_dev, (ext.f(x, v2(0, 0)) - lin.f(x, v2(0, 0))).norm());
  }
  CHECK(max_dev <= lin.lipschitz * h * std::sqrt(2.0) + 1e-9);
}

TEST_CASE("unicycle dynamics") {
  ControlSystem uni = make_unicycle({1.0}, {0.0, 1.0});
  Vec x0(3);
  x0 << 0, 0, 0;
  Trajectory t = integrate_open_loop(uni, x0, OpenLoopControl::from_dwells({0}, 1.0), 0.01);
  CHECK(t.final()[0] == doctest::Approx(1.0));
  CHECK(t.final()[1] == doctest::Approx(0.0));
  Trajectory turn = integrate_open_loop(uni, x0, OpenLoopControl::from_dwells({1}, 1.0), 0.01);
  CHECK(turn.final()[2] == doctest::Approx(1.0));
  CHECK(turn.final()[1] > 0.3);
}

TEST_CASE("nearest compass control flanks the diagonal by pi/16") {
  // the offset compass has no control exactly on the diagonal; the nearest
  // ones sit pi/16 away on either side
  ControlSystem sys = make_single_integrator(16, true);
  int idx = nearest_control(sys, v2(-1, -1).normalized());
  double dot = sys.controls[idx].dot(v2(-1, -1).normalized());
  CHECK(dot == doctest::Approx(std::cos(std::numbers::pi / 16)).epsilon(1e-12));
}
