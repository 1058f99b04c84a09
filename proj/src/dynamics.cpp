#include "patchkit/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace patchkit {

namespace {
Vec v2(double x, double y) {
  Vec v(2);
  v << x, y;
  return v;
}
}  // namespace

double ControlSystem::velocity_bound(const Region& region, int n_samples) const {
  Rng rng(0xbadcafeull);
  auto [lo, hi] = region.bounding_box();
  const int d = state_dim;
  double bound = 0.0;
  int found = 0, guard = 0;
  while (found < n_samples && guard++ < 40 * n_samples) {
    Vec x(d);
    for (int i = 0; i < d; ++i) x[i] = rng.uniform(lo[i], hi[i]);
    if (!region.contains(x, 1e-9)) continue;
    ++found;
    for (const Vec& u : controls) bound = std::max(bound, f(x, u).norm());
  }
  for (const Vec& x : region.boundary_sample(64))
    for (const Vec& u : controls) bound = std::max(bound, f(x, u).norm());
  return bound;
}

std::vector<Vec> compass_controls(int n_dirs, bool include_zero) {
  std::vector<Vec> out;
  out.reserve(n_dirs + 1);
  for (int k = 0; k < n_dirs; ++k) {
    double a = (2 * k + 1) * std::numbers::pi / n_dirs;
    out.push_back(v2(std::cos(a), std::sin(a)));
  }
  if (include_zero) out.push_back(v2(0, 0));
  return out;
}

ControlSystem make_single_integrator(int n_dirs, bool include_zero) {
  ControlSystem sys;
  sys.f = [](const Vec&, const Vec& u) { return u; };
  sys.lipschitz = 0.0;
  sys.growth = 1.0;
  sys.controls = compass_controls(n_dirs, include_zero);
  sys.state_dim = 2;
  sys.name = "single-integrator";
  return sys;
}

ControlSystem make_linear_stable(int n_dirs, bool include_zero) {
  ControlSystem sys;
  sys.f = [](const Vec& x, const Vec& u) { return Vec(u - x); };
  sys.lipschitz = 1.0;
  sys.growth = 1.0;
  sys.controls = compass_controls(n_dirs, include_zero);
  sys.state_dim = 2;
  sys.name = "linear-stable";
  return sys;
}

ControlSystem make_unicycle(const std::vector<double>& speeds,
                            const std::vector<double>& turn_rates) {
  ControlSystem sys;
  sys.f = [](const Vec& x, const Vec& u) {
    Vec dx(3);
    dx << u[0] * std::cos(x[2]), u[0] * std::sin(x[2]), u[1];
    return dx;
  };
  double vmax = 0.0, wmax = 0.0;
  for (double v : speeds) {
    for (double w : turn_rates) {
      Vec u(2);
      u << v, w;
      sys.controls.push_back(u);
      vmax = std::max(vmax, std::abs(v));
      wmax = std::max(wmax, std::abs(w));
    }
  }
  sys.lipschitz = vmax;
  sys.growth = std::hypot(vmax, wmax);
  sys.state_dim = 3;
  sys.name = "unicycle";
  return sys;
}

OpenLoopControl OpenLoopControl::from_dwells(const std::vector<int>& sequence, double dwell) {
  OpenLoopControl u;
  u.breakpoints.push_back(0.0);
  for (std::size_t i = 0; i < sequence.size(); ++i) {
    u.breakpoints.push_back(dwell * static_cast<double>(i + 1));
    u.control_indices.push_back(sequence[i]);
  }
  return u;
}

int OpenLoopControl::control_at(double t) const {
  if (control_indices.empty()) throw std::runtime_error("control_at: empty control");
  for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i)
    if (t <= breakpoints[i + 1] || i + 2 == breakpoints.size()) return control_indices[i];
  return control_indices.back();
}

OpenLoopControl OpenLoopControl::merged() const {
  OpenLoopControl out;
  if (control_indices.empty()) {
    out.breakpoints = breakpoints;
    return out;
  }
  out.breakpoints.push_back(breakpoints.front());
  for (std::size_t i = 0; i < control_indices.size(); ++i) {
    if (!out.control_indices.empty() && out.control_indices.back() == control_indices[i]) {
      out.breakpoints.back() = breakpoints[i + 1];
    } else {
      out.control_indices.push_back(control_indices[i]);
      out.breakpoints.push_back(breakpoints[i + 1]);
    }
  }
  return out;
}

Vec Trajectory::at(double t) const {
  if (times.empty()) throw std::runtime_error("Trajectory::at: empty");
  if (t <= times.front()) return states.front();
  if (t >= times.back()) return states.back();
  auto it = std::upper_bound(times.begin(), times.end(), t);
  std::size_t i = std::distance(times.begin(), it) - 1;
  double w = (t - times[i]) / (times[i + 1] - times[i]);
  return states[i] + w * (states[i + 1] - states[i]);
}

Vec rk4_step(const std::function<Vec(const Vec&)>& field, const Vec& x, double h) {
  Vec k1 = field(x);
  Vec k2 = field(x + 0.5 * h * k1);
  Vec k3 = field(x + 0.5 * h * k2);
  Vec k4 = field(x + h * k3);
  return x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4);
}

Trajectory integrate_open_loop(const ControlSystem& sys, const Vec& x0,
                               const OpenLoopControl& control, double dt) {
  if (dt <= 0) throw std::invalid_argument("integrate_open_loop: dt > 0 required");
  Trajectory traj;
  traj.dt_nominal = dt;
  traj.times.push_back(0.0);
  traj.states.push_back(x0);
  for (int piece = 0; piece < control.pieces(); ++piece) {
    const Vec& u = sys.controls.at(control.control_indices[piece]);
    auto field = [&](const Vec& x) { return sys.f(x, u); };
    double len = control.breakpoints[piece + 1] - control.breakpoints[piece];
    int steps = std::max(1, static_cast<int>(std::llround(len / dt)));
    double h = len / steps;
    for (int s = 0; s < steps; ++s) {
      const Vec& x = traj.states.back();
      Vec x_full = rk4_step(field, x, h);
      Vec x_half = rk4_step(field, rk4_step(field, x, 0.5 * h), 0.5 * h);
      traj.max_step_residual = std::max(traj.max_step_residual, (x_full - x_half).norm());
      if (x_half.norm() > 1e6) throw std::runtime_error("integrate_open_loop: divergence");
      traj.times.push_back(control.breakpoints[piece] + (s + 1) * h);
      traj.states.push_back(x_half);  // keep the more accurate state
      traj.control_indices.push_back(control.control_indices[piece]);
    }
    traj.times.back() = control.breakpoints[piece + 1];  // exact breakpoint alignment
  }
  return traj;
}

RegularityReport verify_regularity(const ControlSystem& sys, int n_pairs, const Region& region,
                                   std::uint64_t seed) {
  RegularityReport rep;
  Rng rng(seed);
  auto [lo, hi] = region.bounding_box();
  const int d = sys.state_dim;
  auto sample_point = [&]() {
    for (int guard = 0; guard < 1000; ++guard) {
      Vec x(d);
      for (int i = 0; i < d; ++i) x[i] = rng.uniform(lo[i], hi[i]);
      if (region.contains(x, 1e-9)) return x;
    }
    return region.interior_point();
  };
  for (int it = 0; it < n_pairs; ++it) {
    Vec x = sample_point();
    Vec y = sample_point();
    const Vec& u = sys.controls[rng.next_u64() % sys.controls.size()];
    double dxy = (x - y).norm();
    if (dxy > 1e-9)
      rep.max_lipschitz_ratio =
          std::max(rep.max_lipschitz_ratio, (sys.f(x, u) - sys.f(y, u)).norm() / dxy);
    rep.max_growth_ratio = std::max(rep.max_growth_ratio, sys.f(x, u).norm() / (1.0 + x.norm()));
    if (it % 4 == 0) {
      const Vec& u1 = sys.controls[rng.next_u64() % sys.controls.size()];
      const Vec& u2 = sys.controls[rng.next_u64() % sys.controls.size()];
      std::vector<Vec> hull;
      hull.reserve(sys.controls.size());
      for (const Vec& uu : sys.controls) hull.push_back(sys.f(x, uu));
      for (double lam : {0.25, 0.5, 0.75}) {
        Vec mix = lam * sys.f(x, u1) + (1 - lam) * sys.f(x, u2);
        rep.max_hull_distance = std::max(rep.max_hull_distance, distance_to_hull(hull, mix));
      }
    }
    ++rep.pairs_sampled;
  }
  return rep;
}

ControlSystem extend_field(const ControlSystem& sys, const Region& S, double grid_h) {
  if (sys.domain != DomainTag::RestrictedToS)
    throw std::invalid_argument("extend_field: system must be tagged restricted-to-S");
  if (grid_h <= 0) throw std::invalid_argument("extend_field: grid_h > 0 required");
  auto [lo, hi] = S.bounding_box();
  const int d = sys.state_dim;
  auto grid = std::make_shared<std::vector<Vec>>();
  std::vector<int> counts(d);
  for (int i = 0; i < d; ++i)
    counts[i] = std::max(1, static_cast<int>(std::llround((hi[i] - lo[i]) / grid_h)));
  std::vector<int> idx(d, 0);
  while (true) {
    Vec p(d);
    for (int i = 0; i < d; ++i) p[i] = lo[i] + (hi[i] - lo[i]) * idx[i] / counts[i];
    if (S.contains(p, 1e-12)) grid->push_back(p);
    int i = 0;
    while (i < d && ++idx[i] > counts[i]) idx[i++] = 0;
    if (i == d) break;
  }
  int n_bd = std::max(16, static_cast<int>(S.diameter() * 4 / grid_h));
  for (const Vec& b : S.boundary_sample(n_bd)) grid->push_back(b);
  if (grid->empty()) throw std::runtime_error("extend_field: empty grid");

  const double L = sys.lipschitz;
  auto base = sys.f;
  ControlSystem out = sys;
  out.domain = DomainTag::Global;
  out.name = sys.name + "-extended";
  double max_norm = std::max(lo.norm(), hi.norm());
  out.growth = sys.growth + L * (1.0 + max_norm);
  out.f = [base, grid, L, d](const Vec& x, const Vec& u) {
    // On grid points the minimum is attained at y = x; short-circuit keeps
    // the agreement exact.
    for (const Vec& y : *grid)
      if ((x - y).cwiseAbs().maxCoeff() == 0.0) return base(x, u);
    Vec val = Vec::Constant(d, std::numeric_limits<double>::infinity());
    for (const Vec& y : *grid) {
      double dist = (x - y).norm();
      Vec fy = base(y, u);
      for (int i = 0; i < d; ++i) val[i] = std::min(val[i], fy[i] + L * dist);
    }
    return val;
  };
  return out;
}

std::optional<double> reach_time(const Trajectory& traj, const Region& target, double delta) {
  for (std::size_t k = 0; k < traj.states.size(); ++k)
    if (target.distance_to(traj.states[k]) <= delta) return traj.times[k];
  return std::nullopt;
}

}  // namespace patchkit
