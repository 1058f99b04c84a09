#pragma once

#include <string>

#include "patchkit/geometry.hpp"

namespace patchkit {

enum class DomainTag { Global, RestrictedToS };

/// Control system x' = f(x, u) with a finite sample of the compact control
/// set. The Lipschitz and growth constants are declared by the caller and
/// only spot-checked (verify_regularity).
struct ControlSystem {
  std::function<Vec(const Vec&, const Vec&)> f;
  double lipschitz = 0.0;  // L_f, in the state variable
  double growth = 1.0;     // C_f, |f| <= C_f (1 + |x|)
  std::vector<Vec> controls;
  int state_dim = 0;
  DomainTag domain = DomainTag::Global;
  std::string name;

  Vec eval(const Vec& x, int control_index) const { return f(x, controls.at(control_index)); }
  /// Max |f| over sampled region x controls (velocity bound M).
  double velocity_bound(const Region& region, int n_samples = 512) const;
};

/// 16 unit directions at angles (2k+1)*pi/16 plus the zero control.
std::vector<Vec> compass_controls(int n_dirs, bool include_zero);

ControlSystem make_single_integrator(int n_dirs = 16, bool include_zero = true);
ControlSystem make_linear_stable(int n_dirs = 16, bool include_zero = true);
/// (x, y, heading) with controls on a finite (speed, turn-rate) grid.
ControlSystem make_unicycle(const std::vector<double>& speeds,
                            const std::vector<double>& turn_rates);

/// Piecewise constant open loop control on left-open right-closed intervals.
struct OpenLoopControl {
  std::vector<double> breakpoints;     // t0 = 0 < t1 < ... < tN = T
  std::vector<int> control_indices;    // one per interval

  static OpenLoopControl from_dwells(const std::vector<int>& sequence, double dwell);
  double duration() const { return breakpoints.empty() ? 0.0 : breakpoints.back(); }
  int pieces() const { return static_cast<int>(control_indices.size()); }
  int control_at(double t) const;
  /// Merges consecutive intervals with identical control values.
  OpenLoopControl merged() const;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<Vec> states;
  std::vector<int> control_indices;  // per step
  double dt_nominal = 0.0;
  double max_step_residual = 0.0;  // Richardson half-step diagnostic

  const Vec& initial() const { return states.front(); }
  const Vec& final() const { return states.back(); }
  double duration() const { return times.empty() ? 0.0 : times.back(); }
  /// Linear interpolation between grid states.
  Vec at(double t) const;
};

/// One classical RK4 step under a frozen control value.
Vec rk4_step(const std::function<Vec(const Vec&)>& field, const Vec& x, double h);

/// Fixed-step RK4 within each constant-control interval; the step grid is
/// refined so every breakpoint is hit exactly. Throws on |x| > 1e6.
Trajectory integrate_open_loop(const ControlSystem& sys, const Vec& x0,
                               const OpenLoopControl& control, double dt);

struct RegularityReport {
  double max_lipschitz_ratio = 0.0;
  double max_growth_ratio = 0.0;
  double max_hull_distance = 0.0;  // convexity probe, reported not enforced
  int pairs_sampled = 0;
};

/// Samples point pairs and controls in `region` and reports the worst
/// observed Lipschitz ratio, growth ratio and convex-combination distance
/// from the sampled velocity hull.
RegularityReport verify_regularity(const ControlSystem& sys, int n_pairs,
                                   const Region& region, std::uint64_t seed = 0x5e6du);

/// Componentwise inf-convolution extension: f_i~(x,u) = min over grid sample
/// Y of S of f_i(y,u) + L_f |x - y|. Exact (short-circuit) on grid points.
ControlSystem extend_field(const ControlSystem& sys, const Region& S, double grid_h);

/// First grid time with d(x_k, target) <= delta, if any.
std::optional<double> reach_time(const Trajectory& traj, const Region& target, double delta);

}  // namespace patchkit
