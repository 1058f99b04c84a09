#pragma once

#include "patchkit/dynamics.hpp"
#include "patchkit/geometry.hpp"

namespace patchkit {

struct PlanRequest {
  Vec start;
  double margin = 0.0;      // keep depth(x(t)) >= margin throughout
  Region target = Region::empty(0);
  double target_tol = 0.0;  // gamma
  double dwell = 0.1;       // dwell time per control piece
  double horizon = 10.0;    // T_max
  int node_budget = 200000;
  int substeps = 20;        // RK4 substeps per dwell (margin checked at each)
};

/// Best-first search over dwell successors. Priority is elapsed time plus an
/// admissible time-to-target bound; duplicate arrivals are pruned on a
/// spatial hash at resolution dwell*v_max/2 (pruning is switched off on small
/// instances, where exhaustive search is cheap and keeps the search exact).
/// Returns nullopt on budget exhaustion; throws when the start violates the
/// margin precondition.
std::optional<OpenLoopControl> plan_constrained(const ControlSystem& sys, const Region& S,
                                                const PlanRequest& req);

/// Exhaustive enumeration of all control sequences of length <= depth.
/// Ground-truth feasibility for small instances; requires
/// |controls|^depth <= 1e6.
bool oracle_bfs(const ControlSystem& sys, const Region& S, const PlanRequest& req, int depth);

/// Re-integrates the plan at dt = dwell/20 and reports
/// (min over t of depth(x(t)) - r, min >= 0).
std::pair<double, bool> verify_plan_margin(const ControlSystem& sys, const Region& S,
                                           const OpenLoopControl& control, const Vec& start,
                                           double r);

}  // namespace patchkit
