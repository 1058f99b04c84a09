#include "patchkit/planner.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <unordered_map>

namespace patchkit {

namespace {

struct Node {
  Vec state;
  double time = 0.0;
  int parent = -1;
  int control = -1;
};

// Integer cell key for the duplicate-pruning hash.
std::uint64_t cell_key(const Vec& x, double cell) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (int i = 0; i < x.size(); ++i) {
    auto q = static_cast<std::int64_t>(std::floor(x[i] / cell));
    auto u = static_cast<std::uint64_t>(q);
    for (int b = 0; b < 8; ++b) {
      h ^= (u >> (8 * b)) & 0xff;
      h *= 0x100000001b3ull;
    }
  }
  return h;
}

// One dwell under a frozen control with per-substep margin checks.
std::optional<Vec> dwell_step(const ControlSystem& sys, const Region& S, const Vec& x0,
                              int control, double dwell, int substeps, double margin) {
  const Vec& u = sys.controls[control];
  auto field = [&](const Vec& x) { return sys.f(x, u); };
  Vec x = x0;
  double h = dwell / substeps;
  for (int s = 0; s < substeps; ++s) {
    x = rk4_step(field, x, h);
    if (x.norm() > 1e6) return std::nullopt;
    if (S.depth(x) < margin - 1e-9) return std::nullopt;
  }
  return x;
}

double max_speed_over(const ControlSystem& sys, const Region& S) {
  auto [lo, hi] = S.bounding_box();
  double max_norm = std::max(lo.norm(), hi.norm());
  return sys.growth * (1.0 + max_norm);
}

}  // namespace

std::optional<OpenLoopControl> plan_constrained(const ControlSystem& sys, const Region& S,
                                                const PlanRequest& req) {
  if (S.depth(req.start) < req.margin - 1e-9)
    throw std::invalid_argument("plan_constrained: start outside the margin region");
  if (req.target.distance_to(req.start) <= req.target_tol)
    return OpenLoopControl{{0.0}, {}};

  const double v_max = max_speed_over(sys, S);
  // Hash cells sized by the sampled velocity bound: half the largest dwell
  // displacement, so consecutive dwell states land in distinct cells.
  const double v_bound = std::min(v_max, sys.velocity_bound(S));
  const double cell = std::max(req.dwell * v_bound / 2.0, 1e-9);
  const int max_depth = std::max(1, static_cast<int>(std::floor(req.horizon / req.dwell + 1e-9)));
  // Exhaustive mode keeps small instances exactly aligned with oracle_bfs.
  const bool prune =
      std::pow(static_cast<double>(sys.controls.size()), max_depth) > 1e5;

  std::vector<Node> arena;
  arena.push_back({req.start, 0.0, -1, -1});
  using QueueItem = std::tuple<double, std::uint64_t, int>;  // priority, insertion, node
  std::priority_queue<QueueItem, std::vector<QueueItem>, std::greater<>> open;
  std::uint64_t stamp = 0;
  open.emplace(req.target.distance_to(req.start) / v_max, stamp++, 0);
  std::unordered_map<std::uint64_t, double> best_time;
  best_time[cell_key(req.start, cell)] = 0.0;

  auto reconstruct = [&](int goal_idx) {
    std::vector<int> seq;
    for (int i = goal_idx; arena[i].parent >= 0; i = arena[i].parent)
      seq.push_back(arena[i].control);
    std::reverse(seq.begin(), seq.end());
    return OpenLoopControl::from_dwells(seq, req.dwell);
  };

  int expanded = 0;
  while (!open.empty()) {
    auto [prio, order, idx] = open.top();
    open.pop();
    (void)prio;
    (void)order;
    if (++expanded > req.node_budget) return std::nullopt;
    Node node = arena[idx];
    if (node.time + req.dwell > req.horizon + 1e-9) continue;
    for (int c = 0; c < static_cast<int>(sys.controls.size()); ++c) {
      auto next = dwell_step(sys, S, node.state, c, req.dwell, req.substeps, req.margin);
      if (!next) continue;
      double t_next = node.time + req.dwell;
      if (req.target.distance_to(*next) <= req.target_tol) {  // goal before pruning
        arena.push_back({*next, t_next, idx, c});
        OpenLoopControl plan = reconstruct(static_cast<int>(arena.size()) - 1);
        auto [min_margin, ok] = verify_plan_margin(sys, S, plan, req.start, req.margin);
        (void)min_margin;
        if (ok) return plan;
        arena.pop_back();
        continue;  // fine re-integration disagreed; keep searching
      }
      if (prune) {
        std::uint64_t key = cell_key(*next, cell);
        auto it = best_time.find(key);
        if (it != best_time.end() && it->second <= t_next + 1e-12) continue;
        best_time[key] = t_next;
      }
      arena.push_back({*next, t_next, idx, c});
      open.emplace(t_next + req.target.distance_to(*next) / v_max, stamp++,
                   static_cast<int>(arena.size()) - 1);
    }
  }
  return std::nullopt;
}

bool oracle_bfs(const ControlSystem& sys, const Region& S, const PlanRequest& req, int depth) {
  if (std::pow(static_cast<double>(sys.controls.size()), depth) > 1e6 + 1)
    throw std::invalid_argument("oracle_bfs: |controls|^depth exceeds 1e6");
  if (S.depth(req.start) < req.margin - 1e-9) return false;
  if (req.target.distance_to(req.start) <= req.target_tol) return true;
  // Depth-first enumeration with early exit; prefixes share integration work.
  std::function<bool(const Vec&, int)> dfs = [&](const Vec& x, int remaining) -> bool {
    if (remaining == 0) return false;
    for (int c = 0; c < static_cast<int>(sys.controls.size()); ++c) {
      auto next = dwell_step(sys, S, x, c, req.dwell, req.substeps, req.margin);
      if (!next) continue;
      if (req.target.distance_to(*next) <= req.target_tol) return true;
      if (dfs(*next, remaining - 1)) return true;
    }
    return false;
  };
  return dfs(req.start, depth);
}

std::pair<double, bool> verify_plan_margin(const ControlSystem& sys, const Region& S,
                                           const OpenLoopControl& control, const Vec& start,
                                           double r) {
  double min_margin = S.depth(start) - r;
  if (control.pieces() > 0) {
    double min_len = std::numeric_limits<double>::infinity();
    for (int i = 0; i < control.pieces(); ++i)
      min_len = std::min(min_len, control.breakpoints[i + 1] - control.breakpoints[i]);
    Trajectory traj = integrate_open_loop(sys, start, control, min_len / 20.0);
    for (const Vec& x : traj.states) min_margin = std::min(min_margin, S.depth(x) - r);
  }
  return {min_margin, min_margin >= 0.0};
}

}  // namespace patchkit
