#pragma once

#include "patchkit/synthesis.hpp"

namespace patchkit {

enum class RunStatus { Reached, LeftDomain, BudgetExceeded, MonotoneViolation };

const char* to_string(RunStatus s);

struct SwitchEvent {
  double time = 0;
  int from = 0;
  int to = 0;
};

struct ClosedLoopRun {
  Trajectory trajectory;
  std::vector<int> patch_log;  // active patch per step
  std::vector<SwitchEvent> switches;
  RunStatus status = RunStatus::BudgetExceeded;
  double end_time = 0;
  double min_depth = std::numeric_limits<double>::infinity();  // min r(x_k)
  double max_violation = -std::numeric_limits<double>::infinity();  // max sdf_S(x_k)
  int total_patches = 0;
};

/// Piecewise-constant measurement noise and disturbance on [0, T]. Pieces
/// are left-closed, right-open; the last piece extends to T.
struct Perturbation {
  struct Piece {
    double start = 0;
    Vec value;
  };
  std::vector<Piece> noise;        // applied to the feedback argument
  std::vector<Piece> disturbance;  // added to the velocity

  static Perturbation zero(int dim);
  /// Seeded piecewise-constant pair scaled so that the BV norm of the noise
  /// and the L1 norm of the disturbance hit the requested levels.
  static Perturbation seeded(int dim, double horizon, int pieces, double noise_bv,
                             double disturbance_l1, std::uint64_t seed);

  Vec noise_at(double t) const;
  Vec disturbance_at(double t) const;
  bool trivial() const { return noise.empty() && disturbance.empty(); }
  std::vector<double> breakpoints() const;
};

/// (BV, L1): L1 sums |value| * piece length over [0, horizon]; total
/// variation sums jump magnitudes at interior breakpoints; BV = L1 + TV.
std::pair<double, double> perturbation_norms(const Perturbation& pert, double horizon);

struct SimConfig {
  double dt = 0.01;
  double t_max = 20.0;
  double delta = 0.2;             // target neighborhood radius
  double event_tol_factor = 1e-3;  // switch-time tolerance = dt * factor
};

/// Carathéodory closed loop: per step the active patch is frozen, RK4
/// advances, and index changes within a step are bisected to the crossing.
/// Decreasing indices are retried at halved substeps, then flagged.
ClosedLoopRun simulate_closed_loop(const ControlSystem& sys, const PatchyFeedback& fb,
                                   const Vec& x0, const Region& target, const SimConfig& cfg);

/// Perturbed loop y' = f(y, U(y + noise)) + disturbance; piece boundaries
/// join the time grid exactly. With a trivial perturbation this is the same
/// code path as simulate_closed_loop (bit-identical results).
ClosedLoopRun simulate_perturbed(const ControlSystem& sys, const PatchyFeedback& fb,
                                 const Vec& x0, const Region& target, const Perturbation& pert,
                                 const SimConfig& cfg);

/// Switch indices strictly increase and the switch count does not exceed the
/// patch count.
bool check_monotone_switching(const ClosedLoopRun& run);

struct DecreaseProbeReport {
  double worst_rate = -std::numeric_limits<double>::infinity();
  int segments_probed = 0;
  bool pass(double eps_dec, double tol_fd = 0.05) const {
    return segments_probed == 0 || worst_rate <= -eps_dec / 2 + tol_fd;
  }
};

/// Finite-difference rate of the constraint signed distance along run
/// segments that lie in the crown Q(S, r~) under a boundary patch.
DecreaseProbeReport signed_distance_decrease_probe(const ClosedLoopRun& run, const Region& S,
                                                   const PatchyFeedback& fb, double r_tilde);

struct StabilizationSummary {
  int n_runs = 0;
  int n_pass = 0;
  double max_reach_time = 0;
  double worst_violation = -std::numeric_limits<double>::infinity();
  std::vector<int> failed_runs;
  bool all_pass() const { return n_pass == n_runs; }
};

/// Per-run pass iff the run stayed in S (sdf <= tol_bd at every grid state)
/// and reached the target neighborhood.
StabilizationSummary verify_stabilization(const std::vector<ClosedLoopRun>& runs,
                                          const Region& S, double tol_bd = tol::boundary);

/// CSV rows: run, t, x..., patch.
void write_runs_csv(const std::vector<ClosedLoopRun>& runs, const std::string& path);

}  // namespace patchkit
