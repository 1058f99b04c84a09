#include "patchkit/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace patchkit {

const char* to_string(RunStatus s) {
  switch (s) {
    case RunStatus::Reached: return "reached";
    case RunStatus::LeftDomain: return "left-domain";
    case RunStatus::BudgetExceeded: return "budget-exceeded";
    case RunStatus::MonotoneViolation: return "monotone-violation";
  }
  return "unknown";
}

Perturbation Perturbation::zero(int) { return Perturbation{}; }

Vec Perturbation::noise_at(double t) const {
  if (noise.empty()) return Vec();
  std::size_t i = 0;
  while (i + 1 < noise.size() && noise[i + 1].start <= t + 1e-15) ++i;
  return noise[i].value;
}

Vec Perturbation::disturbance_at(double t) const {
  if (disturbance.empty()) return Vec();
  std::size_t i = 0;
  while (i + 1 < disturbance.size() && disturbance[i + 1].start <= t + 1e-15) ++i;
  return disturbance[i].value;
}

std::vector<double> Perturbation::breakpoints() const {
  std::vector<double> out;
  for (const auto& p : noise) out.push_back(p.start);
  for (const auto& p : disturbance) out.push_back(p.start);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::pair<double, double> perturbation_norms(const Perturbation& pert, double horizon) {
  auto piecewise_l1 = [&](const std::vector<Perturbation::Piece>& pieces) {
    double l1 = 0;
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      double t0 = pieces[i].start;
      double t1 = (i + 1 < pieces.size()) ? pieces[i + 1].start : horizon;
      l1 += pieces[i].value.norm() * std::max(0.0, t1 - t0);
    }
    return l1;
  };
  double bv = piecewise_l1(pert.noise);
  for (std::size_t i = 1; i < pert.noise.size(); ++i)
    bv += (pert.noise[i].value - pert.noise[i - 1].value).norm();
  return {bv, piecewise_l1(pert.disturbance)};
}

Perturbation Perturbation::seeded(int dim, double horizon, int pieces, double noise_bv,
                                  double disturbance_l1, std::uint64_t seed) {
  Rng rng(seed);
  Perturbation pert;
  auto make = [&](std::vector<Piece>& out) {
    for (int i = 0; i < pieces; ++i) {
      Piece p;
      p.start = horizon * i / pieces;
      p.value = rng.unit_vector(dim) * rng.uniform(0.25, 1.0);
      out.push_back(p);
    }
  };
  make(pert.noise);
  make(pert.disturbance);
  auto [bv, l1] = perturbation_norms(pert, horizon);
  if (bv > 0 && noise_bv >= 0)
    for (auto& p : pert.noise) p.value *= noise_bv / bv;
  if (l1 > 0 && disturbance_l1 >= 0)
    for (auto& p : pert.disturbance) p.value *= disturbance_l1 / l1;
  return pert;
}

namespace {

// Integrates the perturbed field over one interval under a frozen control.
Vec advance(const ControlSystem& sys, const Vec& u, const Vec& d, const Vec& x, double h) {
  auto field = [&](const Vec& z) {
    Vec v = sys.f(z, u);
    if (d.size() > 0) v += d;
    return v;
  };
  return rk4_step(field, x, h);
}

}  // namespace

ClosedLoopRun simulate_perturbed(const ControlSystem& sys, const PatchyFeedback& fb,
                                 const Vec& x0, const Region& target, const Perturbation& pert,
                                 const SimConfig& cfg) {
  ClosedLoopRun run;
  run.total_patches = fb.size();
  const Region& S = fb.constraint();

  // time grid: uniform dt joined exactly with the perturbation breakpoints
  std::vector<double> grid;
  int n_steps = std::max(1, static_cast<int>(std::ceil(cfg.t_max / cfg.dt - 1e-12)));
  grid.reserve(n_steps + 8);
  for (int k = 0; k <= n_steps; ++k) grid.push_back(std::min(cfg.t_max, k * cfg.dt));
  for (double b : pert.breakpoints())
    if (b > 0 && b < cfg.t_max) grid.push_back(b);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end(),
                         [](double a, double b) { return std::abs(a - b) < 1e-13; }),
             grid.end());

  auto observe = [&](const Vec& x, double t) {
    Vec z = pert.noise.empty() ? x : Vec(x + pert.noise_at(t));
    return fb.alpha_star(z);
  };
  auto note_state = [&](const Vec& x) {
    run.min_depth = std::min(run.min_depth, S.depth(x));
    run.max_violation = std::max(run.max_violation, S.signed_distance(x));
  };

  Vec x = x0;
  run.trajectory.dt_nominal = cfg.dt;
  run.trajectory.times.push_back(0.0);
  run.trajectory.states.push_back(x);
  note_state(x);

  if (target.distance_to(x) <= cfg.delta) {
    run.status = RunStatus::Reached;
    run.end_time = 0.0;
    return run;
  }
  auto a0 = observe(x, 0.0);
  if (!a0) {
    run.status = target.distance_to(x) <= cfg.delta ? RunStatus::Reached : RunStatus::LeftDomain;
    run.end_time = 0.0;
    return run;
  }
  int active = *a0;
  const double event_tol = cfg.dt * cfg.event_tol_factor;

  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    double t0 = grid[k], t1 = grid[k + 1];
    const Vec d = pert.disturbance.empty() ? Vec() : pert.disturbance_at(t0);
    double t = t0;
    Vec x_cur = x;
    int guard = 0;
    while (t < t1 - 1e-15 && guard++ < 64) {
      double h = t1 - t;
      const Vec& u = sys.controls.at(fb.patch(active).control_index);
      Vec x_next = advance(sys, u, d, x_cur, h);
      auto a_next = observe(x_next, t1);
      if (a_next && *a_next == active) {
        x_cur = x_next;
        t = t1;
        break;
      }
      // bisect the earliest index change within (t, t+h]
      double lo = 0.0, hi = h;
      while (hi - lo > event_tol) {
        double mid = 0.5 * (lo + hi);
        Vec xm = advance(sys, u, d, x_cur, mid);
        auto am = observe(xm, t + mid);
        if (am && *am == active)
          lo = mid;
        else
          hi = mid;
      }
      Vec x_cross = advance(sys, u, d, x_cur, hi);
      auto a_cross = observe(x_cross, t + hi);
      if (a_cross && *a_cross == active) {
        // change detected at t1 only through accumulated error; accept step
        x_cur = x_next;
        t = t1;
        break;
      }
      if (!a_cross) {
        note_state(x_cross);
        run.trajectory.times.push_back(t + hi);
        run.trajectory.states.push_back(x_cross);
        run.trajectory.control_indices.push_back(fb.patch(active).control_index);
        run.patch_log.push_back(active);
        run.status = target.distance_to(x_cross) <= cfg.delta ? RunStatus::Reached
                                                              : RunStatus::LeftDomain;
        run.end_time = t + hi;
        return run;
      }
      if (*a_cross < active && !pert.trivial()) {
        // measurement noise moves the observed point across seams; a
        // decreasing index is legitimate dynamics for the perturbed loop
        run.switches.push_back({t + hi, active, *a_cross});
        active = *a_cross;
        x_cur = x_cross;
        t += hi;
        continue;
      }
      if (*a_cross < active) {
        // discretization near a domain seam: replay at halved substeps until
        // the index path is nondecreasing, then keep the fine path
        bool resolved = false;
        for (int halving = 1; halving <= 10 && !resolved; ++halving) {
          int parts = 1 << halving;
          Vec xs = x_cur;
          int idx = active;
          std::vector<SwitchEvent> fine;
          bool decreasing = false;
          for (int p = 0; p < parts; ++p) {
            const Vec& us = sys.controls.at(fb.patch(idx).control_index);
            Vec xn = advance(sys, us, d, xs, hi / parts);
            double tn = t + hi * (p + 1) / parts;
            auto as = observe(xn, tn);
            if (!as || *as < idx) {
              decreasing = true;
              break;
            }
            if (*as > idx) {
              fine.push_back({tn, idx, *as});
              idx = *as;
            }
            xs = xn;
          }
          if (!decreasing) {
            for (const auto& sw : fine) run.switches.push_back(sw);
            active = idx;
            x_cur = xs;
            t += hi;
            resolved = true;
          }
        }
        if (!resolved) {
          run.status = RunStatus::MonotoneViolation;
          run.end_time = t + hi;
          note_state(x_cross);
          run.trajectory.times.push_back(t + hi);
          run.trajectory.states.push_back(x_cross);
          run.trajectory.control_indices.push_back(fb.patch(active).control_index);
          run.patch_log.push_back(active);
          return run;
        }
        continue;
      }
      run.switches.push_back({t + hi, active, *a_cross});
      active = *a_cross;
      x_cur = x_cross;
      t += hi;
    }
    if (guard >= 64) {
      if (pert.trivial()) {  // runaway within-step switching
        run.status = RunStatus::MonotoneViolation;
        run.end_time = t;
        note_state(x_cur);
        run.trajectory.times.push_back(t);
        run.trajectory.states.push_back(x_cur);
        run.trajectory.control_indices.push_back(fb.patch(active).control_index);
        run.patch_log.push_back(active);
        return run;
      }
      // under noise, finish the step without further event refinement
      const Vec& u = sys.controls.at(fb.patch(active).control_index);
      x_cur = advance(sys, u, d, x_cur, t1 - t);
      auto a_end = observe(x_cur, t1);
      if (a_end && *a_end != active) {
        run.switches.push_back({t1, active, *a_end});
        active = *a_end;
      } else if (!a_end) {
        note_state(x_cur);
        run.trajectory.times.push_back(t1);
        run.trajectory.states.push_back(x_cur);
        run.trajectory.control_indices.push_back(fb.patch(active).control_index);
        run.patch_log.push_back(active);
        run.status = target.distance_to(x_cur) <= cfg.delta ? RunStatus::Reached
                                                            : RunStatus::LeftDomain;
        run.end_time = t1;
        return run;
      }
    }
    x = x_cur;
    note_state(x);
    run.trajectory.times.push_back(t1);
    run.trajectory.states.push_back(x);
    run.trajectory.control_indices.push_back(fb.patch(active).control_index);
    run.patch_log.push_back(active);
    if (target.distance_to(x) <= cfg.delta) {
      run.status = RunStatus::Reached;
      run.end_time = t1;
      return run;
    }
  }
  run.status = RunStatus::BudgetExceeded;
  run.end_time = grid.back();
  return run;
}

ClosedLoopRun simulate_closed_loop(const ControlSystem& sys, const PatchyFeedback& fb,
                                   const Vec& x0, const Region& target, const SimConfig& cfg) {
  return simulate_perturbed(sys, fb, x0, target, Perturbation{}, cfg);
}

bool check_monotone_switching(const ClosedLoopRun& run) {
  int prev_to = -1;
  for (const auto& sw : run.switches) {
    if (sw.to <= sw.from) return false;
    if (prev_to >= 0 && sw.from < prev_to) return false;
    prev_to = sw.to;
  }
  return static_cast<int>(run.switches.size()) <= run.total_patches;
}

DecreaseProbeReport signed_distance_decrease_probe(const ClosedLoopRun& run, const Region& S,
                                                   const PatchyFeedback& fb, double r_tilde) {
  DecreaseProbeReport rep;
  const auto& traj = run.trajectory;
  for (std::size_t k = 0; k + 1 < traj.states.size(); ++k) {
    if (k >= run.patch_log.size()) break;
    int patch_idx = run.patch_log[k];
    if (fb.patch(patch_idx).provenance.rfind("boundary", 0) != 0) continue;
    const Vec& a = traj.states[k];
    const Vec& b = traj.states[k + 1];
    if (S.depth(a) > r_tilde || S.depth(b) > r_tilde) continue;
    bool has_switch = false;
    for (const auto& sw : run.switches)
      if (sw.time > traj.times[k] + 1e-12 && sw.time < traj.times[k + 1] - 1e-12)
        has_switch = true;
    if (has_switch) continue;
    double dt = traj.times[k + 1] - traj.times[k];
    if (dt < 1e-12) continue;
    double rate = (S.signed_distance(b) - S.signed_distance(a)) / dt;
    rep.worst_rate = std::max(rep.worst_rate, rate);
    ++rep.segments_probed;
  }
  return rep;
}

StabilizationSummary verify_stabilization(const std::vector<ClosedLoopRun>& runs, const Region& S,
                                          double tol_bd) {
  StabilizationSummary sum;
  sum.n_runs = static_cast<int>(runs.size());
  for (int i = 0; i < sum.n_runs; ++i) {
    const auto& run = runs[i];
    double violation = run.max_violation;
    bool inside = violation <= tol_bd;
    bool ok = inside && run.status == RunStatus::Reached;
    sum.worst_violation = std::max(sum.worst_violation, violation);
    if (ok) {
      ++sum.n_pass;
      sum.max_reach_time = std::max(sum.max_reach_time, run.end_time);
    } else {
      sum.failed_runs.push_back(i);
    }
  }
  return sum;
}

void write_runs_csv(const std::vector<ClosedLoopRun>& runs, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_runs_csv: cannot open " + path);
  out << "run,t";
  int d = runs.empty() || runs[0].trajectory.states.empty()
              ? 0
              : static_cast<int>(runs[0].trajectory.states[0].size());
  for (int i = 0; i < d; ++i) out << ",x" << i;
  out << ",patch\n";
  out.precision(17);
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const auto& traj = runs[r].trajectory;
    for (std::size_t k = 0; k < traj.states.size(); ++k) {
      out << r << ',' << traj.times[k];
      for (int i = 0; i < d; ++i) out << ',' << traj.states[k][i];
      int patch = k < runs[r].patch_log.size()
                      ? runs[r].patch_log[k]
                      : (runs[r].patch_log.empty() ? 0 : runs[r].patch_log.back());
      out << ',' << patch << '\n';
    }
  }
}

}  // namespace patchkit
