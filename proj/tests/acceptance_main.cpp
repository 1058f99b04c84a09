// Acceptance gate: every criterion below runs at its stated tolerance and
// prints one [PASS]/[FAIL] line; the process exits nonzero if any fail.
//
// Canonical scenario: unit square with the 16-direction compass integrator.
// Secondary scenario: unit disk with the contracting drift field.

#include <chrono>
#include <cmath>
#include <iostream>
#include <numbers>
#include <sstream>
#include <vector>

#include "patchkit/commands.hpp"

using namespace patchkit;

namespace {

int g_failures = 0;

void gate(bool ok, const std::string& label, const std::string& detail) {
  std::cout << (ok ? "[PASS] " : "[FAIL] ") << label << ": " << detail << '\n';
  if (!ok) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Vec v2(double x, double y) {
  Vec v(2);
  v << x, y;
  return v;
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(4);
  os << x;
  return os.str();
}

struct TubeRef {
  Trajectory reference;
  double eps = 0;
  std::vector<Patch> patches;
};

// Groups the assembled tube patches back into per-seed tubes.
std::vector<TubeRef> collect_tubes(const PatchyFeedback& fb) {
  std::vector<TubeRef> tubes;
  std::string current;
  for (const Patch& p : fb.patches()) {
    if (p.provenance.rfind("tube:seed=", 0) != 0) continue;
    std::string seed = p.provenance.substr(0, p.provenance.find(';'));
    if (seed != current) {
      tubes.emplace_back();
      current = seed;
    }
    tubes.back().patches.push_back(p);
  }
  for (TubeRef& t : tubes) {
    for (const Patch& p : t.patches) {
      const auto& dom = std::get<TubeDomain>(p.domain.shape);
      for (std::size_t i = 0; i < dom.knots.size(); ++i) {
        if (!t.reference.times.empty() && dom.times[i] <= t.reference.times.back() + 1e-12)
          continue;
        t.reference.times.push_back(dom.times[i]);
        t.reference.states.push_back(dom.knots[i]);
      }
      if (t.reference.times.empty()) {
        t.reference.times = dom.times;
        t.reference.states = dom.knots;
      }
    }
    const auto& last = std::get<TubeDomain>(t.patches.back().domain.shape);
    t.eps = 2.0 * last.radii.back();
  }
  return tubes;
}

}  // namespace

int main(int argc, char** argv) {
  std::string root = argc > 1 ? argv[1] : PATCHKIT_SOURCE_DIR;
  Scenario square = Scenario::from_file(root + "/scenarios/square.json");
  Scenario disk = Scenario::from_file(root + "/scenarios/disk.json");
  ControlSystem sys = square.build_system();
  const Region& S = square.constraint;

  // --- criterion 1: hypothesis checks on both scenarios -------------------
  {
    auto t0 = std::chrono::steady_clock::now();
    Json rep_sq = run_check(square);
    double el_sq = seconds_since(t0);
    t0 = std::chrono::steady_clock::now();
    Json rep_dk = run_check(disk);
    double el_dk = seconds_since(t0);
    bool ok = rep_sq["certified"].get<bool>() && rep_dk["certified"].get<bool>() &&
              rep_sq["s2_margin"].get<double>() <= -0.9 && el_sq < 5.0 && el_dk < 5.0;
    gate(ok, "criterion 1 (hypotheses)",
         "square margin " + fmt(rep_sq["s2_margin"].get<double>()) + " in " + fmt(el_sq) +
             "s, disk margin " + fmt(rep_dk["s2_margin"].get<double>()) + " in " + fmt(el_dk) +
             "s");
  }

  // --- synthesis (shared by criteria 2-6, 9, 10) --------------------------
  SynthesisOutput synth = run_synthesis(square);
  const PatchyFeedback& fb = synth.feedback;
  gate(synth.ok(), "synthesis (square)",
       std::to_string(fb.size()) + " patches, r~=" + fmt(fb.crown_depth) +
           ", mu=" + fmt(fb.inward_margin));

  // --- criterion 2: invariance + reach on the initial grid ----------------
  std::vector<ClosedLoopRun> runs;
  {
    auto t0 = std::chrono::steady_clock::now();
    SimConfig cfg{square.dt, square.t_max, square.delta, 1e-3};
    for (const Vec& x0 : square.initial_grid())
      runs.push_back(simulate_closed_loop(sys, fb, x0, square.target, cfg));
    double elapsed = seconds_since(t0);
    int reached = 0;
    double worst = -1e300;
    for (const auto& r : runs) {
      if (r.status == RunStatus::Reached && r.end_time <= square.t_max) ++reached;
      worst = std::max(worst, r.max_violation);
    }
    bool ok = reached == static_cast<int>(runs.size()) && worst <= 1e-6 && elapsed < 60.0;
    gate(ok, "criterion 2 (invariance + reach)",
         std::to_string(reached) + "/" + std::to_string(runs.size()) + " reached, worst sdf " +
             fmt(worst) + ", " + fmt(elapsed) + "s");
  }

  // --- criterion 3: monotone switching -------------------------------------
  {
    bool mono = true;
    int max_switches = 0;
    for (const auto& r : runs) {
      mono = mono && check_monotone_switching(r);
      max_switches = std::max(max_switches, static_cast<int>(r.switches.size()));
    }
    gate(mono, "criterion 3 (monotone switching)",
         "max switches " + std::to_string(max_switches) + " of " + std::to_string(fb.size()) +
             " patches");
  }

  // --- criterion 4: inward margins -----------------------------------------
  {
    InwardReport inward = check_inward_sampled(sys, fb, 200, 0xacceull);
    // cone inclusion with the uniform margin wherever a boundary patch acts
    bool cone_ok = true;
    int cone_pts = 0;
    double perim = S.ring_perimeter();
    for (int k = 0; k < 160; ++k) {
      double arc = perim * k / 160;
      for (int j = 0; j <= 5; ++j) {
        double depth = fb.crown_depth * j / 5;
        Vec n = S.ring_outward_normal(arc);
        Vec x = S.ring_point(arc) - depth * n;
        if (!S.contains(x, 1e-9) || S.depth(x) > fb.crown_depth + tol::boundary) continue;
        auto a = fb.alpha_star(x);
        if (!a || fb.patch(*a).provenance.rfind("boundary", 0) != 0) continue;
        Vec vel = sys.f(x, sys.controls[fb.patch(*a).control_index]);
        Region level = S.eroded(S.depth(x));
        if (!level.tangent_cone_contains(x, vel, fb.inward_margin, 1e-6, 1e-6)) cone_ok = false;
        ++cone_pts;
      }
    }
    bool ok = inward.pass && cone_ok && cone_pts > 200;
    gate(ok, "criterion 4 (inward margins)",
         "worst boundary dot " + fmt(inward.worst) + ", cone margin mu=" +
             fmt(fb.inward_margin) + " at " + std::to_string(cone_pts) + " crown points");
  }

  // --- criterion 5: tube fidelity ------------------------------------------
  {
    auto tubes = collect_tubes(fb);
    bool ok = !tubes.empty();
    double worst_dev_excess = -1e300;
    Rng rng(0x70be5ull);
    for (const TubeRef& tube : tubes) {
      PatchyFeedback local(S, tube.patches);
      const auto& first = std::get<TubeDomain>(tube.patches.front().domain.shape);
      const double T = tube.reference.times.back();
      int tracked = 0, attempts = 0;
      while (tracked < 50 && attempts++ < 200) {
        std::size_t ki = rng.next_u64() % first.knots.size();
        Vec y0 = first.knots[ki] + 0.8 * first.radii[ki] * rng.in_ball(2);
        if (!local.alpha_star(y0)) continue;
        ++tracked;
        double shift = 0, best = 1e300;
        for (std::size_t k = 0; k < tube.reference.states.size(); ++k)
          if ((y0 - tube.reference.states[k]).norm() < best) {
            best = (y0 - tube.reference.states[k]).norm();
            shift = tube.reference.times[k];
          }
        Vec y = y0;
        double t = 0, worst_dev = 0;
        const double dt = 0.005;
        while (t < T + 1.0) {
          auto a = local.alpha_star(y);
          if (!a) break;
          const Vec& u = sys.controls[local.patch(*a).control_index];
          y = rk4_step([&](const Vec& z) { return sys.f(z, u); }, y, dt);
          t += dt;
          worst_dev = std::max(worst_dev, (y - tube.reference.at(std::min(shift + t, T))).norm());
        }
        worst_dev_excess = std::max(
            worst_dev_excess,
            std::max(worst_dev, (y - tube.reference.final()).norm()) - tube.eps);
        if (worst_dev > tube.eps + 1e-6) ok = false;
        if ((y - tube.reference.final()).norm() > tube.eps + 1e-6) ok = false;
      }
      if (tracked < 50) ok = false;
    }
    gate(ok, "criterion 5 (tube fidelity)",
         std::to_string(tubes.size()) + " tubes x 50 starts, worst dev-eps " +
             fmt(worst_dev_excess));
  }

  // --- criterion 6: signed-distance decrease in the crown ------------------
  {
    DecreaseProbeReport probe;
    for (const auto& r : runs) {
      auto rep = signed_distance_decrease_probe(r, S, fb, fb.crown_depth);
      probe.worst_rate = std::max(probe.worst_rate, rep.worst_rate);
      probe.segments_probed += rep.segments_probed;
    }
    bool ok = probe.segments_probed > 0 && probe.worst_rate <= -square.eps_dec / 2 + 0.05;
    gate(ok, "criterion 6 (crown decrease)",
         "worst rate " + fmt(probe.worst_rate) + " over " +
             std::to_string(probe.segments_probed) + " segments (bound " +
             fmt(-square.eps_dec / 2 + 0.05) + ")");
  }

  // --- criterion 7: planner agrees with the exhaustive oracle --------------
  {
    Rng rng(20240);
    int agreements = 0, feasible = 0;
    for (int inst = 0; inst < 20; ++inst) {
      ControlSystem small;
      small.f = [](const Vec&, const Vec& u) { return u; };
      small.state_dim = 2;
      small.lipschitz = 0.0;
      small.growth = 1.0;
      for (int c = 0; c < 5; ++c) small.controls.push_back(rng.unit_vector(2));
      const int depth = 4 + static_cast<int>(rng.next_u64() % 3);
      PlanRequest req;
      req.start = v2(rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8));
      req.margin = 0.05;
      req.target = Region::ball(v2(rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8)), 0.0);
      req.target_tol = rng.uniform(0.08, 0.2);
      req.dwell = 0.25;
      req.horizon = depth * req.dwell + 1e-9;
      req.substeps = 10;
      bool oracle = oracle_bfs(small, S, req, depth);
      auto plan = plan_constrained(small, S, req);
      if (oracle == plan.has_value()) ++agreements;
      if (oracle) ++feasible;
    }
    gate(agreements == 20, "criterion 7 (planner/oracle agreement)",
         std::to_string(agreements) + "/20 agree (" + std::to_string(feasible) + " feasible)");
  }

  // --- criterion 8: Lipschitz extension ------------------------------------
  {
    ControlSystem restricted;
    restricted.f = [](const Vec& x, const Vec&) { return Vec(-x); };
    restricted.controls = {v2(0, 0)};
    restricted.state_dim = 2;
    restricted.lipschitz = 1.0;
    restricted.growth = 1.0;
    restricted.domain = DomainTag::RestrictedToS;

    ControlSystem fine = extend_field(restricted, S, 0.01);
    double probe = fine.f(v2(2, 0), v2(0, 0))[0];

    const double h = 0.02;
    ControlSystem coarse = extend_field(restricted, S, h);
    Rng rng(8);
    double max_ratio = 0.0;
    bool exact = true;
    for (int i = 0; i < 10000; ++i) {
      Vec a = v2(rng.uniform(-2, 2), rng.uniform(-2, 2));
      Vec b = v2(rng.uniform(-2, 2), rng.uniform(-2, 2));
      double d = (a - b).norm();
      if (d < 1e-9) continue;
      Vec diff = coarse.f(a, v2(0, 0)) - coarse.f(b, v2(0, 0));
      max_ratio = std::max(max_ratio, diff.cwiseAbs().maxCoeff() / d);
    }
    Vec gp = v2(-1.0, -1.0);  // a grid point of the sample
    exact = exact && coarse.f(gp, v2(0, 0)) == restricted.f(gp, v2(0, 0));
    bool ok = max_ratio <= restricted.lipschitz + 2 * restricted.lipschitz * h &&
              std::abs(probe) <= 1e-2 && exact;
    gate(ok, "criterion 8 (extension)",
         "ratio " + fmt(max_ratio) + " (bound " +
             fmt(restricted.lipschitz + 2 * restricted.lipschitz * h) + "), corner value " +
             fmt(probe) + ", grid-exact " + (exact ? "yes" : "no"));
  }

  // --- criterion 9: robustness ladder + degenerate perturbation ------------
  {
    SimConfig cfg{square.dt, square.t_max, square.delta, 1e-3};
    auto grid = square.initial_grid();
    const std::vector<double> ladder = {0.16, 0.08, 0.04, 0.02, 0.01};
    std::vector<bool> level_pass(ladder.size(), true);
    for (std::size_t li = 0; li < ladder.size(); ++li) {
      for (int trial = 0; trial < 50; ++trial) {
        const Vec& x0 = grid[trial % grid.size()];
        Perturbation pert = Perturbation::seeded(2, square.t_max, 8, 0.95 * ladder[li],
                                                 0.95 * ladder[li],
                                                 square.seed + 977 * trial + 131071 * li);
        ClosedLoopRun run = simulate_perturbed(sys, fb, x0, square.target, pert, cfg);
        if (!(run.status == RunStatus::Reached && run.max_violation <= square.tol_bd))
          level_pass[li] = false;
      }
    }
    double chi_hat = 0.0;
    for (std::size_t li = 0; li < ladder.size(); ++li) {
      bool below_ok = true;
      for (std::size_t lj = li; lj < ladder.size(); ++lj) below_ok = below_ok && level_pass[lj];
      if (below_ok) {
        chi_hat = ladder[li];
        break;
      }
    }
    ClosedLoopRun a = simulate_closed_loop(sys, fb, grid[7], square.target, cfg);
    ClosedLoopRun b =
        simulate_perturbed(sys, fb, grid[7], square.target, Perturbation::zero(2), cfg);
    bool bitwise = a.trajectory.states.size() == b.trajectory.states.size();
    for (std::size_t k = 0; bitwise && k < a.trajectory.states.size(); ++k)
      bitwise = a.trajectory.states[k] == b.trajectory.states[k];
    gate(chi_hat >= 0.01 && bitwise, "criterion 9 (robustness)",
         "chi_hat " + fmt(chi_hat) + ", zero-perturbation bitwise " + (bitwise ? "yes" : "no"));
  }

  // --- criterion 10: deterministic synthesis -------------------------------
  {
    SynthesisOutput again = run_synthesis(square);
    Json meta1 = synth.report;
    Json meta2 = again.report;
    meta1.erase("elapsed_seconds");
    meta2.erase("elapsed_seconds");
    std::string d1 = feedback_to_json(synth.feedback, meta1).dump();
    std::string d2 = feedback_to_json(again.feedback, meta2).dump();
    gate(d1 == d2, "criterion 10 (determinism)",
         d1 == d2 ? "byte-identical feedback" : "artifacts differ");
  }

  // --- secondary scenario end to end (informational gate) ------------------
  {
    SynthesisOutput dsynth = run_synthesis(disk);
    ControlSystem dsys = disk.build_system();
    SimConfig cfg{disk.dt, disk.t_max, disk.delta, 1e-3};
    int reached = 0, total = 0;
    double worst = -1e300;
    bool mono = true;
    for (const Vec& x0 : disk.initial_grid()) {
      ClosedLoopRun run = simulate_closed_loop(dsys, dsynth.feedback, x0, disk.target, cfg);
      ++total;
      if (run.status == RunStatus::Reached) ++reached;
      worst = std::max(worst, run.max_violation);
      mono = mono && check_monotone_switching(run);
    }
    gate(dsynth.ok() && reached == total && worst <= 1e-6 && mono,
         "secondary scenario (disk)",
         std::to_string(reached) + "/" + std::to_string(total) + " reached, worst sdf " +
             fmt(worst));
  }

  std::cout << (g_failures == 0 ? "ALL CRITERIA PASSED\n"
                                : std::to_string(g_failures) + " CRITERIA FAILED\n");
  return g_failures == 0 ? 0 : 1;
}
