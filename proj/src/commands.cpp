#include "patchkit/commands.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "patchkit/hypotheses.hpp"
#include "patchkit/svg.hpp"

namespace patchkit {

namespace {

namespace fs = std::filesystem;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void write_json(const fs::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << j.dump(2) << '\n';
}

Scenario load_scenario(const CommandOptions& opt) {
  if (opt.scenario_path.empty()) throw std::runtime_error("missing --scenario");
  Scenario sc = Scenario::from_file(opt.scenario_path);
  if (opt.seed) sc.seed = *opt.seed;
  if (opt.dt) sc.dt = *opt.dt;
  return sc;
}

Json vec_json(const Vec& v) {
  Json j = Json::array();
  for (int i = 0; i < v.size(); ++i) j.push_back(v[i]);
  return j;
}

// Samples of a rectangular grid at the requested pitch that lie in S at
// depth >= min_depth and farther than min_target_dist from the target.
std::vector<Vec> grid_samples(const Region& S, const Region& target, double pitch,
                              double min_depth, double min_target_dist) {
  auto [lo, hi] = S.bounding_box();
  std::vector<Vec> out;
  int nx = std::max(2, static_cast<int>((hi[0] - lo[0]) / pitch));
  int ny = std::max(2, static_cast<int>((hi[1] - lo[1]) / pitch));
  for (int i = 0; i <= nx; ++i)
    for (int j = 0; j <= ny; ++j) {
      Vec p(2);
      p << lo[0] + (hi[0] - lo[0]) * i / nx, lo[1] + (hi[1] - lo[1]) * j / ny;
      if (!S.contains(p, 1e-12) || S.depth(p) + 1e-12 < min_depth) continue;
      if (target.distance_to(p) <= min_target_dist) continue;
      out.push_back(p);
    }
  return out;
}

}  // namespace

Json run_check(const Scenario& sc) {
  auto t0 = std::chrono::steady_clock::now();
  ControlSystem sys = sc.build_system();
  Json rep;
  rep["scenario"] = sc.name;

  CertificateConfig cert;
  cert.seed = sc.seed ^ 0x51f0ull;
  auto [s1_ok, witnesses] = check_S1(sc.constraint, sc.n_boundary, cert);
  rep["s1_ok"] = s1_ok;
  Json wit = Json::array();
  for (const auto& w : witnesses)
    wit.push_back({{"point", vec_json(w.point)}, {"reason", w.reason}});
  rep["witness_failures"] = wit;

  double margin = check_S2(sys, sc.constraint, sc.n_boundary);
  rep["s2_margin"] = margin;
  rep["s2_ok"] = margin < 0;

  bool r_o_ok = true;
  try {
    rep["r_o"] = find_r_o(sc.constraint, default_r_grid(sc.constraint));
  } catch (const std::exception& e) {
    rep["r_o_error"] = e.what();
    rep["r_o"] = 0.0;
    r_o_ok = false;
  }

  RegularityReport reg = verify_regularity(sys, 2000, sc.constraint, sc.seed ^ 0x5e6dull);
  rep["regularity"] = {{"max_lipschitz_ratio", reg.max_lipschitz_ratio},
                       {"declared_lipschitz", sys.lipschitz},
                       {"max_growth_ratio", reg.max_growth_ratio},
                       {"declared_growth", sys.growth},
                       {"max_hull_distance", reg.max_hull_distance},
                       {"pairs_sampled", reg.pairs_sampled}};
  bool f12_ok = reg.max_lipschitz_ratio <= sys.lipschitz * (1 + 1e-6) + 1e-9 &&
                reg.max_growth_ratio <= sys.growth * (1 + 1e-6) + 1e-9;
  rep["f12_ok"] = f12_ok;
  rep["target_intersects"] = sc.constraint.signed_distance(
                                 sc.target.is_ball() ? sc.target.as_ball().center
                                                     : sc.target.interior_point()) <=
                             (sc.target.is_ball() ? sc.target.as_ball().radius : 0.0);
  rep["elapsed_seconds"] = seconds_since(t0);
  rep["certified"] = s1_ok && margin < 0 && r_o_ok && f12_ok;
  return rep;
}

int cmd_check(const CommandOptions& opt) {
  Scenario sc;
  try {
    sc = load_scenario(opt);
  } catch (const std::exception& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 2;
  }
  try {
    Json rep = run_check(sc);
    if (!opt.quiet) std::cout << rep.dump(2) << '\n';
    if (!opt.out_dir.empty()) write_json(fs::path(opt.out_dir) / "check_report.json", rep);
    return rep["certified"].get<bool>() ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "check failed: " << e.what() << '\n';
    return 1;
  }
}

SynthesisOutput run_synthesis(const Scenario& sc) {
  auto t0 = std::chrono::steady_clock::now();
  ControlSystem sys = sc.build_system();
  const Region& S = sc.constraint;
  const Region& target = sc.target;
  const double gamma = sc.gamma;

  BoundaryFeedback boundary = boundary_feedback(sys, S, sc.boundary_config());
  const double H = sc.depth_target;

  // Greedy tube cover of the eroded interior. Stage 1 places tubes until
  // plain containment of the pitch grid; stage 2 re-verifies on a finer grid
  // with a coverage margin sized so every remaining gap can seed its own
  // tube (margin-positive samples certify a gap-free union by Lipschitz
  // continuity of the membership margins).
  std::vector<std::vector<Patch>> tube_families;
  std::vector<Vec> unreachable;
  std::vector<const Patch*> placed;  // slabs + tubes so far, for cover tests
  std::vector<Patch> slab_copy = boundary.patches;
  for (const Patch& p : slab_copy) placed.push_back(&p);
  double min_entry_radius = std::numeric_limits<double>::infinity();

  auto covered = [&](const Vec& p, double req) {
    for (const Patch* pt : placed)
      if (pt->bbox_contains(p) && pt->domain.margin(S, p) > req) return true;
    return false;
  };
  // seeds are skipped only when already covered with a fraction of the tube
  // entry width to spare; touching-at-zero tubes leave slivers that cascade
  // into the margin-verified stage
  auto seed_req = [&]() {
    return std::isfinite(min_entry_radius) ? 0.3 * min_entry_radius : 0.0;
  };
  auto add_tube_at = [&](const Vec& seed_pt) -> bool {
    PlanRequest req;
    req.start = seed_pt;
    req.margin = H;
    req.target = target;
    req.target_tol = gamma;
    req.dwell = sc.dwell;
    req.horizon = sc.horizon;
    req.node_budget = sc.node_budget;
    auto plan = plan_constrained(sys, S, req);
    if (!plan) {
      unreachable.push_back(seed_pt);
      return false;
    }
    Trajectory traj = integrate_open_loop(sys, seed_pt, *plan, sc.dwell / 10);
    auto [m_rel, ok] = verify_plan_margin(sys, S, *plan, seed_pt, 0.0);
    (void)ok;
    double m = m_rel;  // min depth along the reference
    double rho_seed = std::min(m, boundary.r_tilde > 0 ? boundary.r_tilde : m);
    double eps = std::min(gamma, 0.75 * (m - rho_seed / 4));
    if (eps <= 0) {
      unreachable.push_back(seed_pt);
      return false;
    }
    TubeConfig tcfg;
    tcfg.radius_growth = sc.tube_growth;
    tcfg.knot_dt = sc.dwell / 5;
    std::vector<Patch> tube = tube_around(sys, traj, *plan, eps, tcfg);
    for (Patch& p : tube) p.cache_bbox(S);
    if (const auto* td = std::get_if<TubeDomain>(&tube.front().domain.shape))
      min_entry_radius = std::min(min_entry_radius, td->radii.front());
    tube_families.push_back(std::move(tube));
    for (const Patch& p : tube_families.back()) placed.push_back(&p);
    return true;
  };

  int tubes_budget = sc.max_tubes;
  // stage 0: seeds along the handoff ring. Every tube converges toward the
  // target, so ring-seeded tubes sweep the whole interior; the greedy skip
  // makes the ring spacing match each tube's entry width.
  if (S.dim() == 2) {
    // the boundary bricks hand trajectories off at their deepest seam; the
    // tube ring sits just below it
    double seam_depth = sc.boundary_style == "wedge"
                            ? H
                            : boundary.n_layers * sc.band_thickness + 1e-9;
    Region ring_region = S.eroded(std::max(H, seam_depth));
    if (!ring_region.is_empty()) {
      double ring_perim = ring_region.ring_perimeter();
      int n_ring = std::max(64, static_cast<int>(ring_perim / 0.01));
      for (int k = 0; k < n_ring; ++k) {
        Vec p = ring_region.ring_point(ring_perim * k / n_ring);
        if (target.distance_to(p) <= sc.delta) continue;
        if (covered(p, seed_req())) continue;
        if (static_cast<int>(tube_families.size()) >= tubes_budget) break;
        add_tube_at(p);
      }
    }
  }
  const int tubes_stage0 = static_cast<int>(tube_families.size());
  // stage 1: containment with the overlap allowance on the pitch grid
  for (const Vec& p : grid_samples(S, target, sc.cover_pitch, H, sc.delta)) {
    if (covered(p, seed_req())) continue;
    if (static_cast<int>(tube_families.size()) >= tubes_budget) break;
    add_tube_at(p);
  }
  const int tubes_stage1 = static_cast<int>(tube_families.size());
  // stage 2: margin-verified coverage on a finer grid; the pitch stays well
  // below the smallest tube entry radius so each gap point can always seed a
  // tube that covers it with margin to spare
  double fine_pitch = sc.cover_pitch;
  if (std::isfinite(min_entry_radius))
    fine_pitch = std::clamp(0.35 * min_entry_radius, 1e-3, sc.cover_pitch);
  const double req = 0.75 * fine_pitch;
  for (int round = 0; round < 4; ++round) {
    bool all_ok = true;
    for (const Vec& p : grid_samples(S, target, fine_pitch, H, sc.delta)) {
      if (covered(p, req)) continue;
      all_ok = false;
      if (static_cast<int>(tube_families.size()) >= tubes_budget) break;
      add_tube_at(p);
    }
    if (all_ok || !unreachable.empty()) break;
  }

  PatchyFeedback fb = assemble_feedback(S, boundary, tube_families, target, gamma);

  // domain-coverage assertion: D must contain S minus the delta-neighborhood
  std::vector<Vec> assert_samples = grid_samples(S, target, sc.cover_pitch, 0.0, sc.delta);
  for (const Vec& p : sc.initial_grid()) assert_samples.push_back(p);
  std::vector<Vec> uncovered = coverage_failures(fb, assert_samples);

  SynthesisOutput out{std::move(fb), Json::object(), std::move(unreachable), std::move(uncovered)};
  int n_tube_patches = out.feedback.size() - boundary.patches.size();
  out.report = {{"scenario", sc.name},
                {"seed", sc.seed},
                {"n_patches", out.feedback.size()},
                {"n_boundary_patches", static_cast<int>(boundary.patches.size())},
                {"n_boundary_anchors", boundary.n_anchors},
                {"n_boundary_layers", boundary.n_layers},
                {"n_tubes", static_cast<int>(tube_families.size())},
                {"n_tubes_ring", tubes_stage0},
                {"n_tubes_stage1", tubes_stage1 - tubes_stage0},
                {"fine_pitch", fine_pitch},
                {"min_entry_radius", min_entry_radius},
                {"n_tube_patches", n_tube_patches},
                {"r_tilde", boundary.r_tilde},
                {"mu", boundary.mu},
                {"depth_target", H},
                {"coverage_samples", static_cast<int>(assert_samples.size())},
                {"uncovered", static_cast<int>(out.uncovered.size())},
                {"unreachable_seeds", static_cast<int>(out.unreachable_seeds.size())},
                {"elapsed_seconds", seconds_since(t0)}};
  return out;
}

int cmd_synthesize(const CommandOptions& opt) {
  Scenario sc;
  try {
    sc = load_scenario(opt);
  } catch (const std::exception& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 2;
  }
  try {
    SynthesisOutput out = run_synthesis(sc);
    if (!opt.quiet) std::cout << out.report.dump(2) << '\n';
    fs::path dir(opt.out_dir.empty() ? "." : opt.out_dir);
    fs::create_directories(dir);
    Json meta = out.report;
    meta.erase("elapsed_seconds");  // keep the feedback artifact byte-reproducible
    Json fj = feedback_to_json(out.feedback, meta);
    fs::path fb_path = opt.feedback_path.empty() ? dir / "feedback.json" : fs::path(opt.feedback_path);
    {
      std::ofstream f(fb_path);
      f << fj.dump(2) << '\n';
    }
    write_json(dir / "synthesis_report.json", out.report);
    if (!out.unreachable_seeds.empty()) {
      std::cerr << "unreachable seeds:\n";
      for (const Vec& p : out.unreachable_seeds) std::cerr << "  " << vec_json(p).dump() << '\n';
      return 1;
    }
    if (!out.uncovered.empty()) {
      std::cerr << "uncovered sample points:\n";
      for (std::size_t i = 0; i < std::min<std::size_t>(out.uncovered.size(), 20); ++i)
        std::cerr << "  " << vec_json(out.uncovered[i]).dump() << '\n';
      return 1;
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "synthesis failed: " << e.what() << '\n';
    return 1;
  }
}

namespace {

PatchyFeedback load_feedback(const CommandOptions& opt) {
  if (opt.feedback_path.empty()) throw std::runtime_error("missing --feedback");
  std::ifstream in(opt.feedback_path);
  if (!in) throw std::runtime_error("cannot open " + opt.feedback_path);
  return feedback_from_json(Json::parse(in));
}

}  // namespace

int cmd_simulate(const CommandOptions& opt) {
  Scenario sc;
  PatchyFeedback* fb_ptr = nullptr;
  std::optional<PatchyFeedback> fb;
  try {
    sc = load_scenario(opt);
    fb.emplace(load_feedback(opt));
    fb_ptr = &*fb;
  } catch (const std::exception& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 2;
  }
  try {
    ControlSystem sys = sc.build_system();
    SimConfig cfg{sc.dt, sc.t_max, sc.delta, 1e-3};
    std::vector<ClosedLoopRun> runs;
    for (const Vec& x0 : sc.initial_grid())
      runs.push_back(simulate_closed_loop(sys, *fb_ptr, x0, sc.target, cfg));
    StabilizationSummary sum = verify_stabilization(runs, sc.constraint, sc.tol_bd);
    bool monotone = true;
    for (const auto& r : runs) monotone = monotone && check_monotone_switching(r);
    DecreaseProbeReport probe;
    for (const auto& r : runs) {
      auto rep = signed_distance_decrease_probe(r, sc.constraint, *fb_ptr, fb_ptr->crown_depth);
      probe.worst_rate = std::max(probe.worst_rate, rep.worst_rate);
      probe.segments_probed += rep.segments_probed;
    }
    fs::path dir(opt.out_dir.empty() ? "." : opt.out_dir);
    fs::create_directories(dir);
    write_runs_csv(runs, (dir / "runs.csv").string());
    Json summary = {{"scenario", sc.name},
                    {"runs", sum.n_runs},
                    {"passed", sum.n_pass},
                    {"max_reach_time", sum.max_reach_time},
                    {"worst_violation", sum.worst_violation},
                    {"monotone_switching", monotone},
                    {"crown_worst_rate", probe.segments_probed ? Json(probe.worst_rate) : Json()},
                    {"crown_segments", probe.segments_probed}};
    write_json(dir / "summary.json", summary);
    if (!opt.quiet) std::cout << summary.dump(2) << '\n';
    return (sum.all_pass() && monotone) ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "simulate failed: " << e.what() << '\n';
    return 1;
  }
}

int cmd_perturb(const CommandOptions& opt) {
  Scenario sc;
  std::optional<PatchyFeedback> fb;
  try {
    sc = load_scenario(opt);
    fb.emplace(load_feedback(opt));
  } catch (const std::exception& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 2;
  }
  try {
    ControlSystem sys = sc.build_system();
    SimConfig cfg{sc.dt, sc.t_max, sc.delta, 1e-3};
    std::vector<Vec> grid = sc.initial_grid();
    const std::vector<double> ladder = {0.16, 0.08, 0.04, 0.02, 0.01};
    Json table = Json::array();
    std::vector<bool> level_pass(ladder.size(), true);
    for (std::size_t li = 0; li < ladder.size(); ++li) {
      double level = ladder[li];
      int pass = 0;
      const int n_trials = 50;
      for (int trial = 0; trial < n_trials; ++trial) {
        const Vec& x0 = grid[trial % grid.size()];
        Perturbation pert =
            Perturbation::seeded(sc.constraint.dim(), sc.t_max, 8, 0.95 * level, 0.95 * level,
                                 sc.seed + 977 * trial + 131071 * li);
        ClosedLoopRun run = simulate_perturbed(sys, *fb, x0, sc.target, pert, cfg);
        bool ok = run.status == RunStatus::Reached && run.max_violation <= sc.tol_bd;
        if (ok) ++pass;
      }
      level_pass[li] = pass == n_trials;
      table.push_back({{"level", level}, {"passed", pass}, {"trials", n_trials}});
    }
    double chi_hat = 0.0;
    for (std::size_t li = 0; li < ladder.size(); ++li) {  // largest level first
      bool below_ok = true;
      for (std::size_t lj = li; lj < ladder.size(); ++lj) below_ok = below_ok && level_pass[lj];
      if (below_ok) {
        chi_hat = ladder[li];
        break;
      }
    }
    Json summary = {{"scenario", sc.name}, {"ladder", table}, {"chi_hat", chi_hat}};
    fs::path dir(opt.out_dir.empty() ? "." : opt.out_dir);
    fs::create_directories(dir);
    write_json(dir / "perturb_report.json", summary);
    if (!opt.quiet) std::cout << summary.dump(2) << '\n';
    return chi_hat > 0 ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "perturb failed: " << e.what() << '\n';
    return 1;
  }
}

int cmd_render(const CommandOptions& opt) {
  Scenario sc;
  std::optional<PatchyFeedback> fb;
  try {
    sc = load_scenario(opt);
    fb.emplace(load_feedback(opt));
  } catch (const std::exception& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 2;
  }
  if (sc.constraint.dim() != 2) {
    std::cerr << "render supports d=2 only\n";
    return 2;
  }
  try {
    ControlSystem sys = sc.build_system();
    SimConfig cfg{sc.dt, sc.t_max, sc.delta, 1e-3};
    std::vector<ClosedLoopRun> runs;
    std::vector<Vec> grid = sc.initial_grid();
    for (std::size_t i = 0; i < grid.size(); i += std::max<std::size_t>(1, grid.size() / 16))
      runs.push_back(simulate_closed_loop(sys, *fb, grid[i], sc.target, cfg));
    fs::path dir(opt.out_dir.empty() ? "." : opt.out_dir);
    fs::create_directories(dir);
    render_scene_svg((dir / "scene.svg").string(), sc.constraint, sc.target, sc.delta, *fb, runs);
    if (!opt.quiet) std::cout << "wrote " << (dir / "scene.svg").string() << '\n';
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "render failed: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace patchkit
