#include <CLI11.hpp>

#include "patchkit/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"patchy feedback synthesis and verification toolkit"};
  app.require_subcommand(1);

  patchkit::CommandOptions opt;
  std::uint64_t seed = 0;
  double dt = 0;

  auto add_common = [&](CLI::App* cmd, bool needs_feedback) {
    cmd->add_option("--scenario", opt.scenario_path, "scenario JSON file")->required();
    if (needs_feedback)
      cmd->add_option("--feedback", opt.feedback_path, "feedback JSON file")->required();
    else
      cmd->add_option("--feedback", opt.feedback_path, "feedback JSON output path");
    cmd->add_option("--out", opt.out_dir, "output directory");
    cmd->add_option("--seed", seed, "override the scenario RNG seed")
        ->each([&](const std::string&) { opt.seed = seed; });
    cmd->add_option("--dt", dt, "override the simulation step")
        ->each([&](const std::string&) { opt.dt = dt; });
    cmd->add_flag("--quiet", opt.quiet, "suppress stdout reports");
  };

  add_common(app.add_subcommand("check", "verify the constraint/system hypotheses"), false);
  add_common(app.add_subcommand("synthesize", "build the patchy feedback"), false);
  add_common(app.add_subcommand("simulate", "closed-loop runs on the initial grid"), true);
  add_common(app.add_subcommand("perturb", "robustness sweep over a perturbation ladder"), true);
  add_common(app.add_subcommand("render", "SVG scene with patches and trajectories"), true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;  // usage errors map to exit 2
  }

  if (app.got_subcommand("check")) return patchkit::cmd_check(opt);
  if (app.got_subcommand("synthesize")) return patchkit::cmd_synthesize(opt);
  if (app.got_subcommand("simulate")) return patchkit::cmd_simulate(opt);
  if (app.got_subcommand("perturb")) return patchkit::cmd_perturb(opt);
  if (app.got_subcommand("render")) return patchkit::cmd_render(opt);
  return 2;
}
