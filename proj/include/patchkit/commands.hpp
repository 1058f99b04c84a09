#pragma once

#include <optional>
#include <string>

#include "patchkit/scenario.hpp"

namespace patchkit {

/// Exit-code contract: 0 success, 1 verification failure, 2 usage/parse
/// error.
struct CommandOptions {
  std::string scenario_path;
  std::string feedback_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<double> dt;
  bool quiet = false;
};

/// Runs the synthesis pipeline on an already-loaded scenario: layered
/// boundary feedback, greedy tube cover of the interior with margin-verified
/// coverage, assembly, and the domain-coverage assertion.
struct SynthesisOutput {
  PatchyFeedback feedback;
  Json report;
  std::vector<Vec> unreachable_seeds;
  std::vector<Vec> uncovered;
  bool ok() const { return unreachable_seeds.empty() && uncovered.empty(); }
};
SynthesisOutput run_synthesis(const Scenario& sc);

Json run_check(const Scenario& sc);

int cmd_check(const CommandOptions& opt);
int cmd_synthesize(const CommandOptions& opt);
int cmd_simulate(const CommandOptions& opt);
int cmd_perturb(const CommandOptions& opt);
int cmd_render(const CommandOptions& opt);

}  // namespace patchkit
