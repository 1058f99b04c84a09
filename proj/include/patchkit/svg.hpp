#pragma once

#include <string>
#include <vector>

#include "patchkit/simulator.hpp"

namespace patchkit {

/// 2-D scene: constraint set, its crown-depth erosion, the delta-target
/// neighborhood, patch outlines and trajectories colored by active patch.
void render_scene_svg(const std::string& path, const Region& S, const Region& target,
                      double delta, const PatchyFeedback& fb,
                      const std::vector<ClosedLoopRun>& runs);

}  // namespace patchkit
